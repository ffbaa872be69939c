#include "activessf/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "activessf/errors.hpp"
#include "activessf/file_util.hpp"
#include "activessf/image_io.hpp"
#include "activessf/kmeans.hpp"

namespace activessf::synth {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return unit_uniform(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + std::min(hi - lo, static_cast<int>(uniform() * (hi - lo + 1)));
  }
  // Box-Muller; spare value discarded to keep the stream simple.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.class_count == 0) throw std::invalid_argument("synthetic spec needs at least one class");
  if (!spec.sizes.empty() && spec.sizes.size() != spec.class_count)
    throw std::invalid_argument("explicit sizes must list one entry per class");
  if (std::ranges::any_of(spec.sizes, [](std::size_t s) { return s == 0; }))
    throw std::invalid_argument("class sizes must be at least 1");
  if (spec.sizes.empty() && spec.max_class_size == 0) throw std::invalid_argument("max class size must be at least 1");
  if (!(spec.separation > 0.0)) throw std::invalid_argument("class separation must be positive");
  if (!(spec.spread >= 0.0)) throw std::invalid_argument("within-class spread must be non-negative");
  if (!(spec.distractor_fraction >= 0.0 && spec.distractor_fraction < 1.0))
    throw std::invalid_argument("distractor fraction must lie in [0, 1)");
  if (!(spec.candidate_ratio > 0.0)) throw std::invalid_argument("candidate ratio must be positive");
  if (spec.dim < spec.class_count)
    throw std::invalid_argument("feature dim " + std::to_string(spec.dim) + " cannot hold " +
                                std::to_string(spec.class_count) + " equidistant class centers");
}

std::vector<std::size_t> class_sizes(const SyntheticSpec& spec) {
  if (!spec.sizes.empty()) return spec.sizes;
  std::vector<std::size_t> out(spec.class_count);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double s = static_cast<double>(spec.max_class_size) * std::pow(static_cast<double>(c + 1), -spec.exponent);
    out[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(s)));
  }
  return out;
}

SyntheticData generate(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  SyntheticData out{FeatureSet(spec.dim, FeatureSource::external), FeatureSet(spec.dim, FeatureSource::external), {},
                    class_sizes(spec)};

  // Centers on scaled basis vectors: every pair sits exactly `separation` apart.
  const double axis = spec.separation / std::numbers::sqrt2;
  auto sample = [&](std::size_t c) {
    std::vector<double> v(spec.dim);
    for (auto& x : v) x = spec.spread * rng.normal();
    v[c] += axis;
    return v;
  };

  std::size_t true_candidates = 0;
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    for (std::size_t i = 0; i < out.sizes[c]; ++i)
      out.labeled.add({"L" + std::to_string(c) + "_" + std::to_string(i), sample(c), static_cast<int>(c)});
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(static_cast<double>(out.sizes[c]) * spec.candidate_ratio)));
    for (std::size_t i = 0; i < n; ++i) {
      std::string id = "C" + std::to_string(c) + "_" + std::to_string(i);
      out.truth.emplace(id, static_cast<int>(c));
      out.candidates.add({std::move(id), sample(c), std::nullopt});
    }
    true_candidates += n;
  }

  // Distractors on a sphere of radius 3 * separation; at least
  // (3 - 1/sqrt2) * separation from every center.
  const auto distractors = static_cast<std::size_t>(std::lround(
      spec.distractor_fraction / (1.0 - spec.distractor_fraction) * static_cast<double>(true_candidates)));
  for (std::size_t i = 0; i < distractors; ++i) {
    std::vector<double> v(spec.dim);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : v) x *= 3.0 * spec.separation / norm;
    std::string id = "D_" + std::to_string(i);
    out.truth.emplace(id, -1);
    out.candidates.add({std::move(id), std::move(v), std::nullopt});
  }
  return out;
}

SelectionMetrics evaluate(const SelectionManifest& manifest, const GroundTruth& truth,
                          const std::vector<std::size_t>& sizes) {
  const std::size_t classes = sizes.size();
  std::vector<std::size_t> total(classes, 0), hit(classes, 0);
  for (const auto& [id, c] : truth)
    if (c >= 0 && static_cast<std::size_t>(c) < classes) ++total[c];

  SelectionMetrics m;
  for (const auto& d : manifest.decisions) {
    const auto it = truth.find(d.id);
    if (it == truth.end()) throw DataError("manifest id '" + d.id + "' has no ground truth");
    if (!d.accepted) continue;
    ++m.accepted;
    if (it->second < 0)
      ++m.accepted_distractors;
    else
      ++hit[it->second];
  }

  auto rate = [&](std::size_t num, std::size_t den) {
    if (den == 0) {
      m.undefined_rate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };

  m.class_recall.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) m.class_recall[c] = rate(hit[c], total[c]);
  m.contamination = rate(m.accepted_distractors, m.accepted);

  std::vector<std::size_t> order(classes);
  for (std::size_t c = 0; c < classes; ++c) order[c] = c;
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
  const std::size_t tercile = std::max<std::size_t>(1, classes / 3);
  m.rare_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(tercile, classes)));
  m.common_classes.assign(order.end() - static_cast<std::ptrdiff_t>(std::min(tercile, classes)), order.end());
  std::ranges::sort(m.rare_classes);
  std::ranges::sort(m.common_classes);

  auto pooled = [&](const std::vector<std::size_t>& group) {
    std::size_t num = 0, den = 0;
    for (auto c : group) {
      num += hit[c];
      den += total[c];
    }
    return rate(num, den);
  };
  m.rare_recall = pooled(m.rare_classes);
  m.common_recall = pooled(m.common_classes);
  return m;
}

Policy parse_policy(const std::string& name) {
  if (name == "adaptive") return Policy::adaptive;
  if (name == "fixed") return Policy::fixed_mean;
  if (name == "fixed-lb") return Policy::fixed_lower;
  throw std::invalid_argument("unknown policy '" + name + "' (expected adaptive, fixed or fixed-lb)");
}

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::adaptive: return "adaptive";
    case Policy::fixed_mean: return "fixed";
    case Policy::fixed_lower: return "fixed-lb";
  }
  return "?";
}

BenchResult run_bench(const SyntheticData& data, Policy policy, double alpha, std::size_t prototypes,
                      std::uint64_t fit_seed) {
  const std::size_t k = prototypes == 0 ? data.sizes.size() : prototypes;
  const PrototypeModel model = fit_prototypes(data.labeled, {.k = k, .seed = fit_seed});
  BenchResult r;
  switch (policy) {
    case Policy::adaptive: r.table = compute_thresholds(model, alpha); break;
    case Policy::fixed_mean: r.table = fixed_thresholds(model, mean_threshold(compute_thresholds(model, alpha))); break;
    case Policy::fixed_lower: r.table = lower_bound_thresholds(model); break;
  }
  r.manifest = select_samples(data.candidates, model, r.table);
  r.metrics = evaluate(r.manifest, data.truth, data.sizes);
  return r;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
    throw ConfigError("bad value '" + text + "' for spec key '" + key + "'");
  return v;
}

}  // namespace

SyntheticSpec parse_spec(const std::string& text) {
  SyntheticSpec spec;
  std::istringstream in(text);
  std::string line;
  bool explicit_classes = false;
  while (std::getline(in, line)) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("spec line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "classes") {
      spec.class_count = parse_value<std::size_t>(key, val);
      explicit_classes = true;
    } else if (key == "sizes") {
      spec.sizes.clear();
      std::istringstream parts(val);
      for (std::string p; std::getline(parts, p, ',');) spec.sizes.push_back(parse_value<std::size_t>(key, trim(p)));
    } else if (key == "max_size") {
      spec.max_class_size = parse_value<std::size_t>(key, val);
    } else if (key == "exponent") {
      spec.exponent = parse_value<double>(key, val);
    } else if (key == "separation") {
      spec.separation = parse_value<double>(key, val);
    } else if (key == "spread") {
      spec.spread = parse_value<double>(key, val);
    } else if (key == "distractor_fraction") {
      spec.distractor_fraction = parse_value<double>(key, val);
    } else if (key == "candidate_ratio") {
      spec.candidate_ratio = parse_value<double>(key, val);
    } else if (key == "dim") {
      spec.dim = parse_value<std::size_t>(key, val);
    } else if (key == "seed") {
      spec.seed = parse_value<std::uint64_t>(key, val);
    } else {
      throw ConfigError("unknown spec key '" + key + "'");
    }
  }
  if (!spec.sizes.empty() && !explicit_classes) spec.class_count = spec.sizes.size();
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

std::string format_spec(const SyntheticSpec& spec) {
  std::ostringstream os;
  os << "classes=" << spec.class_count << '\n';
  os << "sizes=";
  const auto sizes = class_sizes(spec);
  for (std::size_t i = 0; i < sizes.size(); ++i) os << (i ? "," : "") << sizes[i];
  os << '\n';
  os << "separation=" << format_double(spec.separation) << '\n';
  os << "spread=" << format_double(spec.spread) << '\n';
  os << "distractor_fraction=" << format_double(spec.distractor_fraction) << '\n';
  os << "candidate_ratio=" << format_double(spec.candidate_ratio) << '\n';
  os << "dim=" << spec.dim << '\n';
  os << "seed=" << spec.seed << '\n';
  return os.str();
}

std::string format_metrics(const SelectionMetrics& m, const SyntheticSpec& spec, Policy policy, double alpha) {
  std::ostringstream os;
  os << "# activessf bench report v1\n";
  os << "# policy=" << policy_name(policy) << '\n';
  os << "# alpha=" << format_double(alpha) << '\n';
  std::istringstream echo(format_spec(spec));
  for (std::string line; std::getline(echo, line);) os << "# " << line << '\n';
  os << "metric,value\n";
  os << "accepted," << m.accepted << '\n';
  os << "accepted_distractors," << m.accepted_distractors << '\n';
  os << "contamination," << format_double(m.contamination) << '\n';
  os << "rare_recall," << format_double(m.rare_recall) << '\n';
  os << "common_recall," << format_double(m.common_recall) << '\n';
  os << "undefined_rate," << (m.undefined_rate ? 1 : 0) << '\n';
  os << "class,recall\n";
  for (std::size_t c = 0; c < m.class_recall.size(); ++c) os << c << ',' << format_double(m.class_recall[c]) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

constexpr Rgb kBackground{236, 226, 232};
constexpr Rgb kRedCell{225, 150, 165};

struct CellPalette {
  Rgb cytoplasm;
  Rgb nucleus;
  double nucleus_scale;
};

// Channel values sit mid-bin (8 mod 16) so classes do not straddle histogram
// bin edges under pixel noise. Nucleus red and green, the background and the
// red cells fix every channel's extremes, so min-max normalization maps all
// slides the same way.
CellPalette palette(int cls) {
  static constexpr Rgb cyto[kFixtureClasses] = {
      {104, 88, 216}, {136, 72, 216}, {88, 104, 232}, {152, 104, 216}, {104, 72, 200}, {120, 120, 232},
      {72, 88, 200},  {152, 88, 232}, {104, 120, 216}, {136, 72, 232}, {88, 72, 216}};
  const auto c = static_cast<std::size_t>(cls) % kFixtureClasses;
  const Rgb nucleus{48, 40, static_cast<std::uint8_t>(190 + 2 * (c % 4))};
  return {cyto[c], nucleus, 0.35 + 0.04 * static_cast<double>(c)};
}

Rgb jitter(Rgb c, Rng& rng) {
  auto ch = [&](std::uint8_t v) { return static_cast<std::uint8_t>(std::clamp(v + rng.integer(-4, 4), 0, 255)); };
  return {ch(c.r), ch(c.g), ch(c.b)};
}

bool in_ellipse(double x, double y, const Box& b) {
  const double a = b.w / 2.0, c = b.h / 2.0;
  const double dx = (x + 0.5 - (b.x + a)) / a;
  const double dy = (y + 0.5 - (b.y + c)) / c;
  return dx * dx + dy * dy <= 1.0;
}

enum class Shape { cell, small_cell, ring, streak, red_cell };

struct Placed {
  Shape shape;
  Box box;
  int cls = 0;
};

// Paints the ideal colour map; noise is added once at the end.
void paint(std::vector<Rgb>& canvas, int width, const Placed& p) {
  const CellPalette pal = palette(p.cls);
  const Box& b = p.box;
  Box nucleus = b;
  nucleus.w = std::max(4, static_cast<int>(b.w * pal.nucleus_scale));
  nucleus.h = std::max(4, static_cast<int>(b.h * pal.nucleus_scale));
  nucleus.x = b.x + (b.w - nucleus.w) / 2;
  nucleus.y = b.y + (b.h - nucleus.h) / 2;
  Box inner{b.x + 7, b.y + 7, b.w - 14, b.h - 14};

  for (int y = b.y; y < b.y + b.h; ++y)
    for (int x = b.x; x < b.x + b.w; ++x) {
      Rgb* px = &canvas[static_cast<std::size_t>(y) * width + x];
      switch (p.shape) {
        case Shape::streak: *px = pal.cytoplasm; break;
        case Shape::red_cell:
          if (in_ellipse(x, y, b)) *px = kRedCell;
          break;
        case Shape::ring:
          if (in_ellipse(x, y, b) && !in_ellipse(x, y, inner)) *px = pal.cytoplasm;
          break;
        case Shape::cell:
        case Shape::small_cell:
          if (in_ellipse(x, y, nucleus))
            *px = pal.nucleus;
          else if (in_ellipse(x, y, b))
            *px = pal.cytoplasm;
          break;
      }
    }
}

bool overlaps(const Box& a, const Box& b, int margin) {
  return a.x < b.x + b.w + margin && b.x < a.x + a.w + margin && a.y < b.y + b.h + margin && b.y < a.y + a.h + margin;
}

// Skewed class draw: class c has weight (c + 1)^-1.2.
int draw_class(Rng& rng) {
  double weights[kFixtureClasses], total = 0.0;
  for (std::size_t c = 0; c < kFixtureClasses; ++c) total += weights[c] = std::pow(static_cast<double>(c + 1), -1.2);
  double t = rng.uniform() * total;
  for (std::size_t c = 0; c < kFixtureClasses; ++c) {
    if (t < weights[c]) return static_cast<int>(c);
    t -= weights[c];
  }
  return static_cast<int>(kFixtureClasses - 1);
}

}  // namespace

std::vector<SyntheticSlide> generate_slides(const SlideCorpusSpec& spec) {
  if (spec.width < 160 || spec.height < 160) throw std::invalid_argument("synthetic slides need at least 160x160");
  const std::size_t blank = spec.image_count / 5;
  const std::size_t decoy_only = spec.image_count / 5;
  const std::size_t carriers = spec.image_count - blank - decoy_only;
  if (spec.valid_cells > 0 && carriers == 0) throw std::invalid_argument("no slides left to carry cells");
  if (carriers > 0 && spec.valid_cells > 2 * carriers) throw std::invalid_argument("at most two valid cells per slide");

  Rng rng(spec.seed);
  std::vector<SyntheticSlide> out;
  out.reserve(spec.image_count);
  for (std::size_t i = 0; i < spec.image_count; ++i) {
    std::size_t cells = 0;
    bool decoys = true;
    if (i < carriers) {
      cells = spec.valid_cells / carriers + (i < spec.valid_cells % carriers ? 1 : 0);
    } else if (i >= carriers + decoy_only) {
      decoys = false;
    }

    std::vector<Placed> placed;
    auto place = [&](Shape shape, int w, int h, int cls) {
      for (int attempt = 0; attempt < 2000; ++attempt) {
        const Box b{rng.integer(2, spec.width - w - 2), rng.integer(2, spec.height - h - 2), w, h};
        if (std::ranges::none_of(placed, [&](const Placed& p) { return overlaps(p.box, b, 8); })) {
          placed.push_back({shape, b, cls});
          return true;
        }
      }
      return false;
    };

    std::string number = std::to_string(i);
    number.insert(0, number.size() < 3 ? 3 - number.size() : 0, '0');
    SyntheticSlide slide{"slide_" + number, RasterImage(spec.width, spec.height), {}, {},
                         !decoys && cells == 0};
    for (int layout = 0; slide.valid_cells.size() < cells; ++layout) {
      if (layout == 100) throw std::runtime_error("could not place a synthetic cell");
      placed.clear();
      slide.valid_cells.clear();
      slide.cell_classes.clear();
      for (std::size_t c = 0; c < cells; ++c) {
        const int cls = draw_class(rng);
        if (!place(Shape::cell, rng.integer(80, 108), rng.integer(80, 108), cls)) break;
        slide.valid_cells.push_back(placed.back().box);
        slide.cell_classes.push_back(cls);
      }
    }
    if (decoys) {
      const int n = rng.integer(1, 3);
      for (int d = 0; d < n; ++d) {
        const int kind = rng.integer(0, 2);
        const int cls = draw_class(rng);
        if (kind == 0) {
          const int s = rng.integer(28, 56);
          place(Shape::small_cell, s, s + rng.integer(-4, 4), cls);
        } else if (kind == 1) {
          place(Shape::ring, rng.integer(84, 104), rng.integer(84, 104), cls);
        } else {
          place(Shape::streak, rng.integer(90, 110), rng.integer(18, 30), cls);
        }
      }
    }
    const int reds = rng.integer(3, 6);
    for (int r = 0; r < reds; ++r) {
      const int s = rng.integer(24, 36);
      place(Shape::red_cell, s, s, 0);
    }

    std::vector<Rgb> canvas(static_cast<std::size_t>(spec.width) * spec.height, kBackground);
    for (const auto& p : placed) paint(canvas, spec.width, p);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x)
        slide.image.set_pixel(x, y, jitter(canvas[static_cast<std::size_t>(y) * spec.width + x], rng));
    out.push_back(std::move(slide));
  }
  return out;
}

std::vector<LabeledCrop> generate_labeled_crops(std::size_t per_class, std::uint64_t seed) {
  return generate_labeled_crops(std::vector<std::size_t>(kFixtureClasses, per_class), seed);
}

std::vector<std::size_t> fixture_label_counts(std::size_t largest) {
  std::vector<std::size_t> counts(kFixtureClasses);
  for (std::size_t c = 0; c < kFixtureClasses; ++c)
    counts[c] = std::max<std::size_t>(
        4, static_cast<std::size_t>(std::lround(static_cast<double>(largest) * std::pow(c + 1.0, -0.9))));
  return counts;
}

std::vector<LabeledCrop> generate_labeled_crops(const std::vector<std::size_t>& counts, std::uint64_t seed) {
  if (counts.size() > kFixtureClasses) throw std::invalid_argument("too many fixture classes");
  Rng rng(seed);
  std::vector<LabeledCrop> out;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (std::size_t i = 0; i < counts[c]; ++i) {
      // A small field with the cell and a few red cells, normalized like a
      // slide and cropped to the cell.
      const int w = rng.integer(80, 100), h = rng.integer(80, 100);
      constexpr int kField = 160;
      std::vector<Rgb> canvas(static_cast<std::size_t>(kField) * kField, kBackground);
      const Box cell{rng.integer(2, kField - w - 40), rng.integer(2, kField - h - 2), w, h};
      paint(canvas, kField, {Shape::cell, cell, static_cast<int>(c)});
      for (int r = 0; r < 3; ++r)
        paint(canvas, kField, {Shape::red_cell, {kField - 34, 4 + 50 * r, 30, 30}, 0});
      RasterImage field(kField, kField);
      for (int y = 0; y < kField; ++y)
        for (int x = 0; x < kField; ++x)
          field.set_pixel(x, y, jitter(canvas[static_cast<std::size_t>(y) * kField + x], rng));
      RasterImage img = normalize_image(field).crop(cell);
      out.push_back({"mk_c" + std::to_string(c) + "_" + std::to_string(i), static_cast<int>(c), std::move(img)});
    }
  return out;
}

void write_fixture_corpus(const std::filesystem::path& root, const SlideCorpusSpec& slides,
                          std::size_t largest_labeled_class) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "unlabeled");
  fs::create_directories(root / "labeled");
  std::ostringstream truth;
  truth << "image_id,x,y,w,h,class\n";
  for (const auto& s : generate_slides(slides)) {
    atomic_write(root / "unlabeled" / (s.id + ".png"), encode_png(s.image));
    for (std::size_t c = 0; c < s.valid_cells.size(); ++c) {
      const Box& b = s.valid_cells[c];
      truth << s.id << ',' << b.x << ',' << b.y << ',' << b.w << ',' << b.h << ',' << s.cell_classes[c] << '\n';
    }
  }
  atomic_write(root / "truth.csv", truth.str());

  std::ostringstream labels;
  labels << "id,class_index\n";
  for (const auto& crop : generate_labeled_crops(fixture_label_counts(largest_labeled_class), slides.seed + 1)) {
    atomic_write(root / "labeled" / (crop.id + ".png"), encode_png(crop.image));
    labels << crop.id << ',' << crop.label << '\n';
  }
  atomic_write(root / "labels.csv", labels.str());
}

}  // namespace activessf::synth
