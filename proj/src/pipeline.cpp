#include "activessf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "activessf/errors.hpp"
#include "activessf/features.hpp"
#include "activessf/file_util.hpp"
#include "activessf/image_io.hpp"
#include "activessf/parallel.hpp"

namespace activessf {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
    throw ConfigError("bad value '" + text + "' for '" + key + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError("bad boolean '" + text + "' for '" + key + "'");
}

const char* detect_name(DetectSource d) { return d == DetectSource::quantized ? "quantized" : "smoothed"; }

const char* cleanup_name(MaskCleanup m) {
  switch (m) {
    case MaskCleanup::none: return "none";
    case MaskCleanup::open: return "open";
    case MaskCleanup::close: return "close";
  }
  return "none";
}

std::string join_echo(const ConfigEcho& echo) {
  std::string out;
  for (const auto& [k, v] : echo) out += "# " + k + "=" + v + "\n";
  return out;
}

class StageClock {
 public:
  explicit StageClock(std::string stage) : stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

  StageTiming finish(const fs::path& out_dir) const {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    atomic_write(out_dir / (stage_ + "_timing.txt"), stage_ + "_seconds=" + format_double(s) + "\n");
    return {stage_, s};
  }

 private:
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

void require_dir(const fs::path& dir, const char* what) {
  if (dir.empty()) throw ConfigError(std::string(what) + " directory is not set");
  if (!fs::is_directory(dir)) throw ConfigError(std::string(what) + " directory " + dir.string() + " does not exist");
}

void require_out(const PipelineConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("output directory is not set");
  fs::create_directories(config.out_dir);
}

fs::path find_image(const fs::path& dir, const std::string& id) {
  for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG"}) {
    const fs::path p = dir / (id + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return {};
}

}  // namespace

void validate(const PipelineConfig& c) {
  if (c.kernel.size < 1 || c.kernel.size % 2 == 0) throw ConfigError("kernel size must be odd and positive");
  if (!(c.kernel.sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (c.quant_k1 == 0 || c.quant_k2 == 0 || c.quant_k2 > c.quant_k1)
    throw ConfigError("quantization needs 1 <= quant-k2 <= quant-k1");
  if (c.min_side < 1) throw ConfigError("min-side must be at least 1");
  if (!(c.fill_rate >= 0.0 && c.fill_rate <= 1.0)) throw ConfigError("fill-rate must lie in [0, 1]");
  if (c.prototypes == 0) throw ConfigError("prototype count must be at least 1");
  if (c.max_iters == 0) throw ConfigError("max-iters must be at least 1");
  if (!(c.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(c.min_radius >= 0.0)) throw ConfigError("min-radius must be non-negative");
}

ConfigEcho filter_echo(const PipelineConfig& c) {
  return {{"version", kToolVersion},
          {"unlabeled", c.unlabeled_dir.string()},
          {"kernel_size", std::to_string(c.kernel.size)},
          {"sigma", format_double(c.kernel.sigma)},
          {"quant_k1", std::to_string(c.quant_k1)},
          {"quant_k2", std::to_string(c.quant_k2)},
          {"quant_fit_stride", std::to_string(c.quant_fit_stride)},
          {"purple_range", format_hsv_range(c.purple)},
          {"blue_range", format_hsv_range(c.blue)},
          {"min_side", std::to_string(c.min_side)},
          {"fill_rate", format_double(c.fill_rate)},
          {"connectivity", std::to_string(static_cast<int>(c.connectivity))},
          {"detect_on", detect_name(c.detect_on)},
          {"cleanup", cleanup_name(c.cleanup)},
          {"seed", std::to_string(c.seed)}};
}

ConfigEcho prototype_echo(const PipelineConfig& c) {
  ConfigEcho e{{"version", kToolVersion}};
  if (!c.labeled_features.empty()) {
    e.emplace_back("labeled_features", c.labeled_features.string());
  } else {
    e.emplace_back("labeled", c.labeled_dir.string());
    e.emplace_back("labels", c.labels_file.string());
    e.emplace_back("filter_labeled", c.filter_labeled ? "true" : "false");
    if (c.filter_labeled) {
      const ConfigEcho f = filter_echo(c);
      e.insert(e.end(), f.begin() + 2, f.end());
    }
  }
  e.emplace_back("prototypes", std::to_string(c.prototypes));
  e.emplace_back("max_iters", std::to_string(c.max_iters));
  e.emplace_back("seed", std::to_string(c.seed));
  return e;
}

ConfigEcho select_echo(const PipelineConfig& c) {
  ConfigEcho e{{"version", kToolVersion}};
  e.emplace_back("candidate_features", c.candidate_features.empty() ? "baseline" : c.candidate_features.string());
  e.emplace_back("alpha", format_double(c.alpha));
  e.emplace_back("min_radius", format_double(c.min_radius));
  return e;
}

void apply_setting(PipelineConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::ranges::replace(key, '-', '_');
  const std::string v = trim(raw_value);
  try {
    if (key == "labeled" || key == "labeled_dir") c.labeled_dir = v;
    else if (key == "labels") c.labels_file = v;
    else if (key == "unlabeled" || key == "unlabeled_dir") c.unlabeled_dir = v;
    else if (key == "out") c.out_dir = v;
    else if (key == "labeled_features") c.labeled_features = v;
    else if (key == "candidate_features") c.candidate_features = v;
    else if (key == "kernel_size") c.kernel.size = parse_number<int>(key, v);
    else if (key == "sigma") c.kernel.sigma = parse_number<double>(key, v);
    else if (key == "quant_k1") c.quant_k1 = parse_number<std::size_t>(key, v);
    else if (key == "quant_k2") c.quant_k2 = parse_number<std::size_t>(key, v);
    else if (key == "quant_fit_stride") c.quant_fit_stride = parse_number<std::size_t>(key, v);
    else if (key == "purple_range") c.purple = parse_hsv_range(v);
    else if (key == "blue_range") c.blue = parse_hsv_range(v);
    else if (key == "min_side") c.min_side = parse_number<int>(key, v);
    else if (key == "fill_rate") c.fill_rate = parse_number<double>(key, v);
    else if (key == "connectivity") {
      const int n = parse_number<int>(key, v);
      if (n != 4 && n != 8) throw ConfigError("connectivity must be 4 or 8");
      c.connectivity = n == 4 ? Connectivity::four : Connectivity::eight;
    } else if (key == "detect_on") {
      if (v == "quantized") c.detect_on = DetectSource::quantized;
      else if (v == "smoothed") c.detect_on = DetectSource::smoothed;
      else throw ConfigError("detect-on must be 'quantized' or 'smoothed'");
    } else if (key == "cleanup") {
      if (v == "none") c.cleanup = MaskCleanup::none;
      else if (v == "open") c.cleanup = MaskCleanup::open;
      else if (v == "close") c.cleanup = MaskCleanup::close;
      else throw ConfigError("cleanup must be none, open or close");
    } else if (key == "filter_labeled") c.filter_labeled = parse_bool(key, v);
    else if (key == "prototypes") c.prototypes = parse_number<std::size_t>(key, v);
    else if (key == "max_iters") c.max_iters = parse_number<std::size_t>(key, v);
    else if (key == "alpha") c.alpha = parse_number<double>(key, v);
    else if (key == "min_radius") c.min_radius = parse_number<double>(key, v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "jobs") c.jobs = parse_number<unsigned>(key, v);
    else throw ConfigError("unknown setting '" + raw_key + "'");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void load_config_file(PipelineConfig& config, const fs::path& path) {
  std::string text;
  try {
    text = read_file_text(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key = value");
    apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
  }
}

FilterOutcome filter_image(const RasterImage& image, const std::string& image_id, const PipelineConfig& config) {
  const RasterImage normalized = normalize_image(image);
  const RasterImage smoothed = gaussian_filter(normalized, config.kernel);
  const RasterImage detect =
      config.detect_on == DetectSource::quantized
          ? quantize_image(smoothed, QuantizeOptions{.first_stage_k = config.quant_k1,
                                                     .merged_k = config.quant_k2,
                                                     .seed = config.seed,
                                                     .fit_stride = config.quant_fit_stride})
          : smoothed;
  const HsvImage hsv = rgb_to_hsv(detect);
  BinaryMask mask = combine_masks(hsv_threshold(hsv, config.purple), hsv_threshold(hsv, config.blue));
  if (config.cleanup == MaskCleanup::open) mask = morph_open(mask);
  if (config.cleanup == MaskCleanup::close) mask = morph_close(mask);

  FilterOutcome out;
  out.components = label_components(mask, config.connectivity).size();
  out.regions = extract_regions(mask, normalized, image_id,
                                {.min_side = config.min_side, .tau = config.fill_rate,
                                 .connectivity = config.connectivity});
  return out;
}

std::string format_regions(const std::vector<RegionRecord>& rows, const ConfigEcho& echo) {
  std::ostringstream os;
  os << "# activessf region manifest v1\n" << join_echo(echo);
  os << "image_id,x,y,w,h,fill_rate,crop\n";
  for (const auto& r : rows)
    os << r.image_id << ',' << r.bbox.x << ',' << r.bbox.y << ',' << r.bbox.w << ',' << r.bbox.h << ','
       << format_double(r.fill_rate) << ',' << r.crop << '\n';
  return os.str();
}

std::vector<RegionRecord> parse_regions(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::vector<RegionRecord> rows;
  long long rec = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with("#")) continue;
    if (!header) {
      if (line != "image_id,x,y,w,h,fill_rate,crop") throw FormatError("region manifest header missing");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw FormatError("region row needs 7 fields", rec);
    RegionRecord r;
    r.image_id = f[0];
    try {
      r.bbox = {parse_number<int>("x", f[1]), parse_number<int>("y", f[2]), parse_number<int>("w", f[3]),
                parse_number<int>("h", f[4])};
      r.fill_rate = parse_number<double>("fill_rate", f[5]);
    } catch (const ConfigError& e) {
      throw FormatError(e.what(), rec);
    }
    r.crop = f[6];
    rows.push_back(std::move(r));
    ++rec;
  }
  if (!header) throw FormatError("region manifest header missing");
  return rows;
}

std::vector<std::pair<std::string, int>> parse_labels(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::string, int>> out;
  bool header = false;
  long long rec = 0;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != "id,class_index") throw FormatError("labels file must start with 'id,class_index'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("labels row needs two fields", rec);
    int label = 0;
    const std::string l = trim(line.substr(comma + 1));
    const auto [end, ec] = std::from_chars(l.data(), l.data() + l.size(), label);
    if (ec != std::errc{} || end != l.data() + l.size() || label < 0) throw FormatError("bad class index", rec);
    out.emplace_back(trim(line.substr(0, comma)), label);
    ++rec;
  }
  if (!header) throw FormatError("labels file must start with 'id,class_index'");
  return out;
}

RunReport run_filter_stage(const PipelineConfig& config) {
  validate(config);
  require_dir(config.unlabeled_dir, "unlabeled");
  require_out(config);
  StageClock clock("filter");

  const auto images = list_images(config.unlabeled_dir);
  if (images.empty()) throw DataError("no PNG or JPEG images in " + config.unlabeled_dir.string());

  struct Slot {
    std::optional<FilterOutcome> outcome;
    std::string error;
  };
  std::vector<Slot> slots(images.size());
  std::atomic<std::size_t> next{0};
  const unsigned workers = std::min<std::size_t>(config.jobs ? config.jobs : default_worker_count(), images.size());
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < images.size();) {
      try {
        slots[i].outcome = filter_image(load_image(images[i]), images[i].stem().string(), config);
      } catch (const std::exception& e) {
        slots[i].error = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }

  const fs::path crops = config.out_dir / "crops";
  fs::remove_all(crops);
  fs::create_directories(crops);

  RunReport report;
  report.images_in = images.size();
  std::vector<RegionRecord> rows;
  std::vector<std::string> failed, empty;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string id = images[i].stem().string();
    if (!slots[i].outcome) {
      ++report.images_failed;
      failed.push_back(images[i].filename().string() + ": " + slots[i].error);
      std::cerr << "warning: skipped " << images[i].filename().string() << ": " << slots[i].error << '\n';
      continue;
    }
    const FilterOutcome& o = *slots[i].outcome;
    report.regions_found += o.components;
    if (o.regions.empty()) {
      ++report.images_without_regions;
      empty.push_back(id);
    }
    for (std::size_t r = 0; r < o.regions.size(); ++r) {
      const auto& region = o.regions[r];
      const std::string name = id + "_" + std::to_string(r) + ".png";
      atomic_write(crops / name, encode_png(region.crop));
      rows.push_back({id, region.bbox, region.fill_rate, name});
    }
  }
  report.regions_kept = rows.size();

  const ConfigEcho echo = filter_echo(config);
  atomic_write(config.out_dir / "regions.csv", format_regions(rows, echo));

  std::ostringstream rep;
  rep << "# activessf filter report\n" << join_echo(echo);
  rep << "images_in=" << report.images_in << '\n'
      << "images_failed=" << report.images_failed << '\n'
      << "images_without_regions=" << report.images_without_regions << '\n'
      << "regions_found=" << report.regions_found << '\n'
      << "regions_kept=" << report.regions_kept << '\n';
  for (const auto& f : failed) rep << "failed=" << f << '\n';
  for (const auto& e : empty) rep << "no_regions=" << e << '\n';
  atomic_write(config.out_dir / "filter_report.txt", rep.str());

  report.messages = std::move(failed);
  report.timings.push_back(clock.finish(config.out_dir));
  return report;
}

namespace {

FeatureSet labeled_features_from_images(const PipelineConfig& config) {
  require_dir(config.labeled_dir, "labeled");
  if (config.labels_file.empty()) throw ConfigError("labels file is not set");
  if (!fs::is_regular_file(config.labels_file))
    throw ConfigError("labels file " + config.labels_file.string() + " does not exist");
  const auto labels = parse_labels(read_file_text(config.labels_file));

  FeatureSet set(kBaselineDim, FeatureSource::baseline);
  for (const auto& [id, label] : labels) {
    const fs::path path = find_image(config.labeled_dir, id);
    if (path.empty()) throw DataError("labeled image for '" + id + "' not found in " + config.labeled_dir.string());
    const RasterImage img = load_image(path);
    try {
      if (config.filter_labeled) {
        const FilterOutcome o = filter_image(img, id, config);
        for (std::size_t r = 0; r < o.regions.size(); ++r)
          set.add(baseline_extract(o.regions[r].crop, id + "_" + std::to_string(r), label));
      } else {
        set.add(baseline_extract(img, id, label));
      }
    } catch (const std::invalid_argument& e) {
      throw DataError("labeled sample '" + id + "': " + e.what());
    }
  }
  return set;
}

}  // namespace

RunReport run_prototype_stage(const PipelineConfig& config) {
  validate(config);
  require_out(config);
  StageClock clock("prototype");

  FeatureSet labeled = config.labeled_features.empty() ? labeled_features_from_images(config)
                                                       : load_features(config.labeled_features);
  if (labeled.size() < config.prototypes)
    throw DataError("prototype stage needs at least " + std::to_string(config.prototypes) + " labeled samples, got " +
                    std::to_string(labeled.size()));
  write_features(labeled, config.out_dir / "labeled_features.afv");

  const PrototypeModel model =
      fit_prototypes(labeled, {.k = config.prototypes, .seed = config.seed, .max_iters = config.max_iters});
  write_model(model, config.out_dir / "prototypes.apm");

  RunReport report;
  report.labeled_samples = labeled.size();
  std::ostringstream rep;
  rep << "# activessf prototype report\n" << join_echo(prototype_echo(config));
  rep << "labeled_samples=" << labeled.size() << '\n'
      << "dim=" << model.dim() << '\n'
      << "objective=" << format_double(model.objective) << '\n'
      << "n_max=" << model.n_max << '\n'
      << "cluster,size,lb,ub,label_purity\n";
  for (std::size_t c = 0; c < model.k(); ++c)
    rep << c << ',' << model.sizes[c] << ',' << format_double(model.bounds[c].lower) << ','
        << format_double(model.bounds[c].upper) << ',' << format_double(model.label_purity[c]) << '\n';
  atomic_write(config.out_dir / "prototype_report.txt", rep.str());

  report.timings.push_back(clock.finish(config.out_dir));
  return report;
}

RunReport run_select_stage(const PipelineConfig& config) {
  validate(config);
  require_out(config);
  StageClock clock("select");

  const fs::path model_path = config.out_dir / "prototypes.apm";
  if (!fs::is_regular_file(model_path)) throw DataError("no prototype model at " + model_path.string());
  const PrototypeModel model = read_model(model_path);

  FeatureSet candidates(kBaselineDim, FeatureSource::baseline);
  if (!config.candidate_features.empty()) {
    candidates = load_features(config.candidate_features);
  } else {
    const fs::path regions = config.out_dir / "regions.csv";
    if (!fs::is_regular_file(regions)) throw DataError("no region manifest at " + regions.string());
    for (const auto& row : parse_regions(read_file_text(regions))) {
      const fs::path crop = config.out_dir / "crops" / row.crop;
      try {
        candidates.add(baseline_extract(load_image(crop), fs::path(row.crop).stem().string()));
      } catch (const std::invalid_argument& e) {
        throw DataError("candidate crop " + row.crop + ": " + e.what());
      }
    }
  }
  if (!candidates.empty() && candidates.dim() != model.dim())
    throw DataError("candidate features have dim " + std::to_string(candidates.dim()) + " but the model has " +
                    std::to_string(model.dim()));
  write_features(candidates, config.out_dir / "candidate_features.afv");

  const ThresholdTable table = compute_thresholds(model, config.alpha, config.min_radius);
  SelectionManifest manifest = select_samples(candidates, model, table);
  manifest.config = select_echo(config);

  atomic_write(config.out_dir / "selection.csv", format_manifest(manifest, table));
  atomic_write(config.out_dir / "selected_ids.txt", format_accepted_ids(manifest));

  RunReport report;
  report.candidates = candidates.size();
  report.selected = manifest.accepted_count();
  for (const auto& t : manifest.per_cluster) report.selected_per_cluster.push_back(t.accepted);

  std::ostringstream rep;
  rep << "# activessf select report\n" << join_echo(manifest.config);
  rep << "candidates=" << report.candidates << '\n' << "selected=" << report.selected << '\n';
  rep << "cluster,size,lb,ub,threshold,accepted,rejected\n";
  for (std::size_t c = 0; c < table.size(); ++c)
    rep << c << ',' << table.clusters[c].size << ',' << format_double(table.clusters[c].lower) << ','
        << format_double(table.clusters[c].upper) << ',' << format_double(table[c]) << ','
        << manifest.per_cluster[c].accepted << ',' << manifest.per_cluster[c].rejected << '\n';
  atomic_write(config.out_dir / "select_report.txt", rep.str());

  report.timings.push_back(clock.finish(config.out_dir));
  return report;
}

RunReport run_all(const PipelineConfig& config) {
  RunReport filter = run_filter_stage(config);
  const RunReport proto = run_prototype_stage(config);
  const RunReport select = run_select_stage(config);
  filter.labeled_samples = proto.labeled_samples;
  filter.candidates = select.candidates;
  filter.selected = select.selected;
  filter.selected_per_cluster = select.selected_per_cluster;
  filter.timings.insert(filter.timings.end(), proto.timings.begin(), proto.timings.end());
  filter.timings.insert(filter.timings.end(), select.timings.begin(), select.timings.end());
  return filter;
}

}  // namespace activessf
