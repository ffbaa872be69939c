// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "activessf/cli.hpp"
#include "activessf/file_util.hpp"
#include "activessf/image_io.hpp"
#include "activessf/kmeans.hpp"
#include "activessf/pipeline.hpp"
#include "activessf/selector.hpp"
#include "activessf/synth.hpp"
#include "oracles.hpp"

using namespace activessf;
namespace fs = std::filesystem;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int number;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

PrototypeModel one_cluster_model(double lb, double ub, std::size_t n, std::size_t n_max) {
  PrototypeModel m;
  m.centers = Matrix(2, 1);
  m.centers(1, 0) = 1.0;
  m.sizes = {n, n_max};
  m.bounds = {{lb, ub}, {lb, ub}};
  m.members.resize(2);
  m.label_purity.assign(2, 0.0);
  m.n_max = std::max(n, n_max);
  return m;
}

Outcome threshold_fidelity() {
  Outcome o;
  double worst = 0.0;
  std::size_t cases = 0;
  for (double lb : {0.0, 0.125, 1.0, 3.7, 12.0})
    for (double width : {0.0, 0.5, 2.0, 9.25})
      for (std::size_t n_max : {1u, 2u, 7u, 100u, 4096u})
        for (double alpha : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
          const double ub = lb + width;
          const std::size_t step = std::max<std::size_t>(1, n_max / 17);
          for (std::size_t n = 1; n <= n_max; n += step) {
            const ThresholdTable t = compute_thresholds(one_cluster_model(lb, ub, n, n_max), alpha);
            const Big share = Big(n) / Big(n_max);
            const Big want = Big(lb) + (Big(ub) - Big(lb)) * boost::multiprecision::pow(Big(1) - share, Big(alpha));
            const double err = std::abs(static_cast<double>(Big(t[0]) - want));
            worst = std::max(worst, err);
            ++cases;
            if (t[1] != lb) {
              o.pass = false;
              o.detail += " n=n_max gave " + format_double(t[1]) + " not LB;";
            }
            if (width == 0.0 && t[0] != lb) {
              o.pass = false;
              o.detail += " LB=UB gave " + format_double(t[0]) + ";";
            }
          }
        }
  if (worst > 1e-12) o.pass = false;
  o.detail = std::to_string(cases) + " grid points, max |error| " + format_double(worst) + o.detail;
  return o;
}

Outcome rare_leniency() {
  Outcome o;
  int strictly = 0;
  std::ostringstream log;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    synth::SyntheticSpec spec;
    spec.class_count = 6;
    spec.sizes = {500, 500, 50, 50, 5, 5};
    spec.spread = 0.5;
    spec.dim = 8;
    spec.seed = seed;
    const auto data = synth::generate(spec);
    const double adaptive = synth::run_bench(data, synth::Policy::adaptive, 0.5, 0, seed).metrics.rare_recall;
    const double lower = synth::run_bench(data, synth::Policy::fixed_lower, 0.5, 0, seed).metrics.rare_recall;
    if (adaptive < lower) {
      o.pass = false;
      log << " seed " << seed << ": " << format_double(adaptive) << " < " << format_double(lower) << ';';
    }
    strictly += adaptive > lower ? 1 : 0;
  }
  if (strictly < 15) o.pass = false;
  o.detail = "strictly greater on " + std::to_string(strictly) + "/20 seeds" + log.str();
  return o;
}

Outcome kmeans_correctness() {
  Outcome o;
  std::size_t fixtures = 0;
  double gap = 0.0;
  std::uint32_t stream = 1;
  for (std::size_t n = 1; n <= 12; ++n)
    for (std::size_t k = 1; k <= std::min<std::size_t>(3, n); ++k)
      for (std::size_t dim = 1; dim <= 3; ++dim) {
        const Matrix pts = oracle::random_points(n, dim, stream++);
        const double best = oracle::brute_force_kmeans(pts, k);
        const double got = lloyd_kmeans(pts, {.k = k, .seed = stream}).objective;
        ++fixtures;
        gap = std::min(gap, got - best);
        if (got < best - 1e-9) o.pass = false;
      }
  std::size_t increases = 0;
  for (std::uint32_t f = 0; f < 100; ++f) {
    const Matrix pts = oracle::random_points(20 + 7 * (f % 13), 1 + f % 5, 9000 + f);
    const KMeansResult r = lloyd_kmeans(pts, {.k = 1 + f % 8, .seed = f});
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      if (r.objective_trace[i] > r.objective_trace[i - 1]) ++increases;
  }
  if (increases > 0) o.pass = false;
  o.detail = std::to_string(fixtures) + " exhaustive fixtures, min(fit - optimum) " + format_double(gap) +
             "; objective increases in 100 traces: " + std::to_string(increases);
  return o;
}

Outcome region_constraints() {
  Outcome o;
  struct Blob {
    int side;
    double fill;
    Box box;
  };
  std::vector<Blob> blobs;
  RasterImage slide = oracle::blank_slide(420, 420);
  int row = 0;
  for (int side : {60, 70, 100}) {
    int col = 0;
    for (double fill : {0.5, 0.7, 1.0}) {
      const Box b{10 + 135 * col, 10 + 135 * row, side, side};
      oracle::paint_blob(slide, b.x, b.y, side, side, static_cast<std::size_t>(std::llround(fill * side * side)),
                         oracle::kStain);
      blobs.push_back({side, fill, b});
      ++col;
    }
    ++row;
  }
  std::set<std::pair<int, int>> expected;
  for (const auto& b : blobs)
    if (b.side >= 70 && b.fill >= 0.7) expected.insert({b.box.x, b.box.y});

  // Exact pixels: identity smoothing; a three-colour image quantizes to itself.
  PipelineConfig cfg;
  cfg.kernel = {1, 1.5};
  const FilterOutcome out = filter_image(slide, "blobs", cfg);
  std::set<std::pair<int, int>> got;
  for (const auto& r : out.regions) {
    got.insert({r.bbox.x, r.bbox.y});
    const auto it = std::ranges::find_if(blobs, [&](const Blob& b) { return b.box == r.bbox; });
    if (it == blobs.end() || r.fill_rate != static_cast<double>(std::llround(it->fill * it->side * it->side)) /
                                               (it->side * it->side))
      o.pass = false;
  }
  if (got != expected || out.components != blobs.size()) o.pass = false;
  o.detail = "kept " + std::to_string(out.regions.size()) + " of " + std::to_string(blobs.size()) + " blobs, expected " +
             std::to_string(expected.size());
  return o;
}

Outcome kernel_and_hsv() {
  Outcome o;
  const GaussianKernel k = build_gaussian_kernel({3, 1.5});
  const double errs[] = {std::abs(k.at(0, 0) - 0.14777), std::abs(k.at(1, 0) - 0.11832), std::abs(k.at(0, 1) - 0.11832),
                         std::abs(k.at(-1, 0) - 0.11832), std::abs(k.at(0, -1) - 0.11832),
                         std::abs(k.at(1, 1) - 0.09474), std::abs(k.at(-1, -1) - 0.09474),
                         std::abs(k.at(1, -1) - 0.09474), std::abs(k.at(-1, 1) - 0.09474)};
  const double kernel_err = *std::max_element(std::begin(errs), std::end(errs));
  if (kernel_err > 1e-5) o.pass = false;
  int worst = 0;
  for (int r = 0; r < 256; r += 17)
    for (int g = 0; g < 256; g += 17)
      for (int b = 0; b < 256; b += 17) {
        const Rgb back = hsv_to_rgb(rgb_to_hsv(Rgb{std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)}));
        worst = std::max({worst, std::abs(back.r - r), std::abs(back.g - g), std::abs(back.b - b)});
      }
  if (worst > 1) o.pass = false;
  o.detail = "kernel max error " + format_double(kernel_err) + ", hsv round trip max error " + std::to_string(worst);
  return o;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "activessf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  return rc;
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel.ends_with("_timing.txt")) continue;
    files[rel] = read_file_bytes(e.path());
  }
  return files;
}

Outcome determinism(const fs::path& scratch) {
  Outcome o;
  const fs::path corpus = scratch / "corpus";
  synth::write_fixture_corpus(corpus, {.image_count = 30, .valid_cells = 21, .seed = 11}, 24);
  const std::vector<std::string> inputs{"--labeled", (corpus / "labeled").string(), "--labels",
                                        (corpus / "labels.csv").string(), "--unlabeled",
                                        (corpus / "unlabeled").string(), "--seed", "5"};
  auto with = [&](std::vector<std::string> head, const fs::path& out) {
    head.insert(head.end(), inputs.begin(), inputs.end());
    head.push_back("--out");
    head.push_back(out.string());
    return cli(head);
  };
  int rc = with({"run-all"}, scratch / "a");
  rc |= with({"run-all"}, scratch / "b");
  rc |= with({"filter"}, scratch / "c");
  rc |= with({"prototype"}, scratch / "c");
  rc |= with({"select"}, scratch / "c");
  if (rc != 0) {
    o.pass = false;
    o.detail = "a pipeline command failed";
    return o;
  }
  const auto a = snapshot(scratch / "a"), b = snapshot(scratch / "b"), c = snapshot(scratch / "c");
  const bool repeat = a == b, staged = a == c;
  o.pass = repeat && staged && a.contains("selection.csv") && a.contains("prototypes.apm");
  std::size_t bytes = 0;
  for (const auto& [_, v] : a) bytes += v.size();
  o.detail = std::to_string(a.size()) + " files / " + std::to_string(bytes) + " bytes; rerun identical: " +
             (repeat ? "yes" : "no") + ", stage-by-stage identical: " + (staged ? "yes" : "no");
  return o;
}

Outcome filtering_yield(const fs::path& scratch) {
  Outcome o;
  const synth::SlideCorpusSpec spec{.image_count = 200, .valid_cells = 140, .seed = 7};
  const auto slides = synth::generate_slides(spec);
  const fs::path in = scratch / "slides";
  fs::create_directories(in);
  std::set<std::string> blank;
  std::map<std::string, std::vector<Box>> truth;
  for (const auto& s : slides) {
    save_png(s.image, in / (s.id + ".png"));
    if (s.blank) blank.insert(s.id);
    truth[s.id] = s.valid_cells;
  }
  PipelineConfig cfg;
  cfg.unlabeled_dir = in;
  cfg.out_dir = scratch / "out";
  const RunReport r = run_filter_stage(cfg);
  std::size_t from_blank = 0, matched = 0;
  for (const auto& row : parse_regions(read_file_text(cfg.out_dir / "regions.csv"))) {
    from_blank += blank.contains(row.image_id) ? 1 : 0;
    for (const Box& b : truth[row.image_id]) {
      const int dx = std::abs(b.x - row.bbox.x), dy = std::abs(b.y - row.bbox.y);
      if (dx <= 2 && dy <= 2 && std::abs(b.w - row.bbox.w) <= 4 && std::abs(b.h - row.bbox.h) <= 4) ++matched;
    }
  }
  o.pass = r.regions_kept >= 135 && r.regions_kept <= 145 && from_blank == 0 && blank.size() == 40;
  o.detail = "kept " + std::to_string(r.regions_kept) + " (" + std::to_string(matched) + " on true cells) from " +
             std::to_string(r.images_in) + " slides, " + std::to_string(from_blank) + " from " +
             std::to_string(blank.size()) + " blank slides";
  return o;
}

}  // namespace

int main() {
  oracle::TempDir scratch("acceptance");
  fs::create_directories(scratch.path / "det");
  fs::create_directories(scratch.path / "yield");
  const std::vector<Criterion> criteria{
      {1, "threshold formula fidelity", 1.0, threshold_fidelity},
      {2, "rare-class leniency over 20 seeds", 30.0, rare_leniency},
      {3, "k-means optimality and monotone objective", 60.0, kmeans_correctness},
      {4, "region size and fill-rate constraints", 10.0, region_constraints},
      {5, "kernel weights and hsv round trip", 30.0, kernel_and_hsv},
      {6, "run-all determinism and stage composability", 60.0, [&] { return determinism(scratch.path / "det"); }},
      {7, "filtering yield on 200 synthetic slides", 120.0, [&] { return filtering_yield(scratch.path / "yield"); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2fs of %.0fs", secs, c.budget_seconds);
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.number << ": " << c.name << ": " << o.detail << " ["
              << timing << (in_time ? "" : ", over budget") << "]\n";
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed == 0 ? 0 : 1;
}
