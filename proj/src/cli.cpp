#include "activessf/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <stdexcept>
#include <string>

#include "activessf/errors.hpp"
#include "activessf/file_util.hpp"
#include "activessf/pipeline.hpp"
#include "activessf/synth.hpp"

namespace activessf {

namespace {

struct PipelineFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool filter_labeled = false;
};

void add_pipeline_flags(CLI::App& cmd, PipelineFlags& flags) {
  cmd.add_option("--config", flags.config_file, "key = value settings file; flags override it");
  const auto opt = [&](const char* name, const char* help) {
    cmd.add_option(std::string("--") + name, flags.values[name], help);
  };
  opt("labeled", "directory of labeled cell images");
  opt("labels", "labels CSV (id,class_index)");
  opt("unlabeled", "directory of unlabeled slide images");
  opt("out", "output directory");
  opt("labeled-features", "feature file (.afv or .csv) used instead of baseline extraction");
  opt("candidate-features", "feature file (.afv or .csv) used instead of the filter crops");
  opt("kernel-size", "gaussian kernel size (odd)");
  opt("sigma", "gaussian sigma");
  opt("quant-k1", "first-stage color clusters");
  opt("quant-k2", "color clusters after merging");
  opt("quant-fit-stride", "pixel stride for fitting colors on large images (0: all pixels)");
  opt("purple-range", "hmin,hmax,smin,smax,vmin,vmax");
  opt("blue-range", "hmin,hmax,smin,smax,vmin,vmax");
  opt("min-side", "minimum bounding box side in pixels");
  opt("fill-rate", "minimum component fill rate");
  opt("connectivity", "4 or 8");
  opt("detect-on", "quantized or smoothed");
  opt("cleanup", "none, open or close");
  opt("prototypes", "number of prototype clusters");
  opt("max-iters", "k-means iteration cap");
  opt("alpha", "threshold exponent");
  opt("min-radius", "floor for the per-cluster upper distance bound");
  opt("seed", "random seed");
  opt("jobs", "worker threads (0: all cores)");
  cmd.add_flag("--filter-labeled", flags.filter_labeled, "run region filtering on labeled images too");
}

PipelineConfig resolve(const CLI::App& cmd, const PipelineFlags& flags) {
  PipelineConfig config;
  if (!flags.config_file.empty()) load_config_file(config, flags.config_file);
  for (const auto& [name, value] : flags.values)
    if (cmd.count("--" + name) > 0) apply_setting(config, name, value);
  if (cmd.count("--filter-labeled") > 0) config.filter_labeled = flags.filter_labeled;
  validate(config);
  return config;
}

void print_report(const RunReport& r) {
  std::cout << "images_in=" << r.images_in << " images_failed=" << r.images_failed
            << " images_without_regions=" << r.images_without_regions << " regions_found=" << r.regions_found
            << " regions_kept=" << r.regions_kept << " labeled_samples=" << r.labeled_samples
            << " candidates=" << r.candidates << " selected=" << r.selected << '\n';
  for (const auto& t : r.timings) std::cout << t.stage << "_seconds=" << format_double(t.seconds) << '\n';
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"activessf: cell region filtering and prototype-based active sample selection"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  PipelineFlags flags;
  CLI::App* filter = app.add_subcommand("filter", "detect cell regions and write crops");
  CLI::App* prototype = app.add_subcommand("prototype", "fit prototypes on labeled features");
  CLI::App* select = app.add_subcommand("select", "select candidates against the prototypes");
  CLI::App* all = app.add_subcommand("run-all", "filter, prototype and select in one go");
  for (CLI::App* cmd : {filter, prototype, select, all}) add_pipeline_flags(*cmd, flags);

  CLI::App* bench = app.add_subcommand("bench", "selection quality on a synthetic long-tailed set");
  std::string spec_file, policy = "adaptive", bench_out;
  double alpha = 0.5;
  std::size_t bench_k = 0;
  std::uint64_t fit_seed = 0;
  bench->add_option("--spec", spec_file, "synthetic spec (key = value)");
  bench->add_option("--policy", policy, "adaptive, fixed or fixed-lb");
  bench->add_option("--alpha", alpha, "threshold exponent");
  bench->add_option("--prototypes", bench_k, "cluster count (0: class count)");
  bench->add_option("--fit-seed", fit_seed, "k-means seed");
  bench->add_option("--out", bench_out, "report file (default stdout)");

  CLI::App* fixtures = app.add_subcommand("make-fixtures", "write a synthetic slide and labeled-cell corpus");
  std::string fixture_root;
  synth::SlideCorpusSpec slides;
  std::size_t largest_class = 40;
  fixtures->add_option("--out", fixture_root, "corpus root")->required();
  fixtures->add_option("--images", slides.image_count, "slide count");
  fixtures->add_option("--cells", slides.valid_cells, "valid cells across all slides");
  fixtures->add_option("--largest-class", largest_class, "labeled crops in the most common class");
  fixtures->add_option("--seed", slides.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*bench) {
      synth::SyntheticSpec spec;
      if (!spec_file.empty()) {
        std::string text;
        try {
          text = read_file_text(spec_file);
        } catch (const DataError&) {
          throw ConfigError("cannot read spec file " + spec_file);
        }
        spec = synth::parse_spec(text);
      }
      const synth::Policy p = synth::parse_policy(policy);
      const auto data = synth::generate(spec);
      const auto result = synth::run_bench(data, p, alpha, bench_k, fit_seed);
      const std::string report = synth::format_metrics(result.metrics, spec, p, alpha);
      if (bench_out.empty())
        std::cout << report;
      else
        atomic_write(bench_out, report);
      return 0;
    }
    if (*fixtures) {
      synth::write_fixture_corpus(fixture_root, slides, largest_class);
      std::cout << "wrote fixture corpus to " << fixture_root << '\n';
      return 0;
    }
    for (const auto& [cmd, stage] : {std::pair{filter, &run_filter_stage}, std::pair{prototype, &run_prototype_stage},
                                     std::pair{select, &run_select_stage}, std::pair{all, &run_all}}) {
      if (!*cmd) continue;
      const PipelineConfig config = resolve(*cmd, flags);
      print_report(stage(config));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what();
    if (e.record() >= 0) std::cerr << " (record " << e.record() << ')';
    std::cerr << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace activessf
