#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "activessf/color_quantizer.hpp"
#include "activessf/prototypes.hpp"
#include "activessf/raster.hpp"
#include "activessf/region_detector.hpp"
#include "activessf/selector.hpp"

namespace activessf {

inline constexpr const char* kToolVersion = "activessf 1.0.0";

enum class DetectSource { quantized, smoothed };
enum class MaskCleanup { none, open, close };

struct PipelineConfig {
  std::filesystem::path labeled_dir;
  std::filesystem::path labels_file;
  std::filesystem::path unlabeled_dir;
  std::filesystem::path out_dir;
  // External feature files replace baseline extraction when set.
  std::filesystem::path labeled_features;
  std::filesystem::path candidate_features;

  GaussianKernelSpec kernel{3, 1.5};
  std::size_t quant_k1 = 20;
  std::size_t quant_k2 = 10;
  std::size_t quant_fit_stride = 0;
  HsvRange purple = kPurpleRange;
  HsvRange blue = kDeepBlueRange;
  int min_side = 70;
  double fill_rate = 0.7;
  Connectivity connectivity = Connectivity::eight;
  DetectSource detect_on = DetectSource::quantized;
  MaskCleanup cleanup = MaskCleanup::none;
  // Run region filtering on labeled images too; crops inherit the label.
  bool filter_labeled = false;

  std::size_t prototypes = 11;
  std::size_t max_iters = 300;
  double alpha = 0.5;
  double min_radius = 0.0;
  std::uint64_t seed = 0;
  unsigned jobs = 0;  // 0: hardware concurrency
};

// Throws ConfigError for out-of-range numeric settings.
void validate(const PipelineConfig& config);

// key=value pairs of the settings a stage depends on (output paths excluded).
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;
ConfigEcho filter_echo(const PipelineConfig& config);
ConfigEcho prototype_echo(const PipelineConfig& config);
ConfigEcho select_echo(const PipelineConfig& config);

// Applies one "key = value" setting; keys are the long CLI flag names with
// dashes or underscores. Throws ConfigError for unknown keys or bad values.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);
// Reads a file of "key = value" lines ('#' starts a comment).
void load_config_file(PipelineConfig& config, const std::filesystem::path& path);

struct FilterOutcome {
  std::vector<CandidateRegion> regions;
  std::size_t components = 0;  // before the size and fill-rate constraints
};

// Per-image filtering: normalize, smooth, quantize, HSV masks, regions.
// Crops are cut from the normalized image.
FilterOutcome filter_image(const RasterImage& image, const std::string& image_id, const PipelineConfig& config);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunReport {
  std::size_t images_in = 0;
  std::size_t images_failed = 0;
  std::size_t images_without_regions = 0;
  std::size_t regions_found = 0;  // connected components before the size/fill constraints
  std::size_t regions_kept = 0;
  std::size_t labeled_samples = 0;
  std::size_t candidates = 0;
  std::size_t selected = 0;
  std::vector<std::size_t> selected_per_cluster;
  std::vector<StageTiming> timings;
  std::vector<std::string> messages;
};

// Each stage reads its inputs from the config and writes into out_dir:
//   filter:    crops/{image_id}_{index}.png, regions.csv, filter_report.txt
//   prototype: labeled_features.afv, prototypes.apm, prototype_report.txt
//   select:    candidate_features.afv, selection.csv, selected_ids.txt, select_report.txt
// Wall-clock timings go to {stage}_timing.txt, the only non-reproducible output.
// ConfigError for bad settings, DataError for unusable data.
RunReport run_filter_stage(const PipelineConfig& config);
RunReport run_prototype_stage(const PipelineConfig& config);
RunReport run_select_stage(const PipelineConfig& config);
RunReport run_all(const PipelineConfig& config);

struct RegionRecord {
  std::string image_id;
  Box bbox;
  double fill_rate = 0.0;
  std::string crop;  // file name under crops/
};

// regions.csv: config echo as "# key=value" lines, then
// "image_id,x,y,w,h,fill_rate,crop" and one row per kept region.
std::string format_regions(const std::vector<RegionRecord>& rows, const ConfigEcho& echo);
std::vector<RegionRecord> parse_regions(const std::string& text);

// Labels CSV: header "id,class_index".
std::vector<std::pair<std::string, int>> parse_labels(const std::string& text);

}  // namespace activessf
