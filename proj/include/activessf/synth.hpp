#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "activessf/features.hpp"
#include "activessf/raster.hpp"
#include "activessf/selector.hpp"

namespace activessf::synth {

// Long-tailed Gaussian blobs in feature space.
struct SyntheticSpec {
  std::size_t class_count = 11;
  // Explicit labeled sizes per class. When empty, sizes follow
  // round(max_class_size * (c + 1)^-exponent), at least 1.
  std::vector<std::size_t> sizes;
  std::size_t max_class_size = 200;
  double exponent = 1.5;
  // Pairwise distance between class centers.
  double separation = 10.0;
  // Per-coordinate standard deviation around each center.
  double spread = 0.5;
  // Share of the candidate pool made of points far from every center.
  double distractor_fraction = 0.1;
  // Candidates per class = max(1, round(size * candidate_ratio)).
  double candidate_ratio = 1.0;
  std::size_t dim = 16;
  std::uint64_t seed = 0;
};

// Throws std::invalid_argument for an infeasible spec (dim < class_count,
// non-positive separation, negative spread, zero sizes, fraction outside [0, 1)).
void validate(const SyntheticSpec& spec);
std::vector<std::size_t> class_sizes(const SyntheticSpec& spec);

// Ground-truth class per candidate id; -1 marks a distractor.
using GroundTruth = std::unordered_map<std::string, int>;

struct SyntheticData {
  FeatureSet labeled;
  FeatureSet candidates;
  GroundTruth truth;
  std::vector<std::size_t> sizes;  // labeled count per class
};

SyntheticData generate(const SyntheticSpec& spec);

struct SelectionMetrics {
  std::vector<double> class_recall;
  double contamination = 0.0;
  double rare_recall = 0.0;
  double common_recall = 0.0;
  std::vector<std::size_t> rare_classes;
  std::vector<std::size_t> common_classes;
  std::size_t accepted = 0;
  std::size_t accepted_distractors = 0;
  // Set when a rate was 0/0 and reported as 0.
  bool undefined_rate = false;
};

// Rare and common classes are the smallest and largest max(1, C / 3) classes
// by labeled size (ties by class index). Throws DataError for an id missing
// from the ground truth.
SelectionMetrics evaluate(const SelectionManifest& manifest, const GroundTruth& truth,
                          const std::vector<std::size_t>& sizes);

enum class Policy { adaptive, fixed_mean, fixed_lower };

Policy parse_policy(const std::string& name);
std::string policy_name(Policy p);

struct BenchResult {
  ThresholdTable table;
  SelectionManifest manifest;
  SelectionMetrics metrics;
};

// Fits `prototypes` clusters (0 means class_count) on the labeled set and runs
// the selector under the given policy.
BenchResult run_bench(const SyntheticData& data, Policy policy, double alpha, std::size_t prototypes = 0,
                      std::uint64_t fit_seed = 0);

SyntheticSpec parse_spec(const std::string& text);
std::string format_spec(const SyntheticSpec& spec);
std::string format_metrics(const SelectionMetrics& metrics, const SyntheticSpec& spec, Policy policy, double alpha);

// ---------------------------------------------------------------------------
// Synthetic stained slides for the filter stage.

struct SyntheticSlide {
  std::string id;
  RasterImage image;
  // Cells that satisfy the size and fill-rate constraints by construction.
  std::vector<Box> valid_cells;
  std::vector<int> cell_classes;
  bool blank = false;  // background and red cells only
};

struct SlideCorpusSpec {
  std::size_t image_count = 200;
  std::size_t valid_cells = 140;
  int width = 256;
  int height = 256;
  std::uint64_t seed = 7;
};

// One fifth of the slides are blank (background and red cells only), one fifth
// carry only decoys (small cells, rings, streaks); the rest share the valid
// cells.
std::vector<SyntheticSlide> generate_slides(const SlideCorpusSpec& spec);

inline constexpr std::size_t kFixtureClasses = 11;

// Labeled single-cell crops, `per_class` for every class.
struct LabeledCrop {
  std::string id;
  int label = 0;
  RasterImage image;
};
std::vector<LabeledCrop> generate_labeled_crops(std::size_t per_class, std::uint64_t seed);
// counts[c] crops of class c.
std::vector<LabeledCrop> generate_labeled_crops(const std::vector<std::size_t>& counts, std::uint64_t seed);

// Long-tailed labeled counts: max(4, round(largest * (c + 1)^-0.9)).
std::vector<std::size_t> fixture_label_counts(std::size_t largest);

// Writes unlabeled/*.png, labeled/*.png, labels.csv and truth.csv under root.
void write_fixture_corpus(const std::filesystem::path& root, const SlideCorpusSpec& slides,
                          std::size_t largest_labeled_class);

}  // namespace activessf::synth
