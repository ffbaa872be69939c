#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "activessf/features.hpp"
#include "activessf/prototypes.hpp"

namespace activessf {

struct ClusterThreshold {
  double threshold = 0.0;
  double lower = 0.0;  // LB as used (copied from the model)
  double upper = 0.0;  // UB as used, after the min-radius floor
  std::size_t size = 0;
};

struct ThresholdTable {
  std::vector<ClusterThreshold> clusters;
  double alpha = 0.5;
  double min_radius = 0.0;
  std::size_t n_max = 0;

  std::size_t size() const noexcept { return clusters.size(); }
  double operator[](std::size_t i) const noexcept { return clusters[i].threshold; }
};

// Density-aware radius per cluster:
//   threshold_i = LB_i + (UB_i - LB_i) * (1 - n_i / n_max)^alpha
// The largest cluster gets exactly LB; smaller clusters interpolate toward UB.
// UB_i is first raised to `min_radius` when smaller (0 keeps the literal rule).
// Throws std::invalid_argument for alpha <= 0, min_radius < 0 or an empty model.
double density_threshold(double lower, double upper, std::size_t n, std::size_t n_max, double alpha);
ThresholdTable compute_thresholds(const PrototypeModel& model, double alpha = 0.5, double min_radius = 0.0);

// The same value for every cluster.
ThresholdTable fixed_thresholds(const PrototypeModel& model, double value);
// threshold_i = LB_i.
ThresholdTable lower_bound_thresholds(const PrototypeModel& model);

double mean_threshold(const ThresholdTable& table);

struct SelectionDecision {
  std::string id;
  std::size_t cluster = 0;
  double distance = 0.0;
  double threshold = 0.0;
  bool accepted = false;
};

struct ClusterTally {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

struct SelectionManifest {
  // One row per candidate, in candidate order.
  std::vector<SelectionDecision> decisions;
  std::vector<ClusterTally> per_cluster;
  // key=value lines recorded in the manifest header.
  std::vector<std::pair<std::string, std::string>> config;

  std::size_t accepted_count() const;
  // Accepted rows grouped by cluster, input order kept within each group.
  std::vector<std::vector<const SelectionDecision*>> accepted_by_cluster() const;
};

// Nearest-prototype assignment, accepted iff distance <= threshold of that
// cluster. Throws std::invalid_argument on a dimension or table-size mismatch.
SelectionManifest select_samples(const FeatureSet& candidates, const PrototypeModel& model,
                                 const ThresholdTable& table);

// Line-delimited manifest:
//   # activessf selection manifest v1
//   # key=value            (config echo)
//   id,cluster,distance,threshold,accepted
//   ...rows...
//   # summary
//   cluster,threshold,accepted,rejected
//   ...one row per cluster...
std::string format_manifest(const SelectionManifest& manifest, const ThresholdTable& table);
SelectionManifest parse_manifest(const std::string& text);

// Accepted ids, one per line, in candidate order.
std::string format_accepted_ids(const SelectionManifest& manifest);

}  // namespace activessf
