#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "activessf/raster.hpp"

namespace activessf {

struct FeatureVector {
  std::string id;
  std::vector<double> values;
  std::optional<int> label;

  std::size_t dim() const noexcept { return values.size(); }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

enum class FeatureSource { baseline, external };

// Ordered collection sharing one dimension; ids are unique.
class FeatureSet {
 public:
  explicit FeatureSet(std::size_t dim = 0, FeatureSource source = FeatureSource::external)
      : dim_(dim), source_(source) {}

  // Throws std::invalid_argument on a dimension mismatch, a duplicate id, or a
  // non-finite value.
  void add(FeatureVector v);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  bool empty() const noexcept { return vectors_.empty(); }
  FeatureSource source() const noexcept { return source_; }
  void set_source(FeatureSource s) noexcept { source_ = s; }

  const std::vector<FeatureVector>& vectors() const noexcept { return vectors_; }
  const FeatureVector& operator[](std::size_t i) const noexcept { return vectors_[i]; }
  auto begin() const noexcept { return vectors_.begin(); }
  auto end() const noexcept { return vectors_.end(); }

  // Same dimension and the same records in the same order; source is not compared.
  bool same_records(const FeatureSet& other) const { return dim_ == other.dim_ && vectors_ == other.vectors_; }

 private:
  std::size_t dim_;
  FeatureSource source_;
  std::vector<FeatureVector> vectors_;
  std::unordered_set<std::string> ids_;
};

// AFV1 binary layout, all integers and floats little-endian:
//
//   "AFV1" | u32 dim | u64 count
//   count x { u32 id_len | id bytes | u8 has_label | i32 label | dim x f64 }
//   u32 crc32 of every preceding byte
//
// Unlabeled records store label -1.
std::vector<std::uint8_t> encode_features(const FeatureSet& set);
// Throws FormatError naming the offending record index.
FeatureSet decode_features(std::span<const std::uint8_t> bytes);

void write_features(const FeatureSet& set, const std::filesystem::path& path);
FeatureSet read_features(const std::filesystem::path& path);

// CSV fixtures: header "id,label,v0,v1,...", empty label for unlabeled rows.
FeatureSet parse_features_csv(const std::string& text);
FeatureSet read_features_csv(const std::filesystem::path& path);

// Chooses the CSV or binary reader by extension (".csv" vs anything else).
FeatureSet load_features(const std::filesystem::path& path);

// Fixed 86-value descriptor:
//   [0, 48)   R, G, B histograms, 16 bins each, each L1-normalized
//   [48, 64)  hue histogram, 16 bins over [0, 180)
//   [64, 80)  saturation histogram, 16 bins over [0, 255]
//   [80, 86)  mean R, G, B then std R, G, B, all divided by 255
inline constexpr std::size_t kBaselineDim = 86;
inline constexpr int kBaselineMinSide = 8;

// Throws std::invalid_argument for crops smaller than 8x8.
FeatureVector baseline_extract(const RasterImage& crop, std::string id = {}, std::optional<int> label = std::nullopt);

}  // namespace activessf
