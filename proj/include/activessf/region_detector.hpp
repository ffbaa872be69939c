#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "activessf/raster.hpp"

namespace activessf {

// Closed HSV box; hue on [0, 180), saturation and value on [0, 255].
struct HsvRange {
  double h_lo = 0, h_hi = 179;
  double s_lo = 0, s_hi = 255;
  double v_lo = 0, v_hi = 255;

  bool contains(const HsvPixel& p) const noexcept {
    return p.h >= h_lo && p.h <= h_hi && p.s >= s_lo && p.s <= s_hi && p.v >= v_lo && p.v <= v_hi;
  }

  friend bool operator==(const HsvRange&, const HsvRange&) = default;
};

inline constexpr HsvRange kPurpleRange{30, 140, 100, 255, 0, 255};
inline constexpr HsvRange kDeepBlueRange{95, 105, 150, 255, 50, 255};

// Parses "h_lo,h_hi,s_lo,s_hi,v_lo,v_hi". Throws std::invalid_argument.
HsvRange parse_hsv_range(std::string_view text);
std::string format_hsv_range(const HsvRange& range);

class BinaryMask {
 public:
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool get(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool on = true) noexcept { bits_[index(x, y)] = on ? 1 : 0; }

  std::size_t popcount() const noexcept;
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }

  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

BinaryMask hsv_threshold(const HsvImage& hsv, const HsvRange& range);

// Pixel-wise OR. Throws std::invalid_argument on a size mismatch.
BinaryMask combine_masks(const BinaryMask& a, const BinaryMask& b);

// 3x3 binary opening / closing, for optional mask cleanup before labeling.
BinaryMask morph_open(const BinaryMask& mask);
BinaryMask morph_close(const BinaryMask& mask);

enum class Connectivity { four = 4, eight = 8 };

struct Component {
  Box bbox;
  std::size_t pixel_count = 0;
};

// Connected components in discovery order (row-major scan of each component's
// first pixel).
std::vector<Component> label_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::eight);

struct CandidateRegion {
  Box bbox;
  // Component pixels / bbox area.
  double fill_rate = 0.0;
  std::string source_image_id;
  RasterImage crop;
};

struct RegionCriteria {
  int min_side = 70;
  double tau = 0.7;
  Connectivity connectivity = Connectivity::eight;
};

// Labels the mask, keeps components whose bbox is at least min_side on both
// axes and whose fill rate is >= tau, and crops each survivor from `original`.
// Throws std::invalid_argument when the mask and image sizes differ.
std::vector<CandidateRegion> extract_regions(const BinaryMask& mask, const RasterImage& original,
                                             const std::string& image_id, const RegionCriteria& criteria = {});

}  // namespace activessf
