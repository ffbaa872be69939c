#include "activessf/region_detector.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace activessf {

HsvRange parse_hsv_range(std::string_view text) {
  double v[6];
  std::size_t pos = 0;
  for (int i = 0; i < 6; ++i) {
    const std::size_t comma = text.find(',', pos);
    std::string_view part = text.substr(pos, comma == std::string_view::npos ? text.size() - pos : comma - pos);
    while (!part.empty() && std::isspace(static_cast<unsigned char>(part.front()))) part.remove_prefix(1);
    while (!part.empty() && std::isspace(static_cast<unsigned char>(part.back()))) part.remove_suffix(1);
    const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), v[i]);
    if (ec != std::errc{} || end != part.data() + part.size() || part.empty())
      throw std::invalid_argument("bad HSV range '" + std::string(text) + "'");
    if ((comma == std::string_view::npos) != (i == 5))
      throw std::invalid_argument("HSV range needs exactly six comma-separated values");
    pos = comma + 1;
  }
  const HsvRange r{v[0], v[1], v[2], v[3], v[4], v[5]};
  if (r.h_lo > r.h_hi || r.s_lo > r.s_hi || r.v_lo > r.v_hi)
    throw std::invalid_argument("HSV range bounds must satisfy lo <= hi");
  return r;
}

std::string format_hsv_range(const HsvRange& r) {
  std::ostringstream os;
  os << r.h_lo << ',' << r.h_hi << ',' << r.s_lo << ',' << r.s_hi << ',' << r.v_lo << ',' << r.v_hi;
  return os.str();
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
  if (width < 1 || height < 1) throw std::invalid_argument("mask dimensions must be at least 1x1");
}

std::size_t BinaryMask::popcount() const noexcept {
  return static_cast<std::size_t>(std::ranges::count(bits_, std::uint8_t{1}));
}

BinaryMask hsv_threshold(const HsvImage& hsv, const HsvRange& range) {
  BinaryMask m(hsv.width, hsv.height);
  for (int y = 0; y < hsv.height; ++y)
    for (int x = 0; x < hsv.width; ++x)
      if (range.contains(hsv.at(x, y))) m.set(x, y);
  return m;
}

BinaryMask combine_masks(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw std::invalid_argument("cannot combine masks of different sizes");
  BinaryMask out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      if (a.get(x, y) || b.get(x, y)) out.set(x, y);
  return out;
}

namespace {

// Out-of-image neighbours count as `border` (on for erosion, off for dilation).
BinaryMask morph3(const BinaryMask& m, bool erode) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      bool v = erode;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = x + dx, sy = y + dy;
          const bool inside = sx >= 0 && sy >= 0 && sx < m.width() && sy < m.height();
          const bool b = inside ? m.get(sx, sy) : erode;
          v = erode ? (v && b) : (v || b);
        }
      out.set(x, y, v);
    }
  return out;
}

}  // namespace

BinaryMask morph_open(const BinaryMask& mask) { return morph3(morph3(mask, true), false); }
BinaryMask morph_close(const BinaryMask& mask) { return morph3(morph3(mask, false), true); }

std::vector<Component> label_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  std::vector<Component> out;

  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t i0 = static_cast<std::size_t>(y0) * w + x0;
      if (!mask.get(x0, y0) || visited[i0]) continue;
      int min_x = x0, max_x = x0, min_y = y0, max_y = y0;
      std::size_t count = 0;
      visited[i0] = 1;
      stack.assign(1, {x0, y0});
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        ++count;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (connectivity == Connectivity::four && dx != 0 && dy != 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
            if (visited[ni] || !mask.get(nx, ny)) continue;
            visited[ni] = 1;
            stack.emplace_back(nx, ny);
          }
      }
      out.push_back({{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1}, count});
    }
  return out;
}

std::vector<CandidateRegion> extract_regions(const BinaryMask& mask, const RasterImage& original,
                                             const std::string& image_id, const RegionCriteria& criteria) {
  if (mask.width() != original.width() || mask.height() != original.height())
    throw std::invalid_argument("mask and image sizes differ");
  std::vector<CandidateRegion> out;
  for (const Component& c : label_components(mask, criteria.connectivity)) {
    if (c.bbox.w < criteria.min_side || c.bbox.h < criteria.min_side) continue;
    const double fill = static_cast<double>(c.pixel_count) / (static_cast<double>(c.bbox.w) * c.bbox.h);
    if (fill < criteria.tau) continue;
    out.push_back({c.bbox, fill, image_id, original.crop(c.bbox)});
  }
  return out;
}

}  // namespace activessf
