#include "activessf/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string_view>

#include "activessf/binary_io.hpp"
#include "activessf/errors.hpp"
#include "activessf/file_util.hpp"

namespace activessf {

namespace {

constexpr std::string_view kMagic = "AFV1";
constexpr std::uint32_t kMaxDim = 1u << 20;
constexpr std::size_t kMaxIdLen = 4096;

bool all_finite(const std::vector<double>& v) {
  return std::ranges::all_of(v, [](double x) { return std::isfinite(x); });
}

}  // namespace

void FeatureSet::add(FeatureVector v) {
  if (vectors_.empty() && dim_ == 0) dim_ = v.dim();
  if (v.dim() != dim_)
    throw std::invalid_argument("feature '" + v.id + "' has dim " + std::to_string(v.dim()) + ", set has " +
                                std::to_string(dim_));
  if (!all_finite(v.values)) throw std::invalid_argument("feature '" + v.id + "' has a non-finite value");
  if (!ids_.insert(v.id).second) throw std::invalid_argument("duplicate feature id '" + v.id + "'");
  vectors_.push_back(std::move(v));
}

std::vector<std::uint8_t> encode_features(const FeatureSet& set) {
  binary::Writer w;
  w.put_bytes(kMagic);
  w.put(static_cast<std::uint32_t>(set.dim()));
  w.put(static_cast<std::uint64_t>(set.size()));
  for (const auto& v : set) {
    w.put_string(v.id);
    w.put(static_cast<std::uint8_t>(v.label ? 1 : 0));
    w.put(static_cast<std::int32_t>(v.label.value_or(-1)));
    for (double x : v.values) w.put(x);
  }
  w.seal();
  return w.take();
}

FeatureSet decode_features(std::span<const std::uint8_t> bytes) {
  binary::Reader r(bytes);
  if (r.get_bytes(kMagic.size()) != kMagic) throw FormatError("not an AFV1 feature file");
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (dim > kMaxDim) throw FormatError("feature dimension " + std::to_string(dim) + " out of range");
  // Smallest possible record: empty id length prefix, flag, label, values.
  const std::size_t min_record = 4 + 1 + 4 + std::size_t{dim} * 8;
  if (count > r.remaining() / min_record) throw FormatError("record count exceeds file size");

  FeatureSet set(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto rec = static_cast<long long>(i);
    r.set_record(rec);
    FeatureVector v;
    v.id = r.get_string(kMaxIdLen);
    if (v.id.empty()) throw FormatError("empty id", rec);
    const auto has_label = r.get<std::uint8_t>();
    const auto label = r.get<std::int32_t>();
    if (has_label > 1) throw FormatError("bad label flag", rec);
    if (has_label == 1) {
      if (label < 0) throw FormatError("negative class label", rec);
      v.label = label;
    } else if (label != -1) {
      throw FormatError("unlabeled record carries a label value", rec);
    }
    v.values.resize(dim);
    for (auto& x : v.values) {
      x = r.get<double>();
      if (!std::isfinite(x)) throw FormatError("non-finite feature value", rec);
    }
    try {
      set.add(std::move(v));
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what(), rec);
    }
  }
  r.set_record(-1);
  r.verify_seal();
  return set;
}

void write_features(const FeatureSet& set, const std::filesystem::path& path) {
  const auto bytes = encode_features(set);
  atomic_write(path, bytes);
}

FeatureSet read_features(const std::filesystem::path& path) {
  try {
    return decode_features(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = line.find(',', pos);
    out.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && end == s.data() + s.size() && !s.empty();
}

}  // namespace

FeatureSet parse_features_csv(const std::string& text) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest = text;
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      const std::string_view line = trim(rest.substr(0, nl));
      if (!line.empty()) lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  if (lines.empty()) throw FormatError("feature CSV is missing its header");
  const auto header = split_commas(lines[0]);
  if (header.size() < 2 || trim(header[0]) != "id" || trim(header[1]) != "label")
    throw FormatError("feature CSV header must start with 'id,label'");
  const std::size_t dim = header.size() - 2;

  FeatureSet set(dim);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto rec = static_cast<long long>(li - 1);
    const auto cells = split_commas(lines[li]);
    if (cells.size() != dim + 2)
      throw FormatError("dimension mismatch: expected " + std::to_string(dim) + " values, got " +
                            std::to_string(cells.size() < 2 ? 0 : cells.size() - 2),
                        rec);
    FeatureVector v;
    v.id = std::string(trim(cells[0]));
    if (v.id.empty()) throw FormatError("empty id", rec);
    const auto label_text = trim(cells[1]);
    if (!label_text.empty()) {
      int label = 0;
      if (!parse_number(label_text, label) || label < 0) throw FormatError("bad label", rec);
      v.label = label;
    }
    v.values.resize(dim);
    for (std::size_t j = 0; j < dim; ++j)
      if (!parse_number(trim(cells[j + 2]), v.values[j]) || !std::isfinite(v.values[j]))
        throw FormatError("bad feature value in column " + std::to_string(j + 2), rec);
    try {
      set.add(std::move(v));
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what(), rec);
    }
  }
  return set;
}

FeatureSet read_features_csv(const std::filesystem::path& path) {
  try {
    return parse_features_csv(read_file_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

FeatureSet load_features(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? read_features_csv(path) : read_features(path);
}

FeatureVector baseline_extract(const RasterImage& crop, std::string id, std::optional<int> label) {
  if (crop.width() < kBaselineMinSide || crop.height() < kBaselineMinSide)
    throw std::invalid_argument("baseline features need a crop of at least 8x8, got " + std::to_string(crop.width()) +
                                "x" + std::to_string(crop.height()));

  std::vector<double> f(kBaselineDim, 0.0);
  double sum[3] = {0, 0, 0};
  double sum_sq[3] = {0, 0, 0};
  for (int y = 0; y < crop.height(); ++y)
    for (int x = 0; x < crop.width(); ++x) {
      const Rgb c = crop.pixel(x, y);
      const std::uint8_t ch[3] = {c.r, c.g, c.b};
      for (int k = 0; k < 3; ++k) {
        f[k * 16 + (ch[k] >> 4)] += 1.0;
        sum[k] += ch[k];
        sum_sq[k] += static_cast<double>(ch[k]) * ch[k];
      }
      const HsvPixel p = rgb_to_hsv(c);
      f[48 + std::min(15, static_cast<int>(p.h * 16.0 / 180.0))] += 1.0;
      f[64 + std::min(15, static_cast<int>(p.s * 16.0 / 256.0))] += 1.0;
    }

  const double n = static_cast<double>(crop.pixel_count());
  for (std::size_t i = 0; i < 80; ++i) f[i] /= n;
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, sum_sq[k] / n - mean * mean);
    f[80 + k] = mean / 255.0;
    f[83 + k] = std::sqrt(var) / 255.0;
  }
  return {std::move(id), std::move(f), label};
}

}  // namespace activessf
