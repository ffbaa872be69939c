#include "activessf/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "activessf/errors.hpp"
#include "activessf/file_util.hpp"

namespace activessf {

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DataError("empty image data");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DataError(std::string("image decode failed: ") + e.what());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) throw DataError("unrecognised or corrupt image data");

  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(bgr.rows) * bgr.cols * 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * bgr.cols + x) * 3;
      rgb[i] = row[x][2];
      rgb[i + 1] = row[x][1];
      rgb[i + 2] = row[x][0];
    }
  }
  return RasterImage(bgr.cols, bgr.rows, std::move(rgb));
}

RasterImage load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.pixel(x, y);
      row[x] = {c.b, c.g, c.r};
    }
  }
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw DataError("PNG encoding failed");
  return out;
}

void save_png(const RasterImage& img, const std::filesystem::path& path) { atomic_write(path, encode_png(img)); }

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  std::ranges::sort(out, [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return out;
}

}  // namespace activessf
