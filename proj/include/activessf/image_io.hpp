#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "activessf/raster.hpp"

namespace activessf {

// Decodes PNG or JPEG (anything the codec recognises) to 8-bit RGB. Grey and
// alpha inputs are converted. Throws DataError for unreadable or corrupt data.
RasterImage decode_image(std::span<const std::uint8_t> bytes);
RasterImage load_image(const std::filesystem::path& path);

// Lossless PNG; identical pixels give identical bytes.
std::vector<std::uint8_t> encode_png(const RasterImage& img);
void save_png(const RasterImage& img, const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);
// Image files directly under `dir`, sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace activessf
