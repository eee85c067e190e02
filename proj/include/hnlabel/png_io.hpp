#pragma once

#include <cstdint>
#include <filesystem>

#include "hnlabel/raster.hpp"

namespace hnl::png {

// Strict readers: the file must already be in the requested pixel format
// (no silent bit-depth or channel conversion). Failures throw hnl::Error with
// the path and the reason.
Raster<std::uint16_t> read_gray16(const std::filesystem::path &path);
Raster<std::uint8_t> read_gray8(const std::filesystem::path &path);
Raster<Rgb> read_rgb8(const std::filesystem::path &path);

// Writers produce byte-identical files for identical rasters.
void write_gray16(const std::filesystem::path &path,
                  const Raster<std::uint16_t> &image);
void write_gray8(const std::filesystem::path &path,
                 const Raster<std::uint8_t> &image);
void write_rgb8(const std::filesystem::path &path, const Raster<Rgb> &image);

} // namespace hnl::png
