#include "hnlabel/png_io.hpp"

#include <png.h>

#include <cerrno>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

namespace hnl::png {
namespace {

struct FileCloser {
  void operator()(std::FILE *f) const {
    if (f)
      std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct ErrorSlot {
  char message[256] = {0};
};

void on_error(png_structp png, png_const_charp msg) {
  auto *slot = static_cast<ErrorSlot *>(png_get_error_ptr(png));
  if (slot)
    std::snprintf(slot->message, sizeof(slot->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<unsigned char> bytes; // tightly packed rows, native endian for 16-bit
  std::vector<png_bytep> rows;
};

// Returns an empty string on success, otherwise the failure reason. Kept free
// of non-trivial locals because libpng reports errors via longjmp.
std::string decode(std::FILE *fp, Decoded &out) {
  ErrorSlot slot;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &slot, on_error, on_warning);
  if (!png)
    return "cannot allocate PNG reader";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return "cannot allocate PNG info";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return slot.message[0] ? slot.message : "libpng error";
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  if (out.bit_depth == 16) {
    const std::uint16_t probe = 1;
    if (*reinterpret_cast<const unsigned char *>(&probe) == 1)
      png_set_swap(png);
  }
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.assign(stride * static_cast<std::size_t>(out.height), 0);
  out.rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y)
    out.rows[static_cast<std::size_t>(y)] =
        out.bytes.data() + stride * static_cast<std::size_t>(y);
  png_read_image(png, out.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return {};
}

std::string encode(std::FILE *fp, int width, int height, int bit_depth,
                   int color_type, const unsigned char *bytes,
                   std::size_t stride) {
  ErrorSlot slot;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &slot,
                                            on_error, on_warning);
  if (!png)
    return "cannot allocate PNG writer";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return "cannot allocate PNG info";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return slot.message[0] ? slot.message : "libpng error";
  }
  png_init_io(png, fp);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) {
    const std::uint16_t probe = 1;
    if (*reinterpret_cast<const unsigned char *>(&probe) == 1)
      png_set_swap(png);
  }
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(
                           bytes + stride * static_cast<std::size_t>(y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return {};
}

Decoded read_file(const std::filesystem::path &path, int want_depth,
                  int want_color, const char *what) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp)
    throw Error(path.string() + ": cannot open file (" + std::strerror(errno) +
                ")");
  unsigned char sig[8] = {0};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw Error(path.string() + ": unreadable format (not a PNG file)");
  std::rewind(fp.get());
  Decoded d;
  if (auto err = decode(fp.get(), d); !err.empty())
    throw Error(path.string() + ": unreadable format (" + err + ")");
  if (d.bit_depth != want_depth || d.color_type != want_color)
    throw Error(path.string() + ": unreadable format (expected " + what +
                ", got bit depth " + std::to_string(d.bit_depth) +
                ", color type " + std::to_string(d.color_type) + ")");
  return d;
}

void write_file(const std::filesystem::path &path, int width, int height,
                int bit_depth, int color_type, const unsigned char *bytes,
                std::size_t stride) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp)
    throw Error(path.string() + ": cannot create file (" +
                std::strerror(errno) + ")");
  if (auto err =
          encode(fp.get(), width, height, bit_depth, color_type, bytes, stride);
      !err.empty())
    throw Error(path.string() + ": PNG encode failed (" + err + ")");
  if (std::fflush(fp.get()) != 0)
    throw Error(path.string() + ": write failed");
}

void require_nonempty(const std::filesystem::path &path, int w, int h) {
  if (w <= 0 || h <= 0)
    throw Error(path.string() + ": refusing to write an empty image");
}

} // namespace

Raster<std::uint16_t> read_gray16(const std::filesystem::path &path) {
  auto d = read_file(path, 16, PNG_COLOR_TYPE_GRAY, "16-bit grayscale");
  Raster<std::uint16_t> out(d.width, d.height);
  std::memcpy(out.data(), d.bytes.data(), out.size() * sizeof(std::uint16_t));
  return out;
}

Raster<std::uint8_t> read_gray8(const std::filesystem::path &path) {
  auto d = read_file(path, 8, PNG_COLOR_TYPE_GRAY, "8-bit grayscale");
  Raster<std::uint8_t> out(d.width, d.height);
  std::memcpy(out.data(), d.bytes.data(), out.size());
  return out;
}

Raster<Rgb> read_rgb8(const std::filesystem::path &path) {
  auto d = read_file(path, 8, PNG_COLOR_TYPE_RGB, "8-bit RGB");
  Raster<Rgb> out(d.width, d.height);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {d.bytes[3 * i], d.bytes[3 * i + 1], d.bytes[3 * i + 2]};
  return out;
}

void write_gray16(const std::filesystem::path &path,
                  const Raster<std::uint16_t> &image) {
  require_nonempty(path, image.width(), image.height());
  write_file(path, image.width(), image.height(), 16, PNG_COLOR_TYPE_GRAY,
             reinterpret_cast<const unsigned char *>(image.data()),
             static_cast<std::size_t>(image.width()) * 2);
}

void write_gray8(const std::filesystem::path &path,
                 const Raster<std::uint8_t> &image) {
  require_nonempty(path, image.width(), image.height());
  write_file(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY,
             image.data(), static_cast<std::size_t>(image.width()));
}

void write_rgb8(const std::filesystem::path &path, const Raster<Rgb> &image) {
  require_nonempty(path, image.width(), image.height());
  static_assert(sizeof(Rgb) == 3);
  write_file(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB,
             reinterpret_cast<const unsigned char *>(image.data()),
             static_cast<std::size_t>(image.width()) * 3);
}

} // namespace hnl::png
