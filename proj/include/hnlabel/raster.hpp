#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hnlabel/error.hpp"

namespace hnl {

// Row-major H x W grid. Indexing is (u, v) = (column, row) to match pixel
// coordinates used by the projection code.
template <typename T> class Raster {
public:
  Raster() = default;
  Raster(int width, int height, const T &fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked(width, height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T &operator()(int u, int v) { return data_[index(u, v)]; }
  const T &operator()(int u, int v) const { return data_[index(u, v)]; }
  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }
  bool contains(int u, int v) const {
    return u >= 0 && v >= 0 && u < width_ && v < height_;
  }
  bool same_shape(int width, int height) const {
    return width_ == width && height_ == height;
  }
  template <typename U> bool same_shape(const Raster<U> &other) const {
    return width_ == other.width() && height_ == other.height();
  }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  T *data() { return data_.data(); }
  const T *data() const { return data_.data(); }

  bool operator==(const Raster &) const = default;

private:
  static long long checked(int width, int height) {
    if (width < 0 || height < 0)
      throw Error("raster dimensions must be non-negative");
    return static_cast<long long>(width) * height;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Raster<std::uint8_t>;
using LabelRaster = Raster<std::uint8_t>;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb &) const = default;
};

} // namespace hnl
