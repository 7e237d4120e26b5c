#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "toolgrasp/geometry.hpp"
#include "toolgrasp/tensor.hpp"

namespace toolgrasp {

// Single-channel H x W plane of reals, row-major.
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}

  double& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
  double at(std::size_t row, std::size_t col) const {
    return values[row * width + col];
  }
  bool empty() const { return values.empty(); }

  friend bool operator==(const Plane&, const Plane&) = default;
};

Tensor to_tensor(const Plane& p);                // [1,H,W]
Plane channel_plane(const Tensor& t, std::size_t c);  // from [C,H,W]

// Lower median ((n-1)/2-th order statistic).
double median(std::vector<double> values);

// 3x3 median filter with edge replication.
Plane median3(const Plane& p);

// Separable Gaussian blur with edge replication; sigma <= 0 returns a copy.
Plane gaussian_blur(const Plane& p, double sigma);

// Bilinear sample at fractional (x=col, y=row); `fill` outside the plane.
double sample_bilinear(const Plane& p, double x, double y, double fill);

// Square window of side `side` (source pixels) centred on `center`,
// resampled to out_size x out_size. Source pixels map to crop pixels by
// crop = (src - origin) * out_size / side, with origin = center - side/2.
struct CropWindow {
  Vec2 origin;
  double side = 0.0;
  std::size_t out_size = 0;

  double scale() const { return static_cast<double>(out_size) / side; }
  Vec2 to_crop(Vec2 src) const;
  Vec2 to_source(Vec2 crop) const;
};

CropWindow square_window(Vec2 center, double side, std::size_t out_size);
Plane crop_resample(const Plane& src, const CropWindow& win, double fill);

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Rgb> pixels;

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w, Rgb fill = {0, 0, 0})
      : height(h), width(w), pixels(h * w, fill) {}

  Rgb& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  const Rgb& at(std::size_t row, std::size_t col) const {
    return pixels[row * width + col];
  }
  void set(long long row, long long col, Rgb c);

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Linear gray mapping of [lo, hi] onto 0..255.
RgbImage gray_image(const Plane& p, double lo, double hi);
void draw_line(RgbImage& img, Vec2 a, Vec2 b, Rgb color);
void draw_polygon(RgbImage& img, const std::vector<Vec2>& poly, Rgb color);

// Binary P6 file.
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);

}  // namespace toolgrasp
