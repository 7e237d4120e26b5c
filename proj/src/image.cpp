#include "toolgrasp/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "toolgrasp/errors.hpp"

namespace toolgrasp {

Tensor to_tensor(const Plane& p) {
  return Tensor({1, p.height, p.width}, p.values);
}

Plane channel_plane(const Tensor& t, std::size_t c) {
  if (t.rank() != 3 || c >= t.dim(0)) {
    throw ShapeError("channel_plane: channel " + std::to_string(c) +
                     " of " + shape_str(t.shape()));
  }
  Plane p(t.dim(1), t.dim(2));
  const std::size_t n = p.height * p.width;
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(c * n), n,
              p.values.begin());
  return p;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty set");
  const auto mid = values.begin() +
                   static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

Plane median3(const Plane& p) {
  Plane out(p.height, p.width);
  std::array<double, 9> win{};
  const auto h = static_cast<long long>(p.height);
  const auto w = static_cast<long long>(p.width);
  for (long long r = 0; r < h; ++r) {
    for (long long c = 0; c < w; ++c) {
      std::size_t n = 0;
      for (long long dr = -1; dr <= 1; ++dr) {
        for (long long dc = -1; dc <= 1; ++dc) {
          const long long rr = std::clamp(r + dr, 0LL, h - 1);
          const long long cc = std::clamp(c + dc, 0LL, w - 1);
          win[n++] = p.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      }
      std::nth_element(win.begin(), win.begin() + 4, win.end());
      out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = win[4];
    }
  }
  return out;
}

Plane gaussian_blur(const Plane& p, double sigma) {
  if (!(sigma > 0.0)) return p;
  const auto radius = static_cast<long long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : kernel) v /= total;

  const auto h = static_cast<long long>(p.height);
  const auto w = static_cast<long long>(p.width);
  Plane tmp(p.height, p.width);
  for (long long r = 0; r < h; ++r) {
    for (long long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (long long i = -radius; i <= radius; ++i) {
        const long long cc = std::clamp(c + i, 0LL, w - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               p.values[static_cast<std::size_t>(r * w + cc)];
      }
      tmp.values[static_cast<std::size_t>(r * w + c)] = acc;
    }
  }
  Plane out(p.height, p.width);
  for (long long r = 0; r < h; ++r) {
    for (long long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (long long i = -radius; i <= radius; ++i) {
        const long long rr = std::clamp(r + i, 0LL, h - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               tmp.values[static_cast<std::size_t>(rr * w + c)];
      }
      out.values[static_cast<std::size_t>(r * w + c)] = acc;
    }
  }
  return out;
}

double sample_bilinear(const Plane& p, double x, double y, double fill) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto x0 = static_cast<long long>(fx);
  const auto y0 = static_cast<long long>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  auto get = [&](long long r, long long c) {
    if (r < 0 || c < 0 || r >= static_cast<long long>(p.height) ||
        c >= static_cast<long long>(p.width)) {
      return fill;
    }
    return p.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  return (1 - ay) * ((1 - ax) * get(y0, x0) + ax * get(y0, x0 + 1)) +
         ay * ((1 - ax) * get(y0 + 1, x0) + ax * get(y0 + 1, x0 + 1));
}

Vec2 CropWindow::to_crop(Vec2 src) const {
  const double s = scale();
  return {(src.x - origin.x) * s, (src.y - origin.y) * s};
}

Vec2 CropWindow::to_source(Vec2 crop) const {
  const double s = scale();
  return {crop.x / s + origin.x, crop.y / s + origin.y};
}

CropWindow square_window(Vec2 center, double side, std::size_t out_size) {
  if (!(side > 0.0) || out_size == 0) {
    throw DomainError("square_window: side and output size must be positive");
  }
  return {{center.x - 0.5 * side, center.y - 0.5 * side}, side, out_size};
}

Plane crop_resample(const Plane& src, const CropWindow& win, double fill) {
  Plane out(win.out_size, win.out_size);
  for (std::size_t r = 0; r < win.out_size; ++r) {
    for (std::size_t c = 0; c < win.out_size; ++c) {
      const Vec2 s = win.to_source({static_cast<double>(c), static_cast<double>(r)});
      out.at(r, c) = sample_bilinear(src, s.x, s.y, fill);
    }
  }
  return out;
}

void RgbImage::set(long long row, long long col, Rgb c) {
  if (row < 0 || col < 0 || row >= static_cast<long long>(height) ||
      col >= static_cast<long long>(width)) {
    return;
  }
  at(static_cast<std::size_t>(row), static_cast<std::size_t>(col)) = c;
}

RgbImage gray_image(const Plane& p, double lo, double hi) {
  RgbImage img(p.height, p.width);
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double t = std::clamp((p.values[i] - lo) / span, 0.0, 1.0);
    const auto g = static_cast<std::uint8_t>(std::lround(255.0 * t));
    img.pixels[i] = {g, g, g};
  }
  return img;
}

void draw_line(RgbImage& img, Vec2 a, Vec2 b, Rgb color) {
  long long x0 = std::lround(a.x), y0 = std::lround(a.y);
  const long long x1 = std::lround(b.x), y1 = std::lround(b.y);
  const long long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const long long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long long err = dx + dy;
  for (;;) {
    img.set(y0, x0, color);
    if (x0 == x1 && y0 == y1) break;
    const long long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_polygon(RgbImage& img, const std::vector<Vec2>& poly, Rgb color) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    draw_line(img, poly[i], poly[(i + 1) % poly.size()], color);
  }
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const Rgb& px : img.pixels) {
    out.write(reinterpret_cast<const char*>(px.data()), 3);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || !in || maxval != 255) {
    throw ParseError("not an 8-bit P6 pixmap: " + path.string());
  }
  in.get();
  RgbImage img(h, w);
  for (Rgb& px : img.pixels) in.read(reinterpret_cast<char*>(px.data()), 3);
  if (!in) throw ParseError("truncated P6 pixmap: " + path.string());
  return img;
}

}  // namespace toolgrasp
