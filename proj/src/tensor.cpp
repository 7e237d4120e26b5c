#include "toolgrasp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "toolgrasp/errors.hpp"
#include "toolgrasp/rng.hpp"

namespace toolgrasp {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("Tensor: " + std::to_string(data_.size()) +
                     " values do not fit shape " + shape_str(shape_));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void he_uniform_init(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

void sgd_step(Param& p, double lr, double momentum) {
  if (!(lr >= 0.0) || !(momentum >= 0.0) || !(momentum < 1.0)) {
    throw DomainError("sgd_step: need lr >= 0 and momentum in [0, 1)");
  }
  if (p.value.shape() != p.grad.shape()) {
    throw ShapeError("sgd_step: value " + shape_str(p.value.shape()) +
                     " vs grad " + shape_str(p.grad.shape()));
  }
  auto value = p.value.data();
  auto grad = p.grad.data();
  if (momentum > 0.0) {
    if (p.velocity.shape() != p.value.shape()) p.velocity = Tensor(p.value.shape());
    auto vel = p.velocity.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      vel[i] = momentum * vel[i] + grad[i];
      value[i] -= lr * vel[i];
    }
  } else {
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * grad[i];
  }
  p.zero_grad();
}

void adam_step(Param& p, double lr, const AdamOptions& options) {
  if (!(lr >= 0.0) || !(options.beta1 >= 0.0 && options.beta1 < 1.0) ||
      !(options.beta2 >= 0.0 && options.beta2 < 1.0) || !(options.epsilon > 0.0)) {
    throw DomainError("adam_step: need lr >= 0, betas in [0, 1) and epsilon > 0");
  }
  if (p.value.shape() != p.grad.shape()) {
    throw ShapeError("adam_step: value " + shape_str(p.value.shape()) +
                     " vs grad " + shape_str(p.grad.shape()));
  }
  if (p.velocity.shape() != p.value.shape()) p.velocity = Tensor(p.value.shape());
  if (p.second_moment.shape() != p.value.shape()) p.second_moment = Tensor(p.value.shape());
  ++p.steps;
  const double t = static_cast<double>(p.steps);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  auto value = p.value.data();
  auto grad = p.grad.data();
  auto m = p.velocity.data();
  auto v = p.second_moment.data();
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * grad[i];
    v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * grad[i] * grad[i];
    value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options.epsilon);
  }
  p.zero_grad();
}

double inner_product(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("inner_product: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t padding) {
  if (stride == 0) throw ShapeError("convolution stride must be >= 1");
  const long long span = static_cast<long long>(in + 2 * padding) -
                         static_cast<long long>(k);
  if (span < 0) {
    throw ShapeError("convolution kernel " + std::to_string(k) +
                     " larger than padded input " +
                     std::to_string(in + 2 * padding));
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

namespace kernels {
namespace {

// Output indices o in [0, n_out) with 0 <= o*stride + offset < n_in, as a
// half-open range.
struct Range {
  std::size_t lo, hi;
};

Range valid_range(long long offset, std::size_t stride, std::size_t n_out,
                  std::size_t n_in) {
  const long long s = static_cast<long long>(stride);
  long long lo = 0;
  if (offset < 0) lo = (-offset + s - 1) / s;
  long long hi = static_cast<long long>(n_in) - offset;  // o*s < hi
  long long hi_idx = hi <= 0 ? 0 : (hi + s - 1) / s;
  hi_idx = std::min<long long>(hi_idx, static_cast<long long>(n_out));
  if (hi_idx < lo) hi_idx = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi_idx)};
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& k, std::size_t stride,
              std::size_t padding) {
  const std::size_t ci_n = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t co_n = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t ho = conv_out_extent(h, kh, stride, padding);
  const std::size_t wo = conv_out_extent(w, kw, stride, padding);
  Tensor out({co_n, ho, wo});
  const double* xd = x.data().data();
  const double* kd = k.data().data();
  double* od = out.data().data();
  const long long p = static_cast<long long>(padding);
  for (std::size_t co = 0; co < co_n; ++co) {
    for (std::size_t ci = 0; ci < ci_n; ++ci) {
      const double* xc = xd + ci * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const long long dy = static_cast<long long>(ky) - p;
        const Range ry = valid_range(dy, stride, ho, h);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const double kv = kd[((co * ci_n + ci) * kh + ky) * kw + kx];
          if (kv == 0.0) continue;
          const long long dx = static_cast<long long>(kx) - p;
          const Range rx = valid_range(dx, stride, wo, w);
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const double* xrow =
                xc + static_cast<std::size_t>(static_cast<long long>(oy * stride) + dy) * w;
            double* orow = od + (co * ho + oy) * wo;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              orow[ox] += kv * xrow[static_cast<long long>(ox * stride) + dx];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d_adjoint(const Tensor& y, const Tensor& k, std::size_t stride,
                      std::size_t padding, std::size_t out_h,
                      std::size_t out_w) {
  const std::size_t co_n = k.dim(0), ci_n = k.dim(1), kh = k.dim(2),
                    kw = k.dim(3);
  const std::size_t ho = y.dim(1), wo = y.dim(2);
  Tensor out({ci_n, out_h, out_w});
  const double* yd = y.data().data();
  const double* kd = k.data().data();
  double* od = out.data().data();
  const long long p = static_cast<long long>(padding);
  for (std::size_t co = 0; co < co_n; ++co) {
    for (std::size_t ci = 0; ci < ci_n; ++ci) {
      double* oc = od + ci * out_h * out_w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const long long dy = static_cast<long long>(ky) - p;
        const Range ry = valid_range(dy, stride, ho, out_h);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const double kv = kd[((co * ci_n + ci) * kh + ky) * kw + kx];
          if (kv == 0.0) continue;
          const long long dx = static_cast<long long>(kx) - p;
          const Range rx = valid_range(dx, stride, wo, out_w);
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            double* orow =
                oc + static_cast<std::size_t>(static_cast<long long>(oy * stride) + dy) * out_w;
            const double* yrow = yd + (co * ho + oy) * wo;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              orow[static_cast<long long>(ox * stride) + dx] += kv * yrow[ox];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d_kernel_grad(const Tensor& x, const Tensor& gy, std::size_t kh,
                          std::size_t kw, std::size_t stride,
                          std::size_t padding) {
  const std::size_t ci_n = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t co_n = gy.dim(0), ho = gy.dim(1), wo = gy.dim(2);
  Tensor gk({co_n, ci_n, kh, kw});
  const double* xd = x.data().data();
  const double* gd = gy.data().data();
  double* kd = gk.data().data();
  const long long p = static_cast<long long>(padding);
  for (std::size_t co = 0; co < co_n; ++co) {
    for (std::size_t ci = 0; ci < ci_n; ++ci) {
      const double* xc = xd + ci * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const long long dy = static_cast<long long>(ky) - p;
        const Range ry = valid_range(dy, stride, ho, h);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const long long dx = static_cast<long long>(kx) - p;
          const Range rx = valid_range(dx, stride, wo, w);
          double acc = 0.0;
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const double* xrow =
                xc + static_cast<std::size_t>(static_cast<long long>(oy * stride) + dy) * w;
            const double* grow = gd + (co * ho + oy) * wo;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              acc += grow[ox] * xrow[static_cast<long long>(ox * stride) + dx];
            }
          }
          kd[((co * ci_n + ci) * kh + ky) * kw + kx] = acc;
        }
      }
    }
  }
  return gk;
}

}  // namespace kernels

namespace {

void check_conv_shapes(const char* op, const Tensor& input,
                       const Tensor& kernel, std::size_t in_channel_axis) {
  if (input.rank() != 3 || kernel.rank() != 4) {
    throw ShapeError(std::string(op) + ": input " + shape_str(input.shape()) +
                     " must be [C,H,W] and kernel " +
                     shape_str(kernel.shape()) + " [C_out,C_in,kH,kW]");
  }
  if (kernel.dim(in_channel_axis) != input.dim(0)) {
    throw ShapeError(std::string(op) + ": channel mismatch between input " +
                     shape_str(input.shape()) + " and kernel " +
                     shape_str(kernel.shape()));
  }
  if (kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0) {
    throw ShapeError(std::string(op) + ": kernel extents must be odd, got " +
                     shape_str(kernel.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding) {
  check_conv_shapes("conv2d", input, kernel, 1);
  return kernels::conv2d(input, kernel, stride, padding);
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel,
                        std::size_t stride, std::size_t padding,
                        std::size_t output_padding) {
  check_conv_shapes("conv2d_transpose", input, kernel, 0);
  if (stride == 0 || output_padding >= stride) {
    throw ShapeError("conv2d_transpose: need stride >= 1 and output_padding < stride");
  }
  const auto extent = [&](std::size_t in, std::size_t k) -> std::size_t {
    const long long e = static_cast<long long>((in - 1) * stride + k +
                                               output_padding) -
                        2 * static_cast<long long>(padding);
    if (e < 1) {
      throw ShapeError("conv2d_transpose: empty output for input " +
                       shape_str(input.shape()) + " and kernel " +
                       shape_str(kernel.shape()));
    }
    return static_cast<std::size_t>(e);
  };
  const std::size_t oh = extent(input.dim(1), kernel.dim(2));
  const std::size_t ow = extent(input.dim(2), kernel.dim(3));
  return kernels::conv2d_adjoint(input, kernel, stride, padding, oh, ow);
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v < 0.0 ? 0.0 : v;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

double mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  if (pred.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    acc += r * r;
  }
  return acc / static_cast<double>(pred.size());
}

}  // namespace toolgrasp
