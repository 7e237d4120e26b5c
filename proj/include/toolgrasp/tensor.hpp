#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace toolgrasp {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Dense row-major tensor of 64-bit reals.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // [C,H,W] indexing.
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Trainable tensor with its gradient accumulator and an optional momentum
// buffer (allocated on first use).
struct Param {
  Param() = default;
  explicit Param(Tensor v) : value(std::move(v)), grad(value.shape()) {}

  Tensor value;
  Tensor grad;
  Tensor velocity;       // momentum buffer, or Adam's first moment
  Tensor second_moment;  // Adam only
  std::size_t steps = 0;

  void zero_grad() { grad.fill(0.0); }
};

class Rng;

// He-uniform: U(-b, b) with b = sqrt(6 / fan_in).
void he_uniform_init(Tensor& t, std::size_t fan_in, Rng& rng);

// value <- value - lr * grad (or the momentum variant when momentum > 0);
// grad is zeroed afterwards. lr must be positive, or exactly zero for a
// no-op step.
void sgd_step(Param& p, double lr, double momentum = 0.0);

// Adam with bias correction; grad is zeroed afterwards.
struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};
void adam_step(Param& p, double lr, const AdamOptions& options = {});

double inner_product(const Tensor& a, const Tensor& b);

// Output extent of a strided convolution; throws ShapeError when < 1.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t padding);

// Raw kernels on [C,H,W] inputs with [C_out,C_in,kH,kW] kernels. These are
// the building blocks of the recorded ops in autodiff.hpp.
namespace kernels {

// Cross-correlation: y[o] = sum_ci,a k[o,ci,a] x[ci, o*s + a - p].
Tensor conv2d(const Tensor& x, const Tensor& k, std::size_t stride,
              std::size_t padding);

// Adjoint of conv2d: maps [C_out,H',W'] back to [C_in,out_h,out_w].
Tensor conv2d_adjoint(const Tensor& y, const Tensor& k, std::size_t stride,
                      std::size_t padding, std::size_t out_h,
                      std::size_t out_w);

// Kernel gradient of conv2d given its input x and output gradient gy.
Tensor conv2d_kernel_grad(const Tensor& x, const Tensor& gy, std::size_t kh,
                          std::size_t kw, std::size_t stride,
                          std::size_t padding);

}  // namespace kernels

// Shape-checked public forms.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding);

// Transposed convolution; `output_padding` (< stride) selects among the
// output sizes that a strided conv2d maps onto the same input extent.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel,
                        std::size_t stride, std::size_t padding,
                        std::size_t output_padding = 0);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
double mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace toolgrasp
