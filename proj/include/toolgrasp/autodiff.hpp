#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "toolgrasp/tensor.hpp"

namespace toolgrasp {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Reverse-mode tape. Every recorded op appends a node holding its value and
// a backward rule; `backward` walks the nodes in reverse. A tape is meant to
// live for one step and is not shared between threads.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Var constant(Tensor value);
  // Leaf bound to `p`: its gradient is accumulated into p.grad.
  Var param(Param& p);

  Var record(Tensor value, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;

  // Adds `g` into the gradient slot of `v`.
  void accumulate(Var v, const Tensor& g);

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one element.
  void backward(Var loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Param* param = nullptr;
  };
  std::vector<Node> nodes_;
};

// Recorded ops. Shapes follow the raw tensor forms in tensor.hpp.
Var conv2d(Tape& t, Var input, Var kernel, std::size_t stride,
           std::size_t padding);
Var conv2d_transpose(Tape& t, Var input, Var kernel, std::size_t stride,
                     std::size_t padding, std::size_t output_padding = 0);
// x[C,H,W] + b[C] broadcast over the plane.
Var add_channel_bias(Tape& t, Var x, Var bias);
Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var add(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var x, double s);
Var sum(Tape& t, Var x);
// [C,H,W] -> [C]
Var global_avg_pool(Tape& t, Var x);
// W[F,D] x[D] + b[F] -> [F]
Var linear(Tape& t, Var weight, Var x, Var bias);
// Mean squared residual against a constant target.
Var mse_loss(Tape& t, Var pred, const Tensor& target);
// sum(mask * r^2) / max(1, sum(mask)) against a constant target and mask.
Var masked_mse_loss(Tape& t, Var pred, const Tensor& target,
                    const Tensor& mask);

struct GradCheckOptions {
  double epsilon = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample of this many
  // coordinates per parameter tensor.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

// Compares the tape gradient of the scalar built by `loss` against central
// differences (f(p+e) - f(p-e)) / 2e, coordinate by coordinate. Returns the
// maximum of |analytic - numeric| / max(1, |numeric|). `loss` must build its
// graph through Tape::param on the given params.
double finite_diff_check(const std::function<Var(Tape&)>& loss,
                         std::span<Param* const> params,
                         const GradCheckOptions& options = {});

}  // namespace toolgrasp
