#include "toolgrasp/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "toolgrasp/errors.hpp"
#include "toolgrasp/rng.hpp"

namespace toolgrasp {

Var Tape::constant(Tensor value) { return record(std::move(value), nullptr); }

Var Tape::param(Param& p) {
  if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
  Var v = record(p.value, nullptr);
  nodes_.back().param = &p;
  return v;
}

Var Tape::record(Tensor value, BackwardFn backward) {
  nodes_.push_back({std::move(value), Tensor{}, std::move(backward), nullptr});
  return {nodes_.size() - 1};
}

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) {
    throw ShapeError("Tape::scalar: expected one element, got shape " +
                     shape_str(t.shape()));
  }
  return t[0];
}

void Tape::accumulate(Var v, const Tensor& g) {
  Node& n = nodes_.at(v.id);
  if (g.shape() != n.value.shape()) {
    throw ShapeError("gradient " + shape_str(g.shape()) + " for value " +
                     shape_str(n.value.shape()));
  }
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     shape_str(value(loss).shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor{};
  nodes_[loss.id].grad = Tensor(value(loss).shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace

Var conv2d(Tape& t, Var input, Var kernel, std::size_t stride,
           std::size_t padding) {
  Tensor out = toolgrasp::conv2d(t.value(input), t.value(kernel), stride,
                                 padding);
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(input);
    const Tensor& k = tp.value(kernel);
    tp.accumulate(input, kernels::conv2d_adjoint(g, k, stride, padding,
                                                 x.dim(1), x.dim(2)));
    tp.accumulate(kernel, kernels::conv2d_kernel_grad(x, g, k.dim(2), k.dim(3),
                                                      stride, padding));
  });
}

Var conv2d_transpose(Tape& t, Var input, Var kernel, std::size_t stride,
                     std::size_t padding, std::size_t output_padding) {
  Tensor out = toolgrasp::conv2d_transpose(t.value(input), t.value(kernel),
                                           stride, padding, output_padding);
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(input);
    const Tensor& k = tp.value(kernel);
    tp.accumulate(input, kernels::conv2d(g, k, stride, padding));
    // The transposed op is the adjoint of conv2d(g-shaped input); its kernel
    // gradient swaps the roles of input and output gradient.
    tp.accumulate(kernel, kernels::conv2d_kernel_grad(g, x, k.dim(2), k.dim(3),
                                                      stride, padding));
  });
}

Var add_channel_bias(Tape& t, Var x, Var bias) {
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  if (xv.rank() != 3 || bv.rank() != 1 || bv.dim(0) != xv.dim(0)) {
    throw ShapeError("add_channel_bias: input " + shape_str(xv.shape()) +
                     " and bias " + shape_str(bv.shape()));
  }
  Tensor out = xv;
  const std::size_t plane = xv.dim(1) * xv.dim(2);
  for (std::size_t c = 0; c < xv.dim(0); ++c) {
    double* row = out.data().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) row[i] += bv[c];
  }
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, g);
    const std::size_t channels = g.dim(0);
    const std::size_t n = g.dim(1) * g.dim(2);
    Tensor gb({channels});
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      const double* row = g.data().data() + c * n;
      for (std::size_t i = 0; i < n; ++i) acc += row[i];
      gb[c] = acc;
    }
    tp.accumulate(bias, gb);
  });
}

Var relu(Tape& t, Var x) {
  Tensor out = toolgrasp::relu(t.value(x));
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (!(xv[i] > 0.0)) gx[i] = 0.0;
    }
    tp.accumulate(x, gx);
  });
}

Var sigmoid(Tape& t, Var x) {
  Tensor out = toolgrasp::sigmoid(t.value(x));
  const Var self{t.size()};
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    const Tensor& sv = tp.value(self);
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= sv[i] * (1.0 - sv[i]);
    tp.accumulate(x, gx);
  });
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape("add", t.value(a), t.value(b));
  Tensor out = t.value(a);
  const Tensor& bv = t.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var mul(Tape& t, Var a, Var b) {
  require_same_shape("mul", t.value(a), t.value(b));
  Tensor out = t.value(a);
  const Tensor& bv = t.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value(a);
    const Tensor& bw = tp.value(b);
    Tensor ga = g;
    Tensor gb = g;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] *= bw[i];
      gb[i] *= av[i];
    }
    tp.accumulate(a, ga);
    tp.accumulate(b, gb);
  });
}

Var scale(Tape& t, Var x, double s) {
  Tensor out = t.value(x);
  for (double& v : out.data()) v *= s;
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor gx = g;
    for (double& v : gx.data()) v *= s;
    tp.accumulate(x, gx);
  });
}

Var sum(Tape& t, Var x) {
  double acc = 0.0;
  for (double v : t.value(x).data()) acc += v;
  return t.record(Tensor::scalar(acc), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, Tensor(tp.value(x).shape(), g[0]));
  });
}

Var global_avg_pool(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  if (xv.rank() != 3) {
    throw ShapeError("global_avg_pool: expected [C,H,W], got " +
                     shape_str(xv.shape()));
  }
  const std::size_t channels = xv.dim(0);
  const std::size_t n = xv.dim(1) * xv.dim(2);
  Tensor out({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    const double* row = xv.data().data() + c * n;
    for (std::size_t i = 0; i < n; ++i) acc += row[i];
    out[c] = acc / static_cast<double>(n);
  }
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    const Tensor& xs = tp.value(x);
    const std::size_t plane = xs.dim(1) * xs.dim(2);
    Tensor gx(xs.shape());
    for (std::size_t c = 0; c < xs.dim(0); ++c) {
      const double v = g[c] / static_cast<double>(plane);
      double* row = gx.data().data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) row[i] = v;
    }
    tp.accumulate(x, gx);
  });
}

Var linear(Tape& t, Var weight, Var x, Var bias) {
  const Tensor& w = t.value(weight);
  const Tensor& xv = t.value(x);
  const Tensor& b = t.value(bias);
  if (w.rank() != 2 || xv.rank() != 1 || b.rank() != 1 ||
      w.dim(1) != xv.dim(0) || w.dim(0) != b.dim(0)) {
    throw ShapeError("linear: weight " + shape_str(w.shape()) + ", input " +
                     shape_str(xv.shape()) + ", bias " + shape_str(b.shape()));
  }
  const std::size_t f = w.dim(0), d = w.dim(1);
  Tensor out({f});
  for (std::size_t i = 0; i < f; ++i) {
    double acc = b[i];
    for (std::size_t j = 0; j < d; ++j) acc += w[i * d + j] * xv[j];
    out[i] = acc;
  }
  return t.record(std::move(out), [=](Tape& tp, const Tensor& g) {
    const Tensor& wv = tp.value(weight);
    const Tensor& xs = tp.value(x);
    const std::size_t rows = wv.dim(0), cols = wv.dim(1);
    Tensor gw(wv.shape());
    Tensor gx(xs.shape());
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        gw[i * cols + j] = g[i] * xs[j];
        gx[j] += g[i] * wv[i * cols + j];
      }
    }
    tp.accumulate(weight, gw);
    tp.accumulate(x, gx);
    tp.accumulate(bias, g);
  });
}

Var mse_loss(Tape& t, Var pred, const Tensor& target) {
  const double value = toolgrasp::mse_loss(t.value(pred), target);
  return t.record(Tensor::scalar(value),
                  [=](Tape& tp, const Tensor& g) {
                    const Tensor& p = tp.value(pred);
                    Tensor gp(p.shape());
                    const double k = 2.0 * g[0] / static_cast<double>(p.size());
                    for (std::size_t i = 0; i < p.size(); ++i) {
                      gp[i] = k * (p[i] - target[i]);
                    }
                    tp.accumulate(pred, gp);
                  });
}

Var masked_mse_loss(Tape& t, Var pred, const Tensor& target,
                    const Tensor& mask) {
  const Tensor& p = t.value(pred);
  require_same_shape("masked_mse_loss", p, target);
  require_same_shape("masked_mse_loss", p, mask);
  double weight = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = p[i] - target[i];
    acc += mask[i] * r * r;
    weight += mask[i];
  }
  const double denom = std::max(1.0, weight);
  return t.record(Tensor::scalar(acc / denom),
                  [=](Tape& tp, const Tensor& g) {
                    const Tensor& pv = tp.value(pred);
                    Tensor gp(pv.shape());
                    const double k = 2.0 * g[0] / denom;
                    for (std::size_t i = 0; i < pv.size(); ++i) {
                      gp[i] = k * mask[i] * (pv[i] - target[i]);
                    }
                    tp.accumulate(pred, gp);
                  });
}

double finite_diff_check(const std::function<Var(Tape&)>& loss,
                         std::span<Param* const> params,
                         const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0) || options.epsilon > 1e-3) {
    throw DomainError("finite_diff_check: epsilon must lie in (0, 1e-3]");
  }
  for (Param* p : params) p->grad = Tensor(p->value.shape());

  Tape tape;
  const Var l = loss(tape);
  if (!std::isfinite(tape.scalar(l))) {
    throw DomainError("finite_diff_check: loss is not finite");
  }
  tape.backward(l);

  auto evaluate = [&]() {
    Tape probe;
    const double v = probe.scalar(loss(probe));
    if (!std::isfinite(v)) {
      throw DomainError("finite_diff_check: loss is not finite at a probe");
    }
    return v;
  };

  Rng rng(options.seed);
  double worst = 0.0;
  for (Param* p : params) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    if (options.max_coords_per_param != 0 &&
        options.max_coords_per_param < n) {
      rng.shuffle(coords);
      coords.resize(options.max_coords_per_param);
    }
    for (std::size_t i : coords) {
      const double saved = p->value[i];
      p->value[i] = saved + options.epsilon;
      const double up = evaluate();
      p->value[i] = saved - options.epsilon;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = p->grad[i];
      worst = std::max(worst, std::abs(analytic - numeric) /
                                  std::max(1.0, std::abs(numeric)));
    }
  }
  for (Param* p : params) p->zero_grad();
  return worst;
}

}  // namespace toolgrasp
