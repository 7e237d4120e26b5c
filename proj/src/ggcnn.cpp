#include "toolgrasp/ggcnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "toolgrasp/errors.hpp"
#include "toolgrasp/rng.hpp"

namespace toolgrasp {

std::size_t GgcnnConfig::total_stride() const {
  std::size_t s = 1;
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) s *= stride;
  return s;
}

KeyValueConfig GgcnnConfig::to_kv() const {
  KeyValueConfig kv;
  std::string chans;
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
    if (i) chans += ',';
    chans += std::to_string(encoder_channels[i]);
  }
  kv.set("encoder_channels", chans);
  kv.set("kernel_size", static_cast<long long>(kernel_size));
  kv.set("stride", static_cast<long long>(stride));
  kv.set("input_channels", static_cast<long long>(input_channels));
  kv.set("width_max", width_max);
  kv.set("smoothing_sigma", smoothing_sigma);
  kv.set("learning_rate", learning_rate);
  kv.set("momentum", momentum);
  kv.set("optimizer", optimizer);
  kv.set("quality_weight", quality_weight);
  kv.set("epochs", static_cast<long long>(epochs));
  kv.set("seed", static_cast<long long>(seed));
  kv.set("zero_init_heads", static_cast<long long>(zero_init_heads ? 1 : 0));
  return kv;
}

GgcnnConfig training_config() {
  GgcnnConfig c;
  c.optimizer = "adam";
  c.learning_rate = 1e-3;
  c.quality_weight = 10.0;
  c.epochs = 25;
  return c;
}

GgcnnConfig GgcnnConfig::from_kv(const KeyValueConfig& kv) {
  GgcnnConfig c;
  if (kv.has("encoder_channels")) {
    c.encoder_channels.clear();
    for (long long v : kv.get_int_list("encoder_channels")) {
      if (v <= 0) throw ConfigError("encoder_channels must be positive");
      c.encoder_channels.push_back(static_cast<std::size_t>(v));
    }
  }
  auto positive = [&](const char* key, long long fallback) {
    const long long v = kv.get_int_or(key, fallback);
    if (v <= 0) throw ConfigError(std::string(key) + " must be positive");
    return static_cast<std::size_t>(v);
  };
  c.kernel_size = positive("kernel_size", static_cast<long long>(c.kernel_size));
  c.stride = positive("stride", static_cast<long long>(c.stride));
  c.input_channels =
      positive("input_channels", static_cast<long long>(c.input_channels));
  c.width_max = kv.get_double_or("width_max", c.width_max);
  c.smoothing_sigma = kv.get_double_or("smoothing_sigma", c.smoothing_sigma);
  c.learning_rate = kv.get_double_or("learning_rate", c.learning_rate);
  c.momentum = kv.get_double_or("momentum", c.momentum);
  c.optimizer = kv.get_or("optimizer", c.optimizer);
  c.quality_weight = kv.get_double_or("quality_weight", c.quality_weight);
  if (!(c.quality_weight > 0.0)) throw ConfigError("quality_weight must be positive");
  if (c.optimizer != "sgd" && c.optimizer != "adam") {
    throw ConfigError("optimizer must be sgd or adam");
  }
  c.epochs = static_cast<std::size_t>(
      kv.get_int_or("epochs", static_cast<long long>(c.epochs)));
  c.seed = static_cast<std::uint64_t>(
      kv.get_int_or("seed", static_cast<long long>(c.seed)));
  c.zero_init_heads = kv.get_int_or("zero_init_heads", 0) != 0;
  if (c.encoder_channels.empty()) throw ConfigError("encoder_channels is empty");
  if (c.kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
  if (!(c.width_max > 0.0)) throw ConfigError("width_max must be positive");
  return c;
}

Plane normalize_depth(const Plane& depth) {
  const double med = median(depth.values);
  Plane out(depth.height, depth.width);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    const double d = std::clamp(depth.values[i] - med, -kDepthClamp, kDepthClamp);
    out.values[i] = d / kDepthClamp;
  }
  return out;
}

GraspNet::GraspNet(GgcnnConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.encoder_channels.empty() || cfg_.kernel_size % 2 == 0 ||
      cfg_.stride == 0 || cfg_.input_channels == 0) {
    throw ConfigError("GraspNet: invalid architecture");
  }
  Rng rng(cfg_.seed);
  const std::size_t k = cfg_.kernel_size;
  const auto& ch = cfg_.encoder_channels;
  const std::size_t layers = ch.size();

  std::size_t in = cfg_.input_channels;
  for (std::size_t i = 0; i < layers; ++i) {
    Param kernel(Tensor({ch[i], in, k, k}));
    he_uniform_init(kernel.value, in * k * k, rng);
    enc_kernel_.push_back(std::move(kernel));
    enc_bias_.emplace_back(Tensor({ch[i]}));
    in = ch[i];
  }
  for (std::size_t j = 0; j < layers; ++j) {
    const std::size_t from = ch[layers - 1 - j];
    const std::size_t to = j + 1 < layers ? ch[layers - 2 - j] : ch[0];
    Param kernel(Tensor({from, to, k, k}));
    // A strided transposed conv feeds each output from about k*k/(s*s) taps.
    const std::size_t taps = std::max<std::size_t>(1, k * k / (cfg_.stride * cfg_.stride));
    he_uniform_init(kernel.value, from * taps, rng);
    dec_kernel_.push_back(std::move(kernel));
    dec_bias_.emplace_back(Tensor({to}));
  }
  for (int h = 0; h < 4; ++h) {
    Param kernel(Tensor({1, ch[0], 1, 1}));
    if (!cfg_.zero_init_heads) he_uniform_init(kernel.value, ch[0], rng);
    head_kernel_.push_back(std::move(kernel));
    head_bias_.emplace_back(Tensor({1}));
  }
}

void GraspNet::check_input(const Tensor& input) const {
  const std::size_t s = cfg_.total_stride();
  if (input.rank() != 3 || input.dim(0) != cfg_.input_channels ||
      input.dim(1) == 0 || input.dim(2) == 0 || input.dim(1) % s != 0 ||
      input.dim(2) % s != 0) {
    throw ShapeError("GraspNet: input " + shape_str(input.shape()) + " must be [" +
                     std::to_string(cfg_.input_channels) +
                     ",H,W] with H and W multiples of " + std::to_string(s));
  }
}

GraspNet::Graph GraspNet::build_impl(
    Tape& tape, const Tensor& input,
    const std::function<Var(Param&)>& leaf) const {
  check_input(input);
  const std::size_t k = cfg_.kernel_size;
  const std::size_t s = cfg_.stride;
  const std::size_t pad = k / 2;
  // Input extents are multiples of the stride, so this output padding makes
  // every transposed conv exactly undo its encoder counterpart.
  const long long r = (2 * static_cast<long long>(pad) - static_cast<long long>(k)) %
                      static_cast<long long>(s);
  const auto out_pad =
      static_cast<std::size_t>((r + static_cast<long long>(s)) % static_cast<long long>(s));

  auto p = [&](const Param& param) { return leaf(const_cast<Param&>(param)); };

  Var x = tape.constant(input);
  for (std::size_t i = 0; i < enc_kernel_.size(); ++i) {
    x = conv2d(tape, x, p(enc_kernel_[i]), s, pad);
    x = relu(tape, add_channel_bias(tape, x, p(enc_bias_[i])));
  }
  const Var trunk = x;
  for (std::size_t j = 0; j < dec_kernel_.size(); ++j) {
    x = conv2d_transpose(tape, x, p(dec_kernel_[j]), s, pad, out_pad);
    x = relu(tape, add_channel_bias(tape, x, p(dec_bias_[j])));
  }
  auto head = [&](std::size_t h) {
    return add_channel_bias(tape, conv2d(tape, x, p(head_kernel_[h]), 1, 0),
                            p(head_bias_[h]));
  };
  Graph g;
  g.quality = sigmoid(tape, head(0));
  g.cos2t = head(1);
  g.sin2t = head(2);
  g.width = head(3);
  g.trunk = trunk;
  return g;
}

GraspNet::Graph GraspNet::build(Tape& tape, const Tensor& input,
                                bool trainable) {
  if (trainable) {
    return build_impl(tape, input, [&](Param& prm) { return tape.param(prm); });
  }
  return build_impl(tape, input,
                    [&](Param& prm) { return tape.constant(prm.value); });
}

GraspMaps GraspNet::forward(const Tensor& input) const {
  Tape tape;
  const Graph g = build_impl(
      tape, input, [&](Param& prm) { return tape.constant(prm.value); });
  GraspMaps maps;
  maps.quality = channel_plane(tape.value(g.quality), 0);
  maps.cos2t = channel_plane(tape.value(g.cos2t), 0);
  maps.sin2t = channel_plane(tape.value(g.sin2t), 0);
  maps.width = channel_plane(tape.value(g.width), 0);
  for (double& v : maps.quality.values) v = std::clamp(v, 0.0, 1.0);
  for (double& v : maps.cos2t.values) v = std::clamp(v, -1.0, 1.0);
  for (double& v : maps.sin2t.values) v = std::clamp(v, -1.0, 1.0);
  for (double& v : maps.width.values) {
    v = std::clamp(v * cfg_.width_max, 0.0, cfg_.width_max);
  }
  return maps;
}

Tensor GraspNet::pooled_trunk(const Tensor& input) const {
  Tape tape;
  const Graph g = build_impl(
      tape, input, [&](Param& prm) { return tape.constant(prm.value); });
  return tape.value(global_avg_pool(tape, g.trunk));
}

std::vector<Param*> GraspNet::params() {
  std::vector<Param*> out;
  for (auto* group : {&enc_kernel_, &enc_bias_, &dec_kernel_, &dec_bias_,
                      &head_kernel_, &head_bias_}) {
    for (Param& prm : *group) out.push_back(&prm);
  }
  return out;
}

namespace {

const char* const kHeadNames[4] = {"quality", "cos2t", "sin2t", "width"};

}  // namespace

std::vector<std::pair<std::string, Param*>> GraspNet::named_slots() {
  std::vector<std::pair<std::string, Param*>> slots;
  for (std::size_t i = 0; i < enc_kernel_.size(); ++i) {
    slots.emplace_back("enc" + std::to_string(i) + ".kernel", &enc_kernel_[i]);
    slots.emplace_back("enc" + std::to_string(i) + ".bias", &enc_bias_[i]);
  }
  for (std::size_t i = 0; i < dec_kernel_.size(); ++i) {
    slots.emplace_back("dec" + std::to_string(i) + ".kernel", &dec_kernel_[i]);
    slots.emplace_back("dec" + std::to_string(i) + ".bias", &dec_bias_[i]);
  }
  for (std::size_t h = 0; h < 4; ++h) {
    slots.emplace_back(std::string("head.") + kHeadNames[h] + ".kernel",
                       &head_kernel_[h]);
    slots.emplace_back(std::string("head.") + kHeadNames[h] + ".bias",
                       &head_bias_[h]);
  }
  return slots;
}

std::vector<NamedTensor> GraspNet::state() const {
  std::vector<NamedTensor> out;
  for (const auto& [name, slot] : const_cast<GraspNet*>(this)->named_slots()) {
    out.push_back({name, slot->value});
  }
  return out;
}

void GraspNet::load_state(const std::vector<NamedTensor>& entries) {
  for (auto& [name, slot] : named_slots()) {
    const auto it = std::find_if(entries.begin(), entries.end(),
                                 [&](const NamedTensor& e) { return e.name == name; });
    if (it == entries.end()) {
      throw ParseError("checkpoint lacks tensor '" + name + "'");
    }
    if (it->tensor.shape() != slot->value.shape()) {
      throw ShapeError("checkpoint tensor '" + name + "' has shape " +
                       shape_str(it->tensor.shape()) + ", model expects " +
                       shape_str(slot->value.shape()));
    }
    slot->value = it->tensor;
    slot->grad = Tensor(slot->value.shape());
    slot->velocity = Tensor{};
  }
}

std::uint64_t GraspNet::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const NamedTensor& e : state()) {
    for (double v : e.tensor.data()) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

void GraspNet::save(const std::filesystem::path& path) const {
  save_checkpoint(path, state());
  auto sidecar = path;
  sidecar += ".cfg";
  cfg_.to_kv().save(sidecar);
}

GraspNet GraspNet::load(const std::filesystem::path& path) {
  auto sidecar = path;
  sidecar += ".cfg";
  GraspNet net(GgcnnConfig::from_kv(KeyValueConfig::load(sidecar)));
  net.load_state(load_checkpoint(path));
  return net;
}

GraspMaps encode_targets(const std::vector<GraspRect>& gts, std::size_t height,
                         std::size_t width) {
  GraspMaps m{Plane(height, width), Plane(height, width), Plane(height, width),
              Plane(height, width)};
  for (const GraspRect& g : gts) {
    const double c = std::cos(g.theta());
    const double s = std::sin(g.theta());
    const double half_along = g.w() / 6.0;  // centre third of the opening
    const double half_across = g.h() / 2.0;
    const double reach = std::abs(half_along * c) + std::abs(half_across * s);
    const double reach_y = std::abs(half_along * s) + std::abs(half_across * c);
    const auto r0 = static_cast<long long>(std::floor(g.y() - reach_y));
    const auto r1 = static_cast<long long>(std::ceil(g.y() + reach_y));
    const auto c0 = static_cast<long long>(std::floor(g.x() - reach));
    const auto c1 = static_cast<long long>(std::ceil(g.x() + reach));
    const double cos2 = std::cos(2.0 * g.theta());
    const double sin2 = std::sin(2.0 * g.theta());
    for (long long r = std::max(0LL, r0);
         r <= std::min(r1, static_cast<long long>(height) - 1); ++r) {
      for (long long col = std::max(0LL, c0);
           col <= std::min(c1, static_cast<long long>(width) - 1); ++col) {
        const double dx = static_cast<double>(col) - g.x();
        const double dy = static_cast<double>(r) - g.y();
        const double along = dx * c + dy * s;
        const double across = -dx * s + dy * c;
        if (std::abs(along) > half_along || std::abs(across) > half_across) {
          continue;
        }
        const auto rr = static_cast<std::size_t>(r);
        const auto cc = static_cast<std::size_t>(col);
        m.quality.at(rr, cc) = 1.0;
        m.cos2t.at(rr, cc) = cos2;
        m.sin2t.at(rr, cc) = sin2;
        m.width.at(rr, cc) = g.w();
      }
    }
  }
  return m;
}

Plane target_mask(const GraspMaps& targets) {
  Plane mask(targets.quality.height, targets.quality.width);
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    mask.values[i] = targets.quality.values[i] > 0.0 ? 1.0 : 0.0;
  }
  return mask;
}

std::vector<ScoredGrasp> decode_grasps(const GraspMaps& maps, std::size_t k,
                                       double smoothing_sigma) {
  if (k == 0) throw DomainError("decode_grasps: k must be >= 1");
  const Plane q = gaussian_blur(maps.quality, smoothing_sigma);
  const auto h = static_cast<long long>(q.height);
  const auto w = static_cast<long long>(q.width);

  std::vector<std::size_t> peaks;
  for (long long r = 0; r < h; ++r) {
    for (long long c = 0; c < w; ++c) {
      const double v = q.values[static_cast<std::size_t>(r * w + c)];
      bool is_peak = true;
      for (long long dr = -1; dr <= 1 && is_peak; ++dr) {
        for (long long dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const long long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
          const double n = q.values[static_cast<std::size_t>(rr * w + cc)];
          const bool precedes = dr < 0 || (dr == 0 && dc < 0);
          if (precedes ? !(v > n) : (v < n)) {
            is_peak = false;
            break;
          }
        }
      }
      if (is_peak) peaks.push_back(static_cast<std::size_t>(r * w + c));
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) {
    return q.values[a] > q.values[b];
  });
  if (peaks.size() > k) peaks.resize(k);

  std::vector<ScoredGrasp> out;
  out.reserve(peaks.size());
  for (std::size_t idx : peaks) {
    const std::size_t row = idx / q.width;
    const std::size_t col = idx % q.width;
    const double theta =
        0.5 * std::atan2(maps.sin2t.values[idx], maps.cos2t.values[idx]);
    const double gw = std::max(maps.width.values[idx], 1.0);
    out.push_back({GraspRect(static_cast<double>(col), static_cast<double>(row),
                             gw, 0.5 * gw, theta),
                   q.values[idx], row, col});
  }
  return out;
}

Var grasp_loss(Tape& tape, const GraspNet::Graph& out, const GraspMaps& targets,
               const Plane& mask, double width_max, double quality_weight) {
  const Tensor mask_t = to_tensor(mask);
  Tensor width_t = to_tensor(targets.width);
  for (double& v : width_t.data()) v /= width_max;
  Var loss = mse_loss(tape, out.quality, to_tensor(targets.quality));
  if (quality_weight != 1.0) loss = scale(tape, loss, quality_weight);
  loss = add(tape, loss, masked_mse_loss(tape, out.cos2t, to_tensor(targets.cos2t), mask_t));
  loss = add(tape, loss, masked_mse_loss(tape, out.sin2t, to_tensor(targets.sin2t), mask_t));
  loss = add(tape, loss, masked_mse_loss(tape, out.width, width_t, mask_t));
  return loss;
}

TrainResult train(GraspNet& net, const std::vector<GraspSample>& dataset,
                  const GgcnnConfig& cfg) {
  if (dataset.empty()) throw DomainError("train: empty dataset");
  struct Prepared {
    GraspMaps targets;
    Plane mask;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(dataset.size());
  for (const GraspSample& s : dataset) {
    if (s.input.rank() != 3) {
      throw ShapeError("train: sample input " + shape_str(s.input.shape()) +
                       " must be [C,H,W]");
    }
    GraspMaps t = encode_targets(s.grasps, s.input.dim(1), s.input.dim(2));
    Plane m = target_mask(t);
    prepared.push_back({std::move(t), std::move(m)});
  }

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::vector<Param*> params = net.params();
  for (Param* p : params) p->zero_grad();

  TrainResult result;
  const bool adam = cfg.optimizer == "adam";
  if (!adam && cfg.optimizer != "sgd") throw ConfigError("unknown optimizer " + cfg.optimizer);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t idx : order) {
      Tape tape;
      const GraspNet::Graph g = net.build(tape, dataset[idx].input, true);
      const Var loss = grasp_loss(tape, g, prepared[idx].targets,
                                  prepared[idx].mask, cfg.width_max,
                                  cfg.quality_weight);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw TrainingError("train: non-finite loss at epoch " +
                            std::to_string(epoch) + ", sample " +
                            std::to_string(idx));
      }
      total += value;
      tape.backward(loss);
      if (adam) {
        for (Param* p : params) adam_step(*p, cfg.learning_rate);
      } else {
        for (Param* p : params) sgd_step(*p, cfg.learning_rate, cfg.momentum);
      }
    }
    result.loss_history.push_back(total / static_cast<double>(dataset.size()));
  }
  return result;
}

}  // namespace toolgrasp
