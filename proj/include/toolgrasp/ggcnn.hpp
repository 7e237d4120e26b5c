#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "toolgrasp/autodiff.hpp"
#include "toolgrasp/checkpoint.hpp"
#include "toolgrasp/geometry.hpp"
#include "toolgrasp/image.hpp"
#include "toolgrasp/kvconfig.hpp"

namespace toolgrasp {

// Dense per-pixel grasp maps. Angles are carried as (cos 2t, sin 2t) so the
// representation is continuous across the +-pi/2 wrap.
struct GraspMaps {
  Plane quality;  // [0, 1]
  Plane cos2t;    // [-1, 1]
  Plane sin2t;    // [-1, 1]
  Plane width;    // [0, width_max], pixels

  std::size_t height() const { return quality.height; }
  std::size_t width_px() const { return quality.width; }
};

struct GgcnnConfig {
  // Encoder: one strided conv per entry; the decoder mirrors it with
  // transposed convs and ends at encoder_channels.front() channels.
  std::vector<std::size_t> encoder_channels{8, 16, 32};
  std::size_t kernel_size = 5;
  std::size_t stride = 2;
  std::size_t input_channels = 1;
  double width_max = 50.0;
  double smoothing_sigma = 2.0;
  double learning_rate = 0.01;
  double momentum = 0.0;
  std::string optimizer = "sgd";  // "sgd" or "adam"
  double quality_weight = 1.0;    // multiplier on the quality term of the loss
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  bool zero_init_heads = false;

  std::size_t total_stride() const;
  KeyValueConfig to_kv() const;
  static GgcnnConfig from_kv(const KeyValueConfig& kv);
};

// Settings used by the `train` command: Adam at 1e-3, quality weight 10,
// 25 epochs.
GgcnnConfig training_config();

// Scene depth -> network input: subtract the per-image median, clamp to
// +-0.15 scene units and scale into [-1, 1].
constexpr double kDepthClamp = 0.15;
Plane normalize_depth(const Plane& depth);

class GraspNet {
 public:
  explicit GraspNet(GgcnnConfig cfg);

  const GgcnnConfig& config() const { return cfg_; }

  struct Graph {
    Var quality;  // after sigmoid
    Var cos2t;
    Var sin2t;
    Var width;    // width / width_max, unclamped
    Var trunk;    // deepest encoder activation [C,H/s,W/s]
  };

  // Records the forward pass on `tape`; parameters become trainable leaves
  // when `trainable`, constants otherwise.
  Graph build(Tape& tape, const Tensor& input, bool trainable);

  // Inference: one pass, no parameter is touched.
  GraspMaps forward(const Tensor& input) const;

  // Global average pool of the deepest encoder plane, length
  // encoder_channels.back().
  Tensor pooled_trunk(const Tensor& input) const;

  std::vector<Param*> params();
  std::vector<NamedTensor> state() const;
  void load_state(const std::vector<NamedTensor>& entries);
  // FNV-1a over every parameter's bit pattern.
  std::uint64_t checksum() const;

  void save(const std::filesystem::path& path) const;
  static GraspNet load(const std::filesystem::path& path);

 private:
  void check_input(const Tensor& input) const;
  std::vector<std::pair<std::string, Param*>> named_slots();
  Graph build_impl(Tape& tape, const Tensor& input,
                   const std::function<Var(Param&)>& leaf) const;

  GgcnnConfig cfg_;
  std::vector<Param> enc_kernel_, enc_bias_, dec_kernel_, dec_bias_;
  std::vector<Param> head_kernel_, head_bias_;  // quality, cos, sin, width
};

// Supervision maps: inside the centre third of each rectangle (w/3 along
// the opening direction, full jaw size h) quality = 1, cos2t/sin2t encode
// the angle and width = w. Later rectangles overwrite earlier ones.
// Elsewhere everything is 0. Pixel (row, col) is tested at (x=col, y=row).
GraspMaps encode_targets(const std::vector<GraspRect>& gts, std::size_t height,
                         std::size_t width);

// Loss mask used with encode_targets: 1 where quality target is 1.
Plane target_mask(const GraspMaps& targets);

struct ScoredGrasp {
  GraspRect grasp;
  double score = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
};

// Smooths quality with a Gaussian (sigma <= 0 disables), then returns up to k
// local maxima ordered by score, ties broken by row-major position. A pixel
// is a local maximum when it is strictly greater than its 8-neighbours that
// precede it in row-major order and not smaller than those that follow.
// theta = atan2(sin2t, cos2t) / 2, w = max(width, 1), h = w / 2.
std::vector<ScoredGrasp> decode_grasps(const GraspMaps& maps, std::size_t k,
                                       double smoothing_sigma);

// Summed loss of the four heads: MSE on quality over all pixels (times
// quality_weight), masked MSE for cos2t, sin2t and width / width_max inside
// the target mask.
Var grasp_loss(Tape& tape, const GraspNet::Graph& out, const GraspMaps& targets,
               const Plane& mask, double width_max, double quality_weight = 1.0);

struct GraspSample {
  Tensor input;  // [C,H,W], already normalized
  std::vector<GraspRect> grasps;
};

struct TrainResult {
  std::vector<double> loss_history;  // mean loss per epoch
};

// Per-sample SGD over `cfg.epochs` epochs with a seeded shuffle. Throws
// TrainingError when a loss turns non-finite.
TrainResult train(GraspNet& net, const std::vector<GraspSample>& dataset,
                  const GgcnnConfig& cfg);

}  // namespace toolgrasp
