#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "toolgrasp/autodiff.hpp"
#include "toolgrasp/classes.hpp"
#include "toolgrasp/ggcnn.hpp"
#include "toolgrasp/image.hpp"

namespace toolgrasp {

// Activation above which a concept counts as present.
constexpr double kConceptPresence = 0.6;
// Weight of the L1 penalty on the free (non-indicator) features.
constexpr double kConceptSparsity = 1e-3;

// Side branch on a frozen GraspNet: pooled trunk activations (length D)
// are projected to F concept logits and squashed with a sigmoid. Feature c
// (c < classes) is the indicator concept of class c; the remaining F - C
// features are free.
struct ConceptLayer {
  const GraspNet* base = nullptr;
  Param projection;  // [F, D]
  Param bias;        // [F]
  std::size_t classes = kNumClasses;
  std::vector<std::string> feature_names;

  std::size_t features() const { return projection.value.dim(0); }
  std::size_t input_dim() const { return projection.value.dim(1); }
};

// Indicator concept names, one per class.
const std::vector<std::string>& concept_names();

// Seeded uniform init of the projection in +-1/sqrt(D); zero bias. The base
// is only read, never modified. Throws DomainError when F < 1 or F < C.
ConceptLayer attach(const GraspNet& base, std::size_t features,
                    std::uint64_t seed, std::size_t classes = kNumClasses);

// Raw logits W f + b for pooled features f.
Tensor concept_logits(const ConceptLayer& layer, const Tensor& pooled);
// sigmoid(concept_logits) for pooled features.
std::vector<double> concepts_from_pooled(const ConceptLayer& layer,
                                         const Tensor& pooled);
// Concept activations of one network input [C,H,W].
std::vector<double> extract_concepts(const ConceptLayer& layer,
                                     const Tensor& image);

// Per-sample loss on the tape: mean squared error between the indicator
// activations and the one-hot class target, plus kConceptSparsity times the
// sum of the free activations.
Var concept_loss(Tape& tape, Var weight, Var bias, const Tensor& pooled,
                 int label, std::size_t classes);

struct ConceptSample {
  Tensor image;  // network input [C,H,W]
  int label = 0;
};

// Trains only the projection (and its bias) with per-sample SGD on
// precomputed pooled features. Returns the mean loss per epoch. Throws
// TrainingError on a non-finite loss, DomainError on an empty set or a label
// outside [0, classes).
std::vector<double> finetune_on_features(ConceptLayer& layer,
                                         const std::vector<Tensor>& pooled,
                                         const std::vector<int>& labels,
                                         std::size_t epochs, double lr,
                                         std::uint64_t seed = 0);

std::vector<double> finetune_concepts(ConceptLayer& layer,
                                      const std::vector<ConceptSample>& dataset,
                                      std::size_t epochs, double lr,
                                      std::uint64_t seed = 0);

// Row-major F x C table of Pearson correlations.
struct CorrelationMatrix {
  std::size_t features = 0;
  std::size_t classes = 0;
  std::vector<double> values;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  double at(std::size_t f, std::size_t c) const { return values[f * classes + c]; }
  double& at(std::size_t f, std::size_t c) { return values[f * classes + c]; }
};

// Pearson correlation between every feature column of `activations`
// (samples x F) and every class indicator. A zero-variance feature, or a
// class present in none or all of the samples, yields 0 and a message in
// `warnings`.
CorrelationMatrix correlation_from_activations(
    const std::vector<std::vector<double>>& activations,
    const std::vector<int>& labels, std::size_t classes,
    std::vector<std::string>* warnings = nullptr);

CorrelationMatrix compute_correlation(const ConceptLayer& layer,
                                      const std::vector<ConceptSample>& dataset,
                                      std::vector<std::string>* warnings = nullptr);

// Diverging ramp: -1 blue (0,0,255), 0 white, +1 red (255,0,0), linear in
// between; inputs are clamped to [-1, 1].
Rgb diverging_color(double v);

// One `cell` x `cell` block per entry, features as rows.
RgbImage heatmap_image(const CorrelationMatrix& m, std::size_t cell = 16);

// Text dump: "F C" on the first line, then F lines of C reals (%.17g).
std::string matrix_to_text(const CorrelationMatrix& m);
CorrelationMatrix matrix_from_text(const std::string& text);

// Writes `path` (P6) and `path` with extension ".txt" (text dump).
void export_heatmap(const CorrelationMatrix& m, const std::filesystem::path& path);

// Concept layer persistence in the checkpoint format ("concept.projection",
// "concept.bias") plus a key=value sidecar.
void save_concept_layer(const ConceptLayer& layer, const std::filesystem::path& path);
ConceptLayer load_concept_layer(const GraspNet& base,
                                const std::filesystem::path& path);

}  // namespace toolgrasp
