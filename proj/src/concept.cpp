#include "toolgrasp/concept.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "toolgrasp/checkpoint.hpp"
#include "toolgrasp/errors.hpp"
#include "toolgrasp/kvconfig.hpp"
#include "toolgrasp/rng.hpp"

namespace toolgrasp {

const std::vector<std::string>& concept_names() {
  static const std::vector<std::string> names = {
      "allenkey-hex",  "hammer-head",  "file-teeth",      "knife-blade",
      "plier-jaws",    "scissor-blades", "screwdriver-tip", "wrench-jaw"};
  return names;
}

namespace {

std::vector<std::string> default_feature_names(std::size_t features,
                                               std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t f = 0; f < features; ++f) {
    if (f < classes && classes == kNumClasses) {
      names.push_back(concept_names()[f]);
    } else if (f < classes) {
      names.push_back("class" + std::to_string(f));
    } else {
      names.push_back("free" + std::to_string(f - classes));
    }
  }
  return names;
}

std::vector<std::string> default_class_names(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    names.push_back(classes == kNumClasses ? std::string(kClassNames[c])
                                           : "class" + std::to_string(c));
  }
  return names;
}

}  // namespace

ConceptLayer attach(const GraspNet& base, std::size_t features,
                    std::uint64_t seed, std::size_t classes) {
  if (features < 1) throw DomainError("attach: need at least one feature");
  if (classes < 1) throw DomainError("attach: need at least one class");
  if (features < classes) {
    throw DomainError("attach: " + std::to_string(features) +
                      " features cannot index " + std::to_string(classes) +
                      " classes");
  }
  const std::size_t dim = base.config().encoder_channels.back();
  ConceptLayer layer;
  layer.base = &base;
  layer.classes = classes;
  layer.projection = Param(Tensor({features, dim}));
  layer.bias = Param(Tensor({features}));
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : layer.projection.value.data()) v = rng.uniform(-bound, bound);
  layer.feature_names = default_feature_names(features, classes);
  return layer;
}

Tensor concept_logits(const ConceptLayer& layer, const Tensor& pooled) {
  if (pooled.size() != layer.input_dim()) {
    throw ShapeError("concept_logits: pooled features " + shape_str(pooled.shape()) +
                     " for projection " + shape_str(layer.projection.value.shape()));
  }
  const std::size_t f_count = layer.features();
  const std::size_t d = layer.input_dim();
  Tensor out({f_count});
  for (std::size_t f = 0; f < f_count; ++f) {
    double acc = layer.bias.value[f];
    for (std::size_t j = 0; j < d; ++j) {
      acc += layer.projection.value[f * d + j] * pooled[j];
    }
    out[f] = acc;
  }
  return out;
}

std::vector<double> concepts_from_pooled(const ConceptLayer& layer,
                                         const Tensor& pooled) {
  const Tensor logits = sigmoid(concept_logits(layer, pooled));
  return {logits.data().begin(), logits.data().end()};
}

std::vector<double> extract_concepts(const ConceptLayer& layer,
                                     const Tensor& image) {
  if (layer.base == nullptr) throw ConfigError("concept layer is not attached");
  return concepts_from_pooled(layer, layer.base->pooled_trunk(image));
}

Var concept_loss(Tape& tape, Var weight, Var bias, const Tensor& pooled,
                 int label, std::size_t classes) {
  const std::size_t f_count = tape.value(weight).dim(0);
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw DomainError("concept label " + std::to_string(label) +
                      " outside [0, " + std::to_string(classes) + ")");
  }
  Tensor target({f_count});
  Tensor indicator_mask({f_count});
  Tensor free_mask({f_count});
  for (std::size_t f = 0; f < f_count; ++f) {
    (f < classes ? indicator_mask : free_mask)[f] = 1.0;
  }
  target[static_cast<std::size_t>(label)] = 1.0;
  const Var act = sigmoid(tape, linear(tape, weight, tape.constant(pooled), bias));
  const Var fit = masked_mse_loss(tape, act, target, indicator_mask);
  const Var sparse = scale(tape, sum(tape, mul(tape, act, tape.constant(free_mask))),
                           kConceptSparsity);
  return add(tape, fit, sparse);
}

std::vector<double> finetune_on_features(ConceptLayer& layer,
                                         const std::vector<Tensor>& pooled,
                                         const std::vector<int>& labels,
                                         std::size_t epochs, double lr,
                                         std::uint64_t seed) {
  if (pooled.empty()) throw DomainError("finetune_concepts: empty dataset");
  if (pooled.size() != labels.size()) {
    throw DomainError("finetune_concepts: feature and label counts differ");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= layer.classes) {
      throw DomainError("finetune_concepts: label " + std::to_string(label) +
                        " outside [0, " + std::to_string(layer.classes) + ")");
    }
  }
  Rng rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::vector<std::size_t> order(pooled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  layer.projection.zero_grad();
  layer.bias.zero_grad();

  std::vector<double> history;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t idx : order) {
      Tape tape;
      const Var loss = concept_loss(tape, tape.param(layer.projection),
                                    tape.param(layer.bias), pooled[idx],
                                    labels[idx], layer.classes);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw TrainingError("finetune_concepts: non-finite loss at epoch " +
                            std::to_string(epoch));
      }
      total += value;
      tape.backward(loss);
      sgd_step(layer.projection, lr);
      sgd_step(layer.bias, lr);
    }
    history.push_back(total / static_cast<double>(pooled.size()));
  }
  return history;
}

std::vector<double> finetune_concepts(ConceptLayer& layer,
                                      const std::vector<ConceptSample>& dataset,
                                      std::size_t epochs, double lr,
                                      std::uint64_t seed) {
  if (layer.base == nullptr) throw ConfigError("concept layer is not attached");
  if (dataset.empty()) throw DomainError("finetune_concepts: empty dataset");
  std::vector<Tensor> pooled;
  std::vector<int> labels;
  for (const ConceptSample& s : dataset) {
    pooled.push_back(layer.base->pooled_trunk(s.image));
    labels.push_back(s.label);
  }
  return finetune_on_features(layer, pooled, labels, epochs, lr, seed);
}

CorrelationMatrix correlation_from_activations(
    const std::vector<std::vector<double>>& activations,
    const std::vector<int>& labels, std::size_t classes,
    std::vector<std::string>* warnings) {
  if (activations.size() != labels.size()) {
    throw DomainError("correlation: activation and label counts differ");
  }
  if (activations.empty()) throw DomainError("correlation: empty dataset");
  const std::size_t n = activations.size();
  const std::size_t f_count = activations.front().size();
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (activations[i].size() != f_count) {
      throw ShapeError("correlation: ragged activation rows");
    }
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw DomainError("correlation: label " + std::to_string(labels[i]) +
                        " outside [0, " + std::to_string(classes) + ")");
    }
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if ((counts[c] == 0 || counts[c] == n) && warnings) {
      warnings->push_back("class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                          " of " + std::to_string(n) +
                          " samples; its indicator is constant and correlations are 0");
    }
  }

  CorrelationMatrix m;
  m.features = f_count;
  m.classes = classes;
  m.values.assign(f_count * classes, 0.0);
  m.feature_names = default_feature_names(f_count, classes);
  m.class_names = default_class_names(classes);
  const double nd = static_cast<double>(n);

  for (std::size_t f = 0; f < f_count; ++f) {
    double mean_a = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_a += activations[i][f];
    mean_a /= nd;
    double var_a = 0.0;
    bool constant = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = activations[i][f] - mean_a;
      var_a += d * d;
      constant = constant && activations[i][f] == activations[0][f];
    }
    if (constant || !(var_a > 0.0)) {
      if (warnings) {
        warnings->push_back("feature " + std::to_string(f) +
                            " has zero variance; correlations set to 0");
      }
      continue;
    }
    for (std::size_t c = 0; c < classes; ++c) {
      const double mean_y = static_cast<double>(counts[c]) / nd;
      double cov = 0.0;
      double var_y = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double y = (labels[i] == static_cast<int>(c) ? 1.0 : 0.0) - mean_y;
        cov += (activations[i][f] - mean_a) * y;
        var_y += y * y;
      }
      const double r = var_y > 0.0 ? cov / std::sqrt(var_a * var_y) : 0.0;
      m.at(f, c) = std::clamp(r, -1.0, 1.0);
    }
  }
  return m;
}

CorrelationMatrix compute_correlation(const ConceptLayer& layer,
                                      const std::vector<ConceptSample>& dataset,
                                      std::vector<std::string>* warnings) {
  std::vector<std::vector<double>> acts;
  std::vector<int> labels;
  for (const ConceptSample& s : dataset) {
    acts.push_back(extract_concepts(layer, s.image));
    labels.push_back(s.label);
  }
  CorrelationMatrix m =
      correlation_from_activations(acts, labels, layer.classes, warnings);
  m.feature_names = layer.feature_names;
  return m;
}

Rgb diverging_color(double v) {
  const double t = std::clamp(v, -1.0, 1.0);
  const auto fade = [](double a) {
    return static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - a)));
  };
  if (t >= 0.0) return {255, fade(t), fade(t)};
  return {fade(-t), fade(-t), 255};
}

RgbImage heatmap_image(const CorrelationMatrix& m, std::size_t cell) {
  RgbImage img(m.features * cell, m.classes * cell);
  for (std::size_t f = 0; f < m.features; ++f) {
    for (std::size_t c = 0; c < m.classes; ++c) {
      const Rgb color = diverging_color(m.at(f, c));
      for (std::size_t r = 0; r < cell; ++r) {
        for (std::size_t q = 0; q < cell; ++q) {
          img.at(f * cell + r, c * cell + q) = color;
        }
      }
    }
  }
  return img;
}

std::string matrix_to_text(const CorrelationMatrix& m) {
  std::string out = std::to_string(m.features) + " " + std::to_string(m.classes) + "\n";
  char buf[40];
  for (std::size_t f = 0; f < m.features; ++f) {
    for (std::size_t c = 0; c < m.classes; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at(f, c));
      if (c) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

CorrelationMatrix matrix_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("empty matrix dump", 1);
  const auto header = split_ws(line);
  if (header.size() != 2) throw ParseError("expected 'F C' header", line_no);
  const long long f_count = parse_int(header[0], line_no);
  const long long c_count = parse_int(header[1], line_no);
  if (f_count < 1 || c_count < 1) throw ParseError("empty matrix dimensions", line_no);

  CorrelationMatrix m;
  m.features = static_cast<std::size_t>(f_count);
  m.classes = static_cast<std::size_t>(c_count);
  m.values.assign(m.features * m.classes, 0.0);
  for (std::size_t f = 0; f < m.features; ++f) {
    if (!next_line()) throw ParseError("missing matrix row", line_no + 1);
    const auto toks = split_ws(line);
    if (toks.size() != m.classes) {
      throw ParseError("expected " + std::to_string(m.classes) + " values, got " +
                           std::to_string(toks.size()),
                       line_no);
    }
    for (std::size_t c = 0; c < m.classes; ++c) {
      const double v = parse_double(toks[c], line_no);
      if (v < -1.0 || v > 1.0) throw ParseError("correlation outside [-1, 1]", line_no);
      m.at(f, c) = v;
    }
  }
  if (next_line()) throw ParseError("trailing data after matrix", line_no);
  m.feature_names = default_feature_names(m.features, m.classes);
  m.class_names = default_class_names(m.classes);
  return m;
}

void export_heatmap(const CorrelationMatrix& m, const std::filesystem::path& path) {
  write_ppm(path, heatmap_image(m));
  auto text_path = path;
  text_path.replace_extension(".txt");
  std::ofstream out(text_path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + text_path.string() + " for writing");
  out << matrix_to_text(m);
  if (!out) throw IoError("write failed: " + text_path.string());
}

void save_concept_layer(const ConceptLayer& layer, const std::filesystem::path& path) {
  save_checkpoint(path, {{"concept.projection", layer.projection.value},
                         {"concept.bias", layer.bias.value}});
  KeyValueConfig kv;
  kv.set("features", static_cast<long long>(layer.features()));
  kv.set("classes", static_cast<long long>(layer.classes));
  std::string names;
  for (std::size_t i = 0; i < layer.feature_names.size(); ++i) {
    if (i) names += ',';
    names += layer.feature_names[i];
  }
  kv.set("feature_names", names);
  auto sidecar = path;
  sidecar += ".cfg";
  kv.save(sidecar);
}

ConceptLayer load_concept_layer(const GraspNet& base,
                                const std::filesystem::path& path) {
  auto sidecar = path;
  sidecar += ".cfg";
  const KeyValueConfig kv = KeyValueConfig::load(sidecar);
  const long long features = kv.get_int("features");
  const long long classes = kv.get_int("classes");
  if (features < 1 || classes < 1) throw ConfigError("concept layer: bad dimensions");
  ConceptLayer layer = attach(base, static_cast<std::size_t>(features), 0,
                              static_cast<std::size_t>(classes));
  const auto entries = load_checkpoint(path);
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const NamedTensor& e : entries) {
      if (e.name == name) return e.tensor;
    }
    throw ParseError("concept checkpoint lacks '" + name + "'");
  };
  const Tensor& w = find("concept.projection");
  const Tensor& b = find("concept.bias");
  if (w.shape() != layer.projection.value.shape() ||
      b.shape() != layer.bias.value.shape()) {
    throw ShapeError("concept checkpoint shapes " + shape_str(w.shape()) + ", " +
                     shape_str(b.shape()) + " do not fit the base model");
  }
  layer.projection = Param(w);
  layer.bias = Param(b);
  if (kv.has("feature_names")) {
    auto names = split(kv.get("feature_names"), ',');
    if (names.size() == layer.features()) layer.feature_names = std::move(names);
  }
  return layer;
}

}  // namespace toolgrasp
