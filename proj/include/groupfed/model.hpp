#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "groupfed/errors.hpp"
#include "groupfed/rng.hpp"

namespace groupfed {

enum class ModelKind { softmax_regression, two_layer_mlp };

// Architecture descriptor for the two training models. The MLP has a single
// hidden ReLU layer; depth beyond that is out of scope.
struct ModelSpec {
  ModelKind kind = ModelKind::softmax_regression;
  int input_dim = 0;
  int num_classes = 0;
  int hidden_units = 0;  // MLP only

  static ModelSpec softmax(int input_dim, int num_classes) {
    ModelSpec s{ModelKind::softmax_regression, input_dim, num_classes, 0};
    s.validate();
    return s;
  }

  static ModelSpec mlp(int input_dim, int num_classes, int hidden_units) {
    ModelSpec s{ModelKind::two_layer_mlp, input_dim, num_classes, hidden_units};
    s.validate();
    return s;
  }

  void validate() const {
    if (input_dim <= 0 || num_classes <= 0)
      throw config_error("model spec requires positive input_dim and num_classes");
    if (kind == ModelKind::two_layer_mlp && hidden_units <= 0)
      throw config_error("MLP spec requires positive hidden_units");
  }

  int param_count() const {
    if (kind == ModelKind::softmax_regression) return (input_dim + 1) * num_classes;
    return (input_dim + 1) * hidden_units + (hidden_units + 1) * num_classes;
  }

  bool operator==(const ModelSpec&) const = default;
};

// One labeled example (x_ij, y_ij).
struct Example {
  std::vector<double> features;
  int label = 0;
};

// Flat parameter vector. Layout:
//   SR : [W (C x D, row-major by class) | b (C)]
//   MLP: [W1 (H x D) | b1 (H) | W2 (C x H) | b2 (C)]
struct ModelParams {
  std::vector<double> values;
  ModelSpec spec;

  static ModelParams zeros(const ModelSpec& spec) {
    return ModelParams{std::vector<double>(static_cast<std::size_t>(spec.param_count()), 0.0), spec};
  }

  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Uniform init in [-0.05, 0.05], drawn from the run's seeded generator.
inline ModelParams init_params(const ModelSpec& spec, Rng& rng) {
  ModelParams p = ModelParams::zeros(spec);
  for (double& v : p.values) v = rng.uniform(-0.05, 0.05);
  return p;
}

namespace detail {

inline void check_batch(const ModelParams& params, std::span<const Example> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (params.values.size() != static_cast<std::size_t>(params.spec.param_count()))
    throw shape_error("parameter vector length " + std::to_string(params.values.size()) +
                      " != param_count " + std::to_string(params.spec.param_count()));
  for (const Example& e : batch) {
    if (e.features.size() != static_cast<std::size_t>(params.spec.input_dim))
      throw shape_error("feature length " + std::to_string(e.features.size()) + " != input_dim " +
                        std::to_string(params.spec.input_dim));
    if (e.label < 0 || e.label >= params.spec.num_classes)
      throw shape_error("label " + std::to_string(e.label) + " out of range");
  }
}

// log(sum(exp(z))) with the usual max shift; also writes softmax probs if asked.
inline double log_sum_exp(const std::vector<double>& z, std::vector<double>* probs = nullptr) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  if (probs) {
    probs->resize(z.size());
    for (std::size_t c = 0; c < z.size(); ++c) (*probs)[c] = std::exp(z[c] - lse);
  }
  return lse;
}

struct MlpScratch {
  std::vector<double> hidden;  // pre-activation
  std::vector<double> act;     // post-ReLU
  std::vector<double> logits;
  std::vector<double> probs;
};

inline void sr_logits(const ModelParams& p, const Example& e, std::vector<double>& logits) {
  const int D = p.spec.input_dim, C = p.spec.num_classes;
  logits.assign(static_cast<std::size_t>(C), 0.0);
  const double* w = p.values.data();
  const double* b = w + static_cast<std::size_t>(C) * D;
  for (int c = 0; c < C; ++c) {
    double z = b[c];
    const double* row = w + static_cast<std::size_t>(c) * D;
    for (int d = 0; d < D; ++d) z += row[d] * e.features[static_cast<std::size_t>(d)];
    logits[static_cast<std::size_t>(c)] = z;
  }
}

inline void mlp_forward(const ModelParams& p, const Example& e, MlpScratch& s) {
  const int D = p.spec.input_dim, H = p.spec.hidden_units, C = p.spec.num_classes;
  const double* w1 = p.values.data();
  const double* b1 = w1 + static_cast<std::size_t>(H) * D;
  const double* w2 = b1 + H;
  const double* b2 = w2 + static_cast<std::size_t>(C) * H;
  s.hidden.assign(static_cast<std::size_t>(H), 0.0);
  s.act.assign(static_cast<std::size_t>(H), 0.0);
  for (int h = 0; h < H; ++h) {
    double z = b1[h];
    const double* row = w1 + static_cast<std::size_t>(h) * D;
    for (int d = 0; d < D; ++d) z += row[d] * e.features[static_cast<std::size_t>(d)];
    s.hidden[static_cast<std::size_t>(h)] = z;
    s.act[static_cast<std::size_t>(h)] = z > 0.0 ? z : 0.0;
  }
  s.logits.assign(static_cast<std::size_t>(C), 0.0);
  for (int c = 0; c < C; ++c) {
    double z = b2[c];
    const double* row = w2 + static_cast<std::size_t>(c) * H;
    for (int h = 0; h < H; ++h) z += row[h] * s.act[static_cast<std::size_t>(h)];
    s.logits[static_cast<std::size_t>(c)] = z;
  }
}

}  // namespace detail

// Mean softmax cross-entropy over the batch, plus an optional L2 ridge
// 0.5*l2*||w||^2 used by the analysis mode.
inline double loss(const ModelParams& params, std::span<const Example> batch, double l2 = 0.0) {
  detail::check_batch(params, batch);
  double total = 0.0;
  if (params.spec.kind == ModelKind::softmax_regression) {
    std::vector<double> logits;
    for (const Example& e : batch) {
      detail::sr_logits(params, e, logits);
      total += detail::log_sum_exp(logits) - logits[static_cast<std::size_t>(e.label)];
    }
  } else {
    detail::MlpScratch s;
    for (const Example& e : batch) {
      detail::mlp_forward(params, e, s);
      total += detail::log_sum_exp(s.logits) - s.logits[static_cast<std::size_t>(e.label)];
    }
  }
  double out = total / static_cast<double>(batch.size());
  if (l2 > 0.0) {
    double sq = 0.0;
    for (double v : params.values) sq += v * v;
    out += 0.5 * l2 * sq;
  }
  return out;
}

inline void gradient_into(const ModelParams& params, std::span<const Example> batch, double l2,
                          std::vector<double>& out) {
  detail::check_batch(params, batch);
  out.assign(params.values.size(), 0.0);
  const int D = params.spec.input_dim, C = params.spec.num_classes;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (params.spec.kind == ModelKind::softmax_regression) {
    std::vector<double> logits, probs;
    double* gw = out.data();
    double* gb = gw + static_cast<std::size_t>(C) * D;
    for (const Example& e : batch) {
      detail::sr_logits(params, e, logits);
      detail::log_sum_exp(logits, &probs);
      probs[static_cast<std::size_t>(e.label)] -= 1.0;
      for (int c = 0; c < C; ++c) {
        const double g = probs[static_cast<std::size_t>(c)] * inv_n;
        double* row = gw + static_cast<std::size_t>(c) * D;
        for (int d = 0; d < D; ++d) row[d] += g * e.features[static_cast<std::size_t>(d)];
        gb[c] += g;
      }
    }
  } else {
    const int H = params.spec.hidden_units;
    const double* w2 = params.values.data() + static_cast<std::size_t>(H) * D + H;
    double* gw1 = out.data();
    double* gb1 = gw1 + static_cast<std::size_t>(H) * D;
    double* gw2 = gb1 + H;
    double* gb2 = gw2 + static_cast<std::size_t>(C) * H;
    detail::MlpScratch s;
    std::vector<double> dlogits, dhidden(static_cast<std::size_t>(H));
    for (const Example& e : batch) {
      detail::mlp_forward(params, e, s);
      detail::log_sum_exp(s.logits, &dlogits);
      dlogits[static_cast<std::size_t>(e.label)] -= 1.0;
      for (int c = 0; c < C; ++c) {
        const double g = dlogits[static_cast<std::size_t>(c)] * inv_n;
        double* row = gw2 + static_cast<std::size_t>(c) * H;
        for (int h = 0; h < H; ++h) row[h] += g * s.act[static_cast<std::size_t>(h)];
        gb2[c] += g;
      }
      for (int h = 0; h < H; ++h) {
        double acc = 0.0;
        if (s.hidden[static_cast<std::size_t>(h)] > 0.0)
          for (int c = 0; c < C; ++c)
            acc += dlogits[static_cast<std::size_t>(c)] * w2[static_cast<std::size_t>(c) * H + h];
        dhidden[static_cast<std::size_t>(h)] = acc * inv_n;
      }
      for (int h = 0; h < H; ++h) {
        const double g = dhidden[static_cast<std::size_t>(h)];
        if (g == 0.0) continue;
        double* row = gw1 + static_cast<std::size_t>(h) * D;
        for (int d = 0; d < D; ++d) row[d] += g * e.features[static_cast<std::size_t>(d)];
        gb1[h] += g;
      }
    }
  }
  if (l2 > 0.0)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += l2 * params.values[i];
}

inline ModelParams gradient(const ModelParams& params, std::span<const Example> batch, double l2 = 0.0) {
  ModelParams g{std::vector<double>(), params.spec};
  gradient_into(params, batch, l2, g.values);
  return g;
}

inline ModelParams sgd_step(const ModelParams& params, std::span<const Example> batch, double eta,
                            double l2 = 0.0) {
  if (!std::isfinite(eta) || eta < 0.0) throw std::invalid_argument("eta must be finite and >= 0");
  std::vector<double> g;
  gradient_into(params, batch, l2, g);
  ModelParams out = params;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= eta * g[i];
  return out;
}

struct WeightedModel {
  const ModelParams* params;
  double weight;
};

// Convex combination, accumulated in the order given. Callers are responsible
// for passing models in ascending node-index order; that fixed order is the
// reproducibility contract for every aggregation in the library.
inline ModelParams weighted_average(std::span<const WeightedModel> models) {
  if (models.empty()) throw std::invalid_argument("weighted_average of nothing");
  double wsum = 0.0;
  for (const auto& m : models) {
    if (m.params->spec != models[0].params->spec) throw shape_error("mixed model specs in average");
    if (m.weight < 0.0) throw std::invalid_argument("negative aggregation weight");
    wsum += m.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw std::invalid_argument("aggregation weights sum to " + std::to_string(wsum) + ", expected 1");
  ModelParams out = ModelParams::zeros(models[0].params->spec);
  for (const auto& m : models)
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += m.weight * m.params->values[i];
  return out;
}

// Fraction of test examples whose argmax logit matches the label. Ties go to
// the lowest class index.
inline double accuracy(const ModelParams& params, std::span<const Example> testset) {
  detail::check_batch(params, testset);
  std::size_t correct = 0;
  std::vector<double> logits;
  detail::MlpScratch s;
  for (const Example& e : testset) {
    const std::vector<double>* z;
    if (params.spec.kind == ModelKind::softmax_regression) {
      detail::sr_logits(params, e, logits);
      z = &logits;
    } else {
      detail::mlp_forward(params, e, s);
      z = &s.logits;
    }
    int best = 0;
    for (int c = 1; c < params.spec.num_classes; ++c)
      if ((*z)[static_cast<std::size_t>(c)] > (*z)[static_cast<std::size_t>(best)]) best = c;
    if (best == e.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(testset.size());
}

inline double l2_norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace groupfed
