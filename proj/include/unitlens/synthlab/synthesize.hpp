// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unitlens/errors.hpp"
#include "unitlens/netzoo/network.hpp"
#include "unitlens/probes/probes.hpp"
#include "unitlens/rng.hpp"

namespace unitlens::synthlab {

using netzoo::Checkpoint;
using probes::UnitId;
using tensorgrad::Tensor;

enum class Mode { am, iam };

inline const char* to_string(Mode m) { return m == Mode::am ? "am" : "iam"; }

inline Mode mode_from(const std::string& s) {
  if (s == "am") return Mode::am;
  if (s == "iam") return Mode::iam;
  throw ConfigError("unknown synthesis mode '" + s + "', expected am or iam");
}

struct SynthesisConfig {
  Mode mode = Mode::iam;
  std::size_t steps = 256;
  double step_size = 0.05;
  std::uint64_t init_seed = 0;
  double init_low = 0.4;
  double init_high = 0.6;

  void validate() const {
    if (steps < 1) throw ConfigError("synthesis steps must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("synthesis step_size must be positive");
    if (!(init_low <= init_high) || init_low < 0.0 || init_high > 1.0) {
      throw ConfigError("synthesis init range must be ordered and inside [0, 1]");
    }
  }
};

// Images are clamped to this range after every step.
inline constexpr double kClampLow = 0.0;
inline constexpr double kClampHigh = 1.0;
// Gradients with a smaller L2 norm skip the update.
inline constexpr double kMinGradNorm = 1e-12;

struct SynthesisResult {
  UnitId unit;
  Mode mode = Mode::iam;
  Tensor image;                         // C x H x W, entries in [0, 1]
  std::vector<double> objective_trace;  // objective at the initial image and after each step
  double target_activation = 0.0;
  std::vector<double> layer_activations;  // pooled activation of every unit in the layer
  std::size_t best_step = 0;
  bool stalled = false;  // no step ever beat the initial image

  double objective() const { return objective_trace.at(best_step); }
};

/// AM: the target's pooled activation.
/// IAM: the target's pooled activation minus the mean over all other units of the layer.
inline double objective(Mode mode, std::span<const double> layer_activations, std::size_t unit) {
  if (unit >= layer_activations.size()) {
    throw RangeError("objective: unit " + std::to_string(unit) + " outside layer of " +
                     std::to_string(layer_activations.size()));
  }
  if (mode == Mode::am) return layer_activations[unit];
  if (layer_activations.size() < 2) throw ConfigError("IAM needs a layer with at least 2 units");
  double others = 0.0;
  for (std::size_t j = 0; j < layer_activations.size(); ++j) {
    if (j != unit) others += layer_activations[j];
  }
  return layer_activations[unit] - others / static_cast<double>(layer_activations.size() - 1);
}

/// Gradient weights of `objective` with respect to the pooled layer vector.
inline Tensor objective_weights(Mode mode, std::size_t layer_size, std::size_t unit) {
  Tensor w({1, layer_size}, 0.0);
  if (mode == Mode::iam) {
    if (layer_size < 2) throw ConfigError("IAM needs a layer with at least 2 units");
    w.fill(-1.0 / static_cast<double>(layer_size - 1));
  }
  w[unit] = 1.0;
  return w;
}

/// Seeded uniform noise in [init_low, init_high), shape C x H x W.
inline Tensor initial_image(const netzoo::ModelSpec& spec, const SynthesisConfig& cfg) {
  Tensor img({spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]});
  Rng rng(cfg.init_seed);
  for (double& v : img.values()) v = rng.uniform(cfg.init_low, cfg.init_high);
  return img;
}

struct LayerEvaluation {
  std::vector<double> pooled;
  Tensor gradient;  // d objective / d image; empty unless requested
};

/// Pooled activations of `unit.layer` for one image, optionally with the
/// gradient of the objective with respect to that image.
inline LayerEvaluation evaluate_layer(const Checkpoint& ck, const Tensor& image, const UnitId& unit,
                                      Mode mode, bool with_gradient) {
  const auto& s = ck.spec.input_shape;
  const Tensor batch = image.reshaped({1, s[0], s[1], s[2]});
  tensorgrad::Tape tape(with_gradient);
  tensorgrad::Var input = tape.leaf(batch, true);
  netzoo::ForwardOptions opt;
  opt.stop_after = unit.layer;
  auto fw = netzoo::run_network(tape, ck, input, opt);
  tensorgrad::Var act = fw.activations.back();
  tensorgrad::Var pooled =
      act.value().rank() == 4 ? tensorgrad::spatial_mean(act) : act;
  LayerEvaluation out;
  out.pooled.assign(pooled.value().values().begin(), pooled.value().values().end());
  if (with_gradient) {
    const std::size_t k = out.pooled.size();
    auto obj = tensorgrad::weighted_sum(pooled, objective_weights(mode, k, unit.unit));
    auto grads = tape.backward(obj);
    out.gradient = grads.take(input).reshaped({s[0], s[1], s[2]});
  }
  return out;
}

/// Normalized gradient ascent on the input image.
///
/// Each step: evaluate the objective and its image gradient, scale the
/// gradient to unit L2 norm, move `step_size` along it, clamp to [0, 1].
/// The best iterate seen (first one on ties) is returned along with the
/// layer's pooled activations at that image.
inline SynthesisResult synthesize(const Checkpoint& ck, const UnitId& unit,
                                  const SynthesisConfig& cfg) {
  cfg.validate();
  probes::check_unit(ck.spec, unit);
  if (cfg.mode == Mode::iam && netzoo::analyzable_layer(ck.spec, unit.layer).unit_count < 2) {
    throw ConfigError("IAM needs a layer with at least 2 units");
  }

  SynthesisResult r;
  r.unit = unit;
  r.mode = cfg.mode;
  Tensor image = initial_image(ck.spec, cfg);
  Tensor best_image = image;
  double best = 0.0;
  r.objective_trace.reserve(cfg.steps + 1);

  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    const bool last = step == cfg.steps;
    LayerEvaluation ev = evaluate_layer(ck, image, unit, cfg.mode, !last);
    const double obj = objective(cfg.mode, ev.pooled, unit.unit);
    if (!std::isfinite(obj)) {
      throw NumericError("non-finite objective at step " + std::to_string(step) + " for unit " +
                         probes::to_string(unit));
    }
    r.objective_trace.push_back(obj);
    if (step == 0 || obj > best) {
      best = obj;
      best_image = image;
      r.best_step = step;
    }
    if (last) break;

    double norm = 0.0;
    for (double g : ev.gradient.values()) norm += g * g;
    norm = std::sqrt(norm);
    if (norm < kMinGradNorm) continue;
    const double scale_by = cfg.step_size / norm;
    for (std::size_t i = 0; i < image.size(); ++i) {
      image[i] = std::clamp(image[i] + scale_by * ev.gradient[i], kClampLow, kClampHigh);
    }
  }

  r.stalled = r.best_step == 0;
  r.image = std::move(best_image);
  r.layer_activations = evaluate_layer(ck, r.image, unit, cfg.mode, false).pooled;
  r.target_activation = r.layer_activations[unit.unit];
  return r;
}

}  // namespace unitlens::synthlab
