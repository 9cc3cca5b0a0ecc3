// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unitlens/errors.hpp"
#include "unitlens/netzoo/checkpoint.hpp"
#include "unitlens/netzoo/dataset.hpp"
#include "unitlens/tensorgrad/ops.hpp"
#include "unitlens/tensorgrad/tape.hpp"

namespace unitlens::netzoo {

using tensorgrad::Tape;
using tensorgrad::Var;

/// Per analyzable layer, which units keep their activation (1) or are clamped to 0.
using AblationMask = std::map<std::size_t, std::vector<char>>;

struct ForwardOptions {
  /// Stop right after this analyzable layer's relu; logits are then not computed.
  std::optional<std::size_t> stop_after;
  const AblationMask* ablation = nullptr;
  bool parameters_require_grad = false;
};

struct TapeForward {
  std::optional<Var> logits;
  std::vector<Var> activations;  // post-relu output of each analyzable layer reached
  std::vector<Var> parameters;   // parallel to Checkpoint::parameters
};

inline void check_input(const ModelSpec& spec, const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(1) != spec.input_shape[0] ||
      batch.dim(2) != spec.input_shape[1] || batch.dim(3) != spec.input_shape[2]) {
    throw DimensionError("input " + tensorgrad::shape_str(batch.shape()) + " does not match model '" +
                         spec.name + "' input [N x " + std::to_string(spec.input_shape[0]) + "x" +
                         std::to_string(spec.input_shape[1]) + "x" +
                         std::to_string(spec.input_shape[2]) + "]");
  }
}

/// Records the network on `tape`. Parameters are borrowed from `ck`, which
/// must outlive the tape.
inline TapeForward run_network(Tape& tape, const Checkpoint& ck, Var input,
                               const ForwardOptions& options = {}) {
  const ModelSpec& spec = ck.spec;
  check_input(spec, input.value());
  TapeForward out;
  out.parameters.reserve(ck.parameters.size());
  for (const auto& p : ck.parameters) {
    out.parameters.push_back(tape.borrow(p.value, options.parameters_require_grad));
  }

  const auto analyzable = analyzable_layers(spec);
  std::map<std::size_t, std::size_t> analyzable_at;  // relu position -> analyzable index
  for (const auto& a : analyzable) analyzable_at[a.position + 1] = a.index;

  Var x = input;
  std::size_t param = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    switch (spec.layers[i].kind) {
      case LayerKind::conv:
        x = tensorgrad::conv2d(x, out.parameters[param], out.parameters[param + 1]);
        param += 2;
        break;
      case LayerKind::dense:
        x = tensorgrad::add(tensorgrad::matmul(x, out.parameters[param]),
                            out.parameters[param + 1]);
        param += 2;
        break;
      case LayerKind::relu:
        x = tensorgrad::relu(x);
        break;
      case LayerKind::maxpool:
        x = tensorgrad::maxpool2x2(x);
        break;
      case LayerKind::flatten:
        x = tensorgrad::flatten(x);
        break;
    }
    if (auto it = analyzable_at.find(i); it != analyzable_at.end()) {
      if (options.ablation) {
        if (auto m = options.ablation->find(it->second); m != options.ablation->end()) {
          x = tensorgrad::mask_channels(x, m->second);
        }
      }
      out.activations.push_back(x);
      if (options.stop_after && *options.stop_after == it->second) return out;
    }
  }
  if (options.stop_after) {
    throw RangeError("stop_after layer " + std::to_string(*options.stop_after) +
                     " is not an analyzable layer");
  }
  out.logits = x;
  return out;
}

struct ForwardResult {
  Tensor logits;
  std::vector<Tensor> activations;  // one per analyzable layer, post-relu
};

/// Logits plus every analyzable layer's post-relu activations. Pure in (ck, batch).
inline ForwardResult forward_with_activations(const Checkpoint& ck, const Tensor& batch,
                                              const AblationMask* ablation = nullptr) {
  Tape tape(false);
  ForwardOptions opt;
  opt.ablation = ablation;
  auto fw = run_network(tape, ck, tape.borrow(batch), opt);
  ForwardResult r{fw.logits->value(), {}};
  r.activations.reserve(fw.activations.size());
  for (const auto& a : fw.activations) r.activations.push_back(a.value());
  return r;
}

inline Tensor logits(const Checkpoint& ck, const Tensor& batch,
                     const AblationMask* ablation = nullptr) {
  Tape tape(false);
  ForwardOptions opt;
  opt.ablation = ablation;
  return run_network(tape, ck, tape.borrow(batch), opt).logits->value();
}

inline constexpr std::size_t kEvalBatch = 100;

/// Fraction of samples whose argmax logit equals the label.
inline double accuracy(const Checkpoint& ck, const Dataset& data,
                       const AblationMask* ablation = nullptr) {
  if (data.size() == 0) throw ContractError("accuracy over an empty dataset");
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, data.size() - begin);
    const auto pred = tensorgrad::argmax_rows(logits(ck, data.slice(begin, count), ablation));
    for (std::size_t i = 0; i < count; ++i) correct += pred[i] == data.labels[begin + i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace unitlens::netzoo
