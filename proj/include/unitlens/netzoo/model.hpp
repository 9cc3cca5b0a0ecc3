// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitlens/errors.hpp"
#include "unitlens/rng.hpp"
#include "unitlens/tensorgrad/tensor.hpp"

namespace unitlens::netzoo {

using tensorgrad::Shape;
using tensorgrad::Tensor;

enum class LayerKind { conv, dense, relu, maxpool, flatten };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

inline LayerKind layer_kind_from(const std::string& s) {
  for (LayerKind k : {LayerKind::conv, LayerKind::dense, LayerKind::relu, LayerKind::maxpool,
                      LayerKind::flatten}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown layer kind '" + s + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;  // output channels (conv) or width (dense); 0 otherwise

  bool has_parameters() const { return kind == LayerKind::conv || kind == LayerKind::dense; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::string name;
  std::array<std::size_t, 3> input_shape{1, 1, 1};  // C x H x W
  std::size_t class_count = 0;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// A conv or dense layer whose output passes through a relu. Its units are
/// what every per-unit metric scores.
struct AnalyzableLayer {
  std::size_t index = 0;     // position among analyzable layers, zero-based
  std::size_t position = 0;  // index into ModelSpec::layers
  std::size_t unit_count = 0;
  LayerKind kind = LayerKind::conv;
};

/// Output shape of each layer, without the batch axis: {C, H, W} or {features}.
inline std::vector<Shape> infer_shapes(const ModelSpec& spec) {
  if (spec.class_count < 1) throw ConfigError("class_count must be positive");
  for (std::size_t d : spec.input_shape) {
    if (d == 0) throw ConfigError("input_shape dimensions must be positive");
  }
  Shape current{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  std::vector<Shape> out;
  out.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    switch (l.kind) {
      case LayerKind::conv:
        if (current.size() != 3) throw ConfigError(where + " needs a C x H x W input");
        if (l.units == 0) throw ConfigError(where + " needs a positive channel count");
        current = {l.units, current[1], current[2]};
        break;
      case LayerKind::dense:
        if (current.size() != 1) throw ConfigError(where + " needs a flat input; add flatten");
        if (l.units == 0) throw ConfigError(where + " needs a positive width");
        current = {l.units};
        break;
      case LayerKind::relu:
        break;
      case LayerKind::maxpool:
        if (current.size() != 3 || current[1] < 2 || current[2] < 2) {
          throw ConfigError(where + " needs a C x H x W input of at least 2x2, got " +
                            tensorgrad::shape_str(current));
        }
        current = {current[0], current[1] / 2, current[2] / 2};
        break;
      case LayerKind::flatten:
        current = {tensorgrad::shape_size(current)};
        break;
    }
    out.push_back(current);
  }
  if (current.size() != 1 || current[0] != spec.class_count) {
    throw ConfigError("model output " + tensorgrad::shape_str(current) + " does not match " +
                      std::to_string(spec.class_count) + " classes");
  }
  return out;
}

inline std::vector<AnalyzableLayer> analyzable_layers(const ModelSpec& spec) {
  std::vector<AnalyzableLayer> out;
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.has_parameters() && spec.layers[i + 1].kind == LayerKind::relu) {
      out.push_back({out.size(), i, l.units, l.kind});
    }
  }
  return out;
}

inline AnalyzableLayer analyzable_layer(const ModelSpec& spec, std::size_t index) {
  auto layers = analyzable_layers(spec);
  if (index >= layers.size()) {
    throw RangeError("layer " + std::to_string(index) + " out of range; model '" + spec.name +
                     "' has " + std::to_string(layers.size()) + " analyzable layers");
  }
  return layers[index];
}

inline std::string weight_name(std::size_t position) {
  return "layer" + std::to_string(position) + ".weight";
}
inline std::string bias_name(std::size_t position) {
  return "layer" + std::to_string(position) + ".bias";
}

// ---- presets -------------------------------------------------------------

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"mlp", "mlp-tiny", "shallow-cnn", "vgg16-cifar"};
  return names;
}

/// Width of the hidden dense layer between the conv stack and the classifier.
inline constexpr std::size_t kShallowCnnHidden = 128;

inline ModelSpec preset(const std::string& name, std::array<std::size_t, 3> input_shape,
                        std::size_t class_count) {
  ModelSpec spec{name, input_shape, class_count, {}};
  auto conv = [&](std::size_t c) {
    spec.layers.push_back({LayerKind::conv, c});
    spec.layers.push_back({LayerKind::relu, 0});
  };
  auto dense = [&](std::size_t w) {
    spec.layers.push_back({LayerKind::dense, w});
    spec.layers.push_back({LayerKind::relu, 0});
  };
  auto pool = [&] { spec.layers.push_back({LayerKind::maxpool, 0}); };
  auto flat = [&] { spec.layers.push_back({LayerKind::flatten, 0}); };
  auto classifier = [&] { spec.layers.push_back({LayerKind::dense, class_count}); };

  if (name == "mlp") {
    flat();
    for (std::size_t w : {128, 512, 2048, 2048}) dense(w);
  } else if (name == "mlp-tiny") {
    flat();
    dense(16);
  } else if (name == "shallow-cnn") {
    conv(64);
    conv(64);
    pool();
    conv(128);
    conv(128);
    pool();
    flat();
    dense(kShallowCnnHidden);
  } else if (name == "vgg16-cifar") {
    // Experimental; expects 32x32 inputs.
    const std::vector<std::vector<std::size_t>> blocks{
        {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
    for (const auto& block : blocks) {
      for (std::size_t c : block) conv(c);
      pool();
    }
    flat();
    dense(512);
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "'; valid presets: " + valid);
  }
  classifier();
  infer_shapes(spec);
  return spec;
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json j{{"kind", to_string(l.kind)}};
    if (l.has_parameters()) j["units"] = l.units;
    layers.push_back(std::move(j));
  }
  return {{"name", spec.name},
          {"input_shape", spec.input_shape},
          {"class_count", spec.class_count},
          {"layers", std::move(layers)}};
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.input_shape = j.at("input_shape").get<std::array<std::size_t, 3>>();
    spec.class_count = j.at("class_count").get<std::size_t>();
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      l.kind = layer_kind_from(lj.at("kind").get<std::string>());
      if (l.has_parameters()) l.units = lj.at("units").get<std::size_t>();
      spec.layers.push_back(l);
    }
    infer_shapes(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model spec: ") + e.what());
  }
}

}  // namespace unitlens::netzoo
