// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "unitlens/errors.hpp"
#include "unitlens/netzoo/network.hpp"

namespace unitlens::probes {

using netzoo::Checkpoint;
using netzoo::Dataset;
using tensorgrad::Tensor;

struct UnitId {
  std::size_t layer = 0;  // analyzable layer index
  std::size_t unit = 0;

  friend auto operator<=>(const UnitId&, const UnitId&) = default;
};

inline std::string to_string(const UnitId& u) {
  return std::to_string(u.layer) + ":" + std::to_string(u.unit);
}

/// Parses "layer:unit", both zero-based.
inline UnitId parse_unit(std::string_view text) {
  const auto colon = text.find(':');
  UnitId u;
  auto parse = [&](std::string_view part, std::size_t& out) {
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc{} && p == part.data() + part.size() && !part.empty();
  };
  if (colon == std::string_view::npos || !parse(text.substr(0, colon), u.layer) ||
      !parse(text.substr(colon + 1), u.unit)) {
    throw ConfigError("invalid unit reference '" + std::string(text) + "', expected layer:unit");
  }
  return u;
}

inline void check_unit(const netzoo::ModelSpec& spec, const UnitId& u) {
  const auto layer = netzoo::analyzable_layer(spec, u.layer);
  if (u.unit >= layer.unit_count) {
    throw RangeError("unit " + to_string(u) + " out of range; layer " + std::to_string(u.layer) +
                     " has " + std::to_string(layer.unit_count) + " units");
  }
}

/// Pooled activation per (sample, unit): spatial mean of a conv feature map,
/// or the dense output itself. Input is [N x K x H x W] or [N x K]; output [N x K].
inline Tensor pool_units(const Tensor& activation) {
  if (activation.rank() == 2) return activation;
  if (activation.rank() != 4) {
    throw DimensionError("pool_units: unexpected activation shape " +
                         tensorgrad::shape_str(activation.shape()));
  }
  const std::size_t maps = activation.dim(0) * activation.dim(1);
  const std::size_t hw = activation.dim(2) * activation.dim(3);
  Tensor out({activation.dim(0), activation.dim(1)});
  for (std::size_t m = 0; m < maps; ++m) {
    double acc = 0.0;
    for (std::size_t p = 0; p < hw; ++p) acc += activation[m * hw + p];
    out[m] = acc / static_cast<double>(hw);
  }
  return out;
}

/// Mean pooled activation of every unit of one layer, per class.
struct ActivationProfile {
  std::size_t layer = 0;
  std::size_t unit_count = 0;
  std::size_t class_count = 0;
  std::vector<double> class_means;  // row-major [unit x class]
  std::vector<std::size_t> sample_counts;

  double mean(std::size_t unit, std::size_t cls) const {
    return class_means[unit * class_count + cls];
  }
  std::span<const double> unit_means(std::size_t unit) const {
    return {class_means.data() + unit * class_count, class_count};
  }
};

inline constexpr std::size_t kProfileBatch = 100;

/// Profiles of every analyzable layer from a single pass over `data`.
///
/// Per-class sums accumulate in dataset order, batch by batch, so the result
/// does not depend on anything but (checkpoint, data).
inline std::vector<ActivationProfile> profile_all_layers(const Checkpoint& ck, const Dataset& data) {
  const auto layers = netzoo::analyzable_layers(ck.spec);
  const std::size_t classes = data.class_count;
  std::vector<ActivationProfile> out;
  for (const auto& l : layers) {
    out.push_back({l.index, l.unit_count, classes, std::vector<double>(l.unit_count * classes, 0.0),
                   std::vector<std::size_t>(classes, 0)});
  }
  for (int label : data.labels) {
    for (auto& p : out) ++p.sample_counts[static_cast<std::size_t>(label)];
  }
  std::string empty;
  for (std::size_t c = 0; c < classes; ++c) {
    if (!out.empty() && out[0].sample_counts[c] == 0) {
      empty += (empty.empty() ? "" : ", ") + std::to_string(c);
    }
  }
  if (!empty.empty()) throw ContractError("profile undefined: no samples for classes " + empty);

  for (std::size_t begin = 0; begin < data.size(); begin += kProfileBatch) {
    const std::size_t count = std::min(kProfileBatch, data.size() - begin);
    const auto fw = netzoo::forward_with_activations(ck, data.slice(begin, count));
    for (std::size_t li = 0; li < out.size(); ++li) {
      const Tensor pooled = pool_units(fw.activations[li]);
      ActivationProfile& p = out[li];
      for (std::size_t s = 0; s < count; ++s) {
        const std::size_t cls = static_cast<std::size_t>(data.labels[begin + s]);
        for (std::size_t u = 0; u < p.unit_count; ++u) {
          p.class_means[u * classes + cls] += pooled[s * p.unit_count + u];
        }
      }
    }
  }
  for (auto& p : out) {
    for (std::size_t u = 0; u < p.unit_count; ++u) {
      for (std::size_t c = 0; c < classes; ++c) {
        p.class_means[u * classes + c] /= static_cast<double>(p.sample_counts[c]);
      }
    }
  }
  return out;
}

inline ActivationProfile profile_activations(const Checkpoint& ck, const Dataset& data,
                                             std::size_t layer) {
  netzoo::analyzable_layer(ck.spec, layer);
  return std::move(profile_all_layers(ck, data)[layer]);
}

struct SelectivityRecord {
  UnitId unit;
  double selectivity = 0.0;
  std::size_t best_class = 0;
};

/// Class selectivity of one unit's class means:
///   (max - mean_of_rest) / (max + mean_of_rest)
/// where the max class is the lowest-index argmax and mean_of_rest averages
/// every other class, ties included. A unit with identical means for every
/// class (dead units included) scores exactly 0; the plain formula can leave a
/// rounding residue there.
inline SelectivityRecord unit_selectivity(std::span<const double> means) {
  if (means.size() < 2) throw ContractError("class selectivity needs at least 2 classes");
  std::size_t best = 0;
  for (std::size_t c = 0; c < means.size(); ++c) {
    if (means[c] < 0.0) {
      throw ContractError("negative class mean " + std::to_string(means[c]) +
                          "; activations must be post-relu");
    }
    if (means[c] > means[best]) best = c;
  }
  const double top = means[best];
  SelectivityRecord r;
  r.best_class = best;
  if (std::all_of(means.begin(), means.end(), [&](double m) { return m == top; })) return r;
  double rest = 0.0;
  for (std::size_t c = 0; c < means.size(); ++c) {
    if (c != best) rest += means[c];
  }
  rest /= static_cast<double>(means.size() - 1);
  const double denom = top + rest;
  r.selectivity = denom == 0.0 ? 0.0 : (top - rest) / denom;
  return r;
}

inline std::vector<SelectivityRecord> class_selectivity(const ActivationProfile& profile) {
  std::vector<SelectivityRecord> out;
  out.reserve(profile.unit_count);
  for (std::size_t u = 0; u < profile.unit_count; ++u) {
    SelectivityRecord r = unit_selectivity(profile.unit_means(u));
    r.unit = {profile.layer, u};
    out.push_back(r);
  }
  return out;
}

/// A checkpoint viewed with some units' post-relu activations clamped to 0.
/// The checkpoint itself is never modified.
class AblatedModel {
 public:
  AblatedModel(const Checkpoint& ck, netzoo::AblationMask mask) : ck_(&ck), mask_(std::move(mask)) {}

  netzoo::ForwardResult forward(const Tensor& batch) const {
    return netzoo::forward_with_activations(*ck_, batch, &mask_);
  }
  Tensor logits(const Tensor& batch) const { return netzoo::logits(*ck_, batch, &mask_); }
  double accuracy(const Dataset& data) const { return netzoo::accuracy(*ck_, data, &mask_); }
  const netzoo::AblationMask& mask() const { return mask_; }

 private:
  const Checkpoint* ck_;
  netzoo::AblationMask mask_;
};

inline AblatedModel ablate_units(const Checkpoint& ck, const std::vector<UnitId>& units) {
  netzoo::AblationMask mask;
  for (const auto& u : units) {
    check_unit(ck.spec, u);
    auto [it, _] = mask.try_emplace(
        u.layer, std::vector<char>(netzoo::analyzable_layer(ck.spec, u.layer).unit_count, 1));
    it->second[u.unit] = 0;
  }
  return AblatedModel(ck, std::move(mask));
}

inline AblatedModel ablate_unit(const Checkpoint& ck, const UnitId& unit) {
  return ablate_units(ck, {unit});
}

/// Accuracy lost on `data` when `unit` is ablated (positive: the unit helps).
inline double ablation_importance(const Checkpoint& ck, const UnitId& unit, const Dataset& data,
                                  std::optional<double> baseline = std::nullopt) {
  if (data.size() == 0) throw ContractError("ablation over an empty dataset");
  const double base = baseline ? *baseline : netzoo::accuracy(ck, data);
  return base - ablate_unit(ck, unit).accuracy(data);
}

}  // namespace unitlens::probes
