// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "unitlens/errors.hpp"
#include "unitlens/parallel.hpp"
#include "unitlens/rng.hpp"
#include "unitlens/synthlab/synthesize.hpp"

namespace unitlens::rsmetric {

using probes::UnitId;
using synthlab::Mode;
using synthlab::SynthesisConfig;
using synthlab::SynthesisResult;

/// Which units the RS ratio divides by.
enum class Denominator {
  all,     // every unit in the layer, target included
  others,  // every unit except the target
};

inline Denominator denominator_from(const std::string& s) {
  if (s == "all") return Denominator::all;
  if (s == "others") return Denominator::others;
  throw ConfigError("unknown rs denominator '" + s + "', expected all or others");
}

inline const char* to_string(Denominator d) { return d == Denominator::all ? "all" : "others"; }

struct RsRecord {
  UnitId unit;
  Mode mode = Mode::iam;
  double rs = 0.0;
  double target_activation = 0.0;
  std::size_t exceed_count = 0;
  std::size_t layer_size = 0;
  std::size_t denominator = 0;  // layer_size, or layer_size - 1 for Denominator::others
};

/// Number of units j != target whose activation is strictly greater than the target's.
inline std::size_t count_exceeding(std::span<const double> layer_activations, std::size_t target) {
  const double t = layer_activations[target];
  std::size_t n = 0;
  for (std::size_t j = 0; j < layer_activations.size(); ++j) {
    if (j != target && layer_activations[j] > t) ++n;
  }
  return n;
}

/// Representative substitution of one synthesized unit: the share of its
/// layer that responds more strongly than the unit itself to the unit's own
/// preferred image. No tolerance is applied to ties.
inline RsRecord representative_substitution(const SynthesisResult& result,
                                            std::size_t layer_size,
                                            Denominator denominator = Denominator::all) {
  if (result.layer_activations.size() != layer_size || layer_size == 0) {
    throw ContractError("representative_substitution: activation vector of length " +
                        std::to_string(result.layer_activations.size()) + " for a layer of " +
                        std::to_string(layer_size) + " units");
  }
  if (result.unit.unit >= layer_size) {
    throw RangeError("representative_substitution: target " + probes::to_string(result.unit) +
                     " outside layer");
  }
  RsRecord r;
  r.unit = result.unit;
  r.mode = result.mode;
  r.layer_size = layer_size;
  r.target_activation = result.layer_activations[result.unit.unit];
  r.exceed_count = count_exceeding(result.layer_activations, result.unit.unit);
  r.denominator = denominator == Denominator::all ? layer_size : layer_size - 1;
  if (r.denominator == 0) {
    throw ConfigError("rs denominator 'others' is undefined for a 1-unit layer");
  }
  r.rs = static_cast<double>(r.exceed_count) / static_cast<double>(r.denominator);
  return r;
}

inline RsRecord representative_substitution(const SynthesisResult& result,
                                            Denominator denominator = Denominator::all) {
  return representative_substitution(result, result.layer_activations.size(), denominator);
}

/// Seed for one unit's initial noise, derived from the sweep's base seed.
inline std::uint64_t unit_seed(std::uint64_t base_seed, const UnitId& unit) {
  const std::uint64_t key = (static_cast<std::uint64_t>(unit.layer) << 32) | unit.unit;
  return base_seed ^ splitmix64(key);
}

struct SweepOptions {
  std::size_t workers = 1;
  Denominator denominator = Denominator::all;
  /// Invoked from worker threads as units finish; must be thread safe.
  std::function<void(const SynthesisResult&, const RsRecord&)> on_unit;
};

struct SweepResult {
  std::vector<RsRecord> records;            // ordered by unit index
  std::vector<SynthesisResult> syntheses;   // parallel to records
};

/// Synthesizes every unit of one layer (seed per unit from config.init_seed)
/// and scores each by representative substitution. Output does not depend on
/// the worker count.
inline SweepResult rs_sweep(const netzoo::Checkpoint& ck, std::size_t layer,
                            const SynthesisConfig& config, const SweepOptions& options = {}) {
  const auto info = netzoo::analyzable_layer(ck.spec, layer);
  config.validate();
  auto per_unit = ordered_map(info.unit_count, options.workers, [&](std::size_t u) {
    SynthesisConfig cfg = config;
    const UnitId id{layer, u};
    cfg.init_seed = unit_seed(config.init_seed, id);
    SynthesisResult s = synthlab::synthesize(ck, id, cfg);
    RsRecord r = representative_substitution(s, info.unit_count, options.denominator);
    if (options.on_unit) options.on_unit(s, r);
    return std::make_pair(std::move(s), r);
  });
  SweepResult out;
  out.records.reserve(per_unit.size());
  out.syntheses.reserve(per_unit.size());
  for (auto& [s, r] : per_unit) {
    out.records.push_back(r);
    out.syntheses.push_back(std::move(s));
  }
  return out;
}

}  // namespace unitlens::rsmetric
