// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unitlens/analysis/spearman.hpp"
#include "unitlens/errors.hpp"
#include "unitlens/probes/probes.hpp"
#include "unitlens/rsmetric/rsmetric.hpp"

namespace unitlens::analysis {

using probes::UnitId;

/// Every metric known for one unit. Fields are empty when the producing
/// step has not been run for that unit.
struct UnitReport {
  UnitId unit;
  std::optional<double> selectivity;
  std::optional<double> rs_am;
  std::optional<double> rs_iam;
  std::optional<double> ablation_importance;
};

struct AblationRecord {
  UnitId unit;
  double importance = 0.0;
};

/// Outer join of all per-unit records, ordered by (layer, unit).
inline std::vector<UnitReport> join_unit_reports(
    const std::vector<probes::SelectivityRecord>& selectivity,
    const std::vector<rsmetric::RsRecord>& rs_am, const std::vector<rsmetric::RsRecord>& rs_iam,
    const std::vector<AblationRecord>& ablation = {}) {
  std::map<UnitId, UnitReport> by_unit;
  auto row = [&](const UnitId& u) -> UnitReport& {
    auto [it, _] = by_unit.try_emplace(u);
    it->second.unit = u;
    return it->second;
  };
  for (const auto& s : selectivity) row(s.unit).selectivity = s.selectivity;
  for (const auto& r : rs_am) row(r.unit).rs_am = r.rs;
  for (const auto& r : rs_iam) row(r.unit).rs_iam = r.rs;
  for (const auto& a : ablation) row(a.unit).ablation_importance = a.importance;
  std::vector<UnitReport> out;
  out.reserve(by_unit.size());
  for (auto& [_, r] : by_unit) out.push_back(r);
  return out;
}

inline std::map<std::size_t, std::vector<UnitReport>> group_by_layer(
    const std::vector<UnitReport>& reports) {
  std::map<std::size_t, std::vector<UnitReport>> out;
  for (const auto& r : reports) out[r.unit.layer].push_back(r);
  return out;
}

enum class RsMetric { rs_am, rs_iam };

inline const char* to_string(RsMetric m) { return m == RsMetric::rs_am ? "rs_am" : "rs_iam"; }

inline std::optional<double> metric_of(const UnitReport& r, RsMetric m) {
  return m == RsMetric::rs_am ? r.rs_am : r.rs_iam;
}

struct LayerCorrelation {
  std::size_t layer = 0;
  RsMetric metric = RsMetric::rs_iam;
  std::optional<double> rho;  // empty when undefined (constant input or fewer than 3 units)
  std::size_t n = 0;
  std::size_t tied_selectivity = 0;
  std::size_t tied_rs = 0;
};

/// Spearman rho between selectivity and the chosen RS metric, one row per layer
/// in depth order. Units missing either value are left out.
inline std::vector<LayerCorrelation> layer_correlation_profile(
    const std::map<std::size_t, std::vector<UnitReport>>& layers, RsMetric metric) {
  std::vector<LayerCorrelation> out;
  for (const auto& [layer, reports] : layers) {
    std::vector<double> sel, rs;
    for (const auto& r : reports) {
      const auto m = metric_of(r, metric);
      if (r.selectivity && m) {
        sel.push_back(*r.selectivity);
        rs.push_back(*m);
      }
    }
    LayerCorrelation lc;
    lc.layer = layer;
    lc.metric = metric;
    lc.n = sel.size();
    lc.tied_selectivity = tied_count(sel);
    lc.tied_rs = tied_count(rs);
    if (lc.n >= 3) {
      try {
        lc.rho = spearman_correlation(sel, rs);
      } catch (const UndefinedCorrelation&) {
      }
    }
    out.push_back(lc);
  }
  return out;
}

/// Median with the two middle values averaged for even counts.
inline double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty sequence");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

struct FcLayerSummary {
  std::size_t layer = 0;
  std::size_t n = 0;
  double median_selectivity = 0.0;
  double median_rs = 0.0;
  double zero_rs_fraction = 0.0;
};

inline FcLayerSummary fc_layer_summary(const std::vector<UnitReport>& layer_reports,
                                       RsMetric metric = RsMetric::rs_iam) {
  std::vector<double> sel, rs;
  for (const auto& r : layer_reports) {
    if (r.selectivity) sel.push_back(*r.selectivity);
    if (auto m = metric_of(r, metric)) rs.push_back(*m);
  }
  if (rs.empty()) throw ContractError("fc layer summary needs RS values");
  FcLayerSummary s;
  s.layer = layer_reports.front().unit.layer;
  s.n = rs.size();
  s.median_selectivity = sel.empty() ? 0.0 : median(sel);
  s.median_rs = median(rs);
  s.zero_rs_fraction =
      static_cast<double>(std::count(rs.begin(), rs.end(), 0.0)) / static_cast<double>(rs.size());
  return s;
}

}  // namespace unitlens::analysis
