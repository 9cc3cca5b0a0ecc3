// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitlens/analysis/report.hpp"
#include "unitlens/csv.hpp"
#include "unitlens/errors.hpp"
#include "unitlens/probes/probes.hpp"
#include "unitlens/rsmetric/rsmetric.hpp"

namespace unitlens::cli {

namespace fs = std::filesystem;

/// Fixed artifact names inside a run directory.
struct RunPaths {
  fs::path root;

  fs::path checkpoint() const { return root / "checkpoint"; }
  fs::path metrics() const { return root / "metrics.csv"; }
  fs::path selectivity() const { return root / "selectivity.csv"; }
  fs::path rs(synthlab::Mode m) const {
    return root / (std::string("rs_") + synthlab::to_string(m) + ".csv");
  }
  fs::path ablation() const { return root / "ablation.csv"; }
  fs::path unit_report() const { return root / "unit_report.csv"; }
  fs::path layer_correlation() const { return root / "layer_correlation.csv"; }
  fs::path fc_summary() const { return root / "fc_summary.csv"; }
  fs::path config() const { return root / "config.json"; }
  fs::path log() const { return root / "log.txt"; }
  fs::path gallery() const { return root / "gallery"; }
  fs::path gallery_image(const probes::UnitId& u, synthlab::Mode m) const {
    return gallery() / ("layer" + std::to_string(u.layer)) /
           ("unit" + std::to_string(u.unit) + "_" + synthlab::to_string(m) + ".png");
  }
  fs::path plots() const { return root / "plots"; }
};

/// Timestamped, append-only log mirrored to stderr. Safe to call from workers.
class Logger {
 public:
  Logger(const fs::path& path, std::string command, bool echo = true)
      : out_(path, std::ios::app), command_(std::move(command)), echo_(echo) {
    if (!out_) throw IoError("cannot open log " + path.string());
  }

  void operator()(const std::string& message) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    const std::string line = std::string(stamp) + " [" + command_ + "] " + message + "\n";
    std::lock_guard lock(mu_);
    out_ << line << std::flush;
    if (echo_) std::cerr << line;
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::string command_;
  bool echo_;
};

/// Stores `resolved` under `command` in config.json, keeping other commands' entries.
inline void echo_config(const RunPaths& paths, const std::string& command, const nlohmann::json& resolved) {
  nlohmann::json doc = nlohmann::json::object();
  if (fs::exists(paths.config())) {
    std::ifstream in(paths.config());
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      doc = nlohmann::json::object();
    }
    if (!doc.is_object()) doc = nlohmann::json::object();
  }
  doc[command] = resolved;
  std::ofstream out(paths.config(), std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + paths.config().string());
  out << doc.dump(2) << '\n';
}

/// Rows keyed by their first two columns (layer_index, unit_index).
/// New rows replace existing rows with the same key; output is sorted by key.
inline void merge_unit_rows(const fs::path& path, const std::vector<std::string>& header,
                            std::vector<std::vector<std::string>> rows) {
  using Key = std::pair<std::size_t, std::size_t>;
  auto key_of = [](const std::vector<std::string>& r) {
    return Key{csv::parse_index(r.at(0)), csv::parse_index(r.at(1))};
  };
  std::set<Key> fresh;
  for (const auto& r : rows) fresh.insert(key_of(r));
  if (fs::exists(path)) {
    const csv::Table old = csv::read(path);
    if (old.header == header) {
      for (auto& r : old.rows) {
        if (!fresh.count(key_of(r))) rows.push_back(r);
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const auto& a, const auto& b) { return key_of(a) < key_of(b); });
  csv::write(path, csv::Table{header, std::move(rows)});
}

inline const std::vector<std::string>& selectivity_header() {
  static const std::vector<std::string> h = {"layer_index", "unit_index", "selectivity", "best_class"};
  return h;
}

inline const std::vector<std::string>& rs_header() {
  static const std::vector<std::string> h = {"layer_index", "unit_index",   "mode",       "rs",
                                             "target_activation", "exceed_count", "layer_size",
                                             "denominator"};
  return h;
}

inline const std::vector<std::string>& ablation_header() {
  static const std::vector<std::string> h = {"layer_index", "unit_index", "ablation_importance"};
  return h;
}

inline std::vector<std::string> to_row(const probes::SelectivityRecord& r) {
  return {csv::number(r.unit.layer), csv::number(r.unit.unit), csv::number(r.selectivity),
          csv::number(r.best_class)};
}

inline std::vector<std::string> to_row(const rsmetric::RsRecord& r) {
  return {csv::number(r.unit.layer),         csv::number(r.unit.unit),
          synthlab::to_string(r.mode),       csv::number(r.rs),
          csv::number(r.target_activation),  csv::number(r.exceed_count),
          csv::number(r.layer_size),         csv::number(r.denominator)};
}

inline std::vector<std::string> to_row(const analysis::AblationRecord& r) {
  return {csv::number(r.unit.layer), csv::number(r.unit.unit), csv::number(r.importance)};
}

inline probes::UnitId unit_of(const csv::Table& t, const std::vector<std::string>& row) {
  return {csv::parse_index(row[t.column("layer_index")]), csv::parse_index(row[t.column("unit_index")])};
}

inline std::vector<probes::SelectivityRecord> read_selectivity(const fs::path& path) {
  const csv::Table t = csv::read(path);
  std::vector<probes::SelectivityRecord> out;
  for (const auto& row : t.rows) {
    probes::SelectivityRecord r;
    r.unit = unit_of(t, row);
    r.selectivity = csv::parse_double(row[t.column("selectivity")]);
    r.best_class = csv::parse_index(row[t.column("best_class")]);
    out.push_back(r);
  }
  return out;
}

inline std::vector<rsmetric::RsRecord> read_rs(const fs::path& path) {
  const csv::Table t = csv::read(path);
  std::vector<rsmetric::RsRecord> out;
  for (const auto& row : t.rows) {
    rsmetric::RsRecord r;
    r.unit = unit_of(t, row);
    r.mode = synthlab::mode_from(row[t.column("mode")]);
    r.rs = csv::parse_double(row[t.column("rs")]);
    r.target_activation = csv::parse_double(row[t.column("target_activation")]);
    r.exceed_count = csv::parse_index(row[t.column("exceed_count")]);
    r.layer_size = csv::parse_index(row[t.column("layer_size")]);
    r.denominator = csv::parse_index(row[t.column("denominator")]);
    out.push_back(r);
  }
  return out;
}

inline std::vector<analysis::AblationRecord> read_ablation(const fs::path& path) {
  const csv::Table t = csv::read(path);
  std::vector<analysis::AblationRecord> out;
  for (const auto& row : t.rows) {
    out.push_back({unit_of(t, row), csv::parse_double(row[t.column("ablation_importance")])});
  }
  return out;
}

inline void write_unit_report(const fs::path& path, const std::vector<analysis::UnitReport>& reports) {
  csv::Table t;
  t.header = {"layer_index", "unit_index", "selectivity", "rs_am", "rs_iam", "ablation_importance"};
  for (const auto& r : reports) {
    t.rows.push_back({csv::number(r.unit.layer), csv::number(r.unit.unit),
                      csv::optional_number(r.selectivity), csv::optional_number(r.rs_am),
                      csv::optional_number(r.rs_iam), csv::optional_number(r.ablation_importance)});
  }
  csv::write(path, t);
}

inline void write_layer_correlation(const fs::path& path,
                                    const std::vector<analysis::LayerCorrelation>& rows) {
  csv::Table t;
  t.header = {"layer_index", "metric", "rho", "n", "tied_selectivity", "tied_rs"};
  for (const auto& r : rows) {
    t.rows.push_back({csv::number(r.layer), analysis::to_string(r.metric), csv::optional_number(r.rho),
                      csv::number(r.n), csv::number(r.tied_selectivity), csv::number(r.tied_rs)});
  }
  csv::write(path, t);
}

}  // namespace unitlens::cli
