// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unitlens/analysis/report.hpp"
#include "unitlens/analysis/svg.hpp"
#include "unitlens/cli/config.hpp"
#include "unitlens/cli/rundir.hpp"
#include "unitlens/csv.hpp"
#include "unitlens/errors.hpp"
#include "unitlens/netzoo/checkpoint.hpp"
#include "unitlens/netzoo/dataset.hpp"
#include "unitlens/netzoo/train.hpp"
#include "unitlens/parallel.hpp"
#include "unitlens/probes/probes.hpp"
#include "unitlens/rsmetric/rsmetric.hpp"
#include "unitlens/synthlab/png.hpp"
#include "unitlens/synthlab/synthesize.hpp"

namespace unitlens::cli {

using probes::UnitId;
using synthlab::Mode;

// ---------------------------------------------------------------------------
// option interpretation

inline std::size_t worker_count(const RunConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

inline std::vector<Mode> modes_of(const RunConfig& cfg) {
  if (cfg.mode == "both") return {Mode::am, Mode::iam};
  return {synthlab::mode_from(cfg.mode)};
}

inline netzoo::Split split_of(const RunConfig& cfg) {
  if (cfg.split == "test") return netzoo::Split::test;
  if (cfg.split == "train") return netzoo::Split::train;
  throw ConfigError("unknown split '" + cfg.split + "', expected test or train");
}

inline std::vector<std::size_t> layers_of(const RunConfig& cfg, const netzoo::ModelSpec& spec) {
  const auto all = netzoo::analyzable_layers(spec);
  std::vector<std::size_t> out;
  if (cfg.layer == "all") {
    for (const auto& l : all) out.push_back(l.index);
    return out;
  }
  std::stringstream ss(cfg.layer);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t v = 0;
    try {
      v = csv::parse_index(part);
    } catch (const FormatError&) {
      throw ConfigError("bad --layer value '" + cfg.layer + "'");
    }
    netzoo::analyzable_layer(spec, v);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--layer selects no layers");
  std::sort(out.begin(), out.end());
  return out;
}

/// Units named by --unit, or every unit of the --layer selection.
inline std::vector<UnitId> units_of(const RunConfig& cfg, const netzoo::ModelSpec& spec) {
  std::vector<UnitId> out;
  if (!cfg.units.empty()) {
    for (const auto& text : cfg.units) {
      const UnitId u = probes::parse_unit(text);
      probes::check_unit(spec, u);
      out.push_back(u);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  for (std::size_t layer : layers_of(cfg, spec)) {
    const auto info = netzoo::analyzable_layer(spec, layer);
    for (std::size_t u = 0; u < info.unit_count; ++u) out.push_back({layer, u});
  }
  return out;
}

inline synthlab::SynthesisConfig synthesis_config(const RunConfig& cfg, Mode mode) {
  synthlab::SynthesisConfig s;
  s.mode = mode;
  s.steps = cfg.steps;
  s.step_size = cfg.step_size;
  s.init_seed = cfg.seed;
  s.init_low = cfg.init_low;
  s.init_high = cfg.init_high;
  s.validate();
  return s;
}

inline std::filesystem::path data_root(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("no dataset: pass --data or set UNITLENS_DATA");
  return cfg.data;
}

/// Loads a split and pools it down to `input_shape` when the model was trained
/// on downsampled images.
inline netzoo::Dataset load_for_model(const RunConfig& cfg, netzoo::Split split,
                                      const netzoo::ModelSpec& spec) {
  const std::size_t limit = split == netzoo::Split::test ? cfg.test_limit : cfg.train_limit;
  netzoo::Dataset ds = netzoo::load_dataset(data_root(cfg), split).head(limit);
  const auto have = ds.sample_shape();
  const auto want = spec.input_shape;
  if (have[0] != want[0] || ds.class_count != spec.class_count || want[1] == 0 || want[2] == 0 ||
      have[1] % want[1] != 0 || have[1] / want[1] != have[2] / want[2] || have[2] % want[2] != 0) {
    throw ConfigError("dataset samples " + tensorgrad::shape_str({have[0], have[1], have[2]}) + " with " +
                      std::to_string(ds.class_count) + " classes do not fit model input " +
                      tensorgrad::shape_str({want[0], want[1], want[2]}) + " with " +
                      std::to_string(spec.class_count) + " classes");
  }
  return ds.downsampled(have[1] / want[1]);
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// commands

inline void cmd_train(const RunConfig& cfg, Logger& log) {
  const RunPaths paths{cfg.run};
  if (cfg.downsample == 0) throw ConfigError("--downsample must be >= 1");
  const auto root = data_root(cfg);
  const netzoo::Dataset train_set =
      netzoo::load_dataset(root, netzoo::Split::train).head(cfg.train_limit).downsampled(cfg.downsample);
  const netzoo::Dataset test_set =
      netzoo::load_dataset(root, netzoo::Split::test).head(cfg.test_limit).downsampled(cfg.downsample);
  log("train " + std::to_string(train_set.size()) + " / test " + std::to_string(test_set.size()) +
      " images of " + tensorgrad::shape_str({train_set.sample_shape().begin(), train_set.sample_shape().end()}));

  netzoo::Checkpoint init = netzoo::build(cfg.arch, train_set.sample_shape(), train_set.class_count, cfg.seed);
  netzoo::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.lr;
  tc.momentum = cfg.momentum;
  tc.seed = cfg.seed;
  tc.eval_each_epoch = cfg.eval_each_epoch;
  auto t0 = std::chrono::steady_clock::now();
  auto result = netzoo::train(std::move(init), train_set, &test_set, tc, [&](const netzoo::EpochMetrics& m) {
    std::string line = "epoch " + std::to_string(m.epoch) + " loss " + fixed(m.mean_loss) + " train_acc " +
                       fixed(m.train_accuracy);
    if (m.test_accuracy) line += " test_acc " + fixed(*m.test_accuracy);
    log(line + " (" + fixed(seconds_since(t0), 1) + " s)");
  });

  netzoo::save(result.checkpoint, paths.checkpoint());
  csv::Table t;
  t.header = {"epoch", "mean_loss", "train_accuracy", "test_accuracy"};
  for (const auto& m : result.metrics) {
    t.rows.push_back({csv::number(m.epoch), csv::number(m.mean_loss), csv::number(m.train_accuracy),
                      m.test_accuracy ? csv::number(*m.test_accuracy) : std::string()});
  }
  csv::write(paths.metrics(), t);
  log("test accuracy " + fixed(result.checkpoint.meta.test_accuracy) + ", checkpoint " +
      paths.checkpoint().string());
}

inline void cmd_selectivity(const RunConfig& cfg, Logger& log) {
  const RunPaths paths{cfg.run};
  const auto ck = netzoo::load(paths.checkpoint());
  const auto layers = layers_of(cfg, ck.spec);
  const auto data = load_for_model(cfg, split_of(cfg), ck.spec);
  const auto profiles = probes::profile_all_layers(ck, data);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t layer : layers) {
    const auto records = probes::class_selectivity(profiles[layer]);
    std::vector<double> values;
    for (const auto& r : records) {
      rows.push_back(to_row(r));
      values.push_back(r.selectivity);
    }
    log("layer " + std::to_string(layer) + ": median selectivity " + fixed(analysis::median(values)));
  }
  merge_unit_rows(paths.selectivity(), selectivity_header(), std::move(rows));
}

inline void cmd_synthesize(const RunConfig& cfg, Logger& log) {
  const RunPaths paths{cfg.run};
  const auto ck = netzoo::load(paths.checkpoint());
  const auto units = units_of(cfg, ck.spec);
  for (Mode mode : modes_of(cfg)) {
    const auto base = synthesis_config(cfg, mode);
    ordered_map(units.size(), worker_count(cfg), [&](std::size_t i) {
      auto sc = base;
      sc.init_seed = rsmetric::unit_seed(base.init_seed, units[i]);
      const auto result = synthlab::synthesize(ck, units[i], sc);
      synthlab::export_image(result.image, paths.gallery_image(units[i], mode));
      log(probes::to_string(units[i]) + " " + synthlab::to_string(mode) + ": objective " +
          fixed(result.objective(), 6) + " at step " + std::to_string(result.best_step) +
          (result.stalled ? " (stalled)" : ""));
      return 0;
    });
  }
}

inline void cmd_rs(const RunConfig& cfg, Logger& log) {
  const RunPaths paths{cfg.run};
  const auto ck = netzoo::load(paths.checkpoint());
  const auto layers = layers_of(cfg, ck.spec);
  rsmetric::SweepOptions opts;
  opts.workers = worker_count(cfg);
  opts.denominator = rsmetric::denominator_from(cfg.rs_denominator);
  for (Mode mode : modes_of(cfg)) {
    const auto sc = synthesis_config(cfg, mode);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t layer : layers) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::size_t n = netzoo::analyzable_layer(ck.spec, layer).unit_count;
      std::atomic<std::size_t> done{0};
      opts.on_unit = [&](const synthlab::SynthesisResult&, const rsmetric::RsRecord&) {
        const std::size_t d = ++done;
        if (d % std::max<std::size_t>(1, n / 4) == 0 && d < n) {
          log("layer " + std::to_string(layer) + " " + synthlab::to_string(mode) + ": " +
              std::to_string(d) + "/" + std::to_string(n) + " units");
        }
      };
      const auto sweep = rsmetric::rs_sweep(ck, layer, sc, opts);
      double sum = 0.0;
      std::size_t stalled = 0;
      for (std::size_t u = 0; u < sweep.records.size(); ++u) {
        rows.push_back(to_row(sweep.records[u]));
        sum += sweep.records[u].rs;
        stalled += sweep.syntheses[u].stalled;
        synthlab::export_image(sweep.syntheses[u].image, paths.gallery_image(sweep.records[u].unit, mode));
      }
      log("layer " + std::to_string(layer) + " " + synthlab::to_string(mode) + ": mean rs " +
          fixed(sum / static_cast<double>(n)) + ", " + std::to_string(stalled) + " stalled, " +
          fixed(seconds_since(t0), 1) + " s");
    }
    merge_unit_rows(paths.rs(mode), rs_header(), std::move(rows));
  }
}

inline void cmd_ablate(const RunConfig& cfg, Logger& log) {
  const RunPaths paths{cfg.run};
  const auto ck = netzoo::load(paths.checkpoint());
  const auto units = units_of(cfg, ck.spec);
  const auto data = load_for_model(cfg, split_of(cfg), ck.spec);
  const double baseline = netzoo::accuracy(ck, data);
  log("baseline accuracy " + fixed(baseline) + " on " + std::to_string(data.size()) + " images");
  const auto importance = ordered_map(units.size(), worker_count(cfg), [&](std::size_t i) {
    return probes::ablation_importance(ck, units[i], data, baseline);
  });
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < units.size(); ++i) {
    rows.push_back(to_row(analysis::AblationRecord{units[i], importance[i]}));
  }
  merge_unit_rows(paths.ablation(), ablation_header(), std::move(rows));
  log("ablated " + std::to_string(units.size()) + " units");
}

/// Everything the report step derives from the per-unit CSVs.
struct CorrelationArtifacts {
  std::vector<analysis::UnitReport> reports;
  std::vector<analysis::LayerCorrelation> correlations;
  std::vector<analysis::FcLayerSummary> fc;  // one per available metric
  std::vector<analysis::RsMetric> metrics;
};

inline CorrelationArtifacts cmd_correlate_impl(const RunConfig& cfg, Logger& log) {
  const RunPaths paths{cfg.run};
  const auto ck = netzoo::load(paths.checkpoint());
  if (!std::filesystem::exists(paths.selectivity())) {
    throw IoError("missing " + paths.selectivity().string() + "; run selectivity first");
  }
  const auto sel = read_selectivity(paths.selectivity());
  std::vector<rsmetric::RsRecord> am, iam;
  CorrelationArtifacts out;
  if (std::filesystem::exists(paths.rs(Mode::am))) {
    am = read_rs(paths.rs(Mode::am));
    out.metrics.push_back(analysis::RsMetric::rs_am);
  }
  if (std::filesystem::exists(paths.rs(Mode::iam))) {
    iam = read_rs(paths.rs(Mode::iam));
    out.metrics.push_back(analysis::RsMetric::rs_iam);
  }
  if (out.metrics.empty()) throw IoError("no rs_am.csv or rs_iam.csv in " + paths.root.string() + "; run rs first");
  std::vector<analysis::AblationRecord> abl;
  if (std::filesystem::exists(paths.ablation())) abl = read_ablation(paths.ablation());

  out.reports = analysis::join_unit_reports(sel, am, iam, abl);
  const auto layers = analysis::group_by_layer(out.reports);
  for (auto metric : out.metrics) {
    auto profile = analysis::layer_correlation_profile(layers, metric);
    for (const auto& lc : profile) {
      log("layer " + std::to_string(lc.layer) + " rho(selectivity, " + analysis::to_string(metric) +
          ") = " + (lc.rho ? fixed(*lc.rho) : std::string("undefined")) + " over " + std::to_string(lc.n) +
          " units");
    }
    out.correlations.insert(out.correlations.end(), profile.begin(), profile.end());
  }
  std::stable_sort(out.correlations.begin(), out.correlations.end(),
                   [](const auto& a, const auto& b) { return a.layer < b.layer; });

  const auto analyzable = netzoo::analyzable_layers(ck.spec);
  if (!analyzable.empty() && analyzable.back().kind == netzoo::LayerKind::dense &&
      layers.count(analyzable.back().index)) {
    const auto& fc_reports = layers.at(analyzable.back().index);
    csv::Table t;
    t.header = {"layer_index", "metric", "n", "median_selectivity", "median_rs", "zero_rs_fraction"};
    for (auto metric : out.metrics) {
      const auto s = analysis::fc_layer_summary(fc_reports, metric);
      out.fc.push_back(s);
      t.rows.push_back({csv::number(s.layer), analysis::to_string(metric), csv::number(s.n),
                        csv::number(s.median_selectivity), csv::number(s.median_rs),
                        csv::number(s.zero_rs_fraction)});
      log("fc layer " + std::to_string(s.layer) + " " + analysis::to_string(metric) + ": zero-rs fraction " +
          fixed(s.zero_rs_fraction) + ", median selectivity " + fixed(s.median_selectivity));
    }
    csv::write(paths.fc_summary(), t);
  }

  write_unit_report(paths.unit_report(), out.reports);
  write_layer_correlation(paths.layer_correlation(), out.correlations);
  return out;
}

inline void cmd_correlate(const RunConfig& cfg, Logger& log) { cmd_correlate_impl(cfg, log); }

namespace detail {

inline std::string html_escape(const std::string& s) { return analysis::detail::xml_escape(s); }

inline void write_gallery_index(const RunPaths& paths, const netzoo::ModelSpec& spec,
                                const std::vector<analysis::UnitReport>& reports) {
  const auto layers = analysis::group_by_layer(reports);
  std::string s;
  s += "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>unit gallery</title>\n";
  s += "<style>img{image-rendering:pixelated;width:56px;height:56px}"
       "td,th{padding:2px 8px;text-align:right}</style></head><body>\n";
  for (const auto& [layer, rows] : layers) {
    const auto info = netzoo::analyzable_layer(spec, layer);
    s += "<h2>layer " + std::to_string(layer) + " (" + netzoo::to_string(info.kind) + ", " +
         std::to_string(info.unit_count) + " units)</h2>\n";
    s += "<table><tr><th>unit</th><th>selectivity</th><th>rs_am</th><th>rs_iam</th><th>am</th><th>iam</th></tr>\n";
    for (const auto& r : rows) {
      s += "<tr><td>" + std::to_string(r.unit.unit) + "</td><td>" + csv::optional_number(r.selectivity) +
           "</td><td>" + csv::optional_number(r.rs_am) + "</td><td>" + csv::optional_number(r.rs_iam) + "</td>";
      for (Mode m : {Mode::am, Mode::iam}) {
        const auto img = paths.gallery_image(r.unit, m);
        s += "<td>";
        if (std::filesystem::exists(img)) {
          s += "<img src=\"" + html_escape(std::filesystem::relative(img, paths.gallery()).generic_string()) +
               "\" alt=\"\">";
        }
        s += "</td>";
      }
      s += "</tr>\n";
    }
    s += "</table>\n";
  }
  s += "</body></html>\n";
  std::filesystem::create_directories(paths.gallery());
  std::ofstream out(paths.gallery() / "index.html", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write gallery index");
  out << s;
}

}  // namespace detail

inline void cmd_report(const RunConfig& cfg, Logger& log) {
  const RunPaths paths{cfg.run};
  const auto art = cmd_correlate_impl(cfg, log);
  const auto ck = netzoo::load(paths.checkpoint());
  const auto layers = analysis::group_by_layer(art.reports);
  std::size_t plots = 0;
  for (const auto& lc : art.correlations) {
    std::vector<std::pair<double, double>> points;
    for (const auto& r : layers.at(lc.layer)) {
      const auto m = analysis::metric_of(r, lc.metric);
      if (r.selectivity && m) points.emplace_back(*r.selectivity, *m);
    }
    if (points.empty()) continue;
    const auto info = netzoo::analyzable_layer(ck.spec, lc.layer);
    analysis::ScatterLabels labels;
    labels.title = "layer " + std::to_string(lc.layer) + " (" + netzoo::to_string(info.kind) +
                   "): rho = " + (lc.rho ? fixed(*lc.rho, 3) : std::string("undefined"));
    labels.y_axis = analysis::to_string(lc.metric);
    analysis::scatter_plot(points, labels,
                           paths.plots() / ("layer" + std::to_string(lc.layer) + "_" +
                                            analysis::to_string(lc.metric) + ".svg"));
    ++plots;
  }
  detail::write_gallery_index(paths, ck.spec, art.reports);
  log("wrote " + std::to_string(plots) + " scatter plots and the gallery index");
}

inline void cmd_pipeline(const RunConfig& cfg, Logger& log) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig all = cfg;
  all.layer = "all";
  all.mode = "both";
  cmd_train(all, log);
  cmd_selectivity(all, log);
  cmd_rs(all, log);
  cmd_report(all, log);
  log("pipeline finished in " + fixed(seconds_since(t0), 1) + " s");
}

// ---------------------------------------------------------------------------
// entry point

inline constexpr const char* kExitCodeHelp =
    "Exit codes: 0 ok, 2 configuration error (bad flag, config file or unit reference syntax), "
    "3 I/O error (missing dataset or artifact, malformed checkpoint), 4 contract violation "
    "(out-of-range layer or unit, shape mismatch), 5 numeric failure (non-finite loss). "
    "Failures print one line: error: <category>: <message>.";

struct CommandDef {
  const char* name;
  const char* help;
  std::vector<std::string> keys;
  void (*run)(const RunConfig&, Logger&);
};

inline const std::vector<CommandDef>& command_table() {
  static const std::vector<CommandDef> table = {
      {"train", "Train a preset network and write checkpoint and metrics.csv",
       {"run", "config", "data", "arch", "epochs", "batch_size", "lr", "momentum", "seed", "downsample",
        "train_limit", "test_limit", "eval_each_epoch"},
       cmd_train},
      {"selectivity", "Per-unit class selectivity into selectivity.csv",
       {"run", "config", "data", "split", "train_limit", "test_limit", "layer"},
       cmd_selectivity},
      {"synthesize", "Synthesize preferred inputs into gallery/",
       {"run", "config", "units", "layer", "mode", "steps", "step_size", "init_low", "init_high", "seed",
        "workers"},
       cmd_synthesize},
      {"rs", "Representative substitution sweeps into rs_am.csv / rs_iam.csv",
       {"run", "config", "layer", "mode", "steps", "step_size", "init_low", "init_high", "seed", "workers",
        "rs_denominator"},
       cmd_rs},
      {"ablate", "Unit ablation importance into ablation.csv",
       {"run", "config", "data", "split", "train_limit", "test_limit", "units", "layer", "workers"},
       cmd_ablate},
      {"correlate", "Join per-unit CSVs; write unit_report.csv, layer_correlation.csv, fc_summary.csv",
       {"run", "config"},
       cmd_correlate},
      {"report", "correlate plus scatter plots and the gallery index", {"run", "config"}, cmd_report},
      {"pipeline", "train, selectivity, rs (all layers, both modes) and report in one go",
       {"run", "config", "data", "arch", "epochs", "batch_size", "lr", "momentum", "seed", "downsample",
        "train_limit", "test_limit", "eval_each_epoch", "split", "steps", "step_size", "init_low", "init_high",
        "workers", "rs_denominator"},
       cmd_pipeline},
  };
  return table;
}

inline std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

inline int report_error(ErrorCategory category, const std::string& message) {
  std::cerr << "error: " << category_name(category) << ": " << one_line(message) << std::endl;
  return static_cast<int>(category);
}

/// Parses arguments and runs one command. Returns the process exit code.
/// `echo_log` mirrors log lines to stderr.
inline int run_cli(int argc, const char* const* argv, bool echo_log = true) {
  CLI::App app{"Per-unit class selectivity, activation maximization and representative substitution "
               "for small image classifiers.",
               "unitlens"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1, 1);
  app.get_formatter()->column_width(34);

  std::vector<std::pair<const CommandDef*, std::unique_ptr<CommandOptions>>> subs;
  for (const auto& def : command_table()) {
    CLI::App* sub = app.add_subcommand(def.name, def.help);
    sub->footer(kExitCodeHelp);
    subs.emplace_back(&def, std::make_unique<CommandOptions>(*sub, def.keys));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(ErrorCategory::config, e.what());
  }

  for (auto& [def, opts] : subs) {
    if (!app.got_subcommand(def->name)) continue;
    try {
      const RunConfig& cfg = opts->resolve();
      const RunPaths paths{cfg.run};
      std::filesystem::create_directories(paths.root);
      echo_config(paths, def->name, opts->resolved_json());
      Logger log(paths.log(), def->name, echo_log);
      log("start " + opts->resolved_json().dump());
      const auto t0 = std::chrono::steady_clock::now();
      def->run(cfg, log);
      log("done in " + fixed(seconds_since(t0), 1) + " s");
      return 0;
    } catch (const Error& e) {
      return report_error(e.category(), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
      return report_error(ErrorCategory::io, e.what());
    } catch (const std::exception& e) {
      return report_error(ErrorCategory::contract, e.what());
    }
  }
  return report_error(ErrorCategory::config, "no command given");
}

inline int run_cli(const std::vector<std::string>& args, bool echo_log = true) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("unitlens");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), echo_log);
}

}  // namespace unitlens::cli
