// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unitlens/errors.hpp"

namespace unitlens::cli {

using nlohmann::json;

/// Every tunable of every command. Member initializers are the defaults shown
/// by --help and used when neither a flag nor the config file sets a value.
struct RunConfig {
  std::string run = "run";
  std::string config;
  std::string data;
  std::string arch = "shallow-cnn";
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 7;
  std::size_t downsample = 1;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  bool eval_each_epoch = false;
  std::string split = "test";
  std::string layer = "all";
  std::string mode = "both";
  std::vector<std::string> units;
  std::size_t steps = 256;
  double step_size = 0.05;
  double init_low = 0.4;
  double init_high = 0.6;
  std::string rs_denominator = "all";
  std::size_t workers = 0;
};

struct FieldDef {
  std::string key;
  std::string flags;
  std::function<CLI::Option*(CLI::App&, RunConfig&)> bind;
  std::function<void(RunConfig&, const json&)> from_json;
  std::function<void(const RunConfig&, json&)> to_json;
};

namespace detail {

template <class T>
FieldDef field(std::string key, std::string flags, T RunConfig::*member, std::string help) {
  FieldDef f;
  f.key = key;
  f.flags = flags;
  f.bind = [member, help, flags](CLI::App& app, RunConfig& cfg) -> CLI::Option* {
    if constexpr (std::is_same_v<T, bool>) {
      return app.add_flag(flags, cfg.*member, help)->default_str(cfg.*member ? "true" : "false");
    } else {
      return app.add_option(flags, cfg.*member, help)->capture_default_str();
    }
  };
  f.from_json = [member, key](RunConfig& cfg, const json& j) {
    try {
      cfg.*member = j.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  };
  f.to_json = [member, key](const RunConfig& cfg, json& j) { j[key] = cfg.*member; };
  return f;
}

}  // namespace detail

/// The single source for flag names, help text and config-file keys.
inline const std::vector<FieldDef>& field_table() {
  using detail::field;
  static const std::vector<FieldDef> table = {
      field("run", "--run,--out", &RunConfig::run, "Run directory; every artifact is written here"),
      field("config", "--config", &RunConfig::config,
            "JSON file of defaults (flat object keyed by option name; a nested object named "
            "after the command overrides it); explicit flags win"),
      field("data", "--data", &RunConfig::data,
            "Dataset root with MNIST IDX files or CIFAR-10 .bin batches (empty: $UNITLENS_DATA)"),
      field("arch", "--arch", &RunConfig::arch, "Architecture preset: mlp, mlp-tiny, shallow-cnn, vgg16-cifar"),
      field("epochs", "--epochs", &RunConfig::epochs, "Training epochs"),
      field("batch_size", "--batch-size", &RunConfig::batch_size, "Minibatch size"),
      field("lr", "--lr", &RunConfig::lr, "SGD learning rate"),
      field("momentum", "--momentum", &RunConfig::momentum, "SGD momentum"),
      field("seed", "--seed", &RunConfig::seed,
            "Base seed; initialization, shuffling and synthesis noise derive from it"),
      field("downsample", "--downsample", &RunConfig::downsample,
            "Average-pool input images by this factor before training (1 = native size)"),
      field("train_limit", "--train-limit", &RunConfig::train_limit,
            "Use only the first N training images (0 = all)"),
      field("test_limit", "--test-limit", &RunConfig::test_limit,
            "Use only the first N test images (0 = all)"),
      field("eval_each_epoch", "--eval-each-epoch", &RunConfig::eval_each_epoch,
            "Measure test accuracy after every epoch, not only the last"),
      field("split", "--split", &RunConfig::split, "Evaluation split for selectivity and ablation: test or train"),
      field("layer", "--layer", &RunConfig::layer,
            "Analyzable layer indices, zero-based and comma separated, or 'all'"),
      field("mode", "--mode", &RunConfig::mode, "Synthesis objective: am, iam or both"),
      field("units", "--unit", &RunConfig::units,
            "Unit references layer:unit (repeatable); overrides --layer"),
      field("steps", "--steps", &RunConfig::steps, "Gradient-ascent steps per synthesized image"),
      field("step_size", "--step-size", &RunConfig::step_size, "Ascent step on the L2-normalized gradient"),
      field("init_low", "--init-low", &RunConfig::init_low, "Lower bound of the uniform initial image"),
      field("init_high", "--init-high", &RunConfig::init_high, "Upper bound of the uniform initial image"),
      field("rs_denominator", "--rs-denominator", &RunConfig::rs_denominator,
            "RS denominator: all (layer size) or others (layer size - 1)"),
      field("workers", "--workers", &RunConfig::workers,
            "Threads for per-unit fan-out (0 = all cores); results do not depend on it"),
  };
  return table;
}

inline const FieldDef& field_def(const std::string& key) {
  for (const auto& f : field_table()) {
    if (f.key == key) return f;
  }
  throw ContractError("no option '" + key + "'");
}

/// Options of one subcommand bound to its own RunConfig.
class CommandOptions {
 public:
  CommandOptions(CLI::App& app, std::vector<std::string> keys) : app_(&app), keys_(std::move(keys)) {
    for (const auto& k : keys_) options_.push_back(field_def(k).bind(app, cfg_));
  }
  CommandOptions(const CommandOptions&) = delete;
  CommandOptions& operator=(const CommandOptions&) = delete;

  /// Fills every option not given on the command line from --config, then
  /// resolves environment fallbacks.
  const RunConfig& resolve() {
    if (!cfg_.config.empty()) apply_config_file(cfg_.config);
    if (has("data") && cfg_.data.empty()) {
      if (const char* env = std::getenv("UNITLENS_DATA")) cfg_.data = env;
    }
    return cfg_;
  }

  /// Resolved values of this command's options (config path included).
  json resolved_json() const {
    json j = json::object();
    for (const auto& k : keys_) field_def(k).to_json(cfg_, j);
    return j;
  }

  const RunConfig& config() const { return cfg_; }
  const std::vector<std::string>& keys() const { return keys_; }
  bool has(const std::string& key) const {
    return std::find(keys_.begin(), keys_.end(), key) != keys_.end();
  }

 private:
  void apply_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");

    std::set<std::string> known;
    for (const auto& f : field_table()) known.insert(f.key);
    json merged = json::object();
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      if (it.value().is_object()) continue;  // per-command section
      if (!known.count(it.key())) throw ConfigError("config file: unknown key '" + it.key() + "'");
      merged[it.key()] = it.value();
    }
    const std::string section = app_->get_name();
    if (doc.contains(section) && doc[section].is_object()) {
      for (auto it = doc[section].begin(); it != doc[section].end(); ++it) {
        if (!known.count(it.key())) {
          throw ConfigError("config file: unknown key '" + section + "." + it.key() + "'");
        }
        merged[it.key()] = it.value();
      }
    }
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      const auto& key = keys_[i];
      if (key == "config" || !merged.contains(key)) continue;
      if (options_[i]->count() > 0) continue;  // explicit flag wins
      field_def(key).from_json(cfg_, merged[key]);
    }
  }

  CLI::App* app_;
  std::vector<std::string> keys_;
  std::vector<CLI::Option*> options_;
  RunConfig cfg_;
};

}  // namespace unitlens::cli
