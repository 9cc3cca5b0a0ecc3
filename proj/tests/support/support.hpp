// SPDX-License-Identifier: Apache-2.0
// Shared test helpers: random data, a finite-difference gradient checker,
// brute-force reference implementations and tiny hand-built networks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "unitlens/netzoo/checkpoint.hpp"
#include "unitlens/netzoo/dataset.hpp"
#include "unitlens/tensorgrad/ops.hpp"
#include "unitlens/tensorgrad/tape.hpp"

namespace testsupport {

using unitlens::tensorgrad::Shape;
using unitlens::tensorgrad::Tape;
using unitlens::tensorgrad::Tensor;
using unitlens::tensorgrad::Var;

// std::mt19937_64 directly, so test data does not depend on the library RNG.
class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline Tensor random_tensor(const Shape& shape, TestRng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Values with |v| in [margin, hi], random sign.
inline Tensor away_from_zero(const Shape& shape, TestRng& rng, double margin, double hi = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double m = rng.uniform(margin, hi);
    t[i] = rng.coin() ? m : -m;
  }
  return t;
}

// ---------------------------------------------------------------------------
// finite differences

using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

/// Compares reverse-mode gradients of f against central differences with step
/// `eps` for every entry of every input. Error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1).
inline GradCheck check_gradients(const ScalarFn& f, std::vector<Tensor> inputs, double eps = 1e-5) {
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape(false);
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.leaf(x, false));
    return f(tape, vars).value().item();
  };

  Tape tape(true);
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.leaf(x, true));
  const Var loss = f(tape, vars);
  auto grads = tape.backward(loss);

  GradCheck out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = grads.has(vars[k]) ? grads.at(vars[k]) : Tensor(inputs[k].shape(), 0.0);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + eps;
      const double up = evaluate(inputs);
      inputs[k][i] = saved - eps;
      const double down = evaluate(inputs);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1.0});
      out.max_rel_error = std::max(out.max_rel_error, err);
      ++out.entries;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// brute-force references, written without the library's helpers

/// Identical means for every class score 0 by definition.
inline double brute_selectivity(const std::vector<double>& means) {
  bool flat = true;
  for (double m : means) flat = flat && m == means[0];
  if (flat) return 0.0;
  double top = means[0];
  std::size_t arg = 0;
  for (std::size_t c = 1; c < means.size(); ++c) {
    if (means[c] > top) {
      top = means[c];
      arg = c;
    }
  }
  double rest = 0.0;
  for (std::size_t c = 0; c < means.size(); ++c) {
    if (c != arg) rest += means[c];
  }
  rest = rest / double(means.size() - 1);
  return (top - rest) / (top + rest);
}

inline std::size_t brute_best_class(const std::vector<double>& means) {
  std::size_t arg = 0;
  for (std::size_t c = 0; c < means.size(); ++c) {
    bool beats_all = true;
    for (std::size_t d = 0; d < means.size(); ++d) {
      if (means[d] > means[c]) beats_all = false;
    }
    if (beats_all) {
      arg = c;
      break;
    }
  }
  return arg;
}

inline std::size_t brute_exceed(const std::vector<double>& acts, std::size_t target) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    for (std::size_t j = 0; j < acts.size(); ++j) {
      if (i == target && j != target && acts[j] > acts[i]) ++count;
    }
  }
  return count;
}

/// Rank of each value: 1 + (number smaller) + (number equal, itself excluded) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) less += 1;
      if (j != i && v[j] == v[i]) equal += 1;
    }
    r[i] = 1.0 + less + equal / 2.0;
  }
  return r;
}

inline double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = brute_ranks(x), ry = brute_ranks(y);
  const double n = double(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += rx[i];
    sy += ry[i];
    sxy += rx[i] * ry[i];
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// ---------------------------------------------------------------------------
// hand-built networks

namespace nz = unitlens::netzoo;

/// input [C,H,W] -> conv(K) -> relu -> flatten -> dense(classes); zero parameters.
inline nz::Checkpoint tiny_cnn(std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t classes) {
  nz::ModelSpec spec{"hand-cnn", {c, h, w}, classes,
                     {{nz::LayerKind::conv, k}, {nz::LayerKind::relu, 0}, {nz::LayerKind::flatten, 0},
                      {nz::LayerKind::dense, classes}}};
  nz::infer_shapes(spec);
  return nz::Checkpoint{spec, nz::zero_parameters(spec), {}};
}

/// input [1,1,n] -> flatten -> dense(units) -> relu -> dense(classes); zero parameters.
inline nz::Checkpoint tiny_mlp(std::size_t n, std::size_t units, std::size_t classes) {
  nz::ModelSpec spec{"hand-mlp", {1, 1, n}, classes,
                     {{nz::LayerKind::flatten, 0}, {nz::LayerKind::dense, units}, {nz::LayerKind::relu, 0},
                      {nz::LayerKind::dense, classes}}};
  nz::infer_shapes(spec);
  return nz::Checkpoint{spec, nz::zero_parameters(spec), {}};
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 gen(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("unitlens-" + tag + "-" + std::to_string(gen() % 1000000000ULL));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
