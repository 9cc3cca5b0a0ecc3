// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <vector>

#include "unitlens/errors.hpp"
#include "unitlens/netzoo/network.hpp"
#include "unitlens/rng.hpp"

namespace unitlens::netzoo {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  /// Evaluate test accuracy after every epoch (otherwise only after the last).
  bool eval_each_epoch = false;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Minibatch SGD with momentum on softmax cross-entropy:
///   v <- momentum * v + grad;  p <- p - learning_rate * v
/// Samples are reshuffled every epoch from derive_seed(seed, epoch); the last
/// batch of an epoch may be short. Train accuracy is measured on the fly.
inline TrainResult train(Checkpoint model, const Dataset& train_set, const Dataset* test_set,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  if (train_set.size() == 0) throw ContractError("training set is empty");
  if (cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || cfg.momentum < 0.0) {
    throw ConfigError("batch_size and learning_rate must be positive, momentum nonnegative");
  }
  check_input(model.spec, train_set.images);

  TrainResult result{std::move(model), {}};
  Checkpoint& ck = result.checkpoint;
  std::vector<Tensor> velocity;
  for (const auto& p : ck.parameters) velocity.emplace_back(p.value.shape(), 0.0);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0, batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
      std::span<const std::size_t> idx(order.data() + begin, count);
      const Tensor batch = train_set.gather(idx);
      std::vector<int> labels(count);
      for (std::size_t i = 0; i < count; ++i) labels[i] = train_set.labels[idx[i]];

      Tape tape;
      ForwardOptions opt;
      opt.parameters_require_grad = true;
      auto fw = run_network(tape, ck, tape.borrow(batch), opt);
      Var loss = tensorgrad::softmax_cross_entropy(*fw.logits, labels);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) {
        std::ostringstream os;
        os << "non-finite loss " << lv << " at epoch " << epoch << ", batch " << batch_index;
        throw NumericError(os.str());
      }
      const auto pred = tensorgrad::argmax_rows(fw.logits->value());
      for (std::size_t i = 0; i < count; ++i) correct += pred[i] == labels[i];
      loss_sum += lv * static_cast<double>(count);

      auto grads = tape.backward(loss);
      for (std::size_t p = 0; p < ck.parameters.size(); ++p) {
        const Tensor& g = grads.at(fw.parameters[p]);
        Tensor& v = velocity[p];
        Tensor& w = ck.parameters[p].value;
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = cfg.momentum * v[i] + g[i];
          w[i] -= cfg.learning_rate * v[i];
        }
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_loss = loss_sum / static_cast<double>(train_set.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (test_set && (cfg.eval_each_epoch || epoch == cfg.epochs)) {
      m.test_accuracy = accuracy(ck, *test_set);
    }
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }

  if (!result.metrics.empty()) {
    ck.meta.seed = cfg.seed;
    ck.meta.epochs += cfg.epochs;
    ck.meta.train_accuracy = result.metrics.back().train_accuracy;
    ck.meta.test_accuracy = result.metrics.back().test_accuracy.value_or(0.0);
  }
  return result;
}

}  // namespace unitlens::netzoo
