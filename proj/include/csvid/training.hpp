#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csvid/convnet.hpp"
#include "csvid/optimizer.hpp"
#include "csvid/schedule.hpp"

namespace csvid {

// One training example in the measurement domain: a T x Hb x Wb x C tensor
// plus its class index.
struct LabeledSample {
  Tensor x;  // rank 4
  int label = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams params;  // best-validation-loss parameters
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool diverged = false;
  std::string stop_reason;
};

struct EvalResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

namespace detail {

inline Tensor stack_batch(std::span<const LabeledSample> samples,
                          const std::vector<std::size_t>& order, std::size_t begin,
                          std::size_t count, std::vector<int>& labels) {
  const Tensor& first = samples[order[begin]].x;
  std::vector<std::size_t> shape = {count, first.shape[0], first.shape[1], first.shape[2],
                                    first.shape[3]};
  Tensor batch = Tensor::zeros(shape);
  std::size_t stride = first.size();
  labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const LabeledSample& s = samples[order[begin + i]];
    require(s.x.shape == first.shape, errc::invalid_argument,
            "all samples must share one geometry");
    std::copy_n(s.x.data.data(), stride, batch.data.data() + i * stride);
    labels[i] = s.label;
  }
  return batch;
}

inline void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
}

}  // namespace detail

// Mean cross-entropy over a dataset, without touching parameters.
inline double dataset_loss(const ModelParams& p, std::span<const LabeledSample> data,
                           std::size_t batch_size) {
  double total = 0.0;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> labels;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    std::size_t count = std::min(batch_size, data.size() - begin);
    Tensor batch = detail::stack_batch(data, order, begin, count, labels);
    Tensor logits = network_forward(p, batch);
    LossResult lr = softmax_cross_entropy(logits, labels);
    total += lr.loss * static_cast<double>(count);
  }
  return total / static_cast<double>(data.size());
}

// Argmax classification; ties resolve to the lowest class index.
inline EvalResult evaluate(const ModelParams& p, std::span<const LabeledSample> data,
                           std::size_t batch_size = 16) {
  require(!data.empty(), errc::invalid_argument, "evaluate: empty dataset");
  EvalResult r;
  std::size_t K = p.config.classes;
  r.confusion.assign(K, std::vector<std::size_t>(K, 0));
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> labels;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    std::size_t count = std::min(batch_size, data.size() - begin);
    Tensor batch = detail::stack_batch(data, order, begin, count, labels);
    Tensor logits = network_forward(p, batch);
    for (std::size_t n = 0; n < count; ++n) {
      std::size_t pred = 0;
      for (std::size_t k = 1; k < K; ++k)
        if (logits(n, k) > logits(n, pred)) pred = k;
      auto truth = static_cast<std::size_t>(labels[n]);
      require(truth < K, errc::invalid_argument, "evaluate: label out of range");
      r.confusion[truth][pred] += 1;
      if (pred == truth) r.correct += 1;
    }
  }
  r.total = data.size();
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

using EpochCallback = std::function<void(const EpochStats&)>;

// Epoch loop with deterministic seeded shuffling, ADAM updates, and the
// plateau schedule driven by validation loss. Returns the parameters from
// the best-validation epoch together with the full history.
inline TrainResult train(std::span<const LabeledSample> train_set,
                         std::span<const LabeledSample> val_set, const NetworkConfig& cfg,
                         const TrainSchedule& sched, std::uint64_t seed,
                         const ModelParams* initial = nullptr,
                         const EpochCallback& on_epoch = nullptr) {
  require(!train_set.empty(), errc::invalid_argument, "train: empty training split");
  require(!val_set.empty(), errc::invalid_argument, "train: empty validation split");
  sched.validate();

  TrainResult result;
  ModelParams params = initial ? *initial : init_params(cfg, seed);
  params.config.validate();
  AdamState adam = AdamState::for_params(params);
  PlateauScheduler plateau(sched);
  Rng shuffle_rng(seed ^ 0x5D5545F1E8C337E1ull);

  result.params = params;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  result.stop_reason = "max_epochs";

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double lr = sched.initial_lr;
  for (int epoch = 1; epoch <= sched.max_epochs; ++epoch) {
    detail::shuffle_indices(order, shuffle_rng);
    double train_loss = 0.0;
    std::vector<int> labels;
    for (std::size_t begin = 0; begin < train_set.size(); begin += sched.batch_size) {
      std::size_t count = std::min(sched.batch_size, train_set.size() - begin);
      Tensor batch = detail::stack_batch(train_set, order, begin, count, labels);
      BackwardResult bw = network_backward(params, batch, labels);
      train_loss += bw.loss * static_cast<double>(count);
      if (!std::isfinite(bw.loss)) {
        result.diverged = true;
        break;
      }
      adam_step(params, bw.grads, adam, lr);
    }
    train_loss /= static_cast<double>(train_set.size());

    if (result.diverged) {
      result.history.push_back({epoch, train_loss, std::numeric_limits<double>::quiet_NaN(),
                                0.0, lr});
      result.stop_reason = "diverged";
      break;
    }

    double val_loss = dataset_loss(params, val_set, sched.batch_size);
    EvalResult ev = evaluate(params, val_set, sched.batch_size);
    EpochStats stats{epoch, train_loss, val_loss, ev.accuracy, lr};
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (!std::isfinite(val_loss)) {
      result.diverged = true;
      result.stop_reason = "diverged";
      break;
    }

    PlateauScheduler::Decision d = plateau.observe(val_loss);
    if (d.improved) {
      result.params = params;
      result.best_epoch = epoch;
      result.best_val_loss = val_loss;
    }
    lr = d.lr;
    if (d.stop) {
      result.stop_reason = "early_stop";
      break;
    }
  }
  return result;
}

}  // namespace csvid
