#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "srcv/eval.hpp"
#include "srcv/io/dataset.hpp"
#include "srcv/loss.hpp"
#include "srcv/model.hpp"

namespace srcv {

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  std::size_t epochs = 30;
  std::size_t per_anchor = 4;
  std::uint64_t seed = 42;
  LossWeights weights;
  nn::DistanceKind distance = nn::DistanceKind::euclidean;
  bool joint_loss = true;
  // false: every epoch replays the same batch order and mining draws.
  bool reshuffle = true;
  // Wall-clock seconds make the log differ between otherwise identical runs.
  bool record_time = false;
  ModelConfig model;

  // Throws ConfigError naming the field. Does not require a positive
  // lambda; an all-zero objective is a valid (if useless) run.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::array<double, 4> terms = {};  // vt, tv, vv, tt
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  // Header `epoch,loss,loss_vt,loss_tv,loss_vv,loss_tt,seconds`.
  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

// p <- p - lr * g for every tensor. Throws NonFiniteGradient (params left
// untouched) or ShapeError.
void sgd_step(ModelParams& params, std::span<const Matrix> grads, double lr);

// Embedding spaces that receive triplets under `config`.
std::vector<Space> loss_spaces(const TrainConfig& config);

// One forward/backward/update on `batch`. Returns the batch loss.
LossBreakdown train_step(ModelParams& params, std::span<const io::PreparedItem> batch,
                         const TrainConfig& config, std::uint64_t mining_seed);

// Seeded shuffle, then ceil(N / batch_size) steps per epoch with a short
// final batch. Bit-reproducible for a given (items, config).
// Throws DatasetTooSmall and NonFiniteLoss.
TrainResult train(std::span<const io::PreparedItem> items, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Batch partition of `n` items for `epoch`, in training order.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, const TrainConfig& config,
                                                    std::size_t epoch);

}  // namespace srcv

namespace srcv {

// Embeds every item and scores texts against videos: result(i, j) is the
// score of item j's video for item i's caption.
Matrix score_items(const ModelParams& params, std::span<const io::PreparedItem> items,
                   nn::DistanceKind kind);

MetricsReport evaluate_model(const ModelParams& params, std::span<const io::PreparedItem> items,
                             nn::DistanceKind kind);

}  // namespace srcv
