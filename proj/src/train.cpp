#include "srcv/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "srcv/errors.hpp"
#include "srcv/random.hpp"

namespace srcv {
namespace {

constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;
constexpr std::uint64_t kMiningTag = 0x4D494E45ULL;

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (batch_size < 2) fail("batch_size must be at least 2");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail("learning_rate must be finite and non-negative");
  }
  if (epochs < 1) fail("epochs must be at least 1");
  if (per_anchor < 1) fail("per_anchor must be at least 1");
  for (std::size_t d = 0; d < 4; ++d) {
    if (!(weights.lambda[d] >= 0.0)) fail("lambda weights must be non-negative");
    if (!(weights.margin[d] > 0.0)) fail("margins must be positive");
  }
  model.validate();
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "epoch,loss,loss_vt,loss_tv,loss_vv,loss_tt,seconds\n";
  char line[256];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.3f\n", e.epoch, e.loss,
                  e.terms[0], e.terms[1], e.terms[2], e.terms[3], e.seconds);
    out << line;
  }
}

void sgd_step(ModelParams& params, std::span<const Matrix> grads, double lr) {
  if (grads.size() != params.tensor_count()) {
    throw Error(ErrorKind::Shape, "expected one gradient per parameter tensor");
  }
  std::size_t i = 0;
  params.visit([&](const std::string& name, const Matrix& m) {
    const Matrix& g = grads[i++];
    require_same_shape(m, g, name.c_str());
    if (!g.all_finite()) throw Error(ErrorKind::NonFiniteGradient, "gradient of " + name);
  });
  i = 0;
  params.visit([&](const std::string&, Matrix& m) {
    const auto g = grads[i++].values();
    auto p = m.values();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  });
}

std::vector<Space> loss_spaces(const TrainConfig& config) {
  if (config.model.single_space) return {Space::joint};
  if (!config.joint_loss) return {Space::noun, Space::verb};
  return {Space::noun, Space::verb, Space::joint};
}

LossBreakdown train_step(ModelParams& params, std::span<const io::PreparedItem> batch,
                         const TrainConfig& config, std::uint64_t mining_seed) {
  nn::Tape tape;
  nn::ParamBinder bind(tape);
  std::vector<EmbeddingVars> text;
  std::vector<EmbeddingVars> video;
  std::vector<Caption> captions;
  text.reserve(batch.size());
  video.reserve(batch.size());
  for (const auto& item : batch) {
    text.push_back(encode_text(bind, tape.constant(Matrix::row_vector(item.roles.noun)),
                               tape.constant(Matrix::row_vector(item.roles.verb)), params));
    video.push_back(encode_video(bind, tape.constant(item.tokens), params));
    captions.push_back(item.caption);
  }
  MiningOptions mining;
  mining.per_anchor = config.per_anchor;
  mining.spaces = loss_spaces(config);
  const auto triplets = mine_triplets(captions, mining, mining_seed);
  LossBreakdown breakdown;
  const nn::Var loss =
      batch_loss(tape, text, video, triplets, config.weights, config.distance, &breakdown);
  if (!std::isfinite(breakdown.total)) {
    throw Error(ErrorKind::NonFiniteLoss, "batch loss is " + std::to_string(breakdown.total));
  }
  tape.backward(loss);
  sgd_step(params, collect_gradients(tape, bind, params), config.learning_rate);
  return breakdown;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, const TrainConfig& config,
                                                    std::size_t epoch) {
  const std::size_t key = config.reshuffle ? epoch : 0;
  Rng rng(mix_seed(config.seed ^ kShuffleTag, key));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += config.batch_size) {
    const std::size_t end = std::min(n, start + config.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

TrainResult train(std::span<const io::PreparedItem> items, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (items.size() < config.batch_size) {
    throw Error(ErrorKind::DatasetTooSmall, std::to_string(items.size()) +
                                                " usable items, batch_size is " +
                                                std::to_string(config.batch_size));
  }
  TrainResult result{init_params(config.model, config.model.seed), {}};
  std::vector<io::PreparedItem> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto batches = epoch_batches(items.size(), config, epoch);
    const std::size_t key = config.reshuffle ? epoch : 0;
    EpochRecord record;
    record.epoch = epoch + 1;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      batch.clear();
      for (std::size_t idx : batches[b]) batch.push_back(items[idx]);
      const std::uint64_t mining_seed = mix_seed(mix_seed(config.seed ^ kMiningTag, key), b);
      LossBreakdown step;
      try {
        step = train_step(result.params, batch, config, mining_seed);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteLoss && e.kind() != ErrorKind::NonFiniteGradient) throw;
        throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + ", batch " +
                                                  std::to_string(b + 1) + ": " + e.message());
      }
      record.loss += step.total;
      for (std::size_t d = 0; d < 4; ++d) record.terms[d] += step.term_mean[d];
    }
    const double n_batches = static_cast<double>(batches.size());
    record.loss /= n_batches;
    for (double& t : record.terms) t /= n_batches;
    if (config.record_time) {
      record.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.log.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

Matrix score_items(const ModelParams& params, std::span<const io::PreparedItem> items,
                   nn::DistanceKind kind) {
  std::vector<RoleVectors> roles;
  std::vector<Matrix> tokens;
  roles.reserve(items.size());
  tokens.reserve(items.size());
  for (const auto& item : items) {
    roles.push_back(item.roles);
    tokens.push_back(item.tokens);
  }
  return retrieval_scores(encode_texts(roles, params), encode_videos(tokens, params), kind);
}

MetricsReport evaluate_model(const ModelParams& params, std::span<const io::PreparedItem> items,
                             nn::DistanceKind kind) {
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, "no items to evaluate");
  std::vector<Caption> captions;
  captions.reserve(items.size());
  for (const auto& item : items) captions.push_back(item.caption);
  return evaluate_scores(score_items(params, items, kind), captions);
}

}  // namespace srcv
