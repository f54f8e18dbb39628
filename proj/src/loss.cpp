#include "srcv/loss.hpp"

#include <algorithm>
#include <string>

#include "srcv/errors.hpp"
#include "srcv/eval.hpp"
#include "srcv/random.hpp"

namespace srcv {

const char* to_string(Space s) noexcept {
  switch (s) {
    case Space::noun: return "noun";
    case Space::verb: return "verb";
    case Space::joint: return "joint";
  }
  return "joint";
}

const char* to_string(Direction d) noexcept {
  switch (d) {
    case Direction::video_text: return "vt";
    case Direction::text_video: return "tv";
    case Direction::video_video: return "vv";
    case Direction::text_text: return "tt";
  }
  return "vt";
}

void LossWeights::validate() const {
  bool any = false;
  for (std::size_t d = 0; d < 4; ++d) {
    if (!(lambda[d] >= 0.0)) {
      throw Error(ErrorKind::Config, std::string("lambda_") + to_string(kDirections[d]) +
                                         " must be non-negative");
    }
    if (!(margin[d] > 0.0)) {
      throw Error(ErrorKind::Config, std::string("margin_") + to_string(kDirections[d]) +
                                         " must be positive");
    }
    any = any || lambda[d] > 0.0;
  }
  if (!any) throw Error(ErrorKind::Config, "at least one lambda must be positive");
}

double distance(std::span<const double> a, std::span<const double> b, nn::DistanceKind kind) {
  if (a.size() != b.size()) throw Error(ErrorKind::Shape, "distance: lengths differ");
  return nn::distance_value(a, b, kind);
}

double triplet_term(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double margin, nn::DistanceKind kind) {
  if (a.size() != p.size() || a.size() != n.size()) {
    throw Error(ErrorKind::Shape, "triplet_term: lengths differ");
  }
  return std::max(0.0, distance(a, p, kind) - distance(a, n, kind) + margin);
}

namespace {

nn::Var pick(const EmbeddingVars& e, Space s) {
  switch (s) {
    case Space::noun: return e.noun;
    case Space::verb: return e.verb;
    case Space::joint: return e.joint;
  }
  return e.joint;
}

}  // namespace

nn::Var batch_loss(nn::Tape& tape, std::span<const EmbeddingVars> text,
                   std::span<const EmbeddingVars> video, std::span<const Triplet> triplets,
                   const LossWeights& weights, nn::DistanceKind kind, LossBreakdown* breakdown) {
  if (text.size() != video.size()) throw Error(ErrorKind::Shape, "text/video batch sizes differ");
  std::array<std::vector<nn::Var>, 4> hinges;
  for (const Triplet& tr : triplets) {
    if (tr.anchor >= text.size() || tr.positive >= text.size() || tr.negative >= text.size()) {
      throw Error(ErrorKind::Index, "triplet (" + std::to_string(tr.anchor) + "," +
                                        std::to_string(tr.positive) + "," +
                                        std::to_string(tr.negative) + ") outside batch of " +
                                        std::to_string(text.size()));
    }
    const bool video_anchor =
        tr.direction == Direction::video_text || tr.direction == Direction::video_video;
    const bool video_targets =
        tr.direction == Direction::text_video || tr.direction == Direction::video_video;
    const auto& anchors = video_anchor ? video : text;
    const auto& targets = video_targets ? video : text;
    const nn::Var a = pick(anchors[tr.anchor], tr.space);
    const nn::Var p = pick(targets[tr.positive], tr.space);
    const nn::Var n = pick(targets[tr.negative], tr.space);
    const auto d = static_cast<std::size_t>(tr.direction);
    const nn::Var gap = tape.sub(tape.distance(a, p, kind), tape.distance(a, n, kind));
    hinges[d].push_back(tape.relu(tape.add_scalar(gap, weights.margin[d])));
  }

  LossBreakdown local;
  std::vector<nn::Var> means;
  std::vector<double> lambdas;
  for (std::size_t d = 0; d < 4; ++d) {
    local.count[d] = hinges[d].size();
    if (hinges[d].empty()) continue;
    const std::vector<double> w(hinges[d].size(), 1.0 / static_cast<double>(hinges[d].size()));
    const nn::Var mean = tape.linear_combination(hinges[d], w);
    local.term_mean[d] = tape.value(mean)(0, 0);
    means.push_back(mean);
    lambdas.push_back(weights.lambda[d]);
  }
  const nn::Var total =
      means.empty() ? tape.constant(Matrix(1, 1)) : tape.linear_combination(means, lambdas);
  local.total = tape.value(total)(0, 0);
  if (breakdown) *breakdown = local;
  return total;
}

LossBreakdown batch_loss(std::span<const EmbeddingSet> text, std::span<const EmbeddingSet> video,
                         std::span<const Triplet> triplets, const LossWeights& weights,
                         nn::DistanceKind kind) {
  nn::Tape tape(nn::Tape::Mode::inference);
  auto lift = [&](std::span<const EmbeddingSet> items) {
    std::vector<EmbeddingVars> vars;
    vars.reserve(items.size());
    for (const auto& e : items) {
      vars.push_back({tape.constant(Matrix::row_vector(e.noun)),
                      tape.constant(Matrix::row_vector(e.verb)),
                      tape.constant(Matrix::row_vector(e.joint))});
    }
    return vars;
  };
  const auto text_vars = lift(text);
  const auto video_vars = lift(video);
  LossBreakdown out;
  batch_loss(tape, text_vars, video_vars, triplets, weights, kind, &out);
  return out;
}

bool space_relevant(Space space, const Caption& a, const Caption& b) {
  switch (space) {
    case Space::noun: return class_iou(a.noun_classes, b.noun_classes) > 0.0;
    case Space::verb: return a.verb_class == b.verb_class;
    case Space::joint: return binary_relevant(a, b);
  }
  return false;
}

std::vector<Triplet> mine_triplets(std::span<const Caption> batch, const MiningOptions& options,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Triplet> out;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  std::vector<std::uint64_t> chosen;
  for (Space space : options.spaces) {
    for (Direction direction : kDirections) {
      for (std::size_t anchor = 0; anchor < batch.size(); ++anchor) {
        positives.clear();
        negatives.clear();
        for (std::size_t j = 0; j < batch.size(); ++j) {
          if (j == anchor) continue;
          (space_relevant(space, batch[anchor], batch[j]) ? positives : negatives).push_back(j);
        }
        const std::uint64_t pairs = positives.size() * negatives.size();
        if (pairs == 0) continue;
        const std::uint64_t take = std::min<std::uint64_t>(options.per_anchor, pairs);
        // Floyd's sampling of `take` distinct pair indices.
        chosen.clear();
        for (std::uint64_t j = pairs - take; j < pairs; ++j) {
          const std::uint64_t t = rng.below(j + 1);
          const bool seen = std::find(chosen.begin(), chosen.end(), t) != chosen.end();
          chosen.push_back(seen ? j : t);
        }
        for (std::uint64_t pair : chosen) {
          out.push_back(Triplet{anchor, positives[pair / negatives.size()],
                                negatives[pair % negatives.size()], space, direction});
        }
      }
    }
  }
  return out;
}

}  // namespace srcv
