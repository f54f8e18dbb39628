#pragma once

// Four-direction triplet objective over the noun, verb and joint spaces, and
// relevance-driven triplet mining.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "srcv/model.hpp"
#include "srcv/nn/tape.hpp"
#include "srcv/text_roles.hpp"

namespace srcv {

enum class Space { noun, verb, joint };

// Anchor modality -> positive/negative modality.
enum class Direction { video_text = 0, text_video = 1, video_video = 2, text_text = 3 };

inline constexpr std::array<Direction, 4> kDirections = {
    Direction::video_text, Direction::text_video, Direction::video_video, Direction::text_text};

const char* to_string(Space s) noexcept;
const char* to_string(Direction d) noexcept;

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  Space space = Space::joint;
  Direction direction = Direction::video_text;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

// Indexed by Direction.
struct LossWeights {
  std::array<double, 4> lambda = {1.0, 2.0, 1.0, 1.0};
  std::array<double, 4> margin = {1.0, 1.0, 1.0, 1.0};

  void set_margin(double m) { margin.fill(m); }
  // Throws ConfigError: negative lambda, all-zero lambdas, non-positive margin.
  void validate() const;
};

double distance(std::span<const double> a, std::span<const double> b, nn::DistanceKind kind);

// max(0, d(a, p) - d(a, n) + m)
double triplet_term(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double margin, nn::DistanceKind kind);

struct LossBreakdown {
  double total = 0.0;
  std::array<double, 4> term_mean = {};  // unweighted mean hinge per direction
  std::array<std::size_t, 4> count = {};
};

// L = sum_d lambda_d * mean over direction d's triplets of the hinge term,
// each triplet evaluated in its own space. Empty directions contribute 0.
// Throws IndexError for a triplet outside the batch.
nn::Var batch_loss(nn::Tape& tape, std::span<const EmbeddingVars> text,
                   std::span<const EmbeddingVars> video, std::span<const Triplet> triplets,
                   const LossWeights& weights, nn::DistanceKind kind, LossBreakdown* breakdown);

LossBreakdown batch_loss(std::span<const EmbeddingSet> text, std::span<const EmbeddingSet> video,
                         std::span<const Triplet> triplets, const LossWeights& weights,
                         nn::DistanceKind kind = nn::DistanceKind::euclidean);

// noun: noun-class IoU > 0; verb: equal verb class; joint: binary_relevant.
bool space_relevant(Space space, const Caption& a, const Caption& b);

struct MiningOptions {
  std::size_t per_anchor = 4;
  std::vector<Space> spaces = {Space::noun, Space::verb, Space::joint};
};

// For each space, direction and anchor (in that nesting order), enumerates
// the valid (positive, negative) pairs -- positives relevant to the anchor
// under the space's rule, negatives not, the anchor itself excluded -- in
// lexicographic order, and draws up to per_anchor distinct pairs uniformly
// from one generator seeded with `seed`. Anchors lacking either side are
// skipped.
std::vector<Triplet> mine_triplets(std::span<const Caption> batch, const MiningOptions& options,
                                   std::uint64_t seed);

}  // namespace srcv
