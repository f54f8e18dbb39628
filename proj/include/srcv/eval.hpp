#pragma once

// Multi-instance retrieval evaluation: graded and binary relevance from class
// annotations, average precision, nDCG, and the two-direction report.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srcv/matrix.hpp"
#include "srcv/model.hpp"
#include "srcv/nn/tape.hpp"
#include "srcv/text_roles.hpp"

namespace srcv {

// |a ∩ b| / |a ∪ b| over sorted unique class lists; 0 when both are empty.
double class_iou(std::span<const std::size_t> a, std::span<const std::size_t> b);

// 0.5 [verb(a) == verb(b)] + 0.5 IoU(nouns(a), nouns(b)).
// Throws MissingAnnotation when either caption has no noun classes.
double semantic_similarity(const Caption& a, const Caption& b);

// Same verb class and at least one shared noun class.
bool binary_relevant(const Caption& a, const Caption& b);

// Pluggable seam for other relevance definitions.
struct RelevanceRules {
  std::function<double(const Caption&, const Caption&)> graded = semantic_similarity;
  std::function<bool(const Caption&, const Caption&)> binary = binary_relevant;
};

struct RelevanceMatrix {
  Matrix graded;                    // n_query x n_gallery, values in [0, 1]
  std::vector<std::vector<bool>> binary;
  std::vector<std::string> query_ids;
  std::vector<std::string> gallery_ids;
};

RelevanceMatrix build_relevance(std::span<const Caption> queries, std::span<const Caption> gallery,
                                const RelevanceRules& rules = {});

// Gallery order by descending score, ties by ascending gallery index.
std::vector<std::size_t> rank_gallery(std::span<const double> scores);

// nullopt when no gallery item is relevant (the query is skipped).
std::optional<double> average_precision(std::span<const double> scores,
                                        const std::vector<bool>& relevant);

// DCG with gain/log2(rank + 1), normalized by the ideal ordering.
// nullopt when every gain is zero.
std::optional<double> ndcg_row(std::span<const double> scores, std::span<const double> gains);

struct DirectionMetrics {
  double map = 0.0;
  double ndcg = 0.0;
  std::size_t map_skipped = 0;
  std::size_t ndcg_skipped = 0;
};

// Row-wise metrics for a score matrix whose rows are queries.
DirectionMetrics evaluate_direction(const Matrix& scores, const RelevanceMatrix& relevance);

struct MetricsReport {
  double map_t2v = 0.0;
  double map_v2t = 0.0;
  double map_avg = 0.0;
  double ndcg_t2v = 0.0;
  double ndcg_v2t = 0.0;
  double ndcg_avg = 0.0;
  std::size_t skipped_t2v = 0;
  std::size_t skipped_v2t = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// text_to_video(i, j) = score of video j for text query i. V2T uses its
// transpose. Relevance for both directions comes from the same captions.
MetricsReport evaluate_scores(const Matrix& text_to_video, std::span<const Caption> captions,
                              const RelevanceRules& rules = {});

// Scores are negative joint-space distances.
Matrix retrieval_scores(std::span<const EmbeddingSet> text, std::span<const EmbeddingSet> video,
                        nn::DistanceKind kind = nn::DistanceKind::euclidean);

MetricsReport evaluate(std::span<const EmbeddingSet> text, std::span<const EmbeddingSet> video,
                       std::span<const Caption> captions, const RelevanceRules& rules = {},
                       nn::DistanceKind kind = nn::DistanceKind::euclidean);

// `metric,t2v,v2t,avg` rows for mAP and nDCG.
void write_metrics_csv(std::ostream& out, const MetricsReport& report);
// Human-readable table: Average / T2V / V2T for mAP and nDCG, in percent.
void print_metrics_table(std::ostream& out, const MetricsReport& report);

}  // namespace srcv
