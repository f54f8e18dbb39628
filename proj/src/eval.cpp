#include "srcv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "srcv/errors.hpp"
#include "srcv/loss.hpp"

namespace srcv {

double class_iou(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::size_t shared = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++shared;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t united = a.size() + b.size() - shared;
  return united == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(united);
}

namespace {

void require_annotated(const Caption& c) {
  if (c.noun_classes.empty()) {
    throw Error(ErrorKind::MissingAnnotation, "caption " + c.id + " has no noun classes");
  }
}

}  // namespace

double semantic_similarity(const Caption& a, const Caption& b) {
  require_annotated(a);
  require_annotated(b);
  return 0.5 * (a.verb_class == b.verb_class ? 1.0 : 0.0) +
         0.5 * class_iou(a.noun_classes, b.noun_classes);
}

bool binary_relevant(const Caption& a, const Caption& b) {
  require_annotated(a);
  require_annotated(b);
  return a.verb_class == b.verb_class && class_iou(a.noun_classes, b.noun_classes) > 0.0;
}

RelevanceMatrix build_relevance(std::span<const Caption> queries, std::span<const Caption> gallery,
                                const RelevanceRules& rules) {
  RelevanceMatrix r;
  r.graded = Matrix(queries.size(), gallery.size());
  r.binary.assign(queries.size(), std::vector<bool>(gallery.size(), false));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    r.query_ids.push_back(queries[i].id);
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      r.graded(i, j) = rules.graded(queries[i], gallery[j]);
      r.binary[i][j] = rules.binary(queries[i], gallery[j]);
    }
  }
  for (const auto& g : gallery) r.gallery_ids.push_back(g.id);
  return r;
}

std::vector<std::size_t> rank_gallery(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::optional<double> average_precision(std::span<const double> scores,
                                        const std::vector<bool>& relevant) {
  if (scores.size() != relevant.size()) {
    throw Error(ErrorKind::Shape, "average_precision: scores and mask lengths differ");
  }
  const auto order = rank_gallery(scores);
  std::size_t hits = 0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!relevant[order[rank]]) continue;
    ++hits;
    precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  if (hits == 0) return std::nullopt;
  return precision_sum / static_cast<double>(hits);
}

std::optional<double> ndcg_row(std::span<const double> scores, std::span<const double> gains) {
  if (scores.size() != gains.size()) {
    throw Error(ErrorKind::Shape, "ndcg_row: scores and gains lengths differ");
  }
  for (double g : gains) {
    if (g < 0.0) throw Error(ErrorKind::Config, "ndcg_row: negative gain");
  }
  const auto order = rank_gallery(scores);
  double dcg = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    dcg += gains[order[rank]] / std::log2(static_cast<double>(rank + 2));
  }
  std::vector<double> ideal(gains.begin(), gains.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t rank = 0; rank < ideal.size(); ++rank) {
    idcg += ideal[rank] / std::log2(static_cast<double>(rank + 2));
  }
  if (idcg <= 0.0) return std::nullopt;
  return dcg / idcg;
}

DirectionMetrics evaluate_direction(const Matrix& scores, const RelevanceMatrix& relevance) {
  if (scores.rows() != relevance.graded.rows() || scores.cols() != relevance.graded.cols()) {
    throw Error(ErrorKind::Shape, "score matrix does not match relevance matrix");
  }
  DirectionMetrics m;
  double ap_sum = 0.0;
  double ndcg_sum = 0.0;
  std::size_t ap_n = 0;
  std::size_t ndcg_n = 0;
  for (std::size_t q = 0; q < scores.rows(); ++q) {
    if (auto ap = average_precision(scores.row(q), relevance.binary[q])) {
      ap_sum += *ap;
      ++ap_n;
    } else {
      ++m.map_skipped;
    }
    if (auto nd = ndcg_row(scores.row(q), relevance.graded.row(q))) {
      ndcg_sum += *nd;
      ++ndcg_n;
    } else {
      ++m.ndcg_skipped;
    }
  }
  m.map = ap_n ? ap_sum / static_cast<double>(ap_n) : 0.0;
  m.ndcg = ndcg_n ? ndcg_sum / static_cast<double>(ndcg_n) : 0.0;
  return m;
}

MetricsReport evaluate_scores(const Matrix& text_to_video, std::span<const Caption> captions,
                              const RelevanceRules& rules) {
  if (captions.empty()) throw Error(ErrorKind::EmptyDataset, "nothing to evaluate");
  if (text_to_video.rows() != captions.size() || text_to_video.cols() != captions.size()) {
    throw Error(ErrorKind::Shape, "score matrix must be n x n for n captions");
  }
  const RelevanceMatrix relevance = build_relevance(captions, captions, rules);
  const DirectionMetrics t2v = evaluate_direction(text_to_video, relevance);
  const DirectionMetrics v2t = evaluate_direction(transpose(text_to_video), relevance);
  MetricsReport r;
  r.map_t2v = t2v.map;
  r.map_v2t = v2t.map;
  r.map_avg = 0.5 * (t2v.map + v2t.map);
  r.ndcg_t2v = t2v.ndcg;
  r.ndcg_v2t = v2t.ndcg;
  r.ndcg_avg = 0.5 * (t2v.ndcg + v2t.ndcg);
  r.skipped_t2v = t2v.map_skipped;
  r.skipped_v2t = v2t.map_skipped;
  return r;
}

Matrix retrieval_scores(std::span<const EmbeddingSet> text, std::span<const EmbeddingSet> video,
                        nn::DistanceKind kind) {
  Matrix scores(text.size(), video.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (std::size_t j = 0; j < video.size(); ++j) {
      scores(i, j) = -distance(text[i].joint, video[j].joint, kind);
    }
  }
  return scores;
}

MetricsReport evaluate(std::span<const EmbeddingSet> text, std::span<const EmbeddingSet> video,
                       std::span<const Caption> captions, const RelevanceRules& rules,
                       nn::DistanceKind kind) {
  if (captions.empty()) throw Error(ErrorKind::EmptyDataset, "nothing to evaluate");
  if (text.size() != captions.size() || video.size() != captions.size()) {
    throw Error(ErrorKind::Shape, "text, video and caption lists must be aligned");
  }
  return evaluate_scores(retrieval_scores(text, video, kind), captions, rules);
}

void write_metrics_csv(std::ostream& out, const MetricsReport& r) {
  char line[128];
  out << "metric,t2v,v2t,avg\n";
  std::snprintf(line, sizeof line, "mAP,%.6f,%.6f,%.6f\n", r.map_t2v, r.map_v2t, r.map_avg);
  out << line;
  std::snprintf(line, sizeof line, "nDCG,%.6f,%.6f,%.6f\n", r.ndcg_t2v, r.ndcg_v2t, r.ndcg_avg);
  out << line;
}

void print_metrics_table(std::ostream& out, const MetricsReport& r) {
  char line[160];
  out << "+--------------------------+--------------------------+\n"
         "|           mAP            |           nDCG           |\n"
         "|  Average     T2V     V2T |  Average     T2V     V2T |\n"
         "+--------------------------+--------------------------+\n";
  std::snprintf(line, sizeof line, "|  %7.2f %7.2f %7.2f |  %7.2f %7.2f %7.2f |\n",
                100 * r.map_avg, 100 * r.map_t2v, 100 * r.map_v2t, 100 * r.ndcg_avg,
                100 * r.ndcg_t2v, 100 * r.ndcg_v2t);
  out << line << "+--------------------------+--------------------------+\n";
  if (r.skipped_t2v || r.skipped_v2t) {
    out << "queries without a relevant item (excluded from mAP): t2v=" << r.skipped_t2v
        << " v2t=" << r.skipped_v2t << '\n';
  }
}

}  // namespace srcv
