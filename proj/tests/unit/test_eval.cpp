#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oracle/oracles.hpp"
#include "srcv/errors.hpp"
#include "srcv/eval.hpp"
#include "srcv/random.hpp"

using namespace srcv;

namespace {

Caption cap(std::size_t verb, std::vector<std::size_t> nouns, const std::string& id = "q") {
  Caption c;
  c.id = id;
  c.video_id = id;
  c.text = "x";
  c.verb_class = verb;
  c.noun_classes = std::move(nouns);
  return c;
}

}  // namespace

TEST_CASE("semantic similarity and binary relevance") {
  CHECK(semantic_similarity(cap(1, {2, 3}), cap(1, {2, 3})) == 1.0);
  CHECK(semantic_similarity(cap(1, {2}), cap(0, {3})) == 0.0);
  CHECK(std::abs(semantic_similarity(cap(4, {1, 2}), cap(4, {2, 3})) - (0.5 + 0.5 / 3)) < 1e-9);
  CHECK(semantic_similarity(cap(4, {1, 2}), cap(5, {2, 3})) == semantic_similarity(cap(5, {2, 3}), cap(4, {1, 2})));

  CHECK(binary_relevant(cap(1, {2}), cap(1, {2})));
  CHECK_FALSE(binary_relevant(cap(1, {2}), cap(1, {3})));
  CHECK_FALSE(binary_relevant(cap(1, {2}), cap(0, {2})));

  try {
    semantic_similarity(cap(1, {}), cap(1, {2}));
    FAIL("expected MissingAnnotation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingAnnotation);
  }
  CHECK_THROWS_AS(binary_relevant(cap(1, {2}), cap(1, {})), Error);
}

TEST_CASE("relevance matrix") {
  const std::vector<Caption> caps = {cap(0, {0}, "a"), cap(0, {0, 1}, "b"), cap(1, {1}, "c")};
  const auto rel = build_relevance(caps, caps);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rel.graded(i, i) == 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(rel.graded(i, j) == rel.graded(j, i));
      CHECK(rel.graded(i, j) >= 0.0);
      CHECK(rel.graded(i, j) <= 1.0);
    }
  }
  CHECK(rel.binary[0][1]);
  CHECK_FALSE(rel.binary[0][2]);
  CHECK(rel.query_ids == std::vector<std::string>{"a", "b", "c"});

  // Pluggable rules.
  RelevanceRules verbs_only;
  verbs_only.graded = [](const Caption& a, const Caption& b) { return a.verb_class == b.verb_class ? 1.0 : 0.0; };
  verbs_only.binary = [](const Caption& a, const Caption& b) { return a.verb_class == b.verb_class; };
  const auto rel2 = build_relevance(caps, caps, verbs_only);
  CHECK(rel2.graded(0, 1) == 1.0);
}

TEST_CASE("ranking tie-break") {
  const std::vector<double> s = {0.5, 0.9, 0.5, 0.9, 0.1};
  CHECK(rank_gallery(s) == std::vector<std::size_t>{1, 3, 0, 2, 4});
}

TEST_CASE("average precision") {
  CHECK(*average_precision(std::vector<double>{4, 3, 2, 1}, {true, true, false, false}) == 1.0);
  CHECK(std::abs(*average_precision(std::vector<double>{4, 3, 2, 1}, {true, false, true, false}) -
                 0.8333333333333333) < 1e-9);
  CHECK(std::abs(*average_precision(std::vector<double>{5, 4, 3, 2, 1}, {false, false, false, false, true}) -
                 0.2) < 1e-12);
  CHECK_FALSE(average_precision(std::vector<double>{1, 2}, {false, false}).has_value());
}

TEST_CASE("ndcg") {
  CHECK(*ndcg_row(std::vector<double>{3, 2, 1}, std::vector<double>{1, 0.5, 0}) == doctest::Approx(1.0));
  const double v = *ndcg_row(std::vector<double>{2, 3, 1}, std::vector<double>{1, 0.5, 0});
  CHECK(std::abs(v - 0.85972) < 1e-4);
  CHECK(std::abs(v - oracle::ndcg(std::vector<double>{2, 3, 1}, std::vector<double>{1, 0.5, 0})) < 1e-12);
  CHECK(*ndcg_row(std::vector<double>{0.1, 5, -2}, std::vector<double>{0.3, 0.3, 0.3}) == doctest::Approx(1.0));
  CHECK_FALSE(ndcg_row(std::vector<double>{1, 2}, std::vector<double>{0, 0}).has_value());
}

TEST_CASE("metrics agree with exhaustive oracles, ties included") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    std::vector<double> scores(n), gains(n);
    std::vector<bool> rel(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.below(4));  // small range forces ties
      gains[i] = rng.below(3) * 0.5;
      rel[i] = rng.below(2) == 1;
    }
    const auto ap = average_precision(scores, rel);
    const double ap_ref = oracle::average_precision(scores, rel);
    CHECK(ap.has_value() == (ap_ref >= 0));
    if (ap) {
      CHECK(std::abs(*ap - ap_ref) < 1e-12);
      CHECK(std::abs(*ap - oracle::average_precision_pr_area(scores, rel)) < 1e-12);
    }
    const auto nd = ndcg_row(scores, gains);
    const double nd_ref = oracle::ndcg(scores, gains);
    CHECK(nd.has_value() == (nd_ref >= 0));
    if (nd) CHECK(std::abs(*nd - nd_ref) < 1e-12);
  }
}

TEST_CASE("evaluate") {
  // One-hot class clusters: every item nearest its own class.
  std::vector<Caption> caps;
  std::vector<EmbeddingSet> emb;
  for (std::size_t i = 0; i < 9; ++i) {
    const std::size_t k = i % 3;
    caps.push_back(cap(k, {k}, "i" + std::to_string(i)));
    std::vector<double> half(3, 0.0);
    half[k] = 1.0;
    EmbeddingSet e{half, half, half};
    e.joint.insert(e.joint.end(), half.begin(), half.end());
    emb.push_back(e);
  }
  const MetricsReport r = evaluate(emb, emb, caps);
  CHECK(r.map_t2v == 1.0);
  CHECK(r.map_v2t == 1.0);
  CHECK(r.ndcg_avg == doctest::Approx(1.0));
  CHECK(r.map_avg == (r.map_t2v + r.map_v2t) / 2);

  const std::vector<Caption> one = {cap(0, {1}, "solo")};
  const std::vector<EmbeddingSet> e1 = {emb[0]};
  const MetricsReport single = evaluate(e1, e1, one);
  CHECK(single.map_avg == 1.0);
  CHECK(single.ndcg_avg == 1.0);

  try {
    evaluate({}, {}, {});
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyDataset);
  }
}

TEST_CASE("monotone transforms and transpose symmetry") {
  Rng rng(31);
  std::vector<Caption> caps;
  for (std::size_t i = 0; i < 12; ++i) {
    caps.push_back(cap(rng.below(3), {rng.below(3), 3 + rng.below(2)}, "c" + std::to_string(i)));
  }
  Matrix m(12, 12);
  for (double& v : m.values()) v = rng.uniform(-2, 2);
  const MetricsReport base = evaluate_scores(m, caps);
  Matrix affine = m, squashed = m;
  for (double& v : affine.values()) v = 2 * v + 1;
  for (double& v : squashed.values()) v = std::tanh(v);
  CHECK(evaluate_scores(affine, caps) == base);
  CHECK(evaluate_scores(squashed, caps) == base);

  const MetricsReport flipped = evaluate_scores(transpose(m), caps);
  CHECK(flipped.map_v2t == base.map_t2v);
  CHECK(flipped.ndcg_v2t == base.ndcg_t2v);
  CHECK(flipped.map_t2v == base.map_v2t);
}

TEST_CASE("metrics output") {
  MetricsReport r;
  r.map_t2v = 0.5;
  r.map_v2t = 0.25;
  r.map_avg = 0.375;
  r.ndcg_t2v = 0.75;
  r.ndcg_v2t = 0.5;
  r.ndcg_avg = 0.625;
  std::ostringstream csv;
  write_metrics_csv(csv, r);
  CHECK(csv.str() == "metric,t2v,v2t,avg\nmAP,0.500000,0.250000,0.375000\nnDCG,0.750000,0.500000,0.625000\n");
  std::ostringstream table;
  print_metrics_table(table, r);
  CHECK(table.str().find("37.50") != std::string::npos);
}
