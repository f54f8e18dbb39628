#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "srcv/random.hpp"

namespace oracle {
namespace {

using LD = long double;

Mat mul_w(const Mat& x, const srcv::Matrix& w) {  // x * w
  Mat out(x.size(), std::vector<double>(w.cols()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      LD s = 0;
      for (std::size_t k = 0; k < w.rows(); ++k) s += static_cast<LD>(x[i][k]) * w(k, j);
      out[i][j] = static_cast<double>(s);
    }
  }
  return out;
}

Mat linear(const Mat& x, const srcv::nn::Linear& l) {  // x * W^T + b
  Mat out(x.size(), std::vector<double>(l.weight.rows()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t o = 0; o < l.weight.rows(); ++o) {
      LD s = l.bias(0, o);
      for (std::size_t k = 0; k < l.weight.cols(); ++k) s += static_cast<LD>(x[i][k]) * l.weight(o, k);
      out[i][o] = static_cast<double>(s);
    }
  }
  return out;
}

std::vector<double> row_of(const srcv::Matrix& m) {
  return std::vector<double>(m.values().begin(), m.values().end());
}

Mat add(const Mat& a, const Mat& b) {
  Mat out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] += b[i][j];
  return out;
}

Mat norm_rows(const Mat& x, const srcv::nn::LayerNorm& n) {
  Mat out;
  for (const auto& r : x) out.push_back(layer_norm(r, row_of(n.gamma), row_of(n.beta), n.eps));
  return out;
}

std::vector<double> unit(const std::vector<double>& v) {
  LD s = 0;
  for (double x : v) s += static_cast<LD>(x) * x;
  const LD n = std::sqrt(s);
  std::vector<double> out(v.size(), 0.0);
  if (n == 0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i] / n);
  return out;
}

std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<double> theta(const std::vector<double>& x, const srcv::SpaceEncoders& s) {
  Mat h = linear({x}, s.text_hidden);
  for (double& v : h[0]) v = v > 0 ? v : 0.0;
  return linear(h, s.text_out)[0];
}

std::vector<double> delta(const std::vector<double>& x, const srcv::SpaceEncoders& s) {
  return linear(linear({x}, s.video_hidden), s.video_out)[0];
}

}  // namespace

Mat to_mat(const srcv::Matrix& m) {
  Mat out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

srcv::Matrix from_mat(const Mat& m) {
  srcv::Matrix out(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = m[i][j];
  return out;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, max_abs_diff(a[i], b[i]));
  return worst;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::vector<double> softmax(const std::vector<double>& x) {
  LD m = x[0];
  for (double v : x) m = std::max<LD>(m, v);
  LD total = 0;
  std::vector<LD> e;
  for (double v : x) {
    e.push_back(std::exp(static_cast<LD>(v) - m));
    total += e.back();
  }
  std::vector<double> out;
  for (LD v : e) out.push_back(static_cast<double>(v / total));
  return out;
}

std::vector<double> layer_norm(const std::vector<double>& x, const std::vector<double>& gamma,
                               const std::vector<double>& beta, double eps) {
  LD mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  LD var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<double>(gamma[i] * ((x[i] - mean) / std::sqrt(var + eps)) + beta[i]);
  }
  return out;
}

Mat attention(const Mat& q, const Mat& k, const Mat& v) {
  const std::size_t s = q.size();
  const std::size_t d = q[0].size();
  Mat out(s, std::vector<double>(v[0].size()));
  for (std::size_t i = 0; i < s; ++i) {
    std::vector<double> logits(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) {
      LD dot = 0;
      for (std::size_t c = 0; c < d; ++c) dot += static_cast<LD>(q[i][c]) * k[j][c];
      logits[j] = static_cast<double>(dot / std::sqrt(static_cast<LD>(d)));
    }
    const auto w = softmax(logits);
    for (std::size_t c = 0; c < v[0].size(); ++c) {
      LD acc = 0;
      for (std::size_t j = 0; j < k.size(); ++j) acc += static_cast<LD>(w[j]) * v[j][c];
      out[i][c] = static_cast<double>(acc);
    }
  }
  return out;
}

Mat multi_head(const Mat& x, const srcv::nn::AttentionParams& p) {
  Mat heads(x.size());
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Mat head = attention(mul_w(x, p.query[h]), mul_w(x, p.key[h]), mul_w(x, p.value[h]));
    for (std::size_t i = 0; i < x.size(); ++i)
      heads[i].insert(heads[i].end(), head[i].begin(), head[i].end());
  }
  return mul_w(heads, p.output);
}

Mat encoder_block(const Mat& x, const srcv::nn::EncoderBlock& b) {
  const Mat z = norm_rows(add(multi_head(x, b.attention), x), b.attention_norm);
  Mat hidden = linear(z, b.ff.inner);
  for (auto& r : hidden)
    for (double& v : r) v = v > 0 ? v : 0.0;
  return norm_rows(add(linear(hidden, b.ff.outer), z), b.output_norm);
}

Embedding encode_text(const std::vector<double>& noun, const std::vector<double>& verb,
                      const srcv::ModelParams& p) {
  std::vector<double> n = noun;
  std::vector<double> v = verb;
  if (p.text_block) {
    const Mat e = encoder_block({noun, verb}, *p.text_block);
    n = e[0];
    v = e[1];
  }
  if (p.config.single_space) {
    const auto s = unit(theta(concat(n, v), p.spaces[0]));
    return {s, s, s};
  }
  Embedding out{unit(theta(n, p.spaces[0])), unit(theta(v, p.spaces[1])), {}};
  out.joint = concat(out.noun, out.verb);
  return out;
}

Embedding encode_video(const Mat& tokens, const srcv::ModelParams& p) {
  const Mat e = encoder_block(linear(tokens, p.video_projection), p.video_block);
  std::vector<double> pooled(e[0].size());
  for (std::size_t c = 0; c < pooled.size(); ++c) {
    LD s = 0;
    for (const auto& r : e) s += r[c];
    pooled[c] = static_cast<double>(s / e.size());
  }
  if (p.config.single_space) {
    const auto s = unit(delta(pooled, p.spaces[0]));
    return {s, s, s};
  }
  Embedding out{unit(delta(pooled, p.spaces[0])), unit(delta(pooled, p.spaces[1])), {}};
  out.joint = concat(out.noun, out.verb);
  return out;
}

double distance(const std::vector<double>& a, const std::vector<double>& b,
                srcv::nn::DistanceKind kind) {
  LD sq = 0, dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sq += static_cast<LD>(a[i] - b[i]) * (a[i] - b[i]);
    dot += static_cast<LD>(a[i]) * b[i];
    na += static_cast<LD>(a[i]) * a[i];
    nb += static_cast<LD>(b[i]) * b[i];
  }
  switch (kind) {
    case srcv::nn::DistanceKind::euclidean: return static_cast<double>(std::sqrt(sq));
    case srcv::nn::DistanceKind::squared_euclidean: return static_cast<double>(sq);
    case srcv::nn::DistanceKind::cosine:
      if (na == 0 || nb == 0) return 1.0;
      return static_cast<double>(1 - dot / (std::sqrt(na) * std::sqrt(nb)));
  }
  return NAN;
}

double batch_loss(const std::vector<srcv::EmbeddingSet>& text,
                  const std::vector<srcv::EmbeddingSet>& video,
                  const std::vector<srcv::Triplet>& triplets, const srcv::LossWeights& w,
                  srcv::nn::DistanceKind kind) {
  using srcv::Direction;
  auto part = [](const srcv::EmbeddingSet& e, srcv::Space s) -> const std::vector<double>& {
    return s == srcv::Space::noun ? e.noun : s == srcv::Space::verb ? e.verb : e.joint;
  };
  std::size_t count[4] = {0, 0, 0, 0};
  for (const auto& t : triplets) ++count[static_cast<int>(t.direction)];
  LD total = 0;
  for (const auto& t : triplets) {
    const auto& anchors = (t.direction == Direction::video_text || t.direction == Direction::video_video)
                              ? video
                              : text;
    const auto& others = (t.direction == Direction::text_video || t.direction == Direction::video_video)
                             ? video
                             : text;
    const auto& a = part(anchors[t.anchor], t.space);
    const auto& pos = part(others[t.positive], t.space);
    const auto& neg = part(others[t.negative], t.space);
    const int d = static_cast<int>(t.direction);
    const double hinge = std::max(0.0, distance(a, pos, kind) - distance(a, neg, kind) + w.margin[d]);
    total += static_cast<LD>(w.lambda[d]) * hinge / count[d];
  }
  return static_cast<double>(total);
}

std::vector<std::size_t> ranks(std::span<const double> scores) {
  std::vector<std::size_t> r(scores.size(), 1);
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++r[i];
  return r;
}

double average_precision(std::span<const double> scores, const std::vector<bool>& relevant) {
  const auto r = ranks(scores);
  std::size_t total = 0;
  LD sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!relevant[i]) continue;
    ++total;
    std::size_t above = 0;
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (relevant[j] && r[j] <= r[i]) ++above;
    sum += static_cast<LD>(above) / r[i];
  }
  return total == 0 ? -1.0 : static_cast<double>(sum / total);
}

double average_precision_pr_area(std::span<const double> scores, const std::vector<bool>& relevant) {
  const auto r = ranks(scores);
  std::vector<std::size_t> at_rank(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) at_rank[r[i] - 1] = i;
  const std::size_t total = static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
  if (total == 0) return -1.0;
  LD area = 0, prev_recall = 0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < at_rank.size(); ++k) {
    if (relevant[at_rank[k]]) ++hits;
    const LD recall = static_cast<LD>(hits) / total;
    const LD precision = static_cast<LD>(hits) / (k + 1);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return static_cast<double>(area);
}

double ndcg(std::span<const double> scores, std::span<const double> gains) {
  if (std::none_of(gains.begin(), gains.end(), [](double g) { return g > 0; })) return -1.0;
  const auto r = ranks(scores);
  LD dcg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) dcg += gains[i] / std::log2(static_cast<LD>(r[i] + 1));
  std::vector<std::size_t> order(gains.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  LD best = 0;
  do {
    LD d = 0;
    for (std::size_t k = 0; k < order.size(); ++k) d += gains[order[k]] / std::log2(static_cast<LD>(k + 2));
    best = std::max(best, d);
  } while (std::next_permutation(order.begin(), order.end()));
  return static_cast<double>(dcg / best);
}

std::vector<srcv::Triplet> mine(std::span<const srcv::Caption> batch, std::size_t per_anchor,
                                const std::vector<srcv::Space>& spaces, std::uint64_t seed) {
  auto relevant = [](srcv::Space s, const srcv::Caption& a, const srcv::Caption& b) {
    std::set<std::size_t> na(a.noun_classes.begin(), a.noun_classes.end());
    bool overlap = false;
    for (auto n : b.noun_classes) overlap = overlap || na.count(n) > 0;
    if (s == srcv::Space::noun) return overlap;
    if (s == srcv::Space::verb) return a.verb_class == b.verb_class;
    return overlap && a.verb_class == b.verb_class;
  };
  srcv::Rng rng(seed);
  std::vector<srcv::Triplet> out;
  for (auto space : spaces) {
    for (auto dir : srcv::kDirections) {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        std::vector<srcv::Triplet> valid;
        for (std::size_t j = 0; j < batch.size(); ++j)
          for (std::size_t k = 0; k < batch.size(); ++k)
            if (j != i && k != i && j != k && relevant(space, batch[i], batch[j]) &&
                !relevant(space, batch[i], batch[k]))
              valid.push_back({i, j, k, space, dir});
        if (valid.empty()) continue;
        const std::uint64_t n = valid.size();
        const std::uint64_t take = std::min<std::uint64_t>(per_anchor, n);
        std::vector<std::uint64_t> picked;
        for (std::uint64_t j = n - take; j < n; ++j) {
          const std::uint64_t t = rng.below(j + 1);
          picked.push_back(std::find(picked.begin(), picked.end(), t) == picked.end() ? t : j);
        }
        for (auto p : picked) out.push_back(valid[p]);
      }
    }
  }
  return out;
}

}  // namespace oracle
