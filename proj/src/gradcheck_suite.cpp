#include "srcv/gradcheck_suite.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

#include "srcv/errors.hpp"
#include "srcv/loss.hpp"
#include "srcv/model.hpp"
#include "srcv/nn/gradcheck.hpp"
#include "srcv/nn/layers.hpp"
#include "srcv/random.hpp"

namespace srcv {
namespace {

using nn::ParamBinder;
using nn::Tape;
using nn::Var;

struct Input {
  std::string name;
  Matrix* tensor;
};

using Builder = std::function<Var(ParamBinder&)>;

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

void jitter(Matrix& m, Rng& rng, double scale) {
  for (double& v : m.values()) v += scale * rng.normal();
}

class Suite {
 public:
  Suite(nn::FaultSite fault, double tolerance, double step)
      : fault_(fault), step_(step) {
    report_.tolerance = tolerance;
  }

  void check(const std::string& component, const std::vector<Input>& inputs,
             const Builder& build) {
    Tape tape(Tape::Mode::record, fault_);
    ParamBinder bind(tape);
    tape.backward(build(bind));
    std::vector<Matrix> grads;
    for (const auto& in : inputs) {
      const Var v = bind.find(*in.tensor);
      grads.push_back(v.valid() ? tape.grad(v) : Matrix(in.tensor->rows(), in.tensor->cols()));
    }

    ComponentCheck result;
    result.component = component;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Matrix& target = *inputs[i].tensor;
      const Matrix saved = target;
      const nn::ScalarFn f = [&](std::span<const double> point) {
        std::copy(point.begin(), point.end(), target.values().begin());
        Tape inference(Tape::Mode::inference);
        ParamBinder b(inference);
        return inference.value(build(b))(0, 0);
      };
      const auto r =
          nn::grad_check(f, saved.values(), grads[i].values(), step_, report_.tolerance);
      target = saved;
      result.coordinates += r.coordinates;
      result.refined += r.refined;
      if (i == 0 || r.max_relative_error > result.max_relative_error) {
        result.max_relative_error = r.max_relative_error;
        result.worst_parameter = inputs[i].name + "[" + std::to_string(r.worst_index) + "]";
        result.worst_analytic = r.worst_analytic;
        result.worst_numeric = r.worst_numeric;
      }
    }
    result.passed = result.max_relative_error < report_.tolerance;
    report_.components.push_back(std::move(result));
  }

  GradcheckReport take() { return std::move(report_); }

 private:
  nn::FaultSite fault_;
  double step_;
  GradcheckReport report_;
};

// Reduces `out` to a scalar with fixed random weights so every output
// coordinate contributes a distinct amount.
Var scalarize(Tape& tape, Var out, Rng& rng) {
  const Matrix& v = tape.value(out);
  return tape.weighted_sum(out, random_matrix(v.rows(), v.cols(), rng));
}

struct EndToEnd {
  ModelParams params;
  std::vector<Matrix> nouns;
  std::vector<Matrix> verbs;
  std::vector<Matrix> tokens;
  std::vector<Triplet> triplets;
  std::vector<Input> inputs;
};

void add_end_to_end(Suite& suite, const GradcheckDims& dims, ModelConfig config, Rng& rng,
                    std::uint64_t seed, const std::string& name) {
  auto e = std::make_shared<EndToEnd>();
  e->params = init_params(config, seed);
  // Move biases and norm parameters off their initial constants so every
  // tensor carries a generic gradient.
  e->params.visit([&](const std::string& tensor, Matrix& m) {
    if (tensor.ends_with(".bias") || tensor.ends_with(".beta")) jitter(m, rng, 0.1);
    if (tensor.ends_with(".gamma")) jitter(m, rng, 0.1);
  });
  std::vector<Caption> captions;
  for (std::size_t i = 0; i < dims.batch; ++i) {
    Caption c;
    c.id = "g" + std::to_string(i);
    c.video_id = c.id;
    // Pairs (2k, 2k + 1) share a verb and a noun, so every space has
    // positives and negatives.
    c.verb_class = i / 2;
    c.noun_classes = i % 2 == 0 ? std::vector<std::size_t>{i / 2}
                                : std::vector<std::size_t>{i / 2, i / 2 + 1};
    captions.push_back(c);
    e->nouns.push_back(random_matrix(1, config.word_dim, rng));
    e->verbs.push_back(random_matrix(1, config.word_dim, rng));
    const std::size_t rows =
        config.video_tokens == VideoTokens::segment ? 2 * config.modalities : config.modalities;
    e->tokens.push_back(random_matrix(rows, config.feature_dim, rng));
  }
  MiningOptions mining;
  mining.per_anchor = 2;
  if (config.single_space) mining.spaces = {Space::joint};
  // Keep only triplets whose hinge is clearly active or clearly inactive; at
  // the kink the loss has no derivative to compare against.
  std::vector<EmbeddingSet> text;
  std::vector<EmbeddingSet> video;
  for (std::size_t i = 0; i < dims.batch; ++i) {
    text.push_back(encode_text(e->nouns[i].values(), e->verbs[i].values(), e->params));
    video.push_back(encode_video(e->tokens[i], e->params));
  }
  const LossWeights weights;
  for (const Triplet& t : mine_triplets(captions, mining, seed)) {
    const bool anchor_video =
        t.direction == Direction::video_text || t.direction == Direction::video_video;
    const bool other_video =
        t.direction == Direction::text_video || t.direction == Direction::video_video;
    auto pick = [&](const EmbeddingSet& set) -> std::span<const double> {
      return t.space == Space::noun ? set.noun : t.space == Space::verb ? set.verb : set.joint;
    };
    const auto a = pick(anchor_video ? video[t.anchor] : text[t.anchor]);
    const auto p = pick(other_video ? video[t.positive] : text[t.positive]);
    const auto n = pick(other_video ? video[t.negative] : text[t.negative]);
    const double arg = distance(a, p, nn::DistanceKind::euclidean) -
                       distance(a, n, nn::DistanceKind::euclidean) +
                       weights.margin[static_cast<std::size_t>(t.direction)];
    if (std::abs(arg) > 1e-2) e->triplets.push_back(t);
  }
  if (e->triplets.empty()) throw Error(ErrorKind::Config, name + ": batch yields no triplets");
  e->params.visit([&](const std::string& tensor, Matrix& m) { e->inputs.push_back({tensor, &m}); });

  suite.check(name, e->inputs, [e](ParamBinder& bind) {
    Tape& tape = bind.tape();
    std::vector<EmbeddingVars> text;
    std::vector<EmbeddingVars> video;
    for (std::size_t i = 0; i < e->nouns.size(); ++i) {
      text.push_back(encode_text(bind, tape.constant(e->nouns[i]), tape.constant(e->verbs[i]),
                                 e->params));
      video.push_back(encode_video(bind, tape.constant(e->tokens[i]), e->params));
    }
    return batch_loss(tape, text, video, e->triplets, LossWeights{},
                      nn::DistanceKind::euclidean, nullptr);
  });
}

}  // namespace

void GradcheckDims::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (word_dim < 1 || feature_dim < 1 || modalities < 1 || embed_dim < 1 || model_dim < 1) {
    fail("gradcheck dimensions must be positive");
  }
  if (heads < 1 || model_dim % heads != 0) fail("heads must divide model_dim");
  if (batch < 4) fail("gradcheck batch must be at least 4");
}

GradcheckDims parse_dims(std::string_view text) {
  GradcheckDims dims;
  while (!text.empty()) {
    const std::size_t comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::Config, "expected key=value in --dims, got '" + std::string(item) + "'");
    }
    const std::string key(item.substr(0, eq));
    const std::string_view value = item.substr(eq + 1);
    std::size_t parsed = 0;
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
    if (ec != std::errc{} || end != value.data() + value.size()) {
      throw Error(ErrorKind::Config, "bad value for " + key + ": '" + std::string(value) + "'");
    }
    std::size_t* field = key == "word_dim"      ? &dims.word_dim
                         : key == "feature_dim" ? &dims.feature_dim
                         : key == "modalities"  ? &dims.modalities
                         : key == "embed_dim"   ? &dims.embed_dim
                         : key == "model_dim"   ? &dims.model_dim
                         : key == "heads"       ? &dims.heads
                         : key == "batch"       ? &dims.batch
                                                : nullptr;
    if (!field) throw Error(ErrorKind::Config, "unknown --dims key '" + key + "'");
    *field = parsed;
  }
  dims.validate();
  return dims;
}

bool GradcheckReport::passed() const {
  return !components.empty() &&
         std::all_of(components.begin(), components.end(),
                     [](const ComponentCheck& c) { return c.passed; });
}

GradcheckReport run_gradcheck_suite(const GradcheckDims& dims, std::uint64_t seed,
                                    nn::FaultSite fault, double tolerance, double step) {
  dims.validate();
  Rng rng(seed);
  Suite suite(fault, tolerance, step);
  const std::size_t rows = 3;

  {
    Matrix x = random_matrix(rows, dims.feature_dim, rng);
    nn::Linear layer = nn::make_linear(dims.feature_dim, dims.model_dim, rng);
    jitter(layer.bias, rng, 0.5);
    Rng w = rng;
    suite.check("linear", {{"x", &x}, {"weight", &layer.weight}, {"bias", &layer.bias}},
                [&, w](ParamBinder& bind) mutable {
                  Rng r = w;
                  return scalarize(bind.tape(), nn::linear(bind, bind(x), layer), r);
                });
    rng.next();
  }
  {
    Matrix x = random_matrix(rows, dims.model_dim, rng);
    nn::LayerNorm norm = nn::make_layer_norm(dims.model_dim);
    jitter(norm.gamma, rng, 0.3);
    jitter(norm.beta, rng, 0.3);
    const Rng w = rng;
    suite.check("layer_norm", {{"x", &x}, {"gamma", &norm.gamma}, {"beta", &norm.beta}},
                [&, w](ParamBinder& bind) {
                  Rng r = w;
                  return scalarize(bind.tape(), nn::layer_norm(bind, bind(x), norm), r);
                });
    rng.next();
  }
  {
    // softmax(a b^T * s), the composite used inside attention
    Matrix a = random_matrix(rows, dims.model_dim, rng);
    Matrix b = random_matrix(rows + 1, dims.model_dim, rng);
    const Rng w = rng;
    suite.check("softmax", {{"a", &a}, {"b", &b}}, [&, w](ParamBinder& bind) {
      Tape& t = bind.tape();
      Rng r = w;
      const Var logits = t.scale(t.matmul_nt(bind(a), bind(b)), 0.5);
      return scalarize(t, t.softmax_rows(logits), r);
    });
    rng.next();
  }
  {
    const std::size_t hd = dims.model_dim / dims.heads;
    Matrix q = random_matrix(rows, hd, rng);
    Matrix k = random_matrix(rows, hd, rng);
    Matrix v = random_matrix(rows, hd, rng);
    const Rng w = rng;
    suite.check("attention", {{"q", &q}, {"k", &k}, {"v", &v}}, [&, w](ParamBinder& bind) {
      Rng r = w;
      return scalarize(bind.tape(), nn::scaled_dot_attention(bind.tape(), bind(q), bind(k), bind(v)),
                       r);
    });
    rng.next();
  }
  {
    Matrix x = random_matrix(rows, dims.model_dim, rng);
    nn::AttentionParams attn = nn::make_attention(dims.model_dim, dims.heads, rng);
    std::vector<Input> inputs = {{"x", &x}};
    for (std::size_t h = 0; h < attn.heads; ++h) {
      inputs.push_back({"head" + std::to_string(h) + ".query", &attn.query[h]});
      inputs.push_back({"head" + std::to_string(h) + ".key", &attn.key[h]});
      inputs.push_back({"head" + std::to_string(h) + ".value", &attn.value[h]});
    }
    inputs.push_back({"output", &attn.output});
    const Rng w = rng;
    suite.check("multi_head", inputs, [&, w](ParamBinder& bind) {
      Rng r = w;
      return scalarize(bind.tape(), nn::multi_head(bind, bind(x), attn), r);
    });
    rng.next();
  }
  {
    Matrix x = random_matrix(rows, dims.model_dim, rng);
    nn::EncoderBlock block =
        nn::make_encoder_block(dims.model_dim, dims.heads, 2 * dims.model_dim, rng);
    jitter(block.attention_norm.gamma, rng, 0.2);
    jitter(block.attention_norm.beta, rng, 0.2);
    jitter(block.output_norm.gamma, rng, 0.2);
    jitter(block.output_norm.beta, rng, 0.2);
    jitter(block.ff.inner.bias, rng, 0.2);
    jitter(block.ff.outer.bias, rng, 0.2);
    std::vector<Input> inputs = {{"x", &x}};
    for (std::size_t h = 0; h < block.attention.heads; ++h) {
      inputs.push_back({"head" + std::to_string(h) + ".query", &block.attention.query[h]});
      inputs.push_back({"head" + std::to_string(h) + ".key", &block.attention.key[h]});
      inputs.push_back({"head" + std::to_string(h) + ".value", &block.attention.value[h]});
    }
    inputs.push_back({"attention.output", &block.attention.output});
    inputs.push_back({"attention_norm.gamma", &block.attention_norm.gamma});
    inputs.push_back({"attention_norm.beta", &block.attention_norm.beta});
    inputs.push_back({"ff.inner.weight", &block.ff.inner.weight});
    inputs.push_back({"ff.inner.bias", &block.ff.inner.bias});
    inputs.push_back({"ff.outer.weight", &block.ff.outer.weight});
    inputs.push_back({"ff.outer.bias", &block.ff.outer.bias});
    inputs.push_back({"output_norm.gamma", &block.output_norm.gamma});
    inputs.push_back({"output_norm.beta", &block.output_norm.beta});
    const Rng w = rng;
    suite.check("encoder_block", inputs, [&, w](ParamBinder& bind) {
      Rng r = w;
      return scalarize(bind.tape(), nn::encoder_block(bind, bind(x), block), r);
    });
    rng.next();
  }
  {
    // text branch: Linear -> ReLU -> Linear
    Matrix x = random_matrix(rows, dims.word_dim, rng);
    nn::Linear hidden = nn::make_linear(dims.word_dim, dims.model_dim, rng);
    nn::Linear out = nn::make_linear(dims.model_dim, dims.embed_dim, rng);
    jitter(hidden.bias, rng, 0.2);
    jitter(out.bias, rng, 0.2);
    const Rng w = rng;
    suite.check("theta",
                {{"x", &x}, {"hidden.weight", &hidden.weight}, {"hidden.bias", &hidden.bias},
                 {"out.weight", &out.weight}, {"out.bias", &out.bias}},
                [&, w](ParamBinder& bind) {
                  Tape& t = bind.tape();
                  Rng r = w;
                  const Var h = t.relu(nn::linear(bind, bind(x), hidden));
                  return scalarize(t, nn::linear(bind, h, out), r);
                });
    rng.next();
  }
  {
    // video branch head: Linear -> Linear on the pooled token
    Matrix tokens = random_matrix(dims.modalities, dims.model_dim, rng);
    nn::Linear hidden = nn::make_linear(dims.model_dim, dims.model_dim, rng);
    nn::Linear out = nn::make_linear(dims.model_dim, dims.embed_dim, rng);
    jitter(hidden.bias, rng, 0.2);
    jitter(out.bias, rng, 0.2);
    const Rng w = rng;
    suite.check("delta",
                {{"tokens", &tokens}, {"hidden.weight", &hidden.weight},
                 {"hidden.bias", &hidden.bias}, {"out.weight", &out.weight},
                 {"out.bias", &out.bias}},
                [&, w](ParamBinder& bind) {
                  Tape& t = bind.tape();
                  Rng r = w;
                  const Var pooled = t.mean_rows(bind(tokens));
                  return scalarize(t, nn::linear(bind, nn::linear(bind, pooled, hidden), out), r);
                });
    rng.next();
  }
  {
    Matrix x = random_matrix(rows, dims.embed_dim, rng);
    const Rng w = rng;
    suite.check("l2_normalize", {{"x", &x}}, [&, w](ParamBinder& bind) {
      Rng r = w;
      return scalarize(bind.tape(), bind.tape().l2_normalize_rows(bind(x)), r);
    });
    rng.next();
  }
  for (const auto kind : {nn::DistanceKind::euclidean, nn::DistanceKind::squared_euclidean,
                          nn::DistanceKind::cosine}) {
    Matrix a = random_matrix(1, dims.embed_dim, rng);
    Matrix b = random_matrix(1, dims.embed_dim, rng);
    const char* label = kind == nn::DistanceKind::euclidean           ? "distance.euclidean"
                        : kind == nn::DistanceKind::squared_euclidean ? "distance.squared"
                                                                      : "distance.cosine";
    suite.check(label, {{"a", &a}, {"b", &b}}, [&, kind](ParamBinder& bind) {
      return bind.tape().distance(bind(a), bind(b), kind);
    });
  }
  {
    Matrix a = random_matrix(1, dims.embed_dim, rng);
    Matrix p = random_matrix(1, dims.embed_dim, rng);
    Matrix n = random_matrix(1, dims.embed_dim, rng);
    const auto d = [](const Matrix& x, const Matrix& y) {
      return nn::distance_value(x.values(), y.values(), nn::DistanceKind::euclidean);
    };
    // Margin chosen so the hinge sits 0.5 inside its active region.
    const double margin = d(a, n) - d(a, p) + 0.5;
    suite.check("triplet_hinge", {{"anchor", &a}, {"positive", &p}, {"negative", &n}},
                [&, margin](ParamBinder& bind) {
                  Tape& t = bind.tape();
                  const Var ap = t.distance(bind(a), bind(p), nn::DistanceKind::euclidean);
                  const Var an = t.distance(bind(a), bind(n), nn::DistanceKind::euclidean);
                  return t.relu(t.add_scalar(t.sub(ap, an), margin));
                });
  }

  ModelConfig config;
  config.word_dim = dims.word_dim;
  config.feature_dim = dims.feature_dim;
  config.modalities = dims.modalities;
  config.embed_dim = dims.embed_dim;
  config.model_dim = dims.model_dim;
  config.heads = dims.heads;
  config.seed = seed;
  config.validate();
  add_end_to_end(suite, dims, config, rng, seed, "end_to_end");
  config.text_self_attention = true;
  config.heads = dims.word_dim % dims.heads == 0 ? dims.heads : 1;
  add_end_to_end(suite, dims, config, rng, seed, "end_to_end.text_attention");
  config.text_self_attention = false;
  config.heads = dims.heads;
  config.single_space = true;
  config.pooling = Pooling::max;
  config.video_tokens = VideoTokens::segment;
  add_end_to_end(suite, dims, config, rng, seed, "end_to_end.single_space");
  return suite.take();
}

}  // namespace srcv
