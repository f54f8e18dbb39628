#include "srcv/model.hpp"

#include "srcv/errors.hpp"
#include "srcv/random.hpp"

namespace srcv {

const char* to_string(Pooling p) noexcept { return p == Pooling::mean ? "mean" : "max"; }

const char* to_string(VideoTokens t) noexcept {
  return t == VideoTokens::modality ? "modality" : "segment";
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (embed_dim < 2) fail("embed_dim must be at least 2");
  if (model_dim == 0) fail("model_dim must be positive");
  if (heads == 0 || model_dim % heads != 0) {
    fail("heads (" + std::to_string(heads) + ") must divide model_dim (" +
         std::to_string(model_dim) + ")");
  }
  if (word_dim == 0) fail("word_dim must be positive");
  if (feature_dim == 0) fail("feature_dim must be positive");
  if (modalities == 0) fail("modalities must be positive");
  if (text_self_attention && word_dim % heads != 0) {
    fail("text_self_attention needs heads (" + std::to_string(heads) + ") to divide word_dim (" +
         std::to_string(word_dim) + ")");
  }
}

std::size_t ModelParams::tensor_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Matrix&) { ++n; });
  return n;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams p;
  p.config = config;
  p.config.ff_hidden = config.ff_width();
  p.config.text_hidden = config.text_width();
  p.video_projection = nn::make_linear(config.feature_dim, config.model_dim, rng);
  p.video_block = nn::make_encoder_block(config.model_dim, config.heads, config.ff_width(), rng);
  if (config.text_self_attention) {
    p.text_block = nn::make_encoder_block(config.word_dim, config.heads, 2 * config.word_dim, rng);
  }
  const std::size_t text_in = config.single_space ? 2 * config.word_dim : config.word_dim;
  for (std::size_t k = 0; k < config.space_count(); ++k) {
    SpaceEncoders s;
    s.text_hidden = nn::make_linear(text_in, config.text_width(), rng);
    s.text_out = nn::make_linear(config.text_width(), config.embed_dim, rng);
    s.video_hidden = nn::make_linear(config.model_dim, config.model_dim, rng);
    s.video_out = nn::make_linear(config.model_dim, config.embed_dim, rng);
    p.spaces.push_back(std::move(s));
  }
  return p;
}

namespace {

nn::Var theta(nn::ParamBinder& bind, nn::Var x, const SpaceEncoders& s) {
  return nn::linear(bind, bind.tape().relu(nn::linear(bind, x, s.text_hidden)), s.text_out);
}

nn::Var delta(nn::ParamBinder& bind, nn::Var x, const SpaceEncoders& s) {
  return nn::linear(bind, nn::linear(bind, x, s.video_hidden), s.video_out);
}

EmbeddingVars assemble(nn::Tape& t, nn::Var noun, nn::Var verb, bool single_space) {
  if (single_space) return EmbeddingVars{noun, noun, noun};
  const nn::Var halves[] = {noun, verb};
  return EmbeddingVars{noun, verb, t.concat_cols(halves)};
}

std::vector<double> to_vector(const Matrix& m) {
  return std::vector<double>(m.values().begin(), m.values().end());
}

}  // namespace

EmbeddingVars encode_text(nn::ParamBinder& bind, nn::Var noun_vec, nn::Var verb_vec,
                          const ModelParams& params) {
  nn::Tape& t = bind.tape();
  const ModelConfig& cfg = params.config;
  for (nn::Var v : {noun_vec, verb_vec}) {
    if (t.value(v).rows() != 1 || t.value(v).cols() != cfg.word_dim) {
      throw Error(ErrorKind::Shape, "encode_text: role vectors must be 1x" +
                                        std::to_string(cfg.word_dim));
    }
  }
  nn::Var noun_in = noun_vec;
  nn::Var verb_in = verb_vec;
  if (params.text_block) {
    const nn::Var rows[] = {noun_vec, verb_vec};
    const nn::Var encoded = nn::encoder_block(bind, t.concat_rows(rows), *params.text_block);
    noun_in = t.row(encoded, 0);
    verb_in = t.row(encoded, 1);
  }
  if (cfg.single_space) {
    const nn::Var both[] = {noun_in, verb_in};
    const nn::Var e = t.l2_normalize_rows(theta(bind, t.concat_cols(both), params.spaces[0]));
    return assemble(t, e, e, true);
  }
  const nn::Var noun = t.l2_normalize_rows(theta(bind, noun_in, params.spaces[0]));
  const nn::Var verb = t.l2_normalize_rows(theta(bind, verb_in, params.spaces[1]));
  return assemble(t, noun, verb, false);
}

EmbeddingVars encode_video(nn::ParamBinder& bind, nn::Var tokens, const ModelParams& params) {
  nn::Tape& t = bind.tape();
  const ModelConfig& cfg = params.config;
  if (t.value(tokens).rows() == 0 || t.value(tokens).cols() != cfg.feature_dim) {
    throw Error(ErrorKind::Shape, "encode_video: tokens must be s x " +
                                      std::to_string(cfg.feature_dim) + " with s >= 1");
  }
  const nn::Var projected = nn::linear(bind, tokens, params.video_projection);
  const nn::Var context = nn::encoder_block(bind, projected, params.video_block);
  const nn::Var pooled = t.mean_rows(context);
  if (cfg.single_space) {
    const nn::Var e = t.l2_normalize_rows(delta(bind, pooled, params.spaces[0]));
    return assemble(t, e, e, true);
  }
  const nn::Var noun = t.l2_normalize_rows(delta(bind, pooled, params.spaces[0]));
  const nn::Var verb = t.l2_normalize_rows(delta(bind, pooled, params.spaces[1]));
  return assemble(t, noun, verb, false);
}

EmbeddingSet read_embeddings(const nn::Tape& tape, const EmbeddingVars& vars) {
  return EmbeddingSet{to_vector(tape.value(vars.noun)), to_vector(tape.value(vars.verb)),
                      to_vector(tape.value(vars.joint))};
}

EmbeddingSet encode_text(std::span<const double> noun_vec, std::span<const double> verb_vec,
                         const ModelParams& params) {
  nn::Tape tape(nn::Tape::Mode::inference);
  nn::ParamBinder bind(tape);
  const auto vars = encode_text(bind, tape.constant(Matrix::row_vector(noun_vec)),
                                tape.constant(Matrix::row_vector(verb_vec)), params);
  return read_embeddings(tape, vars);
}

EmbeddingSet encode_video(const Matrix& tokens, const ModelParams& params) {
  nn::Tape tape(nn::Tape::Mode::inference);
  nn::ParamBinder bind(tape);
  return read_embeddings(tape, encode_video(bind, tape.constant(tokens), params));
}

std::vector<EmbeddingSet> encode_texts(std::span<const RoleVectors> items,
                                       const ModelParams& params) {
  nn::Tape tape(nn::Tape::Mode::inference);
  nn::ParamBinder bind(tape);
  std::vector<EmbeddingSet> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    const auto vars = encode_text(bind, tape.constant(Matrix::row_vector(item.noun)),
                                  tape.constant(Matrix::row_vector(item.verb)), params);
    out.push_back(read_embeddings(tape, vars));
  }
  return out;
}

std::vector<EmbeddingSet> encode_videos(std::span<const Matrix> tokens, const ModelParams& params) {
  nn::Tape tape(nn::Tape::Mode::inference);
  nn::ParamBinder bind(tape);
  std::vector<EmbeddingSet> out;
  out.reserve(tokens.size());
  for (const auto& m : tokens) {
    out.push_back(read_embeddings(tape, encode_video(bind, tape.constant(m), params)));
  }
  return out;
}

std::vector<Matrix> collect_gradients(const nn::Tape& tape, const nn::ParamBinder& bind,
                                      const ModelParams& params) {
  std::vector<Matrix> grads;
  grads.reserve(params.tensor_count());
  params.visit([&](const std::string&, const Matrix& m) {
    const nn::Var v = bind.find(m);
    grads.push_back(v.valid() ? tape.grad(v) : Matrix(m.rows(), m.cols()));
  });
  return grads;
}

}  // namespace srcv
