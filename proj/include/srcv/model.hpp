#pragma once

// Dual-branch retrieval model. Text role vectors go through a two-layer
// fully connected encoder per embedding space; video tokens go through a
// shared projection and self-attention encoder block, are mean-pooled over
// tokens, then pass two linear layers per space. Each space's output is
// unit-normalized and the noun and verb halves are concatenated into the
// joint representation used for retrieval.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srcv/matrix.hpp"
#include "srcv/nn/layers.hpp"
#include "srcv/nn/tape.hpp"
#include "srcv/text_roles.hpp"

namespace srcv {

enum class Pooling { mean, max };

// modality: one token per modality (temporally pooled first).
// segment: one token per (modality, segment); pooling happens after attention.
enum class VideoTokens { modality, segment };

const char* to_string(Pooling p) noexcept;
const char* to_string(VideoTokens t) noexcept;

struct ModelConfig {
  std::size_t word_dim = 64;
  std::size_t feature_dim = 64;
  std::size_t modalities = 3;
  std::size_t embed_dim = 32;
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::size_t ff_hidden = 0;    // 0 selects 2 * model_dim
  std::size_t text_hidden = 0;  // 0 selects model_dim
  bool text_self_attention = false;
  bool single_space = false;
  Pooling pooling = Pooling::mean;
  VideoTokens video_tokens = VideoTokens::modality;
  std::uint64_t seed = 42;

  std::size_t ff_width() const noexcept { return ff_hidden ? ff_hidden : 2 * model_dim; }
  std::size_t text_width() const noexcept { return text_hidden ? text_hidden : model_dim; }
  std::size_t joint_dim() const noexcept { return single_space ? embed_dim : 2 * embed_dim; }
  std::size_t space_count() const noexcept { return single_space ? 1 : 2; }

  // Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// theta (text, Linear -> ReLU -> Linear) and delta (video, Linear -> Linear)
// for one embedding space.
struct SpaceEncoders {
  nn::Linear text_hidden;
  nn::Linear text_out;
  nn::Linear video_hidden;
  nn::Linear video_out;
};

struct ModelParams {
  ModelConfig config;
  nn::Linear video_projection;  // feature_dim -> model_dim, shared by all tokens
  nn::EncoderBlock video_block;
  std::optional<nn::EncoderBlock> text_block;
  std::vector<SpaceEncoders> spaces;  // {noun, verb}, or one shared space

  // Calls f(name, matrix) for every learned tensor in a fixed order.
  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }

  std::size_t tensor_count() const;

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f);
};

// Glorot-uniform weights, zero biases, unit LayerNorm gains.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct EmbeddingSet {
  std::vector<double> noun;
  std::vector<double> verb;
  std::vector<double> joint;
};

struct EmbeddingVars {
  nn::Var noun;
  nn::Var verb;
  nn::Var joint;
};

// Tape forms. `noun_vec`/`verb_vec` are 1 x word_dim; `tokens` is
// s x feature_dim.
EmbeddingVars encode_text(nn::ParamBinder& bind, nn::Var noun_vec, nn::Var verb_vec,
                          const ModelParams& params);
EmbeddingVars encode_video(nn::ParamBinder& bind, nn::Var tokens, const ModelParams& params);

EmbeddingSet encode_text(std::span<const double> noun_vec, std::span<const double> verb_vec,
                         const ModelParams& params);
EmbeddingSet encode_video(const Matrix& tokens, const ModelParams& params);

// Batch value forms sharing one inference tape.
std::vector<EmbeddingSet> encode_texts(std::span<const RoleVectors> items, const ModelParams& params);
std::vector<EmbeddingSet> encode_videos(std::span<const Matrix> tokens, const ModelParams& params);

EmbeddingSet read_embeddings(const nn::Tape& tape, const EmbeddingVars& vars);

// One gradient per tensor in visit() order; zero for tensors the tape never
// touched.
std::vector<Matrix> collect_gradients(const nn::Tape& tape, const nn::ParamBinder& bind,
                                      const ModelParams& params);

// ---------------------------------------------------------------------------

template <class Self, class F>
void ModelParams::visit_impl(Self& self, F& f) {
  auto linear = [&](const std::string& name, auto& layer) {
    f(name + ".weight", layer.weight);
    f(name + ".bias", layer.bias);
  };
  auto block = [&](const std::string& name, auto& b) {
    for (std::size_t h = 0; h < b.attention.heads; ++h) {
      const std::string head = name + ".attention.head" + std::to_string(h);
      f(head + ".query", b.attention.query[h]);
      f(head + ".key", b.attention.key[h]);
      f(head + ".value", b.attention.value[h]);
    }
    f(name + ".attention.output", b.attention.output);
    f(name + ".attention_norm.gamma", b.attention_norm.gamma);
    f(name + ".attention_norm.beta", b.attention_norm.beta);
    linear(name + ".ff.inner", b.ff.inner);
    linear(name + ".ff.outer", b.ff.outer);
    f(name + ".output_norm.gamma", b.output_norm.gamma);
    f(name + ".output_norm.beta", b.output_norm.beta);
  };
  linear("video_projection", self.video_projection);
  block("video_block", self.video_block);
  if (self.text_block) block("text_block", *self.text_block);
  static const char* const kSpaceNames[] = {"noun", "verb"};
  for (std::size_t k = 0; k < self.spaces.size(); ++k) {
    const std::string space = self.spaces.size() == 1 ? "shared" : kSpaceNames[k];
    linear("space." + space + ".text_hidden", self.spaces[k].text_hidden);
    linear("space." + space + ".text_out", self.spaces[k].text_out);
    linear("space." + space + ".video_hidden", self.spaces[k].video_hidden);
    linear("space." + space + ".video_out", self.spaces[k].video_out);
  }
}

}  // namespace srcv
