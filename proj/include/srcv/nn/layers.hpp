#pragma once

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "srcv/matrix.hpp"
#include "srcv/nn/tape.hpp"
#include "srcv/random.hpp"

namespace srcv::nn {

// y = W x + b, applied row-wise as Y = X W^T + b.
struct Linear {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
};

struct LayerNorm {
  Matrix gamma;  // 1 x n
  Matrix beta;   // 1 x n
  double eps = 1e-5;
};

// Per-head projections W_i^Q, W_i^K, W_i^V are model_dim x head_dim; the
// output projection W^O is (heads * head_dim) x model_dim.
struct AttentionParams {
  std::size_t heads = 1;
  std::vector<Matrix> query;
  std::vector<Matrix> key;
  std::vector<Matrix> value;
  Matrix output;

  std::size_t model_dim() const noexcept { return output.cols(); }
  std::size_t head_dim() const noexcept { return query.empty() ? 0 : query.front().cols(); }
  // Throws ShapeError if the matrices disagree with heads/model_dim.
  void validate() const;
};

// Position-wise linear -> ReLU -> linear.
struct FeedForward {
  Linear inner;
  Linear outer;
};

// z = Norm(MultiHead(V, V, V) + V); E = Norm(FF(z) + z).
struct EncoderBlock {
  AttentionParams attention;
  LayerNorm attention_norm;
  FeedForward ff;
  LayerNorm output_norm;
};

// Glorot-uniform weights in [-sqrt(6/(fan_in+fan_out)), +...].
Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

Linear make_linear(std::size_t in_dim, std::size_t out_dim, Rng& rng);
LayerNorm make_layer_norm(std::size_t n, double eps = 1e-5);
AttentionParams make_attention(std::size_t model_dim, std::size_t heads, Rng& rng);
EncoderBlock make_encoder_block(std::size_t model_dim, std::size_t heads, std::size_t ff_hidden,
                                Rng& rng);

// Maps parameter storage to tape leaves, creating each leaf on first use so
// a parameter shared by several call sites accumulates one gradient. On an
// inference tape parameters become constants.
class ParamBinder {
 public:
  explicit ParamBinder(Tape& tape) : tape_(tape) {}

  Var operator()(const Matrix& param);
  // Invalid Var when `param` was never used.
  Var find(const Matrix& param) const;
  Tape& tape() noexcept { return tape_; }

 private:
  Tape& tape_;
  std::unordered_map<const Matrix*, Var> bound_;
};

// Tape forms.
Var linear(ParamBinder& bind, Var x, const Linear& layer);
Var layer_norm(ParamBinder& bind, Var x, const LayerNorm& norm);
Var scaled_dot_attention(Tape& tape, Var q, Var k, Var v);
Var multi_head(ParamBinder& bind, Var x, const AttentionParams& params);
Var feed_forward(ParamBinder& bind, Var x, const FeedForward& ff);
Var encoder_block(ParamBinder& bind, Var x, const EncoderBlock& block);

// Value forms. Same code path as the tape forms, on an inference tape.
std::vector<double> linear(std::span<const double> x, const Matrix& weight,
                           std::span<const double> bias);
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gamma,
                               std::span<const double> beta, double eps);
std::vector<double> softmax(std::span<const double> x);
Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v);
Matrix multi_head(const Matrix& x, const AttentionParams& params);
Matrix encoder_block(const Matrix& x, const EncoderBlock& block);

}  // namespace srcv::nn
