#include "srcv/nn/layers.hpp"

#include <cmath>
#include <string>

#include "srcv/errors.hpp"

namespace srcv::nn {

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double bound = glorot_bound(fan_in, fan_out);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

Linear make_linear(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  return Linear{glorot_uniform(out_dim, in_dim, in_dim, out_dim, rng), Matrix(1, out_dim)};
}

LayerNorm make_layer_norm(std::size_t n, double eps) {
  return LayerNorm{Matrix(1, n, 1.0), Matrix(1, n), eps};
}

AttentionParams make_attention(std::size_t model_dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || model_dim % heads != 0) {
    throw Error(ErrorKind::Config, "heads (" + std::to_string(heads) +
                                       ") must divide model_dim (" + std::to_string(model_dim) + ")");
  }
  const std::size_t head_dim = model_dim / heads;
  AttentionParams p;
  p.heads = heads;
  for (std::size_t h = 0; h < heads; ++h) {
    p.query.push_back(glorot_uniform(model_dim, head_dim, model_dim, head_dim, rng));
    p.key.push_back(glorot_uniform(model_dim, head_dim, model_dim, head_dim, rng));
    p.value.push_back(glorot_uniform(model_dim, head_dim, model_dim, head_dim, rng));
  }
  p.output = glorot_uniform(heads * head_dim, model_dim, heads * head_dim, model_dim, rng);
  return p;
}

EncoderBlock make_encoder_block(std::size_t model_dim, std::size_t heads, std::size_t ff_hidden,
                                Rng& rng) {
  EncoderBlock block;
  block.attention = make_attention(model_dim, heads, rng);
  block.attention_norm = make_layer_norm(model_dim);
  block.ff.inner = make_linear(model_dim, ff_hidden, rng);
  block.ff.outer = make_linear(ff_hidden, model_dim, rng);
  block.output_norm = make_layer_norm(model_dim);
  return block;
}

void AttentionParams::validate() const {
  if (heads == 0 || query.size() != heads || key.size() != heads || value.size() != heads) {
    throw Error(ErrorKind::Shape, "attention: expected one Q/K/V projection per head");
  }
  const std::size_t d = model_dim();
  const std::size_t hd = head_dim();
  if (hd == 0 || output.rows() != heads * hd) {
    throw Error(ErrorKind::Shape, "attention: output projection must be (heads*head_dim) x model_dim");
  }
  for (std::size_t h = 0; h < heads; ++h) {
    for (const Matrix* m : {&query[h], &key[h], &value[h]}) {
      if (m->rows() != d || m->cols() != hd) {
        throw Error(ErrorKind::Shape, "attention: head projection must be model_dim x head_dim");
      }
    }
  }
}

Var ParamBinder::operator()(const Matrix& param) {
  if (auto it = bound_.find(&param); it != bound_.end()) return it->second;
  const Var v = tape_.recording() ? tape_.variable(param) : tape_.constant(param);
  bound_.emplace(&param, v);
  return v;
}

Var ParamBinder::find(const Matrix& param) const {
  auto it = bound_.find(&param);
  return it == bound_.end() ? Var{} : it->second;
}

Var linear(ParamBinder& bind, Var x, const Linear& layer) {
  Tape& t = bind.tape();
  if (t.value(x).cols() != layer.in_dim()) {
    throw Error(ErrorKind::Shape, "linear: input width " + std::to_string(t.value(x).cols()) +
                                      " != " + std::to_string(layer.in_dim()));
  }
  return t.add_row(t.matmul_nt(x, bind(layer.weight)), bind(layer.bias));
}

Var layer_norm(ParamBinder& bind, Var x, const LayerNorm& norm) {
  return bind.tape().layer_norm_rows(x, bind(norm.gamma), bind(norm.beta), norm.eps);
}

Var scaled_dot_attention(Tape& tape, Var q, Var k, Var v) {
  const Matrix& qm = tape.value(q);
  const Matrix& km = tape.value(k);
  const Matrix& vm = tape.value(v);
  if (qm.cols() == 0 || qm.cols() != km.cols() || km.rows() != vm.rows()) {
    throw Error(ErrorKind::Shape, "scaled_dot_attention: Q/K/V shapes disagree");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(qm.cols()));
  const Var weights = tape.softmax_rows(tape.scale(tape.matmul_nt(q, k), scale));
  return tape.matmul(weights, v);
}

Var multi_head(ParamBinder& bind, Var x, const AttentionParams& params) {
  params.validate();
  Tape& t = bind.tape();
  if (t.value(x).cols() != params.model_dim()) {
    throw Error(ErrorKind::Shape, "multi_head: input width does not match model_dim");
  }
  std::vector<Var> heads;
  heads.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    const Var q = t.matmul(x, bind(params.query[h]));
    const Var k = t.matmul(x, bind(params.key[h]));
    const Var v = t.matmul(x, bind(params.value[h]));
    heads.push_back(scaled_dot_attention(t, q, k, v));
  }
  return t.matmul(t.concat_cols(heads), bind(params.output));
}

Var feed_forward(ParamBinder& bind, Var x, const FeedForward& ff) {
  return linear(bind, bind.tape().relu(linear(bind, x, ff.inner)), ff.outer);
}

Var encoder_block(ParamBinder& bind, Var x, const EncoderBlock& block) {
  Tape& t = bind.tape();
  if (t.value(x).rows() == 0) throw Error(ErrorKind::Shape, "encoder_block needs at least one token");
  const Var z = layer_norm(bind, t.add(multi_head(bind, x, block.attention), x), block.attention_norm);
  return layer_norm(bind, t.add(feed_forward(bind, z, block.ff), z), block.output_norm);
}

namespace {

std::vector<double> to_vector(const Matrix& m) {
  return std::vector<double>(m.values().begin(), m.values().end());
}

}  // namespace

std::vector<double> linear(std::span<const double> x, const Matrix& weight,
                           std::span<const double> bias) {
  if (x.size() != weight.cols() || bias.size() != weight.rows()) {
    throw Error(ErrorKind::Shape, "linear: x has " + std::to_string(x.size()) + ", W is " +
                                      std::to_string(weight.rows()) + "x" +
                                      std::to_string(weight.cols()) + ", b has " +
                                      std::to_string(bias.size()));
  }
  Tape tape(Tape::Mode::inference);
  ParamBinder bind(tape);
  Linear layer{weight, Matrix::row_vector(bias)};
  return to_vector(tape.value(linear(bind, tape.constant(Matrix::row_vector(x)), layer)));
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gamma,
                               std::span<const double> beta, double eps) {
  if (x.empty()) throw Error(ErrorKind::Shape, "layer_norm of an empty vector");
  Tape tape(Tape::Mode::inference);
  ParamBinder bind(tape);
  LayerNorm norm{Matrix::row_vector(gamma), Matrix::row_vector(beta), eps};
  return to_vector(tape.value(layer_norm(bind, tape.constant(Matrix::row_vector(x)), norm)));
}

std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorKind::Shape, "softmax of an empty vector");
  Tape tape(Tape::Mode::inference);
  return to_vector(tape.value(tape.softmax_rows(tape.constant(Matrix::row_vector(x)))));
}

Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  Tape tape(Tape::Mode::inference);
  return tape.value(scaled_dot_attention(tape, tape.constant(q), tape.constant(k), tape.constant(v)));
}

Matrix multi_head(const Matrix& x, const AttentionParams& params) {
  Tape tape(Tape::Mode::inference);
  ParamBinder bind(tape);
  return tape.value(multi_head(bind, tape.constant(x), params));
}

Matrix encoder_block(const Matrix& x, const EncoderBlock& block) {
  Tape tape(Tape::Mode::inference);
  ParamBinder bind(tape);
  return tape.value(encoder_block(bind, tape.constant(x), block));
}

}  // namespace srcv::nn
