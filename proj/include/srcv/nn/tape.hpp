#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "srcv/matrix.hpp"

namespace srcv::nn {

// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const noexcept { return id != std::numeric_limits<std::uint32_t>::max(); }
};

enum class DistanceKind { euclidean, squared_euclidean, cosine };

// Forward value of Tape::distance. Cosine distance involving a zero vector
// is 1.
double distance_value(std::span<const double> a, std::span<const double> b, DistanceKind kind);

// Test hook: the named primitive scales its vector-Jacobian product by 1.5.
// Lets the gradient checker prove it catches a broken rule.
enum class FaultSite { none, matmul, bias, relu, softmax, layer_norm, normalize, distance, mean_rows };

// Eager reverse-mode tape over matrix-valued primitives. Forward values are
// computed when an op is recorded; backward() replays the recorded
// vector-Jacobian products in reverse order, visiting each node once.
//
// One tape per computation and per thread. In inference mode no backward
// closures are stored and backward() has nothing to propagate.
class Tape {
 public:
  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record, FaultSite fault = FaultSite::none)
      : mode_(mode), fault_(fault) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::record; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Matrix value);
  // A leaf that receives a gradient.
  Var variable(Matrix value);

  const Matrix& value(Var v) const;
  // Gradient after backward(); a zero matrix when nothing reached `v`.
  Matrix grad(Var v) const;

  Var matmul(Var a, Var b);
  // a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  // Adds a 1 x n row to every row of `a`.
  Var add_row(Var a, Var row);
  Var add_scalar(Var a, double c);
  Var scale(Var a, double s);
  Var relu(Var a);
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gamma, Var beta, double eps);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var row(Var a, std::size_t r);
  // Column-wise mean over rows, 1 x n.
  Var mean_rows(Var a);
  // Each row scaled to unit L2 norm; an all-zero row stays zero.
  Var l2_normalize_rows(Var a);
  // 1 x 1 distance between two equally shaped values.
  Var distance(Var a, Var b, DistanceKind kind);
  // sum_i weights[i] * terms[i]; terms share one shape.
  Var linear_combination(std::span<const Var> terms, std::span<const double> weights);
  // 1 x 1 value sum(a .* weights).
  Var weighted_sum(Var a, const Matrix& weights);

  // Reverse accumulation from a 1 x 1 root. Throws TapeEmpty on an empty
  // tape and ShapeError for a non-scalar root.
  void backward(Var root, double seed = 1.0);

 private:
  using Backprop = std::function<void(Tape&, const Matrix& out_grad)>;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backprop backprop;
  };

  const Node& node(Var v) const;
  Var push(Matrix value, std::initializer_list<Var> parents, Backprop backprop);
  Var push(Matrix value, std::span<const Var> parents, Backprop backprop);
  bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }
  // Lazily allocated gradient buffer of `v`, or nullptr if `v` takes none.
  Matrix* grad_buffer(Var v);
  double fault_factor(FaultSite site) const noexcept { return fault_ == site ? 1.5 : 1.0; }

  Mode mode_;
  FaultSite fault_;
  std::vector<Node> nodes_;
};

}  // namespace srcv::nn
