#include "srcv/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "srcv/errors.hpp"
#include "srcv/simd/kernels.hpp"

namespace srcv::nn {
namespace {

void add_into(Matrix& dst, const Matrix& src, double factor = 1.0) {
  simd::axpy(factor, src.values(), dst.values());
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) {
    throw Error(ErrorKind::Index, "variable does not belong to this tape");
  }
  return nodes_[v.id];
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, Backprop backprop) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(backprop));
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backprop backprop) {
  bool tracked = false;
  if (recording()) {
    for (Var p : parents) tracked = tracked || needs_grad(p);
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = tracked;
  if (tracked) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, recording(), {}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty() && !n.value.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix* Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return &n.grad;
}

Var Tape::matmul(Var a, Var b) {
  Matrix out = srcv::matmul(value(a), value(b));
  return push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    const double f = t.fault_factor(FaultSite::matmul);
    if (Matrix* ga = t.grad_buffer(a)) add_into(*ga, srcv::matmul_nt(g, t.value(b)), f);
    if (Matrix* gb = t.grad_buffer(b)) add_into(*gb, matmul_tn(t.value(a), g), f);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  Matrix out = srcv::matmul_nt(value(a), value(b));
  return push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    const double f = t.fault_factor(FaultSite::matmul);
    if (Matrix* ga = t.grad_buffer(a)) add_into(*ga, srcv::matmul(g, t.value(b)), f);
    if (Matrix* gb = t.grad_buffer(b)) add_into(*gb, matmul_tn(g, t.value(a)), f);
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Matrix out = value(a);
  add_into(out, value(b));
  return push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) add_into(*ga, g);
    if (Matrix* gb = t.grad_buffer(b)) add_into(*gb, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Matrix out = value(a);
  add_into(out, value(b), -1.0);
  return push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) add_into(*ga, g);
    if (Matrix* gb = t.grad_buffer(b)) add_into(*gb, g, -1.0);
  });
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& x = value(a);
  const Matrix& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw Error(ErrorKind::Shape, "add_row: bias must be 1x" + std::to_string(x.cols()));
  }
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) simd::axpy(1.0, r.values(), out.row(i));
  return push(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) add_into(*ga, g);
    if (Matrix* gr = t.grad_buffer(row)) {
      const double f = t.fault_factor(FaultSite::bias);
      for (std::size_t i = 0; i < g.rows(); ++i) simd::axpy(f, g.row(i), gr->values());
    }
  });
}

Var Tape::add_scalar(Var a, double c) {
  Matrix out = value(a);
  for (double& v : out.values()) v += c;
  return push(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) add_into(*ga, g);
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a);
  for (double& v : out.values()) v *= s;
  return push(std::move(out), {a}, [a, s](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) add_into(*ga, g, s);
  });
}

// The subgradient at exactly zero is taken as 0.
Var Tape::relu(Var a) {
  Matrix out = value(a);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    if (ga == nullptr) return;
    const double f = t.fault_factor(FaultSite::relu);
    const auto x = t.value(a).values();
    auto dst = ga->values();
    const auto src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (x[i] > 0.0) dst[i] += f * src[i];
    }
  });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    auto y = out.row(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      y[j] = std::exp(in[j] - peak);
      total += y[j];
    }
    for (double& v : y) v /= total;
  }
  Var self_id{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), {a}, [a, self_id](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    if (ga == nullptr) return;
    const double f = t.fault_factor(FaultSite::softmax);
    const Matrix& y = t.value(self_id);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      const double inner = simd::dot(gr, yr);
      auto dst = ga->row(r);
      for (std::size_t j = 0; j < yr.size(); ++j) dst[j] += f * yr[j] * (gr[j] - inner);
    }
  });
}

Var Tape::layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  const Matrix& in = value(x);
  const Matrix& gm = value(gamma);
  const Matrix& bt = value(beta);
  if (gm.rows() != 1 || gm.cols() != in.cols() || bt.rows() != 1 || bt.cols() != in.cols()) {
    throw Error(ErrorKind::Shape, "layer_norm: gamma/beta must be 1x" + std::to_string(in.cols()));
  }
  const std::size_t n = in.cols();
  Matrix normalized(in.rows(), n);
  std::vector<double> inv_std(in.rows());
  Matrix out(in.rows(), n);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto xr = in.row(r);
    const double mean = simd::sum(xr) / static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    auto hat = normalized.row(r);
    auto y = out.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      hat[j] = (xr[j] - mean) * inv;
      y[j] = gm(0, j) * hat[j] + bt(0, j);
    }
  }
  return push(std::move(out), {x, gamma, beta},
              [x, gamma, beta, normalized = std::move(normalized),
               inv_std = std::move(inv_std)](Tape& t, const Matrix& g) {
                const double f = t.fault_factor(FaultSite::layer_norm);
                const std::size_t n = normalized.cols();
                if (Matrix* gg = t.grad_buffer(gamma)) {
                  for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t j = 0; j < n; ++j) (*gg)(0, j) += g(r, j) * normalized(r, j);
                  }
                }
                if (Matrix* gb = t.grad_buffer(beta)) {
                  for (std::size_t r = 0; r < g.rows(); ++r) simd::axpy(1.0, g.row(r), gb->values());
                }
                Matrix* gx = t.grad_buffer(x);
                if (gx == nullptr) return;
                const Matrix& gm = t.value(gamma);
                std::vector<double> dhat(n);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                  double mean_d = 0.0;
                  double mean_dx = 0.0;
                  for (std::size_t j = 0; j < n; ++j) {
                    dhat[j] = g(r, j) * gm(0, j);
                    mean_d += dhat[j];
                    mean_dx += dhat[j] * normalized(r, j);
                  }
                  mean_d /= static_cast<double>(n);
                  mean_dx /= static_cast<double>(n);
                  for (std::size_t j = 0; j < n; ++j) {
                    (*gx)(r, j) +=
                        f * inv_std[r] * (dhat[j] - mean_d - normalized(r, j) * mean_dx);
                  }
                }
              });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::Shape, "concat_cols of nothing");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw Error(ErrorKind::Shape, "concat_cols: row counts differ");
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix& m = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(m.row(r).begin(), m.row(r).end(), out.row(r).begin() + offset);
    }
    offset += m.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return push(std::move(out), parts, [saved](Tape& t, const Matrix& g) {
    std::size_t offset = 0;
    for (Var p : saved) {
      const std::size_t width = t.value(p).cols();
      if (Matrix* gp = t.grad_buffer(p)) {
        for (std::size_t r = 0; r < g.rows(); ++r) {
          simd::axpy(1.0, g.row(r).subspan(offset, width), gp->row(r));
        }
      }
      offset += width;
    }
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::Shape, "concat_rows of nothing");
  const std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw Error(ErrorKind::Shape, "concat_rows: column counts differ");
    rows += value(p).rows();
  }
  Matrix out(rows, cols);
  auto dst = out.values().begin();
  for (Var p : parts) dst = std::copy(value(p).values().begin(), value(p).values().end(), dst);
  std::vector<Var> saved(parts.begin(), parts.end());
  return push(std::move(out), parts, [saved](Tape& t, const Matrix& g) {
    std::size_t offset = 0;
    for (Var p : saved) {
      const std::size_t count = t.value(p).size();
      if (Matrix* gp = t.grad_buffer(p)) {
        simd::axpy(1.0, g.values().subspan(offset, count), gp->values());
      }
      offset += count;
    }
  });
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& x = value(a);
  if (begin + count > x.cols()) throw Error(ErrorKind::Shape, "slice_cols out of range");
  Matrix out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return push(std::move(out), {a}, [a, begin, count](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    if (ga == nullptr) return;
    for (std::size_t r = 0; r < g.rows(); ++r) {
      simd::axpy(1.0, g.row(r), ga->row(r).subspan(begin, count));
    }
  });
}

Var Tape::row(Var a, std::size_t r) {
  const Matrix& x = value(a);
  if (r >= x.rows()) throw Error(ErrorKind::Shape, "row index out of range");
  Matrix out = Matrix::row_vector(x.row(r));
  return push(std::move(out), {a}, [a, r](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) simd::axpy(1.0, g.values(), ga->row(r));
  });
}

Var Tape::mean_rows(Var a) {
  const Matrix& x = value(a);
  if (x.rows() == 0) throw Error(ErrorKind::EmptyMatrix, "mean_rows of zero rows");
  const double inv = 1.0 / static_cast<double>(x.rows());
  Matrix out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) simd::axpy(1.0, x.row(r), out.values());
  for (double& v : out.values()) v *= inv;
  return push(std::move(out), {a}, [a, inv](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    if (ga == nullptr) return;
    const double f = t.fault_factor(FaultSite::mean_rows);
    for (std::size_t r = 0; r < ga->rows(); ++r) simd::axpy(f * inv, g.values(), ga->row(r));
  });
}

Var Tape::l2_normalize_rows(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  std::vector<double> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    norms[r] = std::sqrt(simd::dot(x.row(r), x.row(r)));
    if (norms[r] > 0.0) {
      auto y = out.row(r);
      const auto xr = x.row(r);
      for (std::size_t j = 0; j < y.size(); ++j) y[j] = xr[j] / norms[r];
    }
  }
  Var self_id{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), {a}, [a, self_id, norms = std::move(norms)](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    if (ga == nullptr) return;
    const double f = t.fault_factor(FaultSite::normalize);
    const Matrix& y = t.value(self_id);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      if (norms[r] <= 0.0) continue;
      const double inner = simd::dot(y.row(r), g.row(r));
      auto dst = ga->row(r);
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += f * (gr[j] - yr[j] * inner) / norms[r];
    }
  });
}

double distance_value(std::span<const double> a, std::span<const double> b, DistanceKind kind) {
  switch (kind) {
    case DistanceKind::euclidean:
      return std::sqrt(simd::squared_distance(a, b));
    case DistanceKind::squared_euclidean:
      return simd::squared_distance(a, b);
    case DistanceKind::cosine: {
      const double norm_a = std::sqrt(simd::dot(a, a));
      const double norm_b = std::sqrt(simd::dot(b, b));
      if (norm_a <= 0.0 || norm_b <= 0.0) return 1.0;
      return 1.0 - simd::dot(a, b) / (norm_a * norm_b);
    }
  }
  return 0.0;
}

Var Tape::distance(Var a, Var b, DistanceKind kind) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  require_same_shape(x, y, "distance");
  const double d = distance_value(x.values(), y.values(), kind);
  double norm_x = 0.0;
  double norm_y = 0.0;
  double inner = 0.0;
  if (kind == DistanceKind::cosine) {
    norm_x = std::sqrt(simd::dot(x.values(), x.values()));
    norm_y = std::sqrt(simd::dot(y.values(), y.values()));
    inner = simd::dot(x.values(), y.values());
  }
  Matrix out(1, 1, d);
  return push(std::move(out), {a, b},
              [a, b, kind, d, norm_x, norm_y, inner](Tape& t, const Matrix& g) {
                const double up = g(0, 0) * t.fault_factor(FaultSite::distance);
                const auto xv = t.value(a).values();
                const auto yv = t.value(b).values();
                Matrix* ga = t.grad_buffer(a);
                Matrix* gb = t.grad_buffer(b);
                const std::size_t n = xv.size();
                switch (kind) {
                  case DistanceKind::euclidean:
                  case DistanceKind::squared_euclidean: {
                    double coeff = 2.0 * up;
                    if (kind == DistanceKind::euclidean) {
                      if (d <= 0.0) return;
                      coeff = up / d;
                    }
                    for (std::size_t i = 0; i < n; ++i) {
                      const double diff = coeff * (xv[i] - yv[i]);
                      if (ga) ga->values()[i] += diff;
                      if (gb) gb->values()[i] -= diff;
                    }
                    break;
                  }
                  case DistanceKind::cosine: {
                    if (norm_x <= 0.0 || norm_y <= 0.0) return;
                    const double denom = norm_x * norm_y;
                    for (std::size_t i = 0; i < n; ++i) {
                      if (ga) {
                        ga->values()[i] -=
                            up * (yv[i] / denom - inner * xv[i] / (norm_x * norm_x * denom));
                      }
                      if (gb) {
                        gb->values()[i] -=
                            up * (xv[i] / denom - inner * yv[i] / (norm_y * norm_y * denom));
                      }
                    }
                    break;
                  }
                }
              });
}

Var Tape::linear_combination(std::span<const Var> terms, std::span<const double> weights) {
  if (terms.size() != weights.size() || terms.empty()) {
    throw Error(ErrorKind::Shape, "linear_combination needs one weight per term");
  }
  Matrix out(value(terms[0]).rows(), value(terms[0]).cols());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require_same_shape(out, value(terms[i]), "linear_combination");
    add_into(out, value(terms[i]), weights[i]);
  }
  std::vector<Var> saved(terms.begin(), terms.end());
  std::vector<double> w(weights.begin(), weights.end());
  return push(std::move(out), terms, [saved, w](Tape& t, const Matrix& g) {
    for (std::size_t i = 0; i < saved.size(); ++i) {
      if (Matrix* gi = t.grad_buffer(saved[i])) add_into(*gi, g, w[i]);
    }
  });
}

Var Tape::weighted_sum(Var a, const Matrix& weights) {
  require_same_shape(value(a), weights, "weighted_sum");
  Matrix out(1, 1, simd::dot(value(a).values(), weights.values()));
  return push(std::move(out), {a}, [a, weights](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) add_into(*ga, weights, g(0, 0));
  });
}

void Tape::backward(Var root, double seed) {
  if (nodes_.empty()) throw Error(ErrorKind::TapeEmpty, "backward on an empty tape");
  const Node& r = node(root);
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw Error(ErrorKind::Shape, "backward root must be 1x1");
  }
  for (Node& n : nodes_) n.grad = Matrix();
  if (!r.requires_grad) return;
  nodes_[root.id].grad = Matrix(1, 1, seed);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backprop || n.grad.empty()) continue;
    // The node's own grad is complete here; parents have smaller ids and
    // nothing is pushed during the sweep, so the reference stays valid.
    n.backprop(*this, n.grad);
  }
}

}  // namespace srcv::nn
