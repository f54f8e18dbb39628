#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracle/oracles.hpp"
#include "srcv/errors.hpp"
#include "srcv/matrix.hpp"
#include "srcv/nn/gradcheck.hpp"
#include "srcv/nn/layers.hpp"
#include "srcv/nn/tape.hpp"
#include "srcv/random.hpp"
#include "srcv/simd/kernels.hpp"

using namespace srcv;
using nn::Tape;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < m.cols(); ++c) out(i, c) = m(perm[i], c);
  return out;
}

std::vector<double> vec(std::initializer_list<double> v) { return v; }

}  // namespace

TEST_CASE("matrix rejects non-finite values and bad shapes") {
  CHECK_THROWS_AS(Matrix::from_data(1, 2, {1.0, NAN}), Error);
  CHECK_THROWS_AS(Matrix::from_data(2, 2, {1.0}), Error);
  CHECK_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), Error);
  try {
    Matrix::from_data(1, 1, {INFINITY});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
}

TEST_CASE("matmul variants agree with explicit transposes") {
  Rng rng(3);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(5, 4, rng);
  const Matrix c = random_matrix(3, 2, rng);
  const auto nt = matmul_nt(a, b);
  const auto ref_nt = matmul(a, transpose(b));
  CHECK(oracle::max_abs_diff(nt.values(), ref_nt.values()) < 1e-12);
  const auto tn = matmul_tn(a, c);
  const auto ref_tn = matmul(transpose(a), c);
  CHECK(oracle::max_abs_diff(tn.values(), ref_tn.values()) < 1e-12);
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("simd kernels match the scalar reference") {
  const simd::KernelTable& scalar = simd::scalar_kernels();
  const simd::KernelTable* avx2 = simd::avx2_kernels();
  if (!avx2 || !simd::cpu_supports_avx2()) {
    MESSAGE("AVX2 variant unavailable; only the scalar path is exercised");
    return;
  }
  Rng rng(11);
  for (std::size_t n : {0, 1, 3, 4, 7, 8, 15, 16, 17, 31, 64, 100, 1023}) {
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = rng.uniform(-2, 2);
    for (auto& v : b) v = rng.uniform(-2, 2);
    const double tol = 1e-13 * static_cast<double>(n + 1);
    CHECK(std::abs(scalar.dot(a.data(), b.data(), n) - avx2->dot(a.data(), b.data(), n)) < tol);
    CHECK(std::abs(scalar.sum(a.data(), n) - avx2->sum(a.data(), n)) < tol);
    CHECK(std::abs(scalar.squared_distance(a.data(), b.data(), n) -
                   avx2->squared_distance(a.data(), b.data(), n)) < tol);
    std::vector<double> y1 = b, y2 = b;
    scalar.axpy(0.37, a.data(), y1.data(), n);
    avx2->axpy(0.37, a.data(), y2.data(), n);
    CHECK(oracle::max_abs_diff(y1, y2) < 1e-15);
  }
}

TEST_CASE("linear") {
  const auto id = nn::linear(vec({1, 2}), Matrix::identity(2), vec({0, 0}));
  CHECK(id == vec({1, 2}));
  const auto swapped = nn::linear(vec({1, 2}), Matrix::from_rows({{0, 1}, {1, 0}}), vec({1, 1}));
  CHECK(swapped == vec({3, 2}));
  try {
    nn::linear(vec({1, 2, 3}), Matrix::identity(2), vec({0, 0}));
    FAIL("expected ShapeError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Shape);
  }
}

TEST_CASE("layer_norm") {
  const auto a = nn::layer_norm(vec({1, -1}), vec({1, 1}), vec({0, 0}), 1e-5);
  CHECK(a[0] == doctest::Approx(0.999995).epsilon(1e-9));
  CHECK(a[1] == doctest::Approx(-0.999995).epsilon(1e-9));
  const auto c = nn::layer_norm(vec({4, 4, 4}), vec({1, 1, 1}), vec({0.5, 0.5, 0.5}), 1e-5);
  for (double v : c) CHECK(v == 0.5);
  const auto b = nn::layer_norm(vec({1, 2, 3}), vec({1, 1, 1}), vec({0, 0, 0}), 0.0);
  const auto ref = oracle::layer_norm({1, 2, 3}, {1, 1, 1}, {0, 0, 0}, 0.0);
  CHECK(std::abs(b[0] - ref[0]) < 1e-4);
  CHECK(std::abs(b[0] + 1.2247) < 1e-4);
  CHECK(std::abs(b[1]) < 1e-12);
  CHECK(std::abs(b[2] - 1.2247) < 1e-4);

  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(9);
    for (auto& v : x) v = rng.uniform(-5, 5);
    const auto y = nn::layer_norm(x, std::vector<double>(9, 1.0), std::vector<double>(9, 0.0), 1e-12);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 9;
    double var = 0;
    for (double v : y) var += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var / 9 - 1.0) < 1e-6);
  }
}

TEST_CASE("softmax") {
  CHECK(nn::softmax(vec({0, 0})) == vec({0.5, 0.5}));
  const auto s = nn::softmax(vec({1, 2}));
  const auto ref = oracle::softmax({1, 2});
  CHECK(std::abs(s[0] - 0.26894) < 1e-5);
  CHECK(std::abs(s[1] - 0.73106) < 1e-5);
  CHECK(oracle::max_abs_diff(s, ref) < 1e-15);
  const auto big = nn::softmax(vec({1000, 0}));
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);

  Rng rng(8);
  std::vector<double> x(6);
  for (auto& v : x) v = rng.uniform(-3, 3);
  auto shifted = x;
  for (auto& v : shifted) v += 17.0;
  const auto a = nn::softmax(x);
  const auto b = nn::softmax(shifted);
  CHECK(oracle::max_abs_diff(a, b) < 1e-15);
}

TEST_CASE("scaled dot attention") {
  Rng rng(2);
  const Matrix q1 = random_matrix(1, 3, rng), k1 = random_matrix(1, 3, rng), v1 = random_matrix(1, 3, rng);
  CHECK(nn::scaled_dot_attention(q1, k1, v1) == v1);

  const Matrix q = random_matrix(2, 3, rng);
  const Matrix krow = random_matrix(1, 3, rng);
  Matrix k(2, 3);
  for (std::size_t c = 0; c < 3; ++c) k(0, c) = k(1, c) = krow(0, c);
  const Matrix v = Matrix::from_rows({{1, 2, 3}, {5, 6, 7}});
  const Matrix out = nn::scaled_dot_attention(q, k, v);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(out(r, 0) == doctest::Approx(3.0));
    CHECK(out(r, 2) == doctest::Approx(5.0));
  }

  const Matrix qk = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix vv = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix got = nn::scaled_dot_attention(qk, qk, vv);
  const auto ref = oracle::attention(oracle::to_mat(qk), oracle::to_mat(qk), oracle::to_mat(vv));
  CHECK(oracle::max_abs_diff(oracle::to_mat(got), ref) < 1e-12);
  const double w = 1.0 / (1.0 + std::exp(1.0 / std::sqrt(2.0)));
  CHECK(got(0, 0) == doctest::Approx(1.0 + 2.0 * w).epsilon(1e-12));
  CHECK(got(0, 1) == doctest::Approx(2.0 + 2.0 * w).epsilon(1e-12));
  CHECK(std::abs(got(0, 0) - 1.6605) < 1e-3);
  CHECK_THROWS_AS(nn::scaled_dot_attention(qk, random_matrix(2, 3, rng), vv), Error);
}

TEST_CASE("multi_head") {
  Rng rng(21);
  nn::AttentionParams ident;
  ident.heads = 1;
  ident.query = {Matrix::identity(4)};
  ident.key = {Matrix::identity(4)};
  ident.value = {Matrix::identity(4)};
  ident.output = Matrix::identity(4);
  const Matrix x1 = random_matrix(1, 4, rng);
  CHECK(oracle::max_abs_diff(nn::multi_head(x1, ident).values(), x1.values()) == 0.0);

  const nn::AttentionParams p = nn::make_attention(8, 2, rng);
  const Matrix x = random_matrix(3, 8, rng);
  const auto ref = oracle::multi_head(oracle::to_mat(x), p);
  CHECK(oracle::max_abs_diff(oracle::to_mat(nn::multi_head(x, p)), ref) < 1e-9);

  const std::vector<std::size_t> perm = {2, 0, 1};
  const Matrix y = nn::multi_head(x, p);
  const Matrix yp = nn::multi_head(permute_rows(x, perm), p);
  CHECK(oracle::max_abs_diff(yp.values(), permute_rows(y, perm).values()) < 1e-9);

  CHECK_THROWS_AS(nn::make_attention(6, 4, rng), Error);
}

TEST_CASE("encoder block") {
  Rng rng(33);
  const nn::EncoderBlock b = nn::make_encoder_block(8, 2, 16, rng);
  const Matrix x = random_matrix(3, 8, rng);
  const auto ref = oracle::encoder_block(oracle::to_mat(x), b);
  CHECK(oracle::max_abs_diff(oracle::to_mat(nn::encoder_block(x, b)), ref) < 1e-9);

  const std::vector<std::size_t> perm = {1, 2, 0};
  const Matrix y = nn::encoder_block(x, b);
  const Matrix yp = nn::encoder_block(permute_rows(x, perm), b);
  CHECK(oracle::max_abs_diff(yp.values(), permute_rows(y, perm).values()) < 1e-9);

  // s = 1, identity projections, zero second FF layer: Norm(Norm(2 V)).
  nn::EncoderBlock id = nn::make_encoder_block(4, 1, 8, rng);
  id.attention.query = {Matrix::identity(4)};
  id.attention.key = {Matrix::identity(4)};
  id.attention.value = {Matrix::identity(4)};
  id.attention.output = Matrix::identity(4);
  id.ff.outer.weight = Matrix(4, 8);
  const Matrix v = Matrix::from_rows({{0.5, -1.0, 2.0, 0.25}});
  std::vector<double> twice(4);
  for (std::size_t c = 0; c < 4; ++c) twice[c] = 2 * v(0, c);
  const std::vector<double> ones(4, 1.0), zeros(4, 0.0);
  const auto expected = nn::layer_norm(nn::layer_norm(twice, ones, zeros, 1e-5), ones, zeros, 1e-5);
  CHECK(oracle::max_abs_diff(nn::encoder_block(v, id).values(), expected) < 1e-12);
}

TEST_CASE("tape gradients") {
  Tape t;
  const auto x = t.variable(Matrix::from_rows({{3.0}}));
  const auto y = t.matmul(x, x);
  t.backward(y);
  CHECK(t.grad(x)(0, 0) == 6.0);

  Tape t2;
  const auto w = t2.variable(Matrix::from_rows({{1.0, 2.0}}));
  const auto unused = t2.variable(Matrix::from_rows({{5.0}}));
  const auto loss = t2.weighted_sum(w, Matrix::from_rows({{1.0, 1.0}}));
  t2.backward(loss);
  CHECK(t2.grad(unused)(0, 0) == 0.0);

  Tape empty;
  try {
    empty.backward(nn::Var{0});
    FAIL("expected TapeEmpty");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TapeEmpty);
  }
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape t;
  const auto x = t.variable(Matrix::from_rows({{0.0, 1.0, -1.0}}));
  t.backward(t.weighted_sum(t.relu(x), Matrix::from_rows({{1.0, 1.0, 1.0}})));
  const Matrix g = t.grad(x);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 1.0);
  CHECK(g(0, 2) == 0.0);
}

TEST_CASE("grad_check") {
  const nn::ScalarFn quad = [](std::span<const double> p) {
    return 3 * p[0] * p[0] + p[0] * p[1] - 2 * p[1] * p[1];
  };
  const std::vector<double> point = {0.7, -1.3};
  const std::vector<double> grad = {6 * 0.7 - 1.3, 0.7 + 4 * 1.3};
  CHECK(nn::grad_check(quad, point, grad, 1e-4).max_relative_error < 1e-9);
  const std::vector<double> wrong = {grad[0] * 1.5, grad[1]};
  CHECK(nn::grad_check(quad, point, wrong, 1e-4).max_relative_error > 1e-2);
  CHECK_THROWS_AS(nn::grad_check(quad, point, grad, 0.0), Error);
  CHECK(nn::relative_error(0.0, 0.0) == 0.0);
}

TEST_CASE("injected backward faults are visible to grad_check") {
  Rng rng(9);
  const nn::EncoderBlock b = nn::make_encoder_block(4, 2, 8, rng);
  Matrix x = random_matrix(3, 4, rng);
  const Matrix w = random_matrix(3, 4, rng);
  auto f = [&](std::span<const double> p) {
    Tape t(Tape::Mode::inference);
    nn::ParamBinder bind(t);
    const Matrix xp = Matrix::from_data(3, 4, std::vector<double>(p.begin(), p.end()));
    return t.value(t.weighted_sum(nn::encoder_block(bind, t.constant(xp), b), w))(0, 0);
  };
  for (auto site : {nn::FaultSite::none, nn::FaultSite::layer_norm, nn::FaultSite::softmax,
                    nn::FaultSite::matmul}) {
    Tape t(Tape::Mode::record, site);
    nn::ParamBinder bind(t);
    const auto xv = t.variable(x);
    t.backward(t.weighted_sum(nn::encoder_block(bind, xv, b), w));
    const auto r = nn::grad_check(f, x.values(), t.grad(xv).values(), 1e-4);
    if (site == nn::FaultSite::none) {
      CHECK(r.max_relative_error < 1e-6);
    } else {
      CHECK(r.max_relative_error > 1e-2);
    }
  }
}
