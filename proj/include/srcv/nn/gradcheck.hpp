#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>

namespace srcv::nn {

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric) noexcept;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  std::size_t refined = 0;  // coordinates re-probed with a smaller step
};

using ScalarFn = std::function<double(std::span<const double>)>;

// Compares `analytic` against the five-point central difference
// (8 (f(p + h) - f(p - h)) - (f(p + 2h) - f(p - 2h))) / (12 h) at every
// coordinate, h = step. A coordinate whose error reaches `retry_above` is
// re-probed with step/10, step/100 and step/1000 and keeps its smallest error: a stencil
// straddling a ReLU or hinge kink mismeasures the derivative, while a wrong
// gradient stays wrong at every step.
GradCheckResult grad_check(const ScalarFn& f, std::span<const double> point,
                           std::span<const double> analytic, double step,
                           double retry_above = std::numeric_limits<double>::infinity());

}  // namespace srcv::nn
