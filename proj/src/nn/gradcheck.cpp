#include "srcv/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "srcv/errors.hpp"

namespace srcv::nn {

double relative_error(double analytic, double numeric) noexcept {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult grad_check(const ScalarFn& f, std::span<const double> point,
                           std::span<const double> analytic, double step, double retry_above) {
  if (!(step > 0.0)) throw Error(ErrorKind::Config, "grad_check step must be positive");
  if (point.size() != analytic.size()) {
    throw Error(ErrorKind::Shape, "grad_check: gradient length differs from point");
  }
  std::vector<double> probe(point.begin(), point.end());
  auto derivative = [&](std::size_t i, double h) {
    const double saved = probe[i];
    auto at = [&](double offset) {
      probe[i] = saved + offset;
      return f(probe);
    };
    const double near = at(h) - at(-h);
    const double far = at(2.0 * h) - at(-2.0 * h);
    probe[i] = saved;
    return (8.0 * near - far) / (12.0 * h);
  };

  GradCheckResult result;
  result.coordinates = point.size();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    double numeric = derivative(i, step);
    double err = relative_error(analytic[i], numeric);
    if (err >= retry_above) {
      ++result.refined;
      double h = step;
      for (int k = 0; k < 3 && err >= retry_above; ++k) {
        h /= 10.0;
        const double retry = derivative(i, h);
        const double retry_err = relative_error(analytic[i], retry);
        if (retry_err < err) {
          err = retry_err;
          numeric = retry;
        }
      }
    }
    if (i == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.worst_analytic = analytic[i];
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace srcv::nn
