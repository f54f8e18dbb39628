#pragma once

// Finite-difference verification of every differentiable primitive and of
// the full training objective, on small random instances.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "srcv/nn/tape.hpp"

namespace srcv {

struct GradcheckDims {
  std::size_t word_dim = 6;
  std::size_t feature_dim = 5;
  std::size_t modalities = 3;
  std::size_t embed_dim = 4;
  std::size_t model_dim = 8;
  std::size_t heads = 2;
  std::size_t batch = 4;

  // Throws ConfigError (heads must divide model_dim, batch >= 4, ...).
  void validate() const;
};

// "model_dim=8,heads=2". Throws ConfigError on unknown keys or bad values.
GradcheckDims parse_dims(std::string_view text);

struct ComponentCheck {
  std::string component;
  double max_relative_error = 0.0;
  std::string worst_parameter;  // "<tensor>[<flat index>]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  std::size_t refined = 0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<ComponentCheck> components;
  double tolerance = 1e-4;

  bool passed() const;
};

// `fault` scales one primitive's backward pass so the suite can be shown to
// catch a broken gradient.
GradcheckReport run_gradcheck_suite(const GradcheckDims& dims, std::uint64_t seed,
                                    nn::FaultSite fault = nn::FaultSite::none,
                                    double tolerance = 1e-4, double step = 1e-4);

}  // namespace srcv
