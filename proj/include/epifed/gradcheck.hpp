#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "epifed/tensor.hpp"

namespace epifed {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "name[index]"
};

/// Compares `analytic` with central differences of `f` around `point` on a
/// seeded random subsample of at most `max_coordinates` coordinates. The
/// relative error is |a - n| / (|a| + |n| + 1e-12).
GradCheckResult gradient_check(const std::function<double(const ParamSet&)>& f,
                               const ParamSet& point, const ParamSet& analytic,
                               double step = 1e-5, std::size_t max_coordinates = 200,
                               std::uint64_t seed = 0);

}  // namespace epifed
