#pragma once

#include <cstdint>
#include <vector>

#include "epifed/tensor.hpp"

namespace epifed {

struct AdamState {
  ParamSet m, v;
  std::uint64_t step = 0;
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  static AdamState for_params(const ParamSet& params, double lr, double weight_decay);
};

/// Bias-corrected Adam; weight decay enters as an L2 term added to the gradient.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)) where fan_out is the last
/// dimension and fan_in the product of the others.
Tensor xavier_init(const std::vector<std::size_t>& shape, std::uint64_t seed);

}  // namespace epifed
