#include "epifed/optim.hpp"

#include <cmath>

#include "epifed/error.hpp"
#include "epifed/rng.hpp"

namespace epifed {

AdamState AdamState::for_params(const ParamSet& params, double lr, double weight_decay) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.lr = lr;
  s.weight_decay = weight_decay;
  return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& st) {
  if (!params.congruent(grads)) throw ValidationError("adam: gradient names/shapes do not match parameters");
  if (st.m.empty() && st.v.empty()) {
    st.m = params.zeros_like();
    st.v = params.zeros_like();
  }
  if (!params.congruent(st.m) || !params.congruent(st.v))
    throw ValidationError("adam: optimizer state does not match parameters");
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params.at(k).data();
    auto g = grads.at(k).data();
    auto m = st.m.at(k).data();
    auto v = st.v.at(k).data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + st.weight_decay * p[i];
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * gi;
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * gi * gi;
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      p[i] -= st.lr * mh / (std::sqrt(vh) + st.eps);
    }
    check_finite(p, "adam");
  }
}

Tensor xavier_init(const std::vector<std::size_t>& shape, std::uint64_t seed) {
  if (shape.empty()) throw ValidationError("xavier_init: empty shape");
  std::size_t fan_out = shape.back(), fan_in = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) fan_in *= shape[i];
  if (shape.size() == 1) fan_in = fan_out;
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(shape);
  Rng rng(seed);
  for (auto& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

}  // namespace epifed
