#include "epifed/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "epifed/error.hpp"
#include "epifed/rng.hpp"

namespace epifed {

GradCheckResult gradient_check(const std::function<double(const ParamSet&)>& f,
                               const ParamSet& point, const ParamSet& analytic, double step,
                               std::size_t max_coordinates, std::uint64_t seed) {
  if (!point.congruent(analytic)) throw ValidationError("gradient_check: gradient does not match point");
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < point.size(); ++k)
    for (std::size_t i = 0; i < point.at(k).size(); ++i) coords.emplace_back(k, i);
  Rng rng(seed);
  const std::size_t take = std::min(max_coordinates, coords.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + rng.below(coords.size() - i);
    std::swap(coords[i], coords[j]);
  }
  coords.resize(take);

  GradCheckResult r;
  ParamSet probe = point;
  for (auto [k, i] : coords) {
    double& x = probe.at(k)[i];
    const double orig = x;
    x = orig + step;
    const double up = f(probe);
    x = orig - step;
    const double down = f(probe);
    x = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.at(k)[i];
    const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
    if (err > r.max_relative_error || r.worst.empty()) {
      r.max_relative_error = std::max(r.max_relative_error, err);
      if (err >= r.max_relative_error) r.worst = point.name(k) + "[" + std::to_string(i) + "]";
    }
    ++r.coordinates;
  }
  return r;
}

}  // namespace epifed
