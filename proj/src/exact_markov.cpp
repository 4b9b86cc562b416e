#include <cmath>
#include <vector>

#include "epifed/epidemics.hpp"
#include "epifed/error.hpp"

namespace epifed {

namespace {

struct Transition {
  std::uint32_t to;
  double rate;
};

}  // namespace

// Uniformization: p(t) = sum_k Poisson(k; L h) p0 P^k with P = I + Q / L,
// applied over sub-intervals h small enough that exp(-L h) does not underflow.
std::vector<double> exact_markov_sis(const Graph& g, double beta, double delta,
                                     const std::vector<NodeId>& infected, double t) {
  const std::size_t n = g.n_nodes();
  if (n == 0 || n > 10) throw ValidationError("exact_markov_sis: need 1 <= n_nodes <= 10");
  if (!(beta > 0.0) || !(delta > 0.0)) throw ValidationError("exact_markov_sis: rates must be positive");
  if (!(t >= 0.0)) throw ValidationError("exact_markov_sis: t must be non-negative");
  const std::uint32_t n_states = 1u << n;

  std::vector<std::vector<Transition>> out(n_states);
  std::vector<double> exit_rate(n_states, 0.0);
  double uniform_rate = 0.0;
  for (std::uint32_t s = 0; s < n_states; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bit = 1u << i;
      if (s & bit) {
        out[s].push_back({s ^ bit, delta});
      } else {
        int k = 0;
        for (auto j : g.neighbors(static_cast<NodeId>(i))) k += (s >> j) & 1u;
        if (k > 0) out[s].push_back({s | bit, beta * k});
      }
    }
    for (const auto& tr : out[s]) exit_rate[s] += tr.rate;
    uniform_rate = std::max(uniform_rate, exit_rate[s]);
  }

  std::vector<double> p(n_states, 0.0);
  std::uint32_t start = 0;
  for (auto v : infected) {
    if (v < 0 || static_cast<std::size_t>(v) >= n)
      throw ValidationError("exact_markov_sis: infected node out of range");
    start |= 1u << v;
  }
  p[start] = 1.0;

  if (uniform_rate > 0.0 && t > 0.0) {
    const int pieces = std::max(1, static_cast<int>(std::ceil(uniform_rate * t / 20.0)));
    const double h = t / pieces;
    const double lh = uniform_rate * h;
    std::vector<double> term(n_states), next(n_states), acc(n_states);
    for (int piece = 0; piece < pieces; ++piece) {
      term = p;
      double weight = std::exp(-lh);
      double mass = weight;
      for (std::uint32_t s = 0; s < n_states; ++s) acc[s] = weight * term[s];
      for (int k = 1; 1.0 - mass > 1e-15 && k < 10000; ++k) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::uint32_t s = 0; s < n_states; ++s) {
          if (term[s] == 0.0) continue;
          next[s] += term[s] * (1.0 - exit_rate[s] / uniform_rate);
          for (const auto& tr : out[s]) next[tr.to] += term[s] * tr.rate / uniform_rate;
        }
        term.swap(next);
        weight *= lh / k;
        mass += weight;
        for (std::uint32_t s = 0; s < n_states; ++s) acc[s] += weight * term[s];
      }
      p = acc;
    }
  }

  std::vector<double> prob(n, 0.0);
  for (std::uint32_t s = 0; s < n_states; ++s)
    for (std::size_t i = 0; i < n; ++i)
      if (s >> i & 1u) prob[i] += p[s];
  return prob;
}

}  // namespace epifed
