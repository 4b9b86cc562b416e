#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "epifed/graph.hpp"

namespace epifed {

/// Compartment codes, stable across models and file formats.
enum class Compartment : std::uint8_t { S = 0, I = 1, R = 2, E = 3, V = 4 };

inline constexpr std::uint8_t code(Compartment c) { return static_cast<std::uint8_t>(c); }

enum class Variant { SIS, SIR, SEIR, NmSIS, SIRS, SIRVS, SIStv };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

/// Process definition. Only the fields used by `variant` are meaningful:
///
///   SIS, SIR     beta, delta
///   SEIR         beta (S->E contact rate), incubation (E->I), delta
///   nmSIS        weibull_scale, weibull_shape, delta
///   SIRS         beta, delta, omega
///   SIRVS        beta, delta, omega, vaccination (S->V), waning (V->S)
///   SIStv        a, b, c, delta with beta(t) = a + b sin(t / c)
struct ModelSpec {
  Variant variant = Variant::SIS;
  double beta = 0.0;
  double delta = 0.0;
  double incubation = 0.0;
  double weibull_scale = 0.0;
  double weibull_shape = 0.0;
  double omega = 0.0;
  double vaccination = 0.0;
  double waning = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  /// Throws ValidationError when a rate is not positive or SIStv can go negative.
  void validate() const;

  /// Compartments the variant can produce, in ascending code order.
  std::vector<Compartment> compartments() const;
  bool is_legal(std::uint8_t state_code) const;

  /// Ordered `name=value` pairs for the parameters the variant uses.
  std::vector<std::pair<std::string, double>> parameters() const;
  /// `k=v;k=v` with shortest round-trip formatting.
  std::string parameter_string() const;
  static ModelSpec from_parameters(Variant v,
                                   const std::vector<std::pair<std::string, double>>& kv);
  static ModelSpec parse(const std::string& variant, const std::string& params);

  /// Effective infection rate used for phase sweeps: beta/delta for SIS-like
  /// models, beta/(delta + omega) for SIRS/SIRVS.
  double effective_rate() const;
  /// Rescales the infection parameter so that effective_rate() == tau.
  ModelSpec with_effective_rate(double tau) const;

  bool operator==(const ModelSpec&) const = default;
};

/// Initial condition: either a uniformly seeded infected fraction or an
/// explicit infected node set.
struct InitSpec {
  double infected_fraction = 0.05;
  std::vector<NodeId> infected_nodes;

  static InitSpec fraction(double rho) { return InitSpec{rho, {}}; }
  static InitSpec nodes(std::vector<NodeId> v) { return InitSpec{0.0, std::move(v)}; }
};

/// Fixed-interval samples of a simulated process. Sample k is taken at time
/// k * dt and holds the state after the last event at or before that time.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(ModelSpec model, std::string graph_hash, double dt, std::uint64_t seed,
             std::size_t n_nodes, std::vector<std::uint8_t> states);

  const ModelSpec& model() const { return model_; }
  const std::string& graph_hash() const { return graph_hash_; }
  double dt() const { return dt_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_nodes() const { return n_nodes_; }
  std::size_t n_samples() const { return n_nodes_ == 0 ? 0 : states_.size() / n_nodes_; }
  double time(std::size_t k) const { return static_cast<double>(k) * dt_; }

  std::uint8_t state(std::size_t sample, std::size_t node) const {
    return states_[sample * n_nodes_ + node];
  }
  /// Row-major samples x nodes.
  const std::vector<std::uint8_t>& states() const { return states_; }

  /// First `n` samples.
  Trajectory prefix(std::size_t n) const;
  /// Same samples restricted to the given nodes, in the given order.
  Trajectory restrict_to(const std::vector<NodeId>& nodes) const;

  bool operator==(const Trajectory&) const = default;

 private:
  ModelSpec model_;
  std::string graph_hash_;
  double dt_ = 0.0;
  std::uint64_t seed_ = 0;
  std::size_t n_nodes_ = 0;
  std::vector<std::uint8_t> states_;
};

struct SimulationOptions {
  double dt = 1.0;
  double t_max = 100.0;
  std::uint64_t seed = 0;
};

/// Exact stochastic simulation.
///
/// Markovian variants use node-centric direct Gillespie; nmSIS uses a
/// next-reaction event queue with lazy invalidation; SIStv thins candidate
/// infections against beta_max = a + |b|. Sampling stops early once no
/// transition is enabled and the final state is repeated up to t_max.
Trajectory simulate(const Graph& g, const ModelSpec& model, const InitSpec& init,
                    const SimulationOptions& opts);

/// Fraction of nodes in `state` at each sample.
std::vector<double> prevalence(const Trajectory& tr, Compartment state);

/// Cuts the trajectory at the first sample k such that the next `window` steps
/// each change fewer than min_change_fraction * N node states. Never returns
/// fewer than 2 * (t_history + t_future) samples; returns the input unchanged
/// when no such quiet run exists.
Trajectory truncate_dynamic(const Trajectory& tr, std::size_t window = 20,
                            double min_change_fraction = 0.001,
                            std::size_t t_history = 10, std::size_t t_future = 10);

/// Per-node infection probabilities of Markovian SIS at time t, from the full
/// 2^N-state master equation (uniformization). Limited to n_nodes <= 10.
std::vector<double> exact_markov_sis(const Graph& g, double beta, double delta,
                                     const std::vector<NodeId>& infected, double t);

/// Trajectory text format. Line 1 is the metadata record; any further `#`
/// lines are provenance comments; then `t,s_1,...,s_N` per sample.
void write_trajectory(const Trajectory& tr, std::ostream& out,
                      const std::string& provenance = {});
Trajectory read_trajectory(std::istream& in);
void write_trajectory_file(const Trajectory& tr, const std::string& path,
                           const std::string& provenance = {});
Trajectory read_trajectory_file(const std::string& path);

}  // namespace epifed
