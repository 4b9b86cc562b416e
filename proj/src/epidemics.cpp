#include "epifed/epidemics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <queue>
#include <sstream>

#include "epifed/error.hpp"
#include "epifed/rng.hpp"

namespace epifed {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::SIS: return "SIS";
    case Variant::SIR: return "SIR";
    case Variant::SEIR: return "SEIR";
    case Variant::NmSIS: return "nmSIS";
    case Variant::SIRS: return "SIRS";
    case Variant::SIRVS: return "SIRVS";
    case Variant::SIStv: return "SIStv";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (auto v : {Variant::SIS, Variant::SIR, Variant::SEIR, Variant::NmSIS, Variant::SIRS,
                 Variant::SIRVS, Variant::SIStv}) {
    std::string s = to_string(v);
    if (std::equal(s.begin(), s.end(), name.begin(), name.end(),
                   [](char x, char y) { return std::tolower(x) == std::tolower(y); }))
      return v;
  }
  throw ValidationError("unknown epidemic model '" + name + "'");
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ValidationError(std::string("model parameter '") + name + "' must be a positive finite rate");
}

}  // namespace

void ModelSpec::validate() const {
  switch (variant) {
    case Variant::SIS:
    case Variant::SIR:
      require_positive(beta, "beta");
      require_positive(delta, "delta");
      break;
    case Variant::SEIR:
      require_positive(beta, "beta");
      require_positive(incubation, "incubation");
      require_positive(delta, "delta");
      break;
    case Variant::NmSIS:
      require_positive(weibull_scale, "scale");
      require_positive(weibull_shape, "shape");
      require_positive(delta, "delta");
      break;
    case Variant::SIRS:
      require_positive(beta, "beta");
      require_positive(delta, "delta");
      require_positive(omega, "omega");
      break;
    case Variant::SIRVS:
      require_positive(beta, "beta");
      require_positive(delta, "delta");
      require_positive(omega, "omega");
      require_positive(vaccination, "vaccination");
      require_positive(waning, "waning");
      break;
    case Variant::SIStv:
      require_positive(a, "a");
      require_positive(c, "c");
      require_positive(delta, "delta");
      if (!std::isfinite(b) || a - std::abs(b) < 0.0)
        throw ValidationError("SIStv requires a - |b| >= 0 so beta(t) stays non-negative");
      break;
  }
}

std::vector<Compartment> ModelSpec::compartments() const {
  using C = Compartment;
  switch (variant) {
    case Variant::SIS:
    case Variant::NmSIS:
    case Variant::SIStv: return {C::S, C::I};
    case Variant::SIR:
    case Variant::SIRS: return {C::S, C::I, C::R};
    case Variant::SEIR: return {C::S, C::I, C::R, C::E};
    case Variant::SIRVS: return {C::S, C::I, C::R, C::V};
  }
  return {};
}

bool ModelSpec::is_legal(std::uint8_t state_code) const {
  for (auto c : compartments())
    if (code(c) == state_code) return true;
  return false;
}

std::vector<std::pair<std::string, double>> ModelSpec::parameters() const {
  switch (variant) {
    case Variant::SIS:
    case Variant::SIR: return {{"beta", beta}, {"delta", delta}};
    case Variant::SEIR: return {{"beta", beta}, {"incubation", incubation}, {"delta", delta}};
    case Variant::NmSIS:
      return {{"scale", weibull_scale}, {"shape", weibull_shape}, {"delta", delta}};
    case Variant::SIRS: return {{"beta", beta}, {"delta", delta}, {"omega", omega}};
    case Variant::SIRVS:
      return {{"beta", beta},   {"delta", delta},          {"omega", omega},
              {"vaccination", vaccination}, {"waning", waning}};
    case Variant::SIStv: return {{"a", a}, {"b", b}, {"c", c}, {"delta", delta}};
  }
  return {};
}

std::string ModelSpec::parameter_string() const {
  std::string out;
  for (const auto& [k, v] : parameters()) {
    if (!out.empty()) out += ';';
    out += k + "=" + format_double(v);
  }
  return out;
}

ModelSpec ModelSpec::from_parameters(Variant v,
                                     const std::vector<std::pair<std::string, double>>& kv) {
  ModelSpec m;
  m.variant = v;
  for (const auto& [k, val] : kv) {
    double* slot = nullptr;
    if (k == "beta") slot = &m.beta;
    else if (k == "delta") slot = &m.delta;
    else if (k == "incubation") slot = &m.incubation;
    else if (k == "scale") slot = &m.weibull_scale;
    else if (k == "shape") slot = &m.weibull_shape;
    else if (k == "omega") slot = &m.omega;
    else if (k == "vaccination") slot = &m.vaccination;
    else if (k == "waning") slot = &m.waning;
    else if (k == "a") slot = &m.a;
    else if (k == "b") slot = &m.b;
    else if (k == "c") slot = &m.c;
    else throw ValidationError("unknown model parameter '" + k + "'");
    *slot = val;
  }
  // Reject keys that the variant does not use.
  auto used = m.parameters();
  for (const auto& [k, val] : kv) {
    (void)val;
    if (std::none_of(used.begin(), used.end(), [&k](const auto& p) { return p.first == k; }))
      throw ValidationError("parameter '" + k + "' does not apply to " + to_string(v));
  }
  m.validate();
  return m;
}

ModelSpec ModelSpec::parse(const std::string& variant, const std::string& params) {
  std::vector<std::pair<std::string, double>> kv;
  std::stringstream ss(params);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("bad model parameter '" + item + "'");
    std::string key = item.substr(0, eq), text = item.substr(eq + 1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      throw ValidationError("bad value for model parameter '" + key + "'");
    kv.emplace_back(key, value);
  }
  return from_parameters(parse_variant(variant), kv);
}

double ModelSpec::effective_rate() const {
  switch (variant) {
    case Variant::SIS:
    case Variant::SIR:
    case Variant::SEIR: return beta / delta;
    case Variant::SIRS:
    case Variant::SIRVS: return beta / (delta + omega);
    case Variant::NmSIS:
      return 1.0 / (weibull_scale * std::tgamma(1.0 + 1.0 / weibull_shape) * delta);
    case Variant::SIStv: return a / delta;
  }
  return 0.0;
}

ModelSpec ModelSpec::with_effective_rate(double tau) const {
  ModelSpec m = *this;
  const double factor = tau / effective_rate();
  switch (variant) {
    case Variant::NmSIS: m.weibull_scale /= factor; break;
    case Variant::SIStv:
      m.a *= factor;
      m.b *= factor;
      break;
    default: m.beta *= factor;
  }
  return m;
}

Trajectory::Trajectory(ModelSpec model, std::string graph_hash, double dt, std::uint64_t seed,
                       std::size_t n_nodes, std::vector<std::uint8_t> states)
    : model_(model),
      graph_hash_(std::move(graph_hash)),
      dt_(dt),
      seed_(seed),
      n_nodes_(n_nodes),
      states_(std::move(states)) {
  if (n_nodes_ == 0 || states_.size() % n_nodes_ != 0)
    throw ValidationError("trajectory: state matrix does not match node count");
  for (auto s : states_)
    if (!model_.is_legal(s))
      throw ValidationError("trajectory: state code " + std::to_string(s) +
                            " is illegal for " + to_string(model_.variant));
}

Trajectory Trajectory::prefix(std::size_t n) const {
  n = std::min(n, n_samples());
  std::vector<std::uint8_t> s(states_.begin(), states_.begin() + n * n_nodes_);
  return Trajectory(model_, graph_hash_, dt_, seed_, n_nodes_, std::move(s));
}

Trajectory Trajectory::restrict_to(const std::vector<NodeId>& nodes) const {
  std::vector<std::uint8_t> s;
  s.reserve(n_samples() * nodes.size());
  for (std::size_t k = 0; k < n_samples(); ++k)
    for (auto v : nodes) s.push_back(state(k, static_cast<std::size_t>(v)));
  return Trajectory(model_, graph_hash_, dt_, seed_, nodes.size(), std::move(s));
}

namespace {

/// Complete binary tree of non-negative rates with O(log n) update and search.
class RateTree {
 public:
  explicit RateTree(std::size_t n) {
    size_ = 1;
    while (size_ < n) size_ <<= 1;
    tree_.assign(2 * size_, 0.0);
  }
  void set(std::size_t i, double v) {
    std::size_t p = i + size_;
    tree_[p] = v;
    for (p >>= 1; p >= 1; p >>= 1) tree_[p] = tree_[2 * p] + tree_[2 * p + 1];
  }
  double get(std::size_t i) const { return tree_[i + size_]; }
  double total() const { return tree_[1]; }
  /// Leaf whose cumulative interval contains `target` in [0, total()).
  std::size_t find(double target) const {
    std::size_t p = 1;
    while (p < size_) {
      const double left = tree_[2 * p];
      if (target < left || tree_[2 * p + 1] <= 0.0) {
        p = 2 * p;
      } else {
        target -= left;
        p = 2 * p + 1;
      }
    }
    return p - size_;
  }

 private:
  std::size_t size_;
  std::vector<double> tree_;
};

std::vector<std::uint8_t> initial_state(const Graph& g, const InitSpec& init, Rng& rng) {
  const std::size_t n = g.n_nodes();
  std::vector<std::uint8_t> state(n, code(Compartment::S));
  if (!init.infected_nodes.empty()) {
    for (auto v : init.infected_nodes) {
      if (v < 0 || static_cast<std::size_t>(v) >= n)
        throw ValidationError("initial infected node out of range");
      state[v] = code(Compartment::I);
    }
    return state;
  }
  const double rho = init.infected_fraction;
  if (!(rho > 0.0 && rho <= 1.0))
    throw ValidationError("initial condition is empty: infected fraction must lie in (0, 1]");
  auto count = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9));
  count = std::clamp<std::size_t>(count, 1, n);
  std::vector<NodeId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
  for (std::size_t i = 0; i < count; ++i) {
    auto j = i + rng.below(n - i);
    std::swap(order[i], order[j]);
    state[order[i]] = code(Compartment::I);
  }
  return state;
}

class Sampler {
 public:
  Sampler(std::size_t n_nodes, std::size_t n_samples, double dt)
      : n_(n_nodes), total_(n_samples), dt_(dt) {
    out_.reserve(n_nodes * n_samples);
  }
  /// Records every sample strictly before `t` with the current state.
  void record_until(double t, const std::vector<std::uint8_t>& state) {
    while (next_ < total_ && static_cast<double>(next_) * dt_ < t) push(state);
  }
  void fill(const std::vector<std::uint8_t>& state) {
    while (next_ < total_) push(state);
  }
  bool done() const { return next_ >= total_; }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void push(const std::vector<std::uint8_t>& state) {
    out_.insert(out_.end(), state.begin(), state.end());
    ++next_;
  }
  std::size_t n_, total_, next_ = 0;
  double dt_;
  std::vector<std::uint8_t> out_;
};

std::vector<std::uint8_t> run_markovian(const Graph& g, const ModelSpec& m,
                                        std::vector<std::uint8_t> state, Rng& rng,
                                        Sampler& sampler) {
  using C = Compartment;
  const std::size_t n = g.n_nodes();
  const bool thinned = m.variant == Variant::SIStv;
  const double contact = thinned ? m.a + std::abs(m.b) : m.beta;
  const double vaccinate = m.variant == Variant::SIRVS ? m.vaccination : 0.0;
  const double immunity_loss =
      (m.variant == Variant::SIRS || m.variant == Variant::SIRVS) ? m.omega : 0.0;
  const bool recover_to_r = m.variant == Variant::SIR || m.variant == Variant::SEIR ||
                            m.variant == Variant::SIRS || m.variant == Variant::SIRVS;

  std::vector<std::int32_t> infected_nbrs(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (state[i] == code(C::I))
      for (auto j : g.neighbors(static_cast<NodeId>(i))) ++infected_nbrs[j];

  auto node_rate = [&](std::size_t i) -> double {
    switch (static_cast<C>(state[i])) {
      case C::S: return contact * infected_nbrs[i] + vaccinate;
      case C::I: return m.delta;
      case C::E: return m.incubation;
      case C::R: return immunity_loss;
      case C::V: return m.waning;
    }
    return 0.0;
  };

  RateTree rates(n);
  for (std::size_t i = 0; i < n; ++i) rates.set(i, node_rate(i));

  auto set_state = [&](std::size_t i, C next) {
    const bool was_infectious = state[i] == code(C::I);
    state[i] = code(next);
    const bool is_infectious = next == C::I;
    rates.set(i, node_rate(i));
    if (was_infectious == is_infectious) return;
    const int d = is_infectious ? 1 : -1;
    for (auto j : g.neighbors(static_cast<NodeId>(i))) {
      infected_nbrs[j] += d;
      if (state[j] == code(C::S)) rates.set(j, node_rate(j));
    }
  };

  double t = 0.0;
  while (!sampler.done()) {
    const double total = rates.total();
    if (!(total > 0.0)) break;
    t += rng.exponential(total);
    sampler.record_until(t, state);
    if (sampler.done()) break;

    const double target = std::min(rng.uniform() * total, std::nextafter(total, 0.0));
    std::size_t i = rates.find(target);
    if (rates.get(i) <= 0.0) continue;  // rounding at a zero leaf; redraw
    switch (static_cast<C>(state[i])) {
      case C::S: {
        const double r = rates.get(i);
        if (vaccinate > 0.0 && rng.uniform() * r < vaccinate) {
          set_state(i, C::V);
          break;
        }
        if (thinned) {
          const double beta_t = m.a + m.b * std::sin(t / m.c);
          if (rng.uniform() * contact >= beta_t) break;
        }
        set_state(i, m.variant == Variant::SEIR ? C::E : C::I);
        break;
      }
      case C::I: set_state(i, recover_to_r ? C::R : C::S); break;
      case C::E: set_state(i, C::I); break;
      case C::R: set_state(i, C::S); break;
      case C::V: set_state(i, C::S); break;
    }
  }
  return state;
}

std::vector<std::uint8_t> run_non_markovian_sis(const Graph& g, const ModelSpec& m,
                                                std::vector<std::uint8_t> state, Rng& rng,
                                                Sampler& sampler) {
  constexpr std::uint8_t kS = code(Compartment::S), kI = code(Compartment::I);
  constexpr std::int32_t kRecovery = -1;
  struct Event {
    double time;
    std::uint64_t order;
    std::int32_t node;    // target of a transmission, or the recovering node
    std::int32_t source;  // kRecovery for recoveries
    std::uint64_t node_flip;
    std::uint64_t source_flip;
  };
  struct Later {
    bool operator()(const Event& x, const Event& y) const {
      return x.time != y.time ? x.time > y.time : x.order > y.order;
    }
  };
  const std::size_t n = g.n_nodes();
  std::priority_queue<Event, std::vector<Event>, Later> queue;
  std::vector<std::uint64_t> flips(n, 0);
  std::uint64_t order = 0;

  auto schedule_transmission = [&](double now, std::int32_t src, std::int32_t dst) {
    queue.push(Event{now + rng.weibull(m.weibull_scale, m.weibull_shape), order++, dst, src,
                     flips[dst], flips[src]});
  };
  auto infect = [&](double now, std::int32_t v) {
    state[v] = kI;
    ++flips[v];
    queue.push(Event{now + rng.exponential(m.delta), order++, v, kRecovery, flips[v], 0});
    for (auto w : g.neighbors(v))
      if (state[w] == kS) schedule_transmission(now, v, w);
  };
  auto recover = [&](double now, std::int32_t v) {
    state[v] = kS;
    ++flips[v];
    for (auto w : g.neighbors(v))
      if (state[w] == kI) schedule_transmission(now, w, v);
  };

  std::vector<std::int32_t> initial;
  for (std::size_t i = 0; i < n; ++i)
    if (state[i] == kI) initial.push_back(static_cast<std::int32_t>(i));
  // All initial infections start at t=0, so no link to another initial node is active.
  for (auto v : initial) ++flips[v];
  for (auto v : initial) {
    queue.push(Event{rng.exponential(m.delta), order++, v, kRecovery, flips[v], 0});
    for (auto w : g.neighbors(v))
      if (state[w] == kS) schedule_transmission(0.0, v, w);
  }

  while (!sampler.done() && !queue.empty()) {
    Event ev = queue.top();
    queue.pop();
    const bool valid = ev.source == kRecovery
                           ? flips[ev.node] == ev.node_flip
                           : flips[ev.node] == ev.node_flip && flips[ev.source] == ev.source_flip;
    if (!valid) continue;
    sampler.record_until(ev.time, state);
    if (sampler.done()) break;
    if (ev.source == kRecovery)
      recover(ev.time, ev.node);
    else
      infect(ev.time, ev.node);
  }
  return state;
}

}  // namespace

Trajectory simulate(const Graph& g, const ModelSpec& model, const InitSpec& init,
                    const SimulationOptions& opts) {
  model.validate();
  if (g.n_nodes() == 0) throw ValidationError("simulate: graph has no nodes");
  if (!(opts.dt > 0.0)) throw ValidationError("simulate: dt must be positive");
  if (!(opts.t_max >= opts.dt)) throw ValidationError("simulate: t_max must be at least dt");
  Rng rng(opts.seed);
  auto state = initial_state(g, init, rng);
  const auto n_samples = static_cast<std::size_t>(std::floor(opts.t_max / opts.dt + 1e-9)) + 1;
  Sampler sampler(g.n_nodes(), n_samples, opts.dt);
  if (model.variant == Variant::NmSIS)
    state = run_non_markovian_sis(g, model, std::move(state), rng, sampler);
  else
    state = run_markovian(g, model, std::move(state), rng, sampler);
  sampler.fill(state);
  return Trajectory(model, g.hash(), opts.dt, opts.seed, g.n_nodes(), sampler.take());
}

std::vector<double> prevalence(const Trajectory& tr, Compartment state) {
  if (!tr.model().is_legal(code(state)))
    throw ValidationError("prevalence: compartment not produced by " +
                          to_string(tr.model().variant));
  std::vector<double> y(tr.n_samples(), 0.0);
  const auto& s = tr.states();
  const std::size_t n = tr.n_nodes();
  for (std::size_t k = 0; k < y.size(); ++k) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += s[k * n + i] == code(state);
    y[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return y;
}

Trajectory truncate_dynamic(const Trajectory& tr, std::size_t window, double min_change_fraction,
                            std::size_t t_history, std::size_t t_future) {
  if (window < 2) throw ValidationError("truncate_dynamic: window must be >= 2");
  const std::size_t T = tr.n_samples(), n = tr.n_nodes();
  if (T < 2) return tr;
  const auto& s = tr.states();
  std::vector<char> quiet(T - 1);
  for (std::size_t k = 0; k + 1 < T; ++k) {
    std::size_t changes = 0;
    for (std::size_t i = 0; i < n; ++i) changes += s[k * n + i] != s[(k + 1) * n + i];
    quiet[k] = static_cast<double>(changes) < min_change_fraction * static_cast<double>(n);
  }
  std::size_t run = 0;
  // First k with quiet[k .. k + window - 1] all true.
  for (std::size_t k = 0; k + 1 < T; ++k) {
    run = quiet[k] ? run + 1 : 0;
    if (run == window) {
      const std::size_t start = k + 1 - window;
      const std::size_t keep = std::max(start + 1, 2 * (t_history + t_future));
      return keep >= T ? tr : tr.prefix(keep);
    }
  }
  return tr;
}

}  // namespace epifed
