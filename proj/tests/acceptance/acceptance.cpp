// Acceptance checks. Usage: epifed_acceptance [criterion ...]; no arguments runs all.
// Exit status: 0 when every selected check passes, 1 on any failure, 77 when
// every selected check was skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "epifed/config.hpp"
#include "epifed/dataset.hpp"
#include "epifed/epidemics.hpp"
#include "epifed/fedlearn.hpp"
#include "epifed/gradcheck.hpp"
#include "epifed/graph.hpp"
#include "epifed/layers.hpp"
#include "epifed/metrics.hpp"
#include "epifed/models.hpp"
#include "epifed/partition.hpp"
#include "epifed/pipeline.hpp"
#include "epifed/rng.hpp"
#include "epifed/runtime.hpp"

using namespace epifed;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Outcome verdict(bool ok, std::string detail) {
  return {ok ? Status::Pass : Status::Fail, std::move(detail)};
}

// ------------------------------------------------------------------ 1

std::vector<std::pair<std::string, Graph>> small_connected_graphs() {
  auto make = [](std::size_t n, std::vector<Edge> e) { return Graph::from_edges(n, e); };
  return {
      {"K1", make(1, {})},
      {"K2", make(2, {{0, 1}})},
      {"P3", make(3, {{0, 1}, {1, 2}})},
      {"K3", make(3, {{0, 1}, {1, 2}, {0, 2}})},
      {"P4", make(4, {{0, 1}, {1, 2}, {2, 3}})},
      {"star4", make(4, {{0, 1}, {0, 2}, {0, 3}})},
      {"C4", make(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}})},
      {"paw", make(4, {{0, 1}, {1, 2}, {0, 2}, {2, 3}})},
      {"diamond", make(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}})},
      {"K4", make(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}})},
  };
}

Outcome simulator_exactness() {
  const int runs = 200000;
  const std::vector<std::pair<double, double>> rates{{1.0, 1.0}, {0.5, 1.0}, {2.0, 0.5}};
  const std::vector<std::pair<std::size_t, double>> checkpoints{{1, 0.5}, {2, 1.0}, {4, 2.0}};
  double worst = 0.0;
  std::string where;
  for (const auto& [name, g] : small_connected_graphs()) {
    for (const auto& [beta, delta] : rates) {
      ModelSpec spec;
      spec.beta = beta;
      spec.delta = delta;
      const std::size_t n = g.n_nodes();
      std::vector<double> counts(checkpoints.size() * n, 0.0);
      const auto base = derive_seed(0xacce, static_cast<std::uint64_t>(beta * 100 + delta * 10 + n));
      for (int r = 0; r < runs; ++r) {
        auto tr = simulate(g, spec, InitSpec::nodes({0}), {0.5, 2.0, derive_seed(base, r)});
        for (std::size_t k = 0; k < checkpoints.size(); ++k)
          for (std::size_t i = 0; i < n; ++i)
            counts[k * n + i] += tr.state(checkpoints[k].first, i) == static_cast<std::uint8_t>(Compartment::I);
      }
      for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        auto exact = exact_markov_sis(g, beta, delta, {0}, checkpoints[k].second);
        for (std::size_t i = 0; i < n; ++i) {
          const double err = std::abs(counts[k * n + i] / runs - exact[i]);
          if (err > worst) {
            worst = err;
            where = name + " beta=" + fmt(beta, 1) + " delta=" + fmt(delta, 1) +
                    " t=" + fmt(checkpoints[k].second, 1) + " node " + std::to_string(i);
          }
        }
      }
    }
  }
  return verdict(worst <= 0.01, "10 graphs x 3 rate pairs, max |MC - exact| = " + fmt(worst, 5) +
                                    " at " + where);
}

// ------------------------------------------------------------------ 2

Outcome phase_transition() {
  const auto g = generate_synthetic(SyntheticKind::Complete, {20, 0.0, 1}, 0);
  const double lambda = spectral_radius(g);
  auto late_prevalence = [&](double tau) {
    ModelSpec spec;
    spec.beta = tau;
    spec.delta = 1.0;
    double total = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      auto tr = simulate(g, spec, InitSpec::fraction(0.25), {0.1, 20.0, derive_seed(0x9a5e, s)});
      auto prev = prevalence(tr, Compartment::I);
      const std::size_t from = prev.size() * 3 / 4;
      total += std::accumulate(prev.begin() + static_cast<std::ptrdiff_t>(from), prev.end(), 0.0) /
               static_cast<double>(prev.size() - from);
    }
    return total / 50.0;
  };
  const double low = late_prevalence(0.1 / lambda), high = late_prevalence(10.0 / lambda);
  return verdict(std::abs(lambda - 19.0) < 1e-8 && low < 0.02 && high > 0.5,
                 "lambda1=" + fmt(lambda, 6) + ", late prevalence " + fmt(low) + " at 0.1/lambda1, " +
                     fmt(high) + " at 10/lambda1");
}

// ------------------------------------------------------------------ 3

Outcome threshold_anchor() {
  std::string path;
  if (const char* env = std::getenv("EPIFED_OPENFLIGHTS")) path = env;
  if (path.empty()) {
    const std::string bundled = std::string(EPIFED_SOURCE_DIR) + "/data/openflights_top600.csv";
    if (std::filesystem::exists(bundled)) path = bundled;
  }
  if (path.empty() || !std::filesystem::exists(path))
    return {Status::Skip, "no OpenFlights edge list (set EPIFED_OPENFLIGHTS)"};
  Graph g = load_edge_list_file(path).graph;
  if (g.n_nodes() > 600) g = top_k_by_degree(g, 600);
  const double th = epidemic_threshold(g);
  return verdict(std::abs(th - 0.015) <= 0.003,
                 std::to_string(g.n_nodes()) + " nodes, threshold " + fmt(th, 5));
}

// ------------------------------------------------------------------ 4

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

double dot(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

using Check = std::function<double(std::uint64_t)>;

std::map<std::string, Check> gradient_cases() {
  std::map<std::string, Check> c;
  c["embedding"] = [](std::uint64_t seed) {
    ParamSet p;
    p.add("table", random_tensor({3, 4}, seed));
    const std::vector<std::uint8_t> codes{0, 2, 2, 1, 0};
    Matrix r = random_tensor({5, 4}, seed + 1).mat();
    auto f = [&](const ParamSet& q) { return dot(embedding_forward(q.get("table"), codes), r); };
    ParamSet g = p.zeros_like();
    embedding_backward(r, codes, g.get("table"));
    return gradient_check(f, p, g, 1e-5, 200, seed).max_relative_error;
  };
  c["linear"] = [](std::uint64_t seed) {
    ParamSet p;
    p.add("x", random_tensor({4, 3}, seed));
    p.add("W", random_tensor({3, 5}, seed + 1));
    p.add("b", random_tensor({5}, seed + 2));
    Matrix r = random_tensor({4, 5}, seed + 3).mat();
    auto f = [&](const ParamSet& q) {
      return dot(linear_forward(q.get("x").mat(), q.get("W"), q.get("b")), r);
    };
    ParamSet g = p.zeros_like();
    g.get("x").mat() = linear_backward(p.get("x").mat(), r, p.get("W"), g.get("W"), g.get("b"));
    return gradient_check(f, p, g, 1e-5, 200, seed).max_relative_error;
  };
  c["lstm"] = [](std::uint64_t seed) {
    const std::size_t steps = 4;
    ParamSet p;
    p.add("W", random_tensor({4 + 2, 16}, seed, 0.5));
    p.add("b", random_tensor({16}, seed + 1, 0.5));
    for (std::size_t t = 0; t < steps; ++t) p.add("x" + std::to_string(t), random_tensor({3, 2}, seed + 10 + t));
    std::vector<Matrix> r;
    for (std::size_t t = 0; t < steps; ++t) r.push_back(random_tensor({3, 4}, seed + 20 + t).mat());
    auto inputs = [&](const ParamSet& q) {
      std::vector<Matrix> xs;
      for (std::size_t t = 0; t < steps; ++t) xs.push_back(q.get("x" + std::to_string(t)).mat());
      return xs;
    };
    auto f = [&](const ParamSet& q) {
      auto s = lstm_sequence_forward(inputs(q), q.get("W"), q.get("b"));
      double v = 0;
      for (std::size_t t = 0; t < steps; ++t) v += dot(s[t].h, r[t]);
      return v;
    };
    auto s = lstm_sequence_forward(inputs(p), p.get("W"), p.get("b"));
    ParamSet g = p.zeros_like();
    auto dx = lstm_sequence_backward(s, r, p.get("W"), g.get("W"), g.get("b"));
    for (std::size_t t = 0; t < steps; ++t) g.get("x" + std::to_string(t)).mat() = dx[t];
    return gradient_check(f, p, g, 1e-5, 400, seed).max_relative_error;
  };
  c["graph attention"] = [](std::uint64_t seed) {
    const auto ag = AttentionGraph::from_graph(
        Graph::from_edges(4, std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}, {2, 3}}));
    GatConfig cfg{2, 3, 0.2};
    ParamSet p;
    p.add("x", random_tensor({8, 4}, seed));
    p.add("phi", random_tensor({4, 6}, seed + 1));
    p.add("a", random_tensor({2, 6}, seed + 2));
    Matrix r = random_tensor({8, 6}, seed + 3).mat();
    auto f = [&](const ParamSet& q) {
      return dot(gat_forward(q.get("x").mat(), 2, ag, q.get("phi"), q.get("a"), cfg).out, r);
    };
    auto cache = gat_forward(p.get("x").mat(), 2, ag, p.get("phi"), p.get("a"), cfg);
    ParamSet g = p.zeros_like();
    g.get("x").mat() = gat_backward(cache, r, ag, p.get("phi"), p.get("a"), cfg, g.get("phi"), g.get("a"));
    return gradient_check(f, p, g, 1e-6, 400, seed).max_relative_error;
  };
  c["batch norm"] = [](std::uint64_t seed) {
    ParamSet p;
    p.add("x", random_tensor({6, 3}, seed));
    p.add("gamma", random_tensor({3}, seed + 1));
    p.add("beta", random_tensor({3}, seed + 2));
    Matrix r = random_tensor({6, 3}, seed + 3).mat();
    auto run = [&](const ParamSet& q, BatchNormCache& cache) {
      Tensor mean({3}), var({3}, 1.0);
      return batchnorm_forward(q.get("x").mat(), q.get("gamma"), q.get("beta"), mean, var, true, cache);
    };
    auto f = [&](const ParamSet& q) {
      BatchNormCache cache;
      return dot(run(q, cache), r);
    };
    BatchNormCache cache;
    run(p, cache);
    ParamSet g = p.zeros_like();
    g.get("x").mat() = batchnorm_backward(cache, r, p.get("gamma"), g.get("gamma"), g.get("beta"));
    return gradient_check(f, p, g, 1e-5, 200, seed).max_relative_error;
  };
  c["dropout"] = [](std::uint64_t seed) {
    ParamSet p;
    p.add("x", random_tensor({5, 4}, seed));
    Matrix r = random_tensor({5, 4}, seed + 1).mat();
    auto f = [&](const ParamSet& q) { return dot(dropout_forward(q.get("x").mat(), 0.3, seed, true).out, r); };
    ParamSet g = p.zeros_like();
    g.get("x").mat() = dropout_backward(dropout_forward(p.get("x").mat(), 0.3, seed, true), r);
    return gradient_check(f, p, g, 1e-5, 200, seed).max_relative_error;
  };
  c["softmax cross entropy"] = [](std::uint64_t seed) {
    ParamSet p;
    p.add("z", random_tensor({5, 3}, seed, 2.0));
    const std::vector<std::uint8_t> y{0, 2, 1, 1, 0};
    auto f = [&](const ParamSet& q) { return softmax_cross_entropy(q.get("z").mat(), y).loss; };
    ParamSet g = p.zeros_like();
    g.get("z").mat() = softmax_cross_entropy_backward(softmax_cross_entropy(p.get("z").mat(), y), y);
    return gradient_check(f, p, g, 1e-5, 200, seed).max_relative_error;
  };
  for (auto arch : {Architecture::Lstm, Architecture::Stgat}) {
    c["model " + to_string(arch)] = [arch](std::uint64_t seed) {
      ModelConfig cfg;
      cfg.architecture = arch;
      cfg.t_history = 4;
      cfg.t_future = 3;
      cfg.d_embed = 4;
      cfg.lstm_hidden = 6;
      cfg.stgat_hidden1 = 5;
      cfg.stgat_hidden2 = 6;
      cfg.gat_heads = 2;
      cfg.gat_head_dim = 3;
      cfg.dropout = 0.1;
      const auto ag = AttentionGraph::from_graph(Graph::from_edges(
          6, std::vector<Edge>{{0, 1}, {1, 2}, {2, 0}, {2, 3}, {3, 4}, {4, 5}}));
      WindowBatch b{2, 6, cfg.t_history, cfg.t_future, {}, {}};
      Rng rng(seed + 100);
      for (std::size_t i = 0; i < 2 * 6 * cfg.t_history; ++i) b.inputs.push_back(static_cast<std::uint8_t>(rng.below(2)));
      for (std::size_t i = 0; i < 2 * 6 * cfg.t_future; ++i) b.targets.push_back(static_cast<std::uint8_t>(rng.below(2)));
      const auto state = init_model(cfg, seed);
      auto loss = [&](const ParamSet& params, ParamSet& grads) {
        ModelState s{params, state.buffers};
        return model_loss_and_grad(cfg, s, b, &ag, seed, grads);
      };
      ParamSet grads = state.params.zeros_like();
      loss(state.params, grads);
      auto f = [&](const ParamSet& q) {
        ParamSet scratch = q.zeros_like();
        return loss(q, scratch);
      };
      return gradient_check(f, state.params, grads, 1e-5, 300, seed).max_relative_error;
    };
  }
  return c;
}

Outcome gradient_suite() {
  double worst = 0.0;
  std::string where, summary;
  for (const auto& [name, check] : gradient_cases()) {
    double case_worst = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) case_worst = std::max(case_worst, check(seed));
    summary += (summary.empty() ? "" : ", ") + name + " " + fmt(case_worst * 1e6, 2) + "e-6";
    if (case_worst > worst) {
      worst = case_worst;
      where = name;
    }
  }
  return verdict(worst < 1e-4, "max relative error " + fmt(worst * 1e6, 2) + "e-6 (" + where +
                                   "); per case: " + summary);
}

// ------------------------------------------------------------------ fixtures

// BA-200 network, SIS at four times the mean-field threshold.
RunConfig fixture(std::uint64_t seed) {
  RunConfig cfg = parse_config("{}");
  cfg.seed = seed;
  cfg.graph.kind = "ba";
  cfg.graph.n = 200;
  cfg.graph.m = 1;
  cfg.graph.seed = 1;
  cfg.epidemic.model = "sis";
  cfg.epidemic.params = {{"beta", 1.0}, {"delta", 1.0}};
  cfg.epidemic.tau_over_threshold = 4.0;
  cfg.epidemic.dt = 0.05;
  cfg.epidemic.t_max = 15.0;
  cfg.partition = PartitionMethod::EvenIndex;
  auto& fed = cfg.training.federation;
  fed.local_epochs = 1;
  fed.rounds = 10;
  fed.patience = 5;
  fed.train.batch_size = 8;
  fed.train.lr = 0.01;
  cfg.validate();
  return cfg;
}

struct Prepared {
  RunConfig cfg;
  Graph graph;
  Trajectory trajectory;
  SeedPlan seeds;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p{cfg, build_graph(cfg), {}, plan_seeds(cfg, cfg.seed)};
  p.trajectory = run_simulation(cfg, p.graph, resolve_epidemic(cfg, p.graph), p.seeds.simulation);
  return p;
}

double mean_metric(const ScenarioOutcome& o, const std::string& metric) {
  std::vector<double> v;
  for (const auto& c : o.clients) v.push_back(metric_value(c.test, metric));
  return mean_client_metric(v);
}

ScenarioOutcome scenario(Prepared& p, const std::string& kind, std::size_t M,
                         Aggregation agg = Aggregation::FedProx, MissingConfig missing = {}) {
  p.cfg.training.scenario = kind;
  p.cfg.training.federation.method = agg;
  return run_scenario(p.cfg, p.graph, p.trajectory, M, missing, p.seeds);
}

// ------------------------------------------------------------------ 5

Outcome federation_algebra() {
  RunConfig cfg = fixture(1);
  cfg.graph.n = 40;
  cfg.epidemic.t_max = 8.0;
  cfg.model.t_history = 5;
  cfg.model.t_future = 3;
  cfg.model.lstm_hidden = 8;
  cfg.model.d_embed = 4;
  cfg.training.federation.rounds = 3;
  cfg.training.federation.patience = 10;
  auto p = prepare(cfg);
  ModelConfig model = cfg.model;
  const auto seeds = p.seeds;
  std::string detail;
  bool ok = true;

  // (a) a one-client federation against centralized training
  const auto whole = build_whole(cfg, p.graph, p.trajectory);
  const auto fed = run_federated(model, {whole}, cfg.training.federation, seeds.training);
  const auto cen = run_centralized(model, whole, cfg.training.federation, seeds.training);
  const double ce_fed = evaluate(model, fed.model, whole.data.test, &whole.graph).metrics.ce;
  const double ce_cen = evaluate(model, cen.model, whole.data.test, &whole.graph).metrics.ce;
  const bool a = std::abs(ce_fed - ce_cen) <= 1e-9;
  ok &= a;
  detail += std::string("(a) ") + (a ? "ok" : "FAIL") + " |dCE|=" + fmt(std::abs(ce_fed - ce_cen), 12);

  // (b) FedProx with mu = 0 against FedAvg, every round
  const auto clients = build_clients(cfg, p.graph, p.trajectory, make_partition(p.graph, cfg.partition, 4, seeds.partition));
  for (auto arch : {Architecture::Lstm, Architecture::Stgat}) {
    model.architecture = arch;
    auto avg_cfg = cfg.training.federation;
    avg_cfg.method = Aggregation::FedAvg;
    auto prox_cfg = avg_cfg;
    prox_cfg.method = Aggregation::FedProx;
    prox_cfg.mu = 0.0;
    const auto avg = run_federated(model, clients, avg_cfg, seeds.training, true);
    const auto prox = run_federated(model, clients, prox_cfg, seeds.training, true);
    const bool b = avg.round_models == prox.round_models && avg.logs == prox.logs;
    ok &= b;
    detail += std::string("; (b) ") + to_string(arch) + (b ? " ok" : " FAIL");

    // (d) one worker against four
    auto par_cfg = prox_cfg;
    par_cfg.mu = 0.01;
    auto ser_cfg = par_cfg;
    par_cfg.workers = 4;
    const auto ser = run_federated(model, clients, ser_cfg, seeds.training, true);
    const auto par = run_federated(model, clients, par_cfg, seeds.training, true);
    const bool d = ser.round_models == par.round_models && ser.logs == par.logs;
    ok &= d;
    detail += std::string("; (d) ") + to_string(arch) + (d ? " ok" : " FAIL");
  }

  // (c) weighted means by hand
  auto scalar = [](double v) {
    ParamSet s;
    s.add("w", Tensor({1}, {v}));
    return s;
  };
  const auto s0 = scalar(0), s2 = scalar(2), s4 = scalar(4);
  const ParamSet* pair02[] = {&s0, &s2};
  const ParamSet* pair04[] = {&s0, &s4};
  const std::vector<double> even{1, 1}, skew{1, 3};
  const bool c = aggregate(pair02, even).get("w")[0] == 1.0 && aggregate(pair04, skew).get("w")[0] == 3.0;
  ok &= c;
  detail += std::string("; (c) ") + (c ? "ok" : "FAIL");
  return verdict(ok, detail);
}

// ------------------------------------------------------------------ 6

Outcome learning_efficacy() {
  auto p = prepare(fixture(1));
  auto& fed = p.cfg.training.federation;
  fed.rounds = 30;
  fed.patience = 10;
  bool ok = true;
  std::string detail;
  for (auto arch : {Architecture::Lstm, Architecture::Stgat}) {
    p.cfg.model.architecture = arch;
    const auto o = scenario(p, "centralized", 1);
    const double acc = o.clients.front().test.metrics.accuracy;
    const double base = o.clients.front().persistence_accuracy;
    const bool pass = acc >= base + 0.01 && acc >= 0.90;
    ok &= pass;
    detail += (detail.empty() ? "" : "; ") + to_string(arch) + " acc " + fmt(acc) +
              " vs persistence " + fmt(base) + (pass ? "" : " (needs >= " + fmt(std::max(base + 0.01, 0.9)) + ")");
  }
  return verdict(ok, detail);
}

// ------------------------------------------------------------------ 7

Outcome federated_vs_solo() {
  double prox_acc = 0, solo_acc = 0, prox_ce = 0, avg_ce = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto p = prepare(fixture(seed));
    const auto prox = scenario(p, "federated", 4, Aggregation::FedProx);
    const auto avg = scenario(p, "federated", 4, Aggregation::FedAvg);
    const auto solo = scenario(p, "solo", 4);
    prox_acc += mean_metric(prox, "acc") / 3;
    solo_acc += mean_metric(solo, "acc") / 3;
    prox_ce += mean_metric(prox, "ce") / 3;
    avg_ce += mean_metric(avg, "ce") / 3;
  }
  return verdict(prox_acc >= solo_acc && prox_ce <= avg_ce,
                 "acc fedprox " + fmt(prox_acc) + " vs solo " + fmt(solo_acc) + "; CE fedprox " +
                     fmt(prox_ce, 5) + " vs fedavg " + fmt(avg_ce, 5));
}

// ------------------------------------------------------------------ 8

Outcome degradation_with_clients() {
  const std::vector<std::size_t> Ms{2, 8, 16};
  std::vector<std::vector<double>> per_seed(Ms.size());
  for (std::uint64_t seed : {1, 2, 3}) {
    auto p = prepare(fixture(seed));
    for (std::size_t k = 0; k < Ms.size(); ++k)
      per_seed[k].push_back(mean_metric(scenario(p, "federated", Ms[k]), "inv_ce"));
  }
  std::vector<double> mean(Ms.size());
  double pooled_var = 0.0;
  for (std::size_t k = 0; k < Ms.size(); ++k) {
    mean[k] = mean_client_metric(per_seed[k]);
    double v = 0.0;
    for (double x : per_seed[k]) v += (x - mean[k]) * (x - mean[k]);
    pooled_var += v / static_cast<double>(per_seed[k].size() - 1) / static_cast<double>(Ms.size());
  }
  const double sd = std::sqrt(pooled_var);
  bool ok = true;
  for (std::size_t k = 1; k < Ms.size(); ++k) ok &= mean[k] <= mean[k - 1] + sd;
  std::string detail = "mean 1/CE";
  for (std::size_t k = 0; k < Ms.size(); ++k) detail += " M=" + std::to_string(Ms[k]) + ":" + fmt(mean[k]);
  return verdict(ok, detail + ", pooled sd " + fmt(sd));
}

// ------------------------------------------------------------------ 9

Outcome missing_monotonicity() {
  const std::vector<double> ratios{0.0, 0.5, 0.9};
  std::vector<double> acc(ratios.size(), 0.0);
  for (std::uint64_t seed : {1, 2, 3}) {
    auto p = prepare(fixture(seed));
    for (std::size_t k = 0; k < ratios.size(); ++k) {
      MissingConfig m;
      m.client_ratio = 0.5;
      m.node_missing_ratio = ratios[k];
      acc[k] += mean_metric(scenario(p, "federated", 4, Aggregation::FedProx, m), "acc") / 3;
    }
  }
  bool ok = true;
  for (std::size_t k = 1; k < ratios.size(); ++k) ok &= acc[k] <= acc[k - 1];
  std::string detail = "mean accuracy";
  for (std::size_t k = 0; k < ratios.size(); ++k) detail += " r=" + fmt(ratios[k], 1) + ":" + fmt(acc[k]);
  return verdict(ok, detail);
}

// ------------------------------------------------------------------ 10

Outcome partition_quality() {
  std::vector<Edge> bridge;
  for (NodeId base : {0, 4})
    for (NodeId a = 0; a < 4; ++a)
      for (NodeId b = a + 1; b < 4; ++b) bridge.emplace_back(base + a, base + b);
  bridge.emplace_back(3, 4);
  std::vector<Edge> ring;
  for (NodeId i = 0; i < 8; ++i) ring.emplace_back(i, (i + 1) % 8);
  bool ok = true;
  std::string detail;
  for (const auto& [name, edges, optimum] :
       {std::tuple{"two K4 + bridge", bridge, std::size_t{1}}, std::tuple{"ring8", ring, std::size_t{2}}}) {
    const auto g = Graph::from_edges(8, edges);
    const auto even = edge_cut(g, even_by_index(g, 2));
    std::size_t worst = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) worst = std::max(worst, edge_cut(g, kernighan_lin(g, 2, seed)));
    ok &= worst <= even && worst == optimum;
    detail += std::string(name) + ": KL cut " + std::to_string(worst) + " (optimum " +
              std::to_string(optimum) + "), even cut " + std::to_string(even) + "; ";
  }
  // three components of different shapes
  const auto parts = Graph::from_edges(
      9, std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {5, 6}, {7, 8}});
  const std::vector<std::vector<NodeId>> comps{{0, 1, 2}, {3, 4, 5, 6}, {7, 8}};
  bool exact = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = spectral_clustering(parts, 3, seed);
    for (const auto& comp : comps)
      for (auto v : comp) exact &= p.client[v] == p.client[comp.front()];
    exact &= p.client[0] != p.client[3] && p.client[3] != p.client[7] && p.client[0] != p.client[7];
  }
  ok &= exact;
  detail += std::string("spectral components ") + (exact ? "exact" : "mixed");
  return verdict(ok, detail);
}

// ------------------------------------------------------------------ 11

Outcome efficacy_energy_checks() {
  bool ok = efficacy_energy(std::vector<double>{0.9, 0.8, 0.7}) == (0.9 + 0.8 + 0.7) / 3.0;
  ok &= efficacy_energy(std::vector<double>(15, 1.0), EtaNormalization::Typeset) == 15.0 / 14.0;
  ok &= efficacy_energy(std::vector<double>(7, 0.625)) == 0.625;
  const bool hand = ok;
  Rng rng(2024);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(2 + rng.below(30));
    for (auto& x : v) x = rng.uniform(-10.0, 10.0);
    const double eta = efficacy_energy(v);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    violations += eta < *lo || eta > *hi;
  }
  ok &= violations == 0;
  return verdict(ok, std::string("hand cases ") + (hand ? "exact" : "wrong") + ", " +
                         std::to_string(violations) + " of 1000 bound violations");
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "simulator exactness", simulator_exactness},
    {2, "phase transition", phase_transition},
    {3, "threshold anchor", threshold_anchor},
    {4, "gradient suite", gradient_suite},
    {5, "federation algebra", federation_algebra},
    {6, "learning efficacy", learning_efficacy},
    {7, "federated vs solo", federated_vs_solo},
    {8, "degradation with client count", degradation_with_clients},
    {9, "missing-report monotonicity", missing_monotonicity},
    {10, "partition quality", partition_quality},
    {11, "efficacy energy", efficacy_energy_checks},
};

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failed = 0, skipped = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    std::printf("[%s] criterion %d %s (%.1fs): %s\n", tag, c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.status == Status::Fail;
    skipped += o.status == Status::Skip;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no such criterion\n");
    return 2;
  }
  if (failed) return 1;
  return skipped == ran ? 77 : 0;
}
