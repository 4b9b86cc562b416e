#include "epifed/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "epifed/error.hpp"
#include "epifed/parallel.hpp"
#include "epifed/rng.hpp"

namespace epifed {

namespace fs = std::filesystem;

SeedPlan plan_seeds(const RunConfig& cfg, std::uint64_t seed) {
  SeedPlan s;
  s.graph = cfg.graph.seed.value_or(cfg.seed);
  s.simulation = derive_seed(seed, 11);
  s.partition = derive_seed(seed, 12);
  s.training = derive_seed(seed, 13);
  s.missing = derive_seed(seed, 14);
  return s;
}

std::string provenance(const RunConfig& cfg, const std::string& command, std::uint64_t seed) {
  const auto s = plan_seeds(cfg, seed);
  std::ostringstream o;
  o << "epifed " << command << '\n'
    << "config " << config_to_json(cfg) << '\n'
    << "seeds run=" << seed << " graph=" << s.graph << " simulation=" << s.simulation
    << " partition=" << s.partition << " training=" << s.training << " missing=" << s.missing;
  return o.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

Graph build_graph(const RunConfig& cfg) {
  Graph g;
  if (cfg.graph.source == "file") {
    g = load_edge_list_file(cfg.graph.path).graph;
  } else {
    SyntheticParams p;
    p.n = cfg.graph.n;
    p.m = cfg.graph.m;
    p.p = cfg.graph.p;
    g = generate_synthetic(parse_synthetic_kind(cfg.graph.kind), p,
                           cfg.graph.seed.value_or(cfg.seed));
  }
  if (cfg.graph.top_k > 0) g = top_k_by_degree(g, cfg.graph.top_k);
  return g;
}

ModelSpec resolve_epidemic(const RunConfig& cfg, const Graph& g, double tau_multiple) {
  ModelSpec spec = ModelSpec::from_parameters(parse_variant(cfg.epidemic.model), cfg.epidemic.params);
  if (tau_multiple > 0.0) spec = spec.with_effective_rate(tau_multiple * epidemic_threshold(g));
  else if (cfg.epidemic.tau_over_threshold)
    spec = spec.with_effective_rate(*cfg.epidemic.tau_over_threshold * epidemic_threshold(g));
  else if (cfg.epidemic.tau)
    spec = spec.with_effective_rate(*cfg.epidemic.tau);
  spec.validate();
  return spec;
}

namespace {

std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

Trajectory run_simulation(const RunConfig& cfg, const Graph& g, const ModelSpec& spec,
                          std::uint64_t sim_seed) {
  const SimulationOptions opts{cfg.epidemic.dt, cfg.epidemic.t_max, sim_seed};
  const InitSpec init = InitSpec::fraction(cfg.epidemic.init_fraction);
  Trajectory tr;
  fs::path cached;
  if (!cfg.cache_dir.empty()) {
    const std::string key = g.hash() + "|" + to_string(spec.variant) + "|" +
                            spec.parameter_string() + "|" + std::to_string(sim_seed) + "|" +
                            format_double(opts.dt) + "|" + format_double(opts.t_max) + "|" +
                            format_double(init.infected_fraction);
    cached = fs::path(cfg.cache_dir) / ("traj-" + fnv_hex(key) + ".csv");
    if (fs::exists(cached)) {
      try {
        Trajectory t = read_trajectory_file(cached.string());
        if (t.graph_hash() == g.hash() && t.model() == spec && t.seed() == sim_seed &&
            t.dt() == opts.dt && t.n_nodes() == g.n_nodes())
          tr = std::move(t);
      } catch (const Error&) {
        // Unreadable cache entries are regenerated.
      }
    }
  }
  if (tr.n_nodes() == 0) {
    tr = simulate(g, spec, init, opts);
    if (!cached.empty()) {
      std::ostringstream o;
      write_trajectory(tr, o);
      write_file_atomic(cached.string(), o.str());
    }
  }
  if (cfg.epidemic.truncate)
    tr = truncate_dynamic(tr, 20, 0.001, cfg.model.t_history, cfg.model.t_future);
  return tr;
}

std::vector<ClientData> build_clients(const RunConfig& cfg, const Graph& g, const Trajectory& tr,
                                      const PartitionAssignment& p) {
  const auto subs = induced_subnetworks(g, p);
  std::vector<ClientData> clients(subs.size());
  for (std::size_t m = 0; m < subs.size(); ++m) {
    const auto local = tr.restrict_to(subs[m].local_to_global);
    clients[m].id = m;
    clients[m].data = chrono_split(
        make_windows(local, cfg.model.t_history, cfg.model.t_future, 1, m), cfg.splits);
    clients[m].graph = AttentionGraph::from_graph(subs[m].graph);
  }
  return clients;
}

ClientData build_whole(const RunConfig& cfg, const Graph& g, const Trajectory& tr) {
  ClientData c;
  c.id = 0;
  c.data = chrono_split(make_windows(tr, cfg.model.t_history, cfg.model.t_future), cfg.splits);
  c.graph = AttentionGraph::from_graph(g);
  return c;
}

double metric_value(const Evaluation& e, const std::string& metric) {
  if (metric == "acc") return e.metrics.accuracy;
  if (metric == "f1") return e.metrics.macro_f1;
  if (metric == "ce") return e.metrics.ce;
  if (metric == "inv_ce") return 1.0 / e.metrics.ce;
  if (metric == "rmse") return e.prevalence.rmse;
  if (metric == "mae") return e.prevalence.mae;
  throw ValidationError("unknown metric '" + metric + "'");
}

ScenarioOutcome run_scenario(const RunConfig& cfg, const Graph& g, const Trajectory& tr,
                             std::size_t M, const MissingConfig& missing, const SeedPlan& seeds) {
  ModelConfig model = cfg.model;
  model.n_classes = n_classes(tr.model());
  const auto& fed = cfg.training.federation;
  ScenarioOutcome out;
  out.scenario = cfg.training.scenario;

  std::vector<ClientData> clients;
  if (cfg.training.scenario == "centralized") {
    clients.push_back(build_whole(cfg, g, tr));
  } else {
    const auto part = make_partition(g, cfg.partition, M, seeds.partition);
    clients = build_clients(cfg, g, tr, part);
  }
  out.M = clients.size();
  if (missing.client_ratio > 0.0 && missing.node_missing_ratio > 0.0) {
    std::vector<ClientSplits> splits;
    for (auto& c : clients) splits.push_back(std::move(c.data));
    inject_missing(splits, missing.client_ratio, missing.node_missing_ratio, seeds.missing,
                   missing.corrupt_targets);
    for (std::size_t i = 0; i < clients.size(); ++i) clients[i].data = std::move(splits[i]);
  }

  out.clients.resize(clients.size());
  auto score = [&](std::size_t i, const ModelState& state) {
    const auto& c = clients[i];
    out.clients[i].client = c.id;
    out.clients[i].test = evaluate(model, state, c.data.test, &c.graph);
    out.clients[i].persistence_accuracy =
        accuracy(persistence_predictions(c.data.test), c.data.test.targets);
  };

  if (cfg.training.scenario == "solo") {
    std::vector<FederationResult> results(clients.size());
    FederationConfig inner = fed;
    inner.workers = 1;
    parallel_for(clients.size(), fed.workers, [&](std::size_t i) {
      results[i] = run_solo(model, clients[i], inner, seeds.training);
      score(i, results[i].model);
    });
    for (std::size_t i = 0; i < clients.size(); ++i) {
      out.logs.insert(out.logs.end(), results[i].logs.begin(), results[i].logs.end());
      out.warnings.insert(out.warnings.end(), results[i].warnings.begin(), results[i].warnings.end());
      out.models.emplace_back("client" + std::to_string(clients[i].id), results[i].model);
    }
  } else {
    auto result = cfg.training.scenario == "centralized"
                      ? run_centralized(model, clients.front(), fed, seeds.training)
                      : run_federated(model, clients, fed, seeds.training);
    parallel_for(clients.size(), fed.workers, [&](std::size_t i) { score(i, result.model); });
    out.logs = std::move(result.logs);
    out.warnings = std::move(result.warnings);
    out.models.emplace_back("global", std::move(result.model));
  }
  return out;
}

namespace {

std::string aggregation_label(const RunConfig& cfg) {
  return cfg.training.scenario == "federated" ? to_string(cfg.training.federation.method)
                                              : std::string("none");
}

std::string partition_label(const RunConfig& cfg) {
  return cfg.training.scenario == "centralized" ? std::string("none") : to_string(cfg.partition);
}

const std::vector<std::string> kAllMetrics = {"acc", "f1", "ce", "inv_ce", "rmse", "mae"};

}  // namespace

std::string cmd_simulate(const RunConfig& cfg, const std::string& out_path) {
  const Graph g = build_graph(cfg);
  const ModelSpec spec = resolve_epidemic(cfg, g);
  const auto seeds = plan_seeds(cfg, cfg.seed);
  const Trajectory tr = run_simulation(cfg, g, spec, seeds.simulation);
  std::ostringstream file;
  write_trajectory(tr, file, provenance(cfg, "simulate", cfg.seed));
  write_file_atomic(out_path, file.str());

  std::ostringstream r;
  r << "model " << to_string(spec.variant) << ' ' << spec.parameter_string() << "\n";
  r << "nodes " << g.n_nodes() << ", samples " << tr.n_samples() << ", dt "
    << format_double(tr.dt()) << "\n";
  for (auto c : spec.compartments()) {
    const auto prev = prevalence(tr, c);
    double late = 0.0;
    const std::size_t from = prev.size() / 2;
    for (std::size_t k = from; k < prev.size(); ++k) late += prev[k];
    late /= static_cast<double>(prev.size() - from);
    static const char* names = "SIREV";
    r << "prevalence " << names[code(c)] << ": initial " << format_double(prev.front())
      << ", final " << format_double(prev.back()) << ", late mean " << format_double(late) << "\n";
  }
  r << "wrote " << out_path;
  return r.str();
}

std::string cmd_partition(const RunConfig& cfg, const std::string& out_path) {
  const Graph g = build_graph(cfg);
  const auto seeds = plan_seeds(cfg, cfg.seed);
  const auto p = make_partition(g, cfg.partition, cfg.clients, seeds.partition);
  std::ostringstream file;
  write_partition(p, g, file, provenance(cfg, "partition", cfg.seed));
  write_file_atomic(out_path, file.str());
  std::ostringstream r;
  r << "method " << to_string(p.method) << ", clients " << p.n_clients << ", edge cut "
    << edge_cut(g, p) << "\nsizes";
  for (auto s : p.sizes()) r << ' ' << s;
  r << "\nwrote " << out_path;
  return r.str();
}

std::string cmd_train(const RunConfig& cfg) {
  const Graph g = build_graph(cfg);
  const ModelSpec spec = resolve_epidemic(cfg, g);
  const auto seeds = plan_seeds(cfg, cfg.seed);
  const Trajectory tr = run_simulation(cfg, g, spec, seeds.simulation);
  const auto outcome = run_scenario(cfg, g, tr, cfg.clients, cfg.missing, seeds);
  const std::string prov = provenance(cfg, "train", cfg.seed);
  const fs::path dir(cfg.output_dir);

  std::ostringstream logs;
  write_round_logs(outcome.logs, logs, prov);
  write_file_atomic((dir / "rounds.csv").string(), logs.str());
  for (const auto& [name, state] : outcome.models) {
    std::ostringstream ck;
    ModelConfig model = cfg.model;
    model.n_classes = n_classes(spec);
    write_checkpoint(model, state, ck);
    write_file_atomic((dir / (name + ".ckpt")).string(), ck.str());
  }

  std::vector<SummaryRow> rows;
  const SummaryRow base{outcome.scenario, to_string(cfg.model.architecture), aggregation_label(cfg),
                        partition_label(cfg), to_string(spec.variant), outcome.M, "", 0.0};
  std::ostringstream report;
  for (const auto& metric : kAllMetrics) {
    std::vector<double> values;
    for (const auto& c : outcome.clients) {
      SummaryRow r = base;
      r.scenario += ";client=" + std::to_string(c.client);
      r.metric = metric;
      r.value = metric_value(c.test, metric);
      values.push_back(r.value);
      rows.push_back(r);
    }
    SummaryRow mean = base;
    mean.metric = metric;
    mean.value = mean_client_metric(values);
    rows.push_back(mean);
    report << metric << ' ' << format_double(mean.value) << '\n';
  }
  std::vector<double> persistence;
  for (const auto& c : outcome.clients) {
    SummaryRow r = base;
    r.scenario = "persistence;client=" + std::to_string(c.client);
    r.metric = "acc";
    r.value = c.persistence_accuracy;
    persistence.push_back(r.value);
    rows.push_back(r);
  }
  SummaryRow pmean = base;
  pmean.scenario = "persistence";
  pmean.metric = "acc";
  pmean.value = mean_client_metric(persistence);
  rows.push_back(pmean);
  report << "persistence acc " << format_double(pmean.value) << '\n';

  std::ostringstream summary;
  write_summary(rows, summary, prov);
  write_file_atomic((dir / "summary.csv").string(), summary.str());
  for (const auto& w : outcome.warnings) report << "warning: " << w << '\n';
  report << "wrote " << (dir / "summary.csv").string();
  return report.str();
}

namespace {

struct SweepPoint {
  std::string scenario;
  std::size_t M = 0;
  double tau_multiple = 0.0;
  MissingConfig missing;
  std::uint64_t seed = 0;
};

}  // namespace

std::string cmd_sweep(const RunConfig& cfg) {
  const auto& sw = cfg.sweep;
  const Graph g = build_graph(cfg);
  std::vector<std::uint64_t> seeds = sw.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : sw.seeds;
  std::vector<std::size_t> Ms = sw.clients;
  if (sw.kind == "clients" && Ms.empty())
    for (std::size_t M = 2; M <= sw.max_clients; ++M) Ms.push_back(M);
  if (sw.kind == "clients" && Ms.empty()) throw ValidationError("sweep: no client counts to run");
  if (sw.kind == "tau" && sw.tau.empty()) throw ValidationError("sweep: tau list is empty");
  if (sw.kind == "missing" && (sw.client_ratios.empty() || sw.node_missing_ratios.empty()))
    throw ValidationError("sweep: missing-ratio grid is empty");

  std::vector<SweepPoint> points;
  for (auto seed : seeds) {
    const std::string tag = ";seed=" + std::to_string(seed);
    if (sw.kind == "clients") {
      for (auto M : Ms) points.push_back({"sweep=clients" + tag, M, 0.0, cfg.missing, seed});
    } else if (sw.kind == "tau") {
      for (double t : sw.tau)
        points.push_back({"sweep=tau;tau_multiple=" + format_double(t) + tag, cfg.clients, t,
                          cfg.missing, seed});
    } else {
      for (double cr : sw.client_ratios)
        for (double nmr : sw.node_missing_ratios)
          points.push_back({"sweep=missing;client_ratio=" + format_double(cr) +
                                ";node_missing_ratio=" + format_double(nmr) + tag,
                            cfg.clients, 0.0, MissingConfig{cr, nmr, cfg.missing.corrupt_targets},
                            seed});
    }
  }

  // Trajectories are shared between points; build them once up front.
  std::map<std::pair<double, std::uint64_t>, Trajectory> trajectories;
  std::map<double, ModelSpec> specs;
  for (const auto& p : points) {
    const auto key = std::make_pair(p.tau_multiple, p.seed);
    if (trajectories.count(key)) continue;
    if (!specs.count(p.tau_multiple)) specs.emplace(p.tau_multiple, resolve_epidemic(cfg, g, p.tau_multiple));
    trajectories.emplace(key, run_simulation(cfg, g, specs.at(p.tau_multiple),
                                             plan_seeds(cfg, p.seed).simulation));
  }

  std::vector<ScenarioOutcome> outcomes(points.size());
  parallel_for(points.size(), sw.workers, [&](std::size_t i) {
    const auto& p = points[i];
    RunConfig local = cfg;
    if (sw.workers > 1) local.training.federation.workers = 1;
    outcomes[i] = run_scenario(local, g, trajectories.at({p.tau_multiple, p.seed}), p.M, p.missing,
                               plan_seeds(cfg, p.seed));
  });

  const std::string variant = to_string(specs.begin()->second.variant);
  std::vector<SummaryRow> rows, client_rows;
  std::map<std::pair<std::uint64_t, std::string>, std::vector<double>> alpha_by_seed;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    std::string scenario = p.scenario;
    if (sw.kind == "tau")
      scenario += ";tau=" + format_double(specs.at(p.tau_multiple).effective_rate());
    const SummaryRow base{scenario, to_string(cfg.model.architecture), aggregation_label(cfg),
                          partition_label(cfg), variant, outcomes[i].M, "", 0.0};
    for (const auto& metric : sw.metrics) {
      std::vector<double> values;
      for (const auto& c : outcomes[i].clients) {
        SummaryRow r = base;
        r.scenario += ";client=" + std::to_string(c.client);
        r.metric = metric;
        r.value = metric_value(c.test, metric);
        values.push_back(r.value);
        client_rows.push_back(r);
      }
      SummaryRow r = base;
      r.metric = metric;
      r.value = mean_client_metric(values);
      rows.push_back(r);
      alpha_by_seed[{p.seed, metric}].push_back(r.value);
    }
  }
  std::ostringstream report;
  if (sw.kind == "clients") {
    bool contiguous = Ms.size() >= 2 && Ms.front() == 2;
    for (std::size_t i = 1; i < Ms.size(); ++i) contiguous = contiguous && Ms[i] == Ms[i - 1] + 1;
    if (contiguous) {
      for (auto seed : seeds)
        for (const auto& metric : sw.metrics) {
          const double eta = efficacy_energy(alpha_by_seed.at({seed, metric}), sw.eta);
          rows.push_back({"sweep=clients;seed=" + std::to_string(seed),
                          to_string(cfg.model.architecture), aggregation_label(cfg),
                          partition_label(cfg), variant, Ms.back(), "eta_" + metric, eta});
          report << "seed " << seed << " eta_" << metric << ' ' << format_double(eta) << '\n';
        }
    }
  }

  std::string prov = provenance(cfg, "sweep", cfg.seed);
  if (sw.kind == "tau") prov += "\ntau_c=" + format_double(epidemic_threshold(g));
  const fs::path dir(cfg.output_dir);
  std::ostringstream main, per_client;
  write_summary(rows, main, prov);
  write_summary(client_rows, per_client, prov);
  write_file_atomic((dir / "sweep.csv").string(), main.str());
  write_file_atomic((dir / "sweep_clients.csv").string(), per_client.str());
  report << points.size() << " points, " << rows.size() << " rows\nwrote "
         << (dir / "sweep.csv").string();
  return report.str();
}

namespace {

std::map<std::string, std::string> scenario_fields(const std::string& scenario) {
  std::map<std::string, std::string> out;
  std::istringstream in(scenario);
  for (std::string item; std::getline(in, item, ';');) {
    const auto eq = item.find('=');
    if (eq != std::string::npos) out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

}  // namespace

std::string cmd_plotdata(const std::string& input, const std::string& family,
                         const std::string& metric, const std::string& out_path) {
  if (family != "violin" && family != "line")
    throw ValidationError("plot family must be 'violin' or 'line'");
  std::ifstream in(input);
  if (!in) throw ValidationError("cannot open results table '" + input + "'");
  std::vector<std::string> comments;
  {
    std::string line;
    while (in.peek() == '#' && std::getline(in, line)) comments.push_back(line);
    in.clear();
    in.seekg(0);
  }
  const auto rows = read_summary(in);

  struct Point {
    std::string series;
    double x;
    std::uint64_t seed;
    std::size_t client;
    double value;
  };
  std::vector<Point> points;
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    auto f = scenario_fields(r.scenario);
    if (!f.count("client")) continue;
    Point p{"all", static_cast<double>(r.M), 0, std::stoul(f.at("client")), r.value};
    if (f.count("seed")) p.seed = std::stoull(f.at("seed"));
    const std::string kind = f.count("sweep") ? f.at("sweep") : "";
    if (kind == "tau") {
      p.x = std::stod(f.at("tau_multiple"));
    } else if (kind == "missing") {
      p.x = std::stod(f.at("node_missing_ratio"));
      p.series = "client_ratio=" + f.at("client_ratio");
    }
    points.push_back(p);
  }
  if (points.empty()) throw ValidationError("no per-client '" + metric + "' rows in '" + input + "'");

  std::ostringstream o;
  for (const auto& c : comments) o << c << '\n';
  o << "# plotdata family=" << family << " metric=" << metric << '\n';
  if (family == "violin") {
    std::stable_sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
      return std::tie(a.series, a.x, a.seed, a.client) < std::tie(b.series, b.x, b.seed, b.client);
    });
    o << "series,x,seed,client,value\n";
    for (const auto& p : points)
      o << p.series << ',' << format_double(p.x) << ',' << p.seed << ',' << p.client << ','
        << format_double(p.value) << '\n';
  } else {
    std::map<std::pair<std::string, double>, std::vector<double>> groups;
    for (const auto& p : points) groups[{p.series, p.x}].push_back(p.value);
    o << "series,x,mean,min,max,count\n";
    for (const auto& [key, values] : groups) {
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      o << key.first << ',' << format_double(key.second) << ','
        << format_double(mean_client_metric(values)) << ',' << format_double(*lo) << ','
        << format_double(*hi) << ',' << values.size() << '\n';
    }
  }
  write_file_atomic(out_path, o.str());
  return "wrote " + std::to_string(points.size()) + " values to " + out_path;
}

std::string cmd_graph_info(const RunConfig& cfg) {
  const Graph g = build_graph(cfg);
  std::ostringstream r;
  r << "nodes " << g.n_nodes() << "\nedges " << g.n_edges() << "\nmean_degree "
    << format_double(g.mean_degree()) << "\nmax_degree " << g.max_degree() << "\ncomponents "
    << component_count(g) << "\nhash " << g.hash();
  if (g.n_edges() > 0) {
    const double lambda = spectral_radius(g);
    r << "\nspectral_radius " << format_double(lambda) << "\nepidemic_threshold "
      << format_double(1.0 / lambda);
  }
  return r.str();
}

}  // namespace epifed
