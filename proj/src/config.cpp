#include "epifed/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "epifed/epidemics.hpp"
#include "epifed/error.hpp"
#include "json.hpp"

namespace epifed {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// Reads keys of a JSON object and complains about any that were never looked at.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ValidationError("unknown config key '" + where_ + it.key() + "'");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ValidationError("config key '" + where_ + key + "' has the wrong type");
      }
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    if (const json* v = find(key)) {
      T x{};
      try {
        x = v->get<T>();
      } catch (const json::exception&) {
        throw ValidationError("config key '" + where_ + key + "' has the wrong type");
      }
      out = x;
    }
  }

  Reader child(const std::string& key) {
    static const json empty = json::object();
    const json* v = find(key);
    return Reader(v ? *v : empty, where_ + key + ".");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

RunConfig from_json(const json& root) {
  RunConfig c;
  Reader r(root, "");
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  r.get("cache_dir", c.cache_dir);
  {
    Reader g = r.child("graph");
    g.get("source", c.graph.source);
    g.get("path", c.graph.path);
    g.get("kind", c.graph.kind);
    g.get("n", c.graph.n);
    g.get("m", c.graph.m);
    g.get("p", c.graph.p);
    g.get("seed", c.graph.seed);
    g.get("top_k", c.graph.top_k);
  }
  {
    Reader e = r.child("epidemic");
    e.get("model", c.epidemic.model);
    if (const json* p = e.find("params")) {
      if (!p->is_object()) throw ValidationError("epidemic.params must be an object");
      c.epidemic.params.clear();
      for (auto it = p->begin(); it != p->end(); ++it) {
        if (!it->is_number()) throw ValidationError("epidemic.params." + it.key() + " must be a number");
        c.epidemic.params.emplace_back(it.key(), it->get<double>());
      }
    }
    e.get("tau", c.epidemic.tau);
    e.get("tau_over_threshold", c.epidemic.tau_over_threshold);
    e.get("init_fraction", c.epidemic.init_fraction);
    e.get("dt", c.epidemic.dt);
    e.get("t_max", c.epidemic.t_max);
    e.get("truncate", c.epidemic.truncate);
  }
  {
    Reader p = r.child("partition");
    std::string method = to_string(c.partition);
    p.get("method", method);
    c.partition = parse_partition_method(method);
    p.get("clients", c.clients);
  }
  {
    Reader m = r.child("model");
    std::string arch = to_string(c.model.architecture);
    m.get("architecture", arch);
    c.model.architecture = parse_architecture(arch);
    m.get("t_history", c.model.t_history);
    m.get("t_future", c.model.t_future);
    m.get("d_embed", c.model.d_embed);
    m.get("lstm_hidden", c.model.lstm_hidden);
    m.get("stgat_hidden1", c.model.stgat_hidden1);
    m.get("stgat_hidden2", c.model.stgat_hidden2);
    m.get("gat_heads", c.model.gat_heads);
    m.get("gat_head_dim", c.model.gat_head_dim);
    m.get("dropout", c.model.dropout);
  }
  {
    Reader t = r.child("training");
    auto& f = c.training.federation;
    t.get("scenario", c.training.scenario);
    std::string agg = to_string(f.method);
    t.get("aggregation", agg);
    f.method = parse_aggregation(agg);
    t.get("rounds", f.rounds);
    t.get("local_epochs", f.local_epochs);
    t.get("mu", f.mu);
    t.get("patience", f.patience);
    t.get("min_improvement", f.min_improvement);
    t.get("batch_size", f.train.batch_size);
    t.get("lr", f.train.lr);
    t.get("weight_decay", f.train.weight_decay);
    t.get("workers", f.workers);
  }
  {
    Reader s = r.child("splits");
    s.get("train", c.splits.train);
    s.get("val", c.splits.val);
    s.get("test", c.splits.test);
  }
  {
    Reader m = r.child("missing");
    m.get("client_ratio", c.missing.client_ratio);
    m.get("node_missing_ratio", c.missing.node_missing_ratio);
    m.get("corrupt_targets", c.missing.corrupt_targets);
  }
  {
    Reader s = r.child("sweep");
    s.get("kind", c.sweep.kind);
    s.get("clients", c.sweep.clients);
    s.get("max_clients", c.sweep.max_clients);
    s.get("tau", c.sweep.tau);
    s.get("client_ratios", c.sweep.client_ratios);
    s.get("node_missing_ratios", c.sweep.node_missing_ratios);
    s.get("seeds", c.sweep.seeds);
    s.get("metrics", c.sweep.metrics);
    std::string eta = "terms";
    s.get("eta", eta);
    if (eta == "terms") c.sweep.eta = EtaNormalization::TermCount;
    else if (eta == "typeset") c.sweep.eta = EtaNormalization::Typeset;
    else throw ValidationError("sweep.eta must be 'terms' or 'typeset'");
    s.get("workers", c.sweep.workers);
  }
  return c;
}

void set_path(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override '" + assignment + "' must look like key.path=value");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &root;
  std::istringstream in(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(in, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ValidationError("override '" + path + "' descends into a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ValidationError("override '" + path + "' descends into a non-object");
  (*node)[parts.back()] = value;
}

}  // namespace

void RunConfig::validate() const {
  if (graph.source != "synthetic" && graph.source != "file")
    throw ValidationError("graph.source must be 'synthetic' or 'file'");
  if (graph.source == "file" && graph.path.empty()) throw ValidationError("graph.path is required for file graphs");
  if (graph.source == "synthetic") {
    parse_synthetic_kind(graph.kind);
    if (graph.n == 0) throw ValidationError("graph.n must be positive");
  }
  if (epidemic.tau && epidemic.tau_over_threshold)
    throw ValidationError("set at most one of epidemic.tau and epidemic.tau_over_threshold");
  if (!(epidemic.dt > 0.0) || !(epidemic.t_max > 0.0))
    throw ValidationError("epidemic.dt and epidemic.t_max must be positive");
  if (!(epidemic.init_fraction > 0.0 && epidemic.init_fraction <= 1.0))
    throw ValidationError("epidemic.init_fraction must lie in (0, 1]");
  ModelSpec::from_parameters(parse_variant(epidemic.model), epidemic.params).validate();
  if (clients == 0) throw ValidationError("partition.clients must be positive");
  if (!(splits.train > 0.0 && splits.val > 0.0 && splits.test > 0.0) ||
      std::abs(splits.train + splits.val + splits.test - 1.0) > 1e-9)
    throw ValidationError("splits must be positive and sum to 1");
  model.validate();
  training.federation.validate();
  const auto& s = training.scenario;
  if (s != "federated" && s != "solo" && s != "centralized")
    throw ValidationError("training.scenario must be federated, solo or centralized");
  if (sweep.kind != "clients" && sweep.kind != "tau" && sweep.kind != "missing")
    throw ValidationError("sweep.kind must be clients, tau or missing");
  for (const auto& m : sweep.metrics)
    if (m != "acc" && m != "f1" && m != "ce" && m != "inv_ce" && m != "rmse" && m != "mae")
      throw ValidationError("unknown sweep metric '" + m + "'");
  if (sweep.workers == 0) throw ValidationError("sweep.workers must be positive");
}

RunConfig parse_config(const std::string& json_text) { return parse_config(json_text, {}); }

RunConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides) {
  json root = json::parse(json_text.empty() ? std::string("{}") : json_text, nullptr, false);
  if (root.is_discarded()) throw ValidationError("config is not valid JSON");
  for (const auto& o : overrides) set_path(root, o);
  RunConfig c = from_json(root);
  c.validate();
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["graph"] = {{"source", c.graph.source}, {"path", c.graph.path}, {"kind", c.graph.kind},
                {"n", c.graph.n}, {"m", c.graph.m}, {"p", c.graph.p},
                {"seed", c.graph.seed ? ordered_json(*c.graph.seed) : ordered_json(nullptr)},
                {"top_k", c.graph.top_k}};
  ordered_json params = ordered_json::object();
  for (const auto& [k, v] : c.epidemic.params) params[k] = v;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  j["epidemic"] = {{"model", c.epidemic.model}, {"params", params}, {"tau", opt(c.epidemic.tau)},
                   {"tau_over_threshold", opt(c.epidemic.tau_over_threshold)},
                   {"init_fraction", c.epidemic.init_fraction}, {"dt", c.epidemic.dt},
                   {"t_max", c.epidemic.t_max}, {"truncate", c.epidemic.truncate}};
  j["partition"] = {{"method", to_string(c.partition)}, {"clients", c.clients}};
  const auto& m = c.model;
  j["model"] = {{"architecture", to_string(m.architecture)}, {"t_history", m.t_history},
                {"t_future", m.t_future}, {"d_embed", m.d_embed}, {"lstm_hidden", m.lstm_hidden},
                {"stgat_hidden1", m.stgat_hidden1}, {"stgat_hidden2", m.stgat_hidden2},
                {"gat_heads", m.gat_heads}, {"gat_head_dim", m.gat_head_dim},
                {"dropout", m.dropout}};
  const auto& f = c.training.federation;
  j["training"] = {{"scenario", c.training.scenario}, {"aggregation", to_string(f.method)},
                   {"rounds", f.rounds}, {"local_epochs", f.local_epochs}, {"mu", f.mu},
                   {"patience", f.patience}, {"min_improvement", f.min_improvement},
                   {"batch_size", f.train.batch_size}, {"lr", f.train.lr},
                   {"weight_decay", f.train.weight_decay}, {"workers", f.workers}};
  j["splits"] = {{"train", c.splits.train}, {"val", c.splits.val}, {"test", c.splits.test}};
  j["missing"] = {{"client_ratio", c.missing.client_ratio},
                  {"node_missing_ratio", c.missing.node_missing_ratio},
                  {"corrupt_targets", c.missing.corrupt_targets}};
  j["sweep"] = {{"kind", c.sweep.kind}, {"clients", c.sweep.clients},
                {"max_clients", c.sweep.max_clients}, {"tau", c.sweep.tau},
                {"client_ratios", c.sweep.client_ratios},
                {"node_missing_ratios", c.sweep.node_missing_ratios}, {"seeds", c.sweep.seeds},
                {"metrics", c.sweep.metrics},
                {"eta", c.sweep.eta == EtaNormalization::TermCount ? "terms" : "typeset"},
                {"workers", c.sweep.workers}};
  j["output_dir"] = c.output_dir;
  j["cache_dir"] = c.cache_dir;
  return j.dump();
}

}  // namespace epifed
