#include "epifed/fedlearn.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <ostream>
#include <sstream>

#include "epifed/error.hpp"
#include "epifed/parallel.hpp"
#include "epifed/rng.hpp"

namespace epifed {

std::string to_string(Aggregation a) { return a == Aggregation::FedAvg ? "fedavg" : "fedprox"; }

Aggregation parse_aggregation(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "fedavg") return Aggregation::FedAvg;
  if (s == "fedprox") return Aggregation::FedProx;
  throw ValidationError("unknown aggregation '" + name + "' (expected fedavg or fedprox)");
}

void FederationConfig::validate() const {
  if (rounds == 0) throw ValidationError("federation: rounds must be positive");
  if (local_epochs == 0) throw ValidationError("federation: local_epochs must be positive");
  if (!(mu >= 0.0)) throw ValidationError("federation: mu must be non-negative");
  if (patience == 0) throw ValidationError("federation: patience must be positive");
  if (train.batch_size == 0) throw ValidationError("federation: batch size must be positive");
  if (!(train.lr >= 0.0) || !(train.weight_decay >= 0.0))
    throw ValidationError("federation: lr and weight decay must be non-negative");
}

ParamSet aggregate(std::span<const ParamSet* const> locals, std::span<const double> weights) {
  if (locals.empty() || locals.size() != weights.size())
    throw ValidationError("aggregate: need one weight per local model");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ValidationError("aggregate: weights must be positive");
    total += w;
  }
  for (const auto* p : locals)
    if (!p->congruent(*locals.front())) throw ValidationError("aggregate: incongruent parameter sets");
  ParamSet out = *locals.front();
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto dst = out.at(k).data();
    const double w0 = weights[0] / total;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = w0 * dst[i];
    for (std::size_t c = 1; c < locals.size(); ++c) {
      const double w = weights[c] / total;
      auto src = locals[c]->at(k).data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
    }
  }
  return out;
}

ModelState aggregate(std::span<const ModelState* const> locals, std::span<const double> weights) {
  std::vector<const ParamSet*> p, b;
  for (const auto* s : locals) {
    p.push_back(&s->params);
    b.push_back(&s->buffers);
  }
  ModelState out;
  out.params = aggregate(p, weights);
  if (!locals.empty() && !locals.front()->buffers.empty()) out.buffers = aggregate(b, weights);
  return out;
}

double client_weight(const ClientData& c) {
  return static_cast<double>(c.data.train.n_windows * c.data.train.n_nodes);
}

Evaluation evaluate(const ModelConfig& model, const ModelState& state, const WindowDataset& d,
                    const AttentionGraph* graph) {
  Evaluation e;
  const Matrix logits = predict_logits(model, state, d, graph);
  e.metrics = classification_metrics(logits, d.targets);
  e.predictions = predict(logits);
  e.prevalence = prevalence_errors(e.predictions, d.targets, d.n_nodes, d.t_future, kInfectedClass);
  return e;
}

FederationResult run_federated(const ModelConfig& model, const std::vector<ClientData>& all_clients,
                               const FederationConfig& cfg, std::uint64_t seed,
                               bool keep_round_models) {
  model.validate();
  cfg.validate();
  FederationResult result;
  std::vector<const ClientData*> clients;
  for (const auto& c : all_clients) {
    if (c.data.train.n_windows == 0 || c.data.train.n_nodes == 0) {
      result.warnings.push_back("client " + std::to_string(c.id) + " has no training data; excluded");
      continue;
    }
    clients.push_back(&c);
  }
  if (clients.empty()) throw ValidationError("federation: no client has training data");
  const std::size_t M = clients.size();
  std::vector<double> weights(M);
  double weight_total = 0.0;
  for (std::size_t i = 0; i < M; ++i) weight_total += weights[i] = client_weight(*clients[i]);

  ModelState global = init_model(model, derive_seed(seed, 0));
  std::vector<AdamState> adam;
  std::vector<std::uint64_t> client_seed;
  for (const auto* c : clients) {
    adam.push_back(AdamState::for_params(global.params, cfg.train.lr, cfg.train.weight_decay));
    client_seed.push_back(derive_seed(derive_seed(seed, 1), c->id));
  }
  TrainConfig local_cfg = cfg.train;
  local_cfg.epochs = cfg.local_epochs;
  const bool prox = cfg.method == Aggregation::FedProx;

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  result.model = global;
  std::vector<ModelState> locals(M);
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(M, cfg.workers, [&](std::size_t i) {
      locals[i] = global;
      Proximal p{&global.params, cfg.mu};
      train_local(model, locals[i], adam[i], clients[i]->data.train, &clients[i]->graph, local_cfg,
                  client_seed[i], round * cfg.local_epochs, prox ? &p : nullptr);
    });
    std::vector<const ModelState*> ptrs;
    for (const auto& l : locals) ptrs.push_back(&l);
    global = aggregate(ptrs, weights);
    if (keep_round_models) result.round_models.push_back(global);

    std::vector<ClassificationMetrics> val(M);
    parallel_for(M, cfg.workers, [&](std::size_t i) {
      val[i] = evaluate(model, global, clients[i]->data.val, &clients[i]->graph).metrics;
    });
    double val_ce = 0.0;
    for (std::size_t i = 0; i < M; ++i) val_ce += weights[i] / weight_total * val[i].ce;
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t i = 0; i < M; ++i)
      result.logs.push_back({round, clients[i]->id, val[i].ce, val[i].accuracy, val[i].macro_f1,
                             val_ce, wall});
    result.rounds_run = round + 1;
    if (val_ce < best - cfg.min_improvement) {
      best = val_ce;
      result.model = global;
      result.best_round = round;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

FederationResult run_solo(const ModelConfig& model, const ClientData& client,
                          const FederationConfig& cfg, std::uint64_t seed) {
  return run_federated(model, {client}, cfg, seed);
}

FederationResult run_centralized(const ModelConfig& model, const ClientData& whole,
                                 const FederationConfig& cfg, std::uint64_t seed) {
  ClientData c = whole;
  c.id = 0;
  return run_federated(model, {c}, cfg, seed);
}

void write_round_logs(std::span<const RoundLog> logs, std::ostream& out,
                      const std::string& provenance) {
  std::istringstream prov(provenance);
  for (std::string line; std::getline(prov, line);) out << "# " << line << '\n';
  out << "round,client,ce,acc,f1,val_ce_global\n";
  for (const auto& l : logs)
    out << l.round << ',' << l.client << ',' << format_double(l.ce) << ',' << format_double(l.acc)
        << ',' << format_double(l.f1) << ',' << format_double(l.val_ce_global) << '\n';
}

}  // namespace epifed
