#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "epifed/dataset.hpp"
#include "epifed/metrics.hpp"
#include "epifed/models.hpp"

namespace epifed {

enum class Aggregation { FedAvg, FedProx };
std::string to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& name);

struct FederationConfig {
  Aggregation method = Aggregation::FedAvg;
  std::size_t rounds = 200;
  std::size_t local_epochs = 5;
  double mu = 0.01;  // FedProx only
  std::size_t patience = 20;
  double min_improvement = 1e-5;
  TrainConfig train;  // epochs is replaced by local_epochs
  std::size_t workers = 1;

  void validate() const;
};

/// One client's private data and the subgraph its STGAT attends over.
struct ClientData {
  std::size_t id = 0;
  ClientSplits data;
  AttentionGraph graph;
};

struct RoundLog {
  std::size_t round = 0;
  std::size_t client = 0;
  double ce = 0.0;   // global model on this client's validation split
  double acc = 0.0;
  double f1 = 0.0;
  double val_ce_global = 0.0;  // weighted mean over clients
  double wall_seconds = 0.0;   // not part of equality or the CSV

  bool operator==(const RoundLog& o) const {
    return round == o.round && client == o.client && ce == o.ce && acc == o.acc && f1 == o.f1 &&
           val_ce_global == o.val_ce_global;
  }
};

struct FederationResult {
  ModelState model;          // best global model by validation CE
  std::vector<RoundLog> logs;
  std::vector<ModelState> round_models;  // global model after each round when requested
  std::size_t best_round = 0;
  std::size_t rounds_run = 0;
  bool early_stopped = false;
  std::vector<std::string> warnings;
};

/// Weighted mean sum_i (w_i / sum w) * theta_i accumulated in list order.
ParamSet aggregate(std::span<const ParamSet* const> locals, std::span<const double> weights);
ModelState aggregate(std::span<const ModelState* const> locals, std::span<const double> weights);

/// Aggregation weight of a client: training windows times node count.
double client_weight(const ClientData& c);

/// Federated rounds over the clients. Each round broadcasts the global model,
/// trains every client locally (FedProx adds the proximal pull), aggregates, and
/// evaluates on the validation splits; training stops after `patience` rounds
/// without improvement of the weighted validation CE.
FederationResult run_federated(const ModelConfig& model, const std::vector<ClientData>& clients,
                               const FederationConfig& cfg, std::uint64_t seed,
                               bool keep_round_models = false);

/// The same loop for a single client without aggregation.
FederationResult run_solo(const ModelConfig& model, const ClientData& client,
                          const FederationConfig& cfg, std::uint64_t seed);

/// One model on the whole network; `whole` holds the full graph and data.
FederationResult run_centralized(const ModelConfig& model, const ClientData& whole,
                                 const FederationConfig& cfg, std::uint64_t seed);

struct Evaluation {
  ClassificationMetrics metrics;
  PrevalenceErrors prevalence;
  std::vector<std::uint8_t> predictions;
};

Evaluation evaluate(const ModelConfig& model, const ModelState& state, const WindowDataset& d,
                    const AttentionGraph* graph);

/// CSV `round,client,ce,acc,f1,val_ce_global`.
void write_round_logs(std::span<const RoundLog> logs, std::ostream& out,
                      const std::string& provenance = {});

}  // namespace epifed
