#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epifed/config.hpp"
#include "epifed/epidemics.hpp"
#include "epifed/fedlearn.hpp"

namespace epifed {

/// Independent seeds for each stage of a run.
struct SeedPlan {
  std::uint64_t graph = 0;
  std::uint64_t simulation = 0;
  std::uint64_t partition = 0;
  std::uint64_t training = 0;
  std::uint64_t missing = 0;
};
SeedPlan plan_seeds(const RunConfig& cfg, std::uint64_t seed);

/// Provenance text: command, resolved config and stage seeds, one item per line.
std::string provenance(const RunConfig& cfg, const std::string& command, std::uint64_t seed);

Graph build_graph(const RunConfig& cfg);

/// Epidemic process for the graph. An effective-rate setting rescales the
/// infection parameter; `tau_multiple` (when > 0) overrides the config with a
/// multiple of the mean-field threshold.
ModelSpec resolve_epidemic(const RunConfig& cfg, const Graph& g, double tau_multiple = 0.0);

/// Simulates (or loads from cfg.cache_dir) the trajectory; applies dynamic
/// truncation when configured.
Trajectory run_simulation(const RunConfig& cfg, const Graph& g, const ModelSpec& spec,
                          std::uint64_t sim_seed);

std::vector<ClientData> build_clients(const RunConfig& cfg, const Graph& g, const Trajectory& tr,
                                      const PartitionAssignment& p);
ClientData build_whole(const RunConfig& cfg, const Graph& g, const Trajectory& tr);

struct ClientOutcome {
  std::size_t client = 0;
  Evaluation test;
  double persistence_accuracy = 0.0;
};

struct ScenarioOutcome {
  std::string scenario;
  std::size_t M = 0;
  std::vector<ClientOutcome> clients;
  std::vector<RoundLog> logs;
  std::vector<std::pair<std::string, ModelState>> models;  // name -> checkpoint
  std::vector<std::string> warnings;
};

/// Trains the configured scenario with M clients (ignored for centralized)
/// and evaluates every client's test split.
ScenarioOutcome run_scenario(const RunConfig& cfg, const Graph& g, const Trajectory& tr,
                             std::size_t M, const MissingConfig& missing, const SeedPlan& seeds);

/// acc | f1 | ce | inv_ce | rmse | mae
double metric_value(const Evaluation& e, const std::string& metric);

// Command pipelines. Each writes its outputs and returns a short report.
std::string cmd_simulate(const RunConfig& cfg, const std::string& out_path);
std::string cmd_partition(const RunConfig& cfg, const std::string& out_path);
std::string cmd_train(const RunConfig& cfg);
std::string cmd_sweep(const RunConfig& cfg);
/// family: violin | line. Reads a per-client sweep table.
std::string cmd_plotdata(const std::string& input, const std::string& family,
                         const std::string& metric, const std::string& out_path);
std::string cmd_graph_info(const RunConfig& cfg);

/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace epifed
