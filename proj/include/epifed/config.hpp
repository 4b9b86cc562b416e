#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epifed/dataset.hpp"
#include "epifed/fedlearn.hpp"
#include "epifed/graph.hpp"
#include "epifed/metrics.hpp"
#include "epifed/models.hpp"
#include "epifed/partition.hpp"

namespace epifed {

struct GraphConfig {
  std::string source = "synthetic";  // synthetic | file
  std::string path;
  std::string kind = "ba";
  std::size_t n = 200;
  std::size_t m = 1;
  double p = 0.05;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
  std::size_t top_k = 0;              // keep the top-k degree nodes when > 0
};

struct EpidemicConfig {
  std::string model = "sis";
  std::vector<std::pair<std::string, double>> params = {{"beta", 0.5}, {"delta", 1.0}};
  std::optional<double> tau;                  // absolute effective rate
  std::optional<double> tau_over_threshold;   // multiple of 1/lambda1
  double init_fraction = 0.05;
  double dt = 0.05;
  double t_max = 15.0;
  bool truncate = false;
};

struct TrainingConfig {
  std::string scenario = "federated";  // federated | solo | centralized
  FederationConfig federation;
};

struct MissingConfig {
  double client_ratio = 0.0;
  double node_missing_ratio = 0.0;
  bool corrupt_targets = true;
};

struct SweepConfig {
  std::string kind = "clients";  // clients | tau | missing
  std::vector<std::size_t> clients;     // default 2..max_clients
  std::size_t max_clients = 4;
  std::vector<double> tau;              // multiples of the threshold
  std::vector<double> client_ratios;
  std::vector<double> node_missing_ratios;
  std::vector<std::uint64_t> seeds;     // default {run seed}
  std::vector<std::string> metrics = {"acc"};
  EtaNormalization eta = EtaNormalization::TermCount;
  std::size_t workers = 1;
};

struct RunConfig {
  std::uint64_t seed = 1;
  GraphConfig graph;
  EpidemicConfig epidemic;
  PartitionMethod partition = PartitionMethod::EvenIndex;
  std::size_t clients = 4;
  ModelConfig model;
  TrainingConfig training;
  SplitFractions splits;
  MissingConfig missing;
  SweepConfig sweep;
  std::string output_dir = "out";
  std::string cache_dir;  // trajectory cache; disabled when empty

  void validate() const;
};

/// Parses a JSON document. Unknown keys are rejected so typos surface early.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);
/// Applies `dotted.key=value` overrides (value parsed as JSON, falling back to
/// a plain string) on top of a JSON document, then parses it.
RunConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides);
/// Fully resolved config as single-line JSON with stable key order.
std::string config_to_json(const RunConfig& cfg);

}  // namespace epifed
