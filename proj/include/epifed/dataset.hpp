#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "epifed/epidemics.hpp"

namespace epifed {

/// Dense class index per compartment code (255 for codes the variant never
/// produces). Classes follow the variant's compartments in ascending code
/// order, so S is always class 0 and I class 1.
std::vector<std::uint8_t> class_map(const ModelSpec& model);
std::size_t n_classes(const ModelSpec& model);
inline constexpr std::uint8_t kSusceptibleClass = 0;
inline constexpr std::uint8_t kInfectedClass = 1;

/// Sliding windows over one client's trajectory. Window k holds inputs
/// [n_nodes x t_history] and targets [n_nodes x t_future], node-major, as class
/// indices.
struct WindowDataset {
  std::size_t client = 0;
  std::size_t n_nodes = 0;
  std::size_t t_history = 0;
  std::size_t t_future = 0;
  std::size_t n_windows = 0;
  std::size_t first_window = 0;  // index of window 0 in the source sequence
  std::vector<std::uint8_t> inputs;
  std::vector<std::uint8_t> targets;

  std::size_t input_stride() const { return n_nodes * t_history; }
  std::size_t target_stride() const { return n_nodes * t_future; }
  std::span<const std::uint8_t> input(std::size_t k) const {
    return {inputs.data() + k * input_stride(), input_stride()};
  }
  std::span<const std::uint8_t> target(std::size_t k) const {
    return {targets.data() + k * target_stride(), target_stride()};
  }
  /// Windows [begin, end).
  WindowDataset slice(std::size_t begin, std::size_t end) const;
  bool operator==(const WindowDataset&) const = default;
};

/// Window k covers samples [k*stride, k*stride + t_history) with targets the
/// following t_future samples.
WindowDataset make_windows(const Trajectory& tr, std::size_t t_history, std::size_t t_future,
                           std::size_t stride = 1, std::size_t client = 0);

struct SplitFractions {
  double train = 0.20;
  double val = 0.10;
  double test = 0.70;
};

struct ClientSplits {
  WindowDataset train, val, test;
};

/// Chronological split: floor(train*W), floor(val*W), remainder to test.
ClientSplits chrono_split(const WindowDataset& windows, SplitFractions f = {});

/// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffle_order(std::size_t n, std::uint64_t seed);
/// Windows of `train` reordered by shuffle_order(n, seed).
WindowDataset shuffle_train(const WindowDataset& train, std::uint64_t seed);

struct MissingReport {
  std::size_t client = 0;
  std::size_t infected_cells = 0;
  std::size_t flipped = 0;
};

/// Replaces a share of infected cells with susceptible in the train and val
/// splits of ceil(client_ratio * M) seeded clients. Test splits are untouched.
/// With corrupt_targets false only input cells are eligible.
std::vector<MissingReport> inject_missing(std::vector<ClientSplits>& clients, double client_ratio,
                                          double node_missing_ratio, std::uint64_t seed,
                                          bool corrupt_targets = true);

/// Predicts that every node keeps its last observed class for all horizon steps.
std::vector<std::uint8_t> persistence_predictions(const WindowDataset& d);

}  // namespace epifed
