#include "epifed/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "epifed/error.hpp"
#include "epifed/rng.hpp"

namespace epifed {

std::vector<std::uint8_t> class_map(const ModelSpec& model) {
  std::vector<std::uint8_t> map(5, 255);
  std::uint8_t next = 0;
  for (auto c : model.compartments()) map[code(c)] = next++;
  return map;
}

std::size_t n_classes(const ModelSpec& model) { return model.compartments().size(); }

WindowDataset WindowDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > n_windows) throw ValidationError("window slice out of range");
  WindowDataset d = *this;
  d.n_windows = end - begin;
  d.first_window = first_window + begin;
  d.inputs.assign(inputs.begin() + static_cast<std::ptrdiff_t>(begin * input_stride()),
                  inputs.begin() + static_cast<std::ptrdiff_t>(end * input_stride()));
  d.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(begin * target_stride()),
                   targets.begin() + static_cast<std::ptrdiff_t>(end * target_stride()));
  return d;
}

WindowDataset make_windows(const Trajectory& tr, std::size_t t_history, std::size_t t_future,
                           std::size_t stride, std::size_t client) {
  if (t_history == 0 || t_future == 0 || stride == 0)
    throw ValidationError("window lengths and stride must be positive");
  const std::size_t T = tr.n_samples();
  if (T < t_history + t_future)
    throw ValidationError("trajectory has " + std::to_string(T) + " samples, windows need " +
                          std::to_string(t_history + t_future));
  const auto map = class_map(tr.model());
  WindowDataset d;
  d.client = client;
  d.n_nodes = tr.n_nodes();
  d.t_history = t_history;
  d.t_future = t_future;
  d.n_windows = (T - t_history - t_future) / stride + 1;
  d.inputs.resize(d.n_windows * d.input_stride());
  d.targets.resize(d.n_windows * d.target_stride());
  for (std::size_t k = 0; k < d.n_windows; ++k) {
    const std::size_t s0 = k * stride;
    for (std::size_t n = 0; n < d.n_nodes; ++n) {
      for (std::size_t s = 0; s < t_history; ++s)
        d.inputs[k * d.input_stride() + n * t_history + s] = map[tr.state(s0 + s, n)];
      for (std::size_t s = 0; s < t_future; ++s)
        d.targets[k * d.target_stride() + n * t_future + s] = map[tr.state(s0 + t_history + s, n)];
    }
  }
  return d;
}

ClientSplits chrono_split(const WindowDataset& w, SplitFractions f) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || f.train + f.val > 1.0 + 1e-12)
    throw ValidationError("split fractions must be non-negative and sum to at most 1");
  const double W = static_cast<double>(w.n_windows);
  const auto n_train = static_cast<std::size_t>(std::floor(f.train * W + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(f.val * W + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= w.n_windows)
    throw ValidationError("chronological split of " + std::to_string(w.n_windows) +
                          " windows leaves an empty split");
  return {w.slice(0, n_train), w.slice(n_train, n_train + n_val),
          w.slice(n_train + n_val, w.n_windows)};
}

std::vector<std::size_t> shuffle_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

WindowDataset shuffle_train(const WindowDataset& train, std::uint64_t seed) {
  const auto order = shuffle_order(train.n_windows, seed);
  WindowDataset d = train;
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::copy_n(train.inputs.begin() + static_cast<std::ptrdiff_t>(order[k] * train.input_stride()),
                train.input_stride(),
                d.inputs.begin() + static_cast<std::ptrdiff_t>(k * train.input_stride()));
    std::copy_n(train.targets.begin() + static_cast<std::ptrdiff_t>(order[k] * train.target_stride()),
                train.target_stride(),
                d.targets.begin() + static_cast<std::ptrdiff_t>(k * train.target_stride()));
  }
  return d;
}

std::vector<MissingReport> inject_missing(std::vector<ClientSplits>& clients, double client_ratio,
                                          double node_missing_ratio, std::uint64_t seed,
                                          bool corrupt_targets) {
  if (!(client_ratio >= 0.0 && client_ratio <= 1.0) ||
      !(node_missing_ratio >= 0.0 && node_missing_ratio <= 1.0))
    throw ValidationError("missing-report ratios must lie in [0, 1]");
  std::vector<MissingReport> reports;
  const std::size_t M = clients.size();
  if (M == 0 || node_missing_ratio == 0.0 || client_ratio == 0.0) return reports;
  const auto n_corrupt = std::min(
      M, static_cast<std::size_t>(std::ceil(client_ratio * static_cast<double>(M) - 1e-9)));
  auto order = shuffle_order(M, derive_seed(seed, 0));
  order.resize(n_corrupt);
  std::sort(order.begin(), order.end());
  for (auto m : order) {
    auto& c = clients[m];
    std::vector<std::uint8_t*> cells;
    auto collect = [&](std::vector<std::uint8_t>& v) {
      for (auto& x : v)
        if (x == kInfectedClass) cells.push_back(&x);
    };
    collect(c.train.inputs);
    if (corrupt_targets) collect(c.train.targets);
    collect(c.val.inputs);
    if (corrupt_targets) collect(c.val.targets);
    const auto n_flip = static_cast<std::size_t>(
        std::llround(node_missing_ratio * static_cast<double>(cells.size())));
    Rng rng(derive_seed(seed, 1 + m));
    for (std::size_t i = 0; i < n_flip; ++i) {
      const auto j = i + rng.below(cells.size() - i);
      std::swap(cells[i], cells[j]);
      *cells[i] = kSusceptibleClass;
    }
    reports.push_back({m, cells.size(), n_flip});
  }
  return reports;
}

std::vector<std::uint8_t> persistence_predictions(const WindowDataset& d) {
  std::vector<std::uint8_t> out(d.n_windows * d.target_stride());
  for (std::size_t k = 0; k < d.n_windows; ++k)
    for (std::size_t n = 0; n < d.n_nodes; ++n) {
      const auto last = d.inputs[k * d.input_stride() + n * d.t_history + d.t_history - 1];
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(k * d.target_stride() + n * d.t_future),
                  d.t_future, last);
    }
  return out;
}

}  // namespace epifed
