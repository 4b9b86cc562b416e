#include "epifed/partition.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "epifed/error.hpp"
#include "epifed/rng.hpp"

namespace epifed {

std::string to_string(PartitionMethod m) {
  switch (m) {
    case PartitionMethod::EvenIndex: return "even-index";
    case PartitionMethod::Spectral: return "spectral";
    case PartitionMethod::KernighanLin: return "kernighan-lin";
  }
  return "?";
}

PartitionMethod parse_partition_method(const std::string& name) {
  if (name == "even-index" || name == "even") return PartitionMethod::EvenIndex;
  if (name == "spectral") return PartitionMethod::Spectral;
  if (name == "kernighan-lin" || name == "kl") return PartitionMethod::KernighanLin;
  throw ValidationError("unknown partition method '" + name + "'");
}

std::vector<std::size_t> PartitionAssignment::sizes() const {
  std::vector<std::size_t> s(n_clients, 0);
  for (auto c : client) ++s.at(static_cast<std::size_t>(c));
  return s;
}

std::vector<NodeId> PartitionAssignment::members(std::size_t m) const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < client.size(); ++i)
    if (static_cast<std::size_t>(client[i]) == m) out.push_back(static_cast<NodeId>(i));
  return out;
}

void PartitionAssignment::validate(std::size_t n_nodes) const {
  if (client.size() != n_nodes) throw ValidationError("partition: node count mismatch");
  std::vector<std::size_t> s(n_clients, 0);
  for (auto c : client) {
    if (c < 0 || static_cast<std::size_t>(c) >= n_clients)
      throw ValidationError("partition: client index out of range");
    ++s[static_cast<std::size_t>(c)];
  }
  for (auto v : s)
    if (v == 0) throw ValidationError("partition: empty client");
}

namespace {

void check_client_count(const Graph& g, std::size_t m, std::size_t minimum) {
  if (m < minimum || m > g.n_nodes())
    throw ValidationError("partition: client count must lie in [" + std::to_string(minimum) +
                          ", n_nodes]");
}

}  // namespace

PartitionAssignment even_by_index(const Graph& g, std::size_t n_clients) {
  check_client_count(g, n_clients, 2);
  const std::size_t n = g.n_nodes();
  const std::size_t base = n / n_clients, extra = n % n_clients;
  PartitionAssignment p{std::vector<std::int32_t>(n), n_clients, PartitionMethod::EvenIndex};
  std::size_t node = 0;
  for (std::size_t m = 0; m < n_clients; ++m) {
    const std::size_t size = base + (m < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) p.client[node++] = static_cast<std::int32_t>(m);
  }
  return p;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Eigenvectors of the k smallest eigenvalues of L = D - A, as columns.
Eigen::MatrixXd laplacian_embedding(const Graph& g, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(g.n_nodes());
  if (n <= 2000) {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (auto [a, b] : g.edges()) {
      lap(a, b) = lap(b, a) = -1.0;
      lap(a, a) += 1.0;
      lap(b, b) += 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    if (solver.info() != Eigen::Success)
      throw ConvergenceError("spectral_clustering: eigen-solve failed");
    return solver.eigenvectors().leftCols(static_cast<Eigen::Index>(k));
  }
  // Subspace iteration on (c I - L), whose dominant eigenvectors are the
  // smallest of L; c bounds the Laplacian spectrum by Gershgorin.
  const double c = 2.0 * static_cast<double>(g.max_degree()) + 1.0;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(k));
  Rng rng(0x5eed);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd y(n, static_cast<Eigen::Index>(k));
  Eigen::VectorXd previous = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  for (int it = 0; it < 20000; ++it) {
    for (Eigen::Index col = 0; col < q.cols(); ++col)
      for (Eigen::Index i = 0; i < n; ++i) {
        double s = (c - static_cast<double>(g.degree(static_cast<NodeId>(i)))) * q(i, col);
        for (auto j : g.neighbors(static_cast<NodeId>(i))) s += q(j, col);
        y(i, col) = s;
      }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, q.cols());
    Eigen::VectorXd ritz = qr.matrixQR().diagonal().cwiseAbs();
    if (it > 10 && (ritz - previous).cwiseAbs().maxCoeff() < 1e-10 * c) return q;
    previous = ritz;
  }
  throw ConvergenceError("spectral_clustering: subspace iteration did not converge");
}

struct KMeansResult {
  std::vector<std::int32_t> label;
  double inertia = 0.0;
};

double sq_dist(const Eigen::MatrixXd& x, Eigen::Index i, const Eigen::MatrixXd& centers,
               Eigen::Index c) {
  return (x.row(i) - centers.row(c)).squaredNorm();
}

KMeansResult kmeans_once(const Eigen::MatrixXd& x, std::size_t k, Rng& rng, int max_iter) {
  const Eigen::Index n = x.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd centers(kk, x.cols());
  // k-means++ seeding.
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index c = 1; c < kk; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < c; ++j) best = std::min(best, sq_dist(x, i, centers, j));
      d2[static_cast<std::size_t>(i)] = best;
      total += best;
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2[static_cast<std::size_t>(pick)];
        if (target < 0.0 && d2[static_cast<std::size_t>(pick)] > 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = x.row(pick);
  }

  KMeansResult r;
  r.label.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = sq_dist(x, i, centers, 0);
      for (Eigen::Index c = 1; c < kk; ++c) {
        double d = sq_dist(x, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.label[static_cast<std::size_t>(i)] != best) {
        r.label[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best);
        changed = true;
      }
    }
    // Repair empty clusters with the farthest point of the largest cluster.
    for (;;) {
      std::vector<std::size_t> count(k, 0);
      for (auto l : r.label) ++count[static_cast<std::size_t>(l)];
      auto empty = std::find(count.begin(), count.end(), 0u);
      if (empty == count.end()) break;
      const auto largest = static_cast<std::int32_t>(
          std::max_element(count.begin(), count.end()) - count.begin());
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (r.label[static_cast<std::size_t>(i)] == largest) {
          double d = sq_dist(x, i, centers, largest);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
      const auto target = static_cast<Eigen::Index>(empty - count.begin());
      r.label[static_cast<std::size_t>(far)] = static_cast<std::int32_t>(target);
      centers.row(target) = x.row(far);
      changed = true;
    }
    centers.setZero();
    std::vector<double> count(k, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      centers.row(r.label[static_cast<std::size_t>(i)]) += x.row(i);
      count[static_cast<std::size_t>(r.label[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (Eigen::Index c = 0; c < kk; ++c) centers.row(c) /= count[static_cast<std::size_t>(c)];
    if (!changed) break;
  }
  r.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    r.inertia += sq_dist(x, i, centers, r.label[static_cast<std::size_t>(i)]);
  return r;
}

}  // namespace

PartitionAssignment spectral_clustering(const Graph& g, std::size_t n_clients, std::uint64_t seed,
                                        SpectralOptions opts) {
  check_client_count(g, n_clients, 2);
  const Eigen::MatrixXd embedding = laplacian_embedding(g, n_clients);
  const int restarts = std::clamp(opts.kmeans_restarts, 1, 100);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    auto res = kmeans_once(embedding, n_clients, rng, opts.kmeans_max_iterations);
    if (res.inertia < best.inertia - 1e-12) best = std::move(res);
  }
  PartitionAssignment p{std::move(best.label), n_clients, PartitionMethod::Spectral};
  p.validate(g.n_nodes());
  return p;
}

BisectionResult kl_bisect(const Graph& g, const std::vector<NodeId>& nodes,
                          std::size_t first_size, std::uint64_t seed) {
  const std::size_t n = nodes.size();
  if (first_size > n) throw ValidationError("kl_bisect: part larger than node set");
  std::unordered_map<NodeId, std::size_t> local;
  for (std::size_t k = 0; k < n; ++k) local.emplace(nodes[k], k);
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t k = 0; k < n; ++k)
    for (auto w : g.neighbors(nodes[k])) {
      auto it = local.find(w);
      if (it != local.end()) nbrs[k].push_back(it->second);
    }

  BisectionResult res;
  res.side.assign(n, 1);
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < n; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
    for (std::size_t i = 0; i < first_size; ++i) res.side[order[i]] = 0;
  }
  auto cut = [&] {
    std::size_t c = 0;
    for (std::size_t k = 0; k < n; ++k)
      for (auto w : nbrs[k]) c += (k < w) && res.side[k] != res.side[w];
    return c;
  };
  res.initial_cut = cut();

  auto connected = [&](std::size_t a, std::size_t b) {
    return std::binary_search(nbrs[a].begin(), nbrs[a].end(), b);
  };
  for (auto& list : nbrs) std::sort(list.begin(), list.end());

  std::vector<long> d(n);
  for (int pass = 0; pass < 1000; ++pass) {
    for (std::size_t k = 0; k < n; ++k) {
      long ext = 0, in = 0;
      for (auto w : nbrs[k]) (res.side[w] != res.side[k] ? ext : in) += 1;
      d[k] = ext - in;
    }
    std::vector<char> locked(n, 0);
    std::vector<std::pair<std::size_t, std::size_t>> swaps;
    std::vector<long> gains;
    const std::size_t steps = std::min(first_size, n - first_size);
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<std::size_t> a_list, b_list;
      for (std::size_t k = 0; k < n; ++k)
        if (!locked[k]) (res.side[k] == 0 ? a_list : b_list).push_back(k);
      auto by_d = [&d](std::size_t x, std::size_t y) { return d[x] != d[y] ? d[x] > d[y] : x < y; };
      std::sort(a_list.begin(), a_list.end(), by_d);
      std::sort(b_list.begin(), b_list.end(), by_d);
      long best = std::numeric_limits<long>::min();
      std::size_t best_a = a_list.front(), best_b = b_list.front();
      for (auto a : a_list) {
        if (d[a] + d[b_list.front()] <= best) break;
        for (auto b : b_list) {
          if (d[a] + d[b] <= best) break;
          const long gain = d[a] + d[b] - 2 * static_cast<long>(connected(a, b));
          if (gain > best) {
            best = gain;
            best_a = a;
            best_b = b;
          }
        }
      }
      locked[best_a] = locked[best_b] = 1;
      swaps.emplace_back(best_a, best_b);
      gains.push_back(best);
      // Update D as if a and b had been exchanged.
      for (auto w : nbrs[best_a])
        if (!locked[w]) d[w] += res.side[w] == 0 ? 2 : -2;
      for (auto w : nbrs[best_b])
        if (!locked[w]) d[w] += res.side[w] == 1 ? 2 : -2;
    }
    long running = 0, best_total = 0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < gains.size(); ++k) {
      running += gains[k];
      if (running > best_total) {
        best_total = running;
        best_k = k + 1;
      }
    }
    if (best_total <= 0) break;
    for (std::size_t k = 0; k < best_k; ++k) std::swap(res.side[swaps[k].first], res.side[swaps[k].second]);
  }
  res.final_cut = cut();
  return res;
}

namespace {

void kl_recurse(const Graph& g, const std::vector<NodeId>& nodes, std::size_t parts,
                std::int32_t first_client, std::uint64_t seed, std::vector<std::int32_t>& out) {
  if (parts == 1) {
    for (auto v : nodes) out[v] = first_client;
    return;
  }
  const std::size_t left_parts = parts / 2, right_parts = parts - left_parts;
  auto first_size = static_cast<std::size_t>(std::llround(
      static_cast<double>(nodes.size()) * static_cast<double>(left_parts) / static_cast<double>(parts)));
  first_size = std::clamp(first_size, left_parts, nodes.size() - right_parts);
  auto res = kl_bisect(g, nodes, first_size, seed);
  std::vector<NodeId> left, right;
  for (std::size_t k = 0; k < nodes.size(); ++k) (res.side[k] == 0 ? left : right).push_back(nodes[k]);
  kl_recurse(g, left, left_parts, first_client, derive_seed(seed, 1), out);
  kl_recurse(g, right, right_parts, first_client + static_cast<std::int32_t>(left_parts),
             derive_seed(seed, 2), out);
}

}  // namespace

PartitionAssignment kernighan_lin(const Graph& g, std::size_t n_clients, std::uint64_t seed) {
  check_client_count(g, n_clients, 2);
  std::vector<NodeId> all(g.n_nodes());
  std::iota(all.begin(), all.end(), 0);
  PartitionAssignment p{std::vector<std::int32_t>(g.n_nodes(), -1), n_clients,
                        PartitionMethod::KernighanLin};
  kl_recurse(g, all, n_clients, 0, seed, p.client);
  p.validate(g.n_nodes());
  return p;
}

PartitionAssignment make_partition(const Graph& g, PartitionMethod method, std::size_t n_clients,
                                   std::uint64_t seed) {
  if (n_clients == 1) {
    if (g.n_nodes() == 0) throw ValidationError("partition: empty graph");
    return PartitionAssignment{std::vector<std::int32_t>(g.n_nodes(), 0), 1, method};
  }
  switch (method) {
    case PartitionMethod::EvenIndex: return even_by_index(g, n_clients);
    case PartitionMethod::Spectral: return spectral_clustering(g, n_clients, seed);
    case PartitionMethod::KernighanLin: return kernighan_lin(g, n_clients, seed);
  }
  throw ValidationError("unknown partition method");
}

std::vector<Subnetwork> induced_subnetworks(const Graph& g, const PartitionAssignment& p) {
  p.validate(g.n_nodes());
  std::vector<Subnetwork> out;
  out.reserve(p.n_clients);
  for (std::size_t m = 0; m < p.n_clients; ++m) {
    auto nodes = p.members(m);
    out.push_back(Subnetwork{induced_subgraph(g, nodes), nodes});
  }
  return out;
}

std::size_t edge_cut(const Graph& g, const PartitionAssignment& p) {
  std::size_t cut = 0;
  for (auto [a, b] : g.edges()) cut += p.client[a] != p.client[b];
  return cut;
}

void write_partition(const PartitionAssignment& p, const Graph& g, std::ostream& out,
                     const std::string& provenance) {
  if (!provenance.empty()) {
    std::istringstream lines(provenance);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  out << "node,client\n";
  for (std::size_t i = 0; i < p.client.size(); ++i)
    out << g.label(static_cast<NodeId>(i)) << ',' << p.client[i] << '\n';
}

PartitionAssignment read_partition(std::istream& in, const Graph& g) {
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t i = 0; i < g.n_nodes(); ++i)
    index.emplace(g.label(static_cast<NodeId>(i)), static_cast<NodeId>(i));
  PartitionAssignment p{std::vector<std::int32_t>(g.n_nodes(), -1), 0, PartitionMethod::EvenIndex};
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::int32_t max_client = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "node,client") throw ParseError("expected header 'node,client'", line_no);
      header = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected 'node,client'", line_no);
    auto it = index.find(line.substr(0, comma));
    if (it == index.end()) throw ParseError("unknown node '" + line.substr(0, comma) + "'", line_no);
    std::int32_t c = 0;
    try {
      c = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError("bad client index", line_no);
    }
    p.client[it->second] = c;
    max_client = std::max(max_client, c);
  }
  p.n_clients = static_cast<std::size_t>(max_client + 1);
  if (std::find(p.client.begin(), p.client.end(), -1) != p.client.end())
    throw ValidationError("partition file does not cover every node");
  p.validate(g.n_nodes());
  return p;
}

}  // namespace epifed
