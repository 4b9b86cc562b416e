#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace epifed {

using NodeId = std::int32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected simple graph on dense node indices 0..n-1.
///
/// Immutable once built. Edges are stored once with `first < second`, sorted;
/// adjacency lists are sorted and symmetric. Labels, when present, hold the
/// external identifier of each node.
class Graph {
 public:
  Graph() = default;

  /// Builds from an arbitrary edge list. Self-loops and duplicates (in either
  /// orientation) are dropped.
  static Graph from_edges(std::size_t n_nodes, std::span<const Edge> edges,
                          std::vector<std::string> labels = {});

  std::size_t n_nodes() const { return adjacency_.size(); }
  std::size_t n_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const NodeId> neighbors(NodeId i) const { return adjacency_[i]; }
  std::size_t degree(NodeId i) const { return adjacency_[i].size(); }
  bool has_edge(NodeId a, NodeId b) const;
  const std::vector<std::string>& labels() const { return labels_; }
  bool has_labels() const { return !labels_.empty(); }
  /// External label of node i, or its index when the graph is unlabelled.
  std::string label(NodeId i) const;

  std::size_t max_degree() const;
  double mean_degree() const;

  /// FNV-1a over node count and sorted edge list, as 16 hex digits.
  std::string hash() const;

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<std::string> labels_;
};

struct EdgeListReport {
  Graph graph;
  std::size_t lines_read = 0;
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_dropped = 0;
};

/// Parses `src,dst` lines; `#` lines and blank lines are skipped. When every ID
/// is an integer, nodes are indexed by ascending numeric ID; otherwise by
/// first appearance. Throws ParseError on malformed lines and ValidationError
/// on input without edges.
EdgeListReport load_edge_list(std::istream& in);
EdgeListReport load_edge_list_file(const std::string& path);

/// Writes one `src,dst` line per edge using node labels (indices when absent).
void save_edge_list(const Graph& g, std::ostream& out);

/// Induced subgraph on the node set, reindexed in ascending original order.
Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

/// Induced subgraph on the k highest-degree nodes. Ties go to the smaller index.
Graph top_k_by_degree(const Graph& g, std::size_t k);

struct PowerIterationOptions {
  double tol = 1e-10;
  int max_iterations = 10000;
};

/// Largest adjacency eigenvalue by power iteration from the all-ones vector.
/// The iteration runs on A + I so bipartite graphs (eigenvalue -lambda1 of
/// equal modulus) converge; the Rayleigh quotient is reported for A.
double spectral_radius(const Graph& g, PowerIterationOptions opts = {});

/// Mean-field lower bound of the SIS epidemic threshold, 1 / lambda1(A).
double epidemic_threshold(const Graph& g, PowerIterationOptions opts = {});

std::size_t component_count(const Graph& g);

enum class SyntheticKind { ErdosRenyi, BarabasiAlbert, Complete, Star, Ring };

struct SyntheticParams {
  std::size_t n = 0;
  double p = 0.0;        // Erdos-Renyi edge probability
  std::size_t m = 1;     // Barabasi-Albert attachments per new node
};

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

/// Reproducible for a fixed seed. Star places the hub at index 0.
Graph generate_synthetic(SyntheticKind kind, const SyntheticParams& params,
                         std::uint64_t seed);

}  // namespace epifed
