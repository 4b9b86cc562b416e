#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "epifed/graph.hpp"

namespace epifed {

enum class PartitionMethod { EvenIndex, Spectral, KernighanLin };

std::string to_string(PartitionMethod m);
PartitionMethod parse_partition_method(const std::string& name);

/// Disjoint assignment of every node to one of `n_clients` non-empty clients.
struct PartitionAssignment {
  std::vector<std::int32_t> client;  // per node
  std::size_t n_clients = 0;
  PartitionMethod method = PartitionMethod::EvenIndex;

  std::vector<std::size_t> sizes() const;
  /// Nodes of client m in ascending order.
  std::vector<NodeId> members(std::size_t m) const;
  /// Throws ValidationError unless indices are dense and every client is non-empty.
  void validate(std::size_t n_nodes) const;
};

/// Contiguous index blocks; the first N mod M clients get one extra node.
PartitionAssignment even_by_index(const Graph& g, std::size_t n_clients);

struct SpectralOptions {
  int kmeans_restarts = 10;  // capped at 100
  int kmeans_max_iterations = 300;
};

/// Unnormalized-Laplacian spectral embedding (M smallest eigenvectors) followed
/// by k-means with seeded k-means++ initialization.
PartitionAssignment spectral_clustering(const Graph& g, std::size_t n_clients,
                                        std::uint64_t seed, SpectralOptions opts = {});

struct BisectionResult {
  std::vector<char> side;  // 0 = first part, 1 = second part, per entry of `nodes`
  std::size_t initial_cut = 0;
  std::size_t final_cut = 0;
};

/// Kernighan-Lin refinement of a seeded random split of `nodes` into parts of
/// `first_size` and `nodes.size() - first_size`. Only edges inside `nodes` count.
BisectionResult kl_bisect(const Graph& g, const std::vector<NodeId>& nodes,
                          std::size_t first_size, std::uint64_t seed);

/// Recursive KL bisection with part sizes proportional to the client split.
PartitionAssignment kernighan_lin(const Graph& g, std::size_t n_clients, std::uint64_t seed);

PartitionAssignment make_partition(const Graph& g, PartitionMethod method, std::size_t n_clients,
                                   std::uint64_t seed);

struct Subnetwork {
  Graph graph;
  std::vector<NodeId> local_to_global;
};

/// Client m's induced subgraph; cross-client edges are dropped.
std::vector<Subnetwork> induced_subnetworks(const Graph& g, const PartitionAssignment& p);

std::size_t edge_cut(const Graph& g, const PartitionAssignment& p);

/// CSV `node,client` with a header row; `#` lines carry provenance.
void write_partition(const PartitionAssignment& p, const Graph& g, std::ostream& out,
                     const std::string& provenance = {});
PartitionAssignment read_partition(std::istream& in, const Graph& g);

}  // namespace epifed
