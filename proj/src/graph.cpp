#include "epifed/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

#include "epifed/error.hpp"
#include "epifed/rng.hpp"

namespace epifed {

Graph Graph::from_edges(std::size_t n_nodes, std::span<const Edge> edges,
                        std::vector<std::string> labels) {
  if (!labels.empty() && labels.size() != n_nodes)
    throw ValidationError("graph: label count does not match node count");
  Graph g;
  g.edges_.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n_nodes ||
        static_cast<std::size_t>(b) >= n_nodes)
      throw ValidationError("graph: edge endpoint out of range");
    if (a == b) continue;
    g.edges_.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());
  g.adjacency_.assign(n_nodes, {});
  for (auto [a, b] : g.edges_) {
    g.adjacency_[a].push_back(b);
    g.adjacency_[b].push_back(a);
  }
  for (auto& nbrs : g.adjacency_) std::sort(nbrs.begin(), nbrs.end());
  g.labels_ = std::move(labels);
  return g;
}

bool Graph::has_edge(NodeId a, NodeId b) const {
  const auto& nbrs = adjacency_[a];
  return std::binary_search(nbrs.begin(), nbrs.end(), b);
}

std::string Graph::label(NodeId i) const {
  return labels_.empty() ? std::to_string(i) : labels_[i];
}

std::size_t Graph::max_degree() const {
  std::size_t d = 0;
  for (const auto& nbrs : adjacency_) d = std::max(d, nbrs.size());
  return d;
}

double Graph::mean_degree() const {
  return n_nodes() == 0 ? 0.0 : 2.0 * static_cast<double>(n_edges()) / n_nodes();
}

std::string Graph::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(n_nodes());
  for (auto [a, b] : edges_) {
    feed(static_cast<std::uint64_t>(a));
    feed(static_cast<std::uint64_t>(b));
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = digits[h & 0xf];
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_int(std::string_view s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

EdgeListReport load_edge_list(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> raw;
  std::string line;
  std::size_t line_no = 0;
  EdgeListReport report;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    auto comma = text.find(',');
    if (comma == std::string_view::npos)
      throw ParseError("expected 'src,dst'", line_no);
    auto src = trim(text.substr(0, comma));
    auto dst = trim(text.substr(comma + 1));
    if (src.empty() || dst.empty() || dst.find(',') != std::string_view::npos)
      throw ParseError("expected exactly two non-empty fields", line_no);
    raw.emplace_back(std::string(src), std::string(dst));
  }
  report.lines_read = raw.size();
  if (raw.empty()) throw ValidationError("edge list is empty");

  bool all_integer = true;
  for (const auto& [a, b] : raw) {
    long long v;
    if (!parse_int(a, v) || !parse_int(b, v)) {
      all_integer = false;
      break;
    }
  }

  std::vector<std::string> labels;
  std::unordered_map<std::string, NodeId> index;
  if (all_integer) {
    std::map<long long, std::string> ordered;
    for (const auto& [a, b] : raw) {
      long long va, vb;
      parse_int(a, va);
      parse_int(b, vb);
      ordered.emplace(va, a);
      ordered.emplace(vb, b);
    }
    for (const auto& [v, text] : ordered) {
      index.emplace(text, static_cast<NodeId>(labels.size()));
      labels.push_back(text);
    }
    // Spellings such as "007" and "7" denote the same node.
    for (const auto& [a, b] : raw) {
      for (const auto* s : {&a, &b}) {
        if (!index.count(*s)) {
          long long v;
          parse_int(*s, v);
          index.emplace(*s, index.at(ordered.at(v)));
        }
      }
    }
  } else {
    for (const auto& [a, b] : raw) {
      for (const auto* s : {&a, &b}) {
        if (index.emplace(*s, static_cast<NodeId>(labels.size())).second)
          labels.push_back(*s);
      }
    }
  }

  std::vector<Edge> edges;
  std::set<Edge> seen;
  for (const auto& [a, b] : raw) {
    NodeId ia = index.at(a), ib = index.at(b);
    if (ia == ib) {
      ++report.self_loops_dropped;
      continue;
    }
    Edge e{std::min(ia, ib), std::max(ia, ib)};
    if (!seen.insert(e).second) {
      ++report.duplicates_dropped;
      continue;
    }
    edges.push_back(e);
  }
  const auto n = labels.size();
  report.graph = Graph::from_edges(n, edges, std::move(labels));
  return report;
}

EdgeListReport load_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge list '" + path + "'");
  return load_edge_list(in);
}

void save_edge_list(const Graph& g, std::ostream& out) {
  for (auto [a, b] : g.edges()) out << g.label(a) << ',' << g.label(b) << '\n';
}

Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  std::vector<NodeId> keep(nodes.begin(), nodes.end());
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  std::vector<NodeId> local(g.n_nodes(), -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] < 0 || static_cast<std::size_t>(keep[k]) >= g.n_nodes())
      throw ValidationError("induced_subgraph: node out of range");
    local[keep[k]] = static_cast<NodeId>(k);
  }
  std::vector<Edge> edges;
  for (auto [a, b] : g.edges())
    if (local[a] >= 0 && local[b] >= 0) edges.emplace_back(local[a], local[b]);
  std::vector<std::string> labels;
  for (auto v : keep) labels.push_back(g.label(v));
  return Graph::from_edges(keep.size(), edges, std::move(labels));
}

Graph top_k_by_degree(const Graph& g, std::size_t k) {
  if (k < 1 || k > g.n_nodes())
    throw ValidationError("top_k_by_degree: k must lie in [1, n_nodes]");
  std::vector<NodeId> order(g.n_nodes());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&g](NodeId a, NodeId b) {
    return g.degree(a) > g.degree(b);
  });
  order.resize(k);
  return induced_subgraph(g, order);
}

double spectral_radius(const Graph& g, PowerIterationOptions opts) {
  if (g.n_edges() == 0)
    throw ValidationError("spectral_radius: graph has no edges");
  const std::size_t n = g.n_nodes();
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n))), ax(n), y(n);
  auto apply = [&g, n](const std::vector<double>& in, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (auto j : g.neighbors(static_cast<NodeId>(i))) s += in[j];
      out[i] = s;
    }
  };
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < opts.max_iterations; ++it) {
    apply(x, ax);
    double rq = 0.0;
    for (std::size_t i = 0; i < n; ++i) rq += x[i] * ax[i];
    if (it > 0 && std::abs(rq - previous) < opts.tol * std::abs(rq)) return rq;
    previous = rq;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = ax[i] + x[i];
      norm += y[i] * y[i];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
  }
  throw ConvergenceError("spectral_radius: power iteration did not converge");
}

double epidemic_threshold(const Graph& g, PowerIterationOptions opts) {
  return 1.0 / spectral_radius(g, opts);
}

std::size_t component_count(const Graph& g) {
  std::vector<char> seen(g.n_nodes(), 0);
  std::vector<NodeId> stack;
  std::size_t count = 0;
  for (std::size_t s = 0; s < g.n_nodes(); ++s) {
    if (seen[s]) continue;
    ++count;
    seen[s] = 1;
    stack.push_back(static_cast<NodeId>(s));
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : g.neighbors(v))
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
  }
  return count;
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "erdos-renyi" || name == "er") return SyntheticKind::ErdosRenyi;
  if (name == "barabasi-albert" || name == "ba") return SyntheticKind::BarabasiAlbert;
  if (name == "complete") return SyntheticKind::Complete;
  if (name == "star") return SyntheticKind::Star;
  if (name == "ring") return SyntheticKind::Ring;
  throw ValidationError("unknown graph kind '" + name + "'");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::ErdosRenyi: return "erdos-renyi";
    case SyntheticKind::BarabasiAlbert: return "barabasi-albert";
    case SyntheticKind::Complete: return "complete";
    case SyntheticKind::Star: return "star";
    case SyntheticKind::Ring: return "ring";
  }
  return "?";
}

Graph generate_synthetic(SyntheticKind kind, const SyntheticParams& params,
                         std::uint64_t seed) {
  const std::size_t n = params.n;
  if (n < 1) throw ValidationError("synthetic graph needs n >= 1");
  std::vector<Edge> edges;
  Rng rng(seed);
  switch (kind) {
    case SyntheticKind::ErdosRenyi:
      if (!(params.p >= 0.0 && params.p <= 1.0))
        throw ValidationError("erdos-renyi: p must lie in [0, 1]");
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
          if (rng.uniform() < params.p)
            edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
      break;
    case SyntheticKind::BarabasiAlbert: {
      const std::size_t m = params.m;
      if (m < 1 || m >= n)
        throw ValidationError("barabasi-albert: need 1 <= m < n");
      // Seed clique on m + 1 nodes, then preferential attachment.
      std::vector<NodeId> endpoints;
      for (std::size_t a = 0; a <= m; ++a)
        for (std::size_t b = a + 1; b <= m; ++b) {
          edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
          endpoints.push_back(static_cast<NodeId>(a));
          endpoints.push_back(static_cast<NodeId>(b));
        }
      for (std::size_t v = m + 1; v < n; ++v) {
        std::vector<NodeId> targets;
        while (targets.size() < m) {
          NodeId t = endpoints[rng.below(endpoints.size())];
          if (std::find(targets.begin(), targets.end(), t) == targets.end())
            targets.push_back(t);
        }
        for (auto t : targets) {
          edges.emplace_back(t, static_cast<NodeId>(v));
          endpoints.push_back(t);
          endpoints.push_back(static_cast<NodeId>(v));
        }
      }
      break;
    }
    case SyntheticKind::Complete:
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
          edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
      break;
    case SyntheticKind::Star:
      for (std::size_t b = 1; b < n; ++b) edges.emplace_back(0, static_cast<NodeId>(b));
      break;
    case SyntheticKind::Ring:
      if (n < 3) throw ValidationError("ring: need n >= 3");
      for (std::size_t a = 0; a < n; ++a)
        edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>((a + 1) % n));
      break;
  }
  return Graph::from_edges(n, edges);
}

}  // namespace epifed
