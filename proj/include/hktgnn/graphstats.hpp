#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "hktgnn/supply_graph.hpp"

namespace hktgnn::stats {

/// Plain directed graph on nodes 0..n-1. Parallel edges are tolerated and
/// collapsed by every algorithm below; self-loops are ignored.
struct Digraph {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  /// Deduplicated neighbor lists of max(A, A^T).
  std::vector<std::vector<std::size_t>> undirected_adjacency() const;
  std::vector<std::vector<std::size_t>> out_adjacency() const;
};

Digraph to_digraph(const CBGraph& cb);
Digraph to_digraph(const SingleProductSubgraph& sub);

enum class CentralityKind { Degree, Eigenvector, Betweenness, Closeness };

struct CentralityVector {
  std::vector<double> values;
  CentralityKind kind = CentralityKind::Degree;
};

struct SpectralVector {
  std::vector<double> values;
  double eigenvalue = 0.0;
};

/// Dominant eigenvector of the symmetrized adjacency by power iteration on
/// (A + I), L2-normalized and non-negative. Converged when the eigen-residual
/// ||Av - lambda v||_2 drops below tol.
CentralityVector eigenvector_centrality(const Digraph& g, double tol = 1e-10, int max_iter = 1000);

/// (in + out) / (n - 1) over distinct edges.
CentralityVector degree_centrality(const Digraph& g);

/// Wasserman-Faust closeness over outgoing distances:
/// (r-1)/sum(d) * (r-1)/(n-1), r = nodes reachable from u including u.
CentralityVector closeness_centrality(const Digraph& g, bool directed = true);

/// Brandes accumulation normalized by (n-1)(n-2) (directed) or
/// (n-1)(n-2)/2 (undirected).
CentralityVector betweenness_centrality(const Digraph& g, bool directed = true);

inline constexpr int kUnreachable = -1;

/// BFS hop count from the root ignoring edge direction.
std::vector<int> shortest_paths_from_root(const SingleProductSubgraph& sub);

/// Eigenvector of L = D - A (undirected view) for its largest eigenvalue.
/// An edgeless graph returns e_1 with eigenvalue 0.
SpectralVector laplacian_top_eigenvector(const Digraph& g, double tol = 1e-10, int max_iter = 20000);
SpectralVector laplacian_top_eigenvector(const SingleProductSubgraph& sub);

/// Flip v so that its largest-magnitude entry is positive (lowest index wins ties).
void apply_sign_convention(std::vector<double>& v);

}  // namespace hktgnn::stats
