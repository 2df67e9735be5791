#pragma once

#include <span>
#include <vector>

#include "hktgnn/supply_graph.hpp"

namespace hktgnn {

/// Per-node weights for the complete-vs-biased domain difference: eigenvector
/// centrality normalized to unit mass within each domain, or 1/|domain| when
/// centrality is switched off. Weighted sums are therefore domain centroids.
std::vector<double> domain_weights(const std::vector<int>& psi, std::span<const double> centrality,
                                   bool use_centrality);

/// 1 x n row r with r_i = +w_i for complete nodes, -w_i for biased nodes that
/// pass `include_biased`, and 0 otherwise. r * X is the domain difference of X.
Matrix signed_domain_row(const std::vector<int>& psi, const std::vector<double>& weights,
                         const std::vector<bool>& include_biased = {});

bool has_both_domains(const std::vector<int>& psi);

}  // namespace hktgnn
