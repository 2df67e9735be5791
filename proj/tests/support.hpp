#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hktgnn/ccafc.hpp"
#include "hktgnn/dcamp.hpp"
#include "hktgnn/graphstats.hpp"
#include "hktgnn/params.hpp"
#include "hktgnn/supply_graph.hpp"
#include "hktgnn/train.hpp"

namespace hktgnn::testing {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0);
std::vector<int> random_labels(Rng& rng, std::size_t n, double p_one = 0.5);

/// Random digraph on n nodes, each ordered pair present with probability p.
stats::Digraph random_digraph(Rng& rng, std::size_t n, double p);

using LossFn = std::function<ad::Var(Binding&)>;

struct FdReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "name[index]" of the largest error
  double worst_analytic = 0.0, worst_numeric = 0.0;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-5);

/// Central finite differences against Binding::gradients() for up to
/// `coords` random entries of every listed parameter.
FdReport fd_check(ParamStore& store, const LossFn& loss, const std::vector<std::size_t>& params, Rng& rng,
                  int coords = 12, double h = 1e-6);
/// All parameters of the store.
FdReport fd_check_all(ParamStore& store, const LossFn& loss, Rng& rng, int coords = 12, double h = 1e-6);

/// Parameter indices whose group equals `group`.
std::vector<std::size_t> params_in_group(const ParamStore& store, const std::string& group);

/// A scalar loss that weights every entry of v by a fixed random matrix, so
/// every output entry reaches the gradient.
ad::Var probe_loss(const ad::Var& v, std::uint64_t seed);

/// Supply graph with n_products products, each given `companies` fresh
/// companies and one investor per company; product edges i -> i+1.
SupplyGraph chain_supply_graph(int n_products, int companies);

/// Small CBGraph with random features, labels and Psi (at least one node per
/// domain when n >= 2) over a random edge set.
CBGraph random_cb_graph(Rng& rng, std::size_t n, double edge_p, double biased_p = 0.3);

}  // namespace hktgnn::testing

namespace hktgnn::testing::oracle {

inline constexpr int kInf = 1 << 28;

/// All-pairs hop distances (kInf when unreachable) by Floyd-Warshall.
std::vector<std::vector<int>> floyd_warshall(const stats::Digraph& g, bool directed);
/// Betweenness by explicit enumeration of every shortest path.
std::vector<double> betweenness(const stats::Digraph& g, bool directed);
std::vector<double> closeness(const stats::Digraph& g, bool directed);
std::vector<double> degree(const stats::Digraph& g);

/// Dense symmetrized adjacency max(A, A^T).
Eigen::MatrixXd symmetric_adjacency(const stats::Digraph& g);
/// Eigenpair of the largest eigenvalue of a symmetric matrix (dense solver).
std::pair<double, Eigen::VectorXd> top_eigenpair(const Eigen::MatrixXd& m);

struct CompletionTrace {
  Matrix x_u;
  std::vector<std::vector<std::size_t>> frontier;  // targets per iteration
  /// Calibrated provider rows used for each completed node (row per provider).
  std::vector<Matrix> provider_values;
  Matrix delta;
};

/// Feature completion recomputed with scalar loops from the parameter values.
/// Neighbors come from the undirected view of `edges`.
CompletionTrace ccafc_complete(const ParamStore& store, const ccafc::CCAFCParams& p, const Matrix& x_o,
                               const Matrix& x_u_observed, const std::vector<int>& psi,
                               const std::vector<double>& weights,
                               const std::vector<std::pair<std::size_t, std::size_t>>& edges, int k);

struct AttentionTrace {
  Matrix h;
  std::vector<double> attention;  // in edge order
  Matrix shift;                   // edge rows
};

/// One message-passing layer recomputed edge by edge. With `plain` the
/// domain shift is skipped and domain-0 weights are used for every target.
AttentionTrace dcamp_layer(const ParamStore& store, const dcamp::DCAMPParams& p, const dcamp::LayerParams& lp,
                           const Matrix& h, const dcamp::EdgeList& edges, const std::vector<int>& psi,
                           const Matrix& delta, bool plain = false);

}  // namespace hktgnn::testing::oracle
