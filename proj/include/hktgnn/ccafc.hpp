#pragma once

#include <vector>

#include "hktgnn/params.hpp"
#include "hktgnn/supply_graph.hpp"

// Centrality-calibrated feature completion for biased nodes. Completion
// spreads outwards from the complete nodes one hop per iteration; every
// iteration reads only values fixed by the previous one.
namespace hktgnn::ccafc {

struct CCAFCConfig {
  int attn_dim = 16;
  /// Calibrate provider values in iterations >= 2 too (otherwise raw values are used there).
  bool late_calibration = true;
  double prelu_init = 0.25;
};

struct CCAFCParams {
  CCAFCConfig cfg;
  int observable_dim = kObservableDim;
  int unobservable_dim = kFinancialDim;
  ParamId w_c, w_b;     // D_o x D_a
  ParamId a_cb;         // 2 D_a x 1
  ParamId prelu_slope;  // 1 x 1
  ParamId w_gate;       // 2 D_u x D_u
  ParamId w_o2u;        // D_o x D_u

  static constexpr const char* kGroup = "ccafc";
  static CCAFCParams create(ParamStore& store, Rng& rng, CCAFCConfig cfg = {},
                            int observable_dim = kObservableDim, int unobservable_dim = kFinancialDim);
};

/// V+ / V- bookkeeping. Purely structural (depends on the graph, Psi and K),
/// so it is computed once and reused every epoch.
struct FrontierPlan {
  struct Step {
    ad::Index targets;        // nodes completed in this iteration, ascending
    ad::Index edge_target;    // node index of each (target, provider) pair
    ad::Index edge_provider;  // provider node index, member of V+ before the step
    ad::Index edge_segment;   // position of edge_target within targets
  };
  std::vector<Step> steps;
  std::vector<bool> in_plus;         // V+ after the last step
  std::vector<std::size_t> pending;  // biased nodes still in V- (unreachable within K)
};

/// neighbors: undirected adjacency of the product graph.
FrontierPlan plan_frontier(const std::vector<std::vector<std::size_t>>& neighbors,
                           const std::vector<int>& psi, int max_steps);

/// Centrality-weighted observable-domain gap projected to the unobservable
/// space, 1 x D_u. Zero when either domain is empty.
ad::Var domain_difference_u(Binding& bind, const CCAFCParams& p, const ad::Var& x_o,
                            const std::vector<int>& psi, const std::vector<double>& weights);

/// x~ = x - delta * softsign([x | delta] w_gate), row-wise for x (k x D_u).
ad::Var calibrate(Binding& bind, const CCAFCParams& p, const ad::Var& x_u, const ad::Var& delta);

/// Unnormalized neighbor importance PReLU([x_i w_c | x_j w_b]) a_cb for each
/// (target, provider) pair given as gathered rows.
ad::Var importance_scores(Binding& bind, const CCAFCParams& p, const ad::Var& target_rows,
                          const ad::Var& provider_rows);

/// Softmax-normalized importance of each provider of a single target.
ad::Var neighbor_importance(Binding& bind, const CCAFCParams& p, const ad::Var& target_row,
                            const ad::Var& provider_rows);

struct Completion {
  ad::Var delta;       // 1 x D_u
  ad::Var x_u;         // n x D_u: observed rows, completed rows, zeros for pending
  std::vector<bool> completed;  // biased nodes filled in by this run
  FrontierPlan plan;
};

/// x_u_observed rows of biased nodes are never read.
Completion complete_features(Binding& bind, const CCAFCParams& p, const ad::Var& x_o,
                             const Matrix& x_u_observed, const std::vector<int>& psi,
                             const std::vector<double>& weights, const FrontierPlan& plan);

/// ||delta - (sum_complete w x_u - sum_completed w x^_u)||^2
ad::Var dist_loss(const Completion& c, const std::vector<int>& psi, const std::vector<double>& weights);

}  // namespace hktgnn::ccafc
