#pragma once

#include <vector>

#include "hktgnn/params.hpp"
#include "hktgnn/supply_graph.hpp"

// Domain-aware attention message passing. A message crossing from one domain
// (complete/biased) to the other is first shifted by a gated multiple of the
// domain difference; attention follows the GATv2 ordering with per-target-
// domain weights and is normalized over each node's in-neighborhood.
namespace hktgnn::dcamp {

struct DCAMPConfig {
  int hidden = 64;
  int attn_dim = 32;
  int rounds = 2;
  double attn_slope = 0.2;
  double update_slope = 0.01;
  bool symmetric_neighbors = false;
  /// Take the domain difference from the input states only instead of per layer.
  bool freeze_delta = false;
  /// Pass the domain difference through the learned projection P^C.
  bool project_delta = false;
};

struct LayerParams {
  ParamId w[2];     // D_h x D_a, indexed by the target's domain
  ParamId a[2];     // 2 D_a x 1
  ParamId gate[2];  // 2 D_h x 1
  ParamId w_update; // 2 D_h x D_h
  ParamId b_update; // 1 x D_h
};

struct DCAMPParams {
  DCAMPConfig cfg;
  int input_dim = kFeatureDim;
  ParamId w_in, b_in;
  ParamId p_c;  // D_h x D_h
  std::vector<LayerParams> layers;

  static constexpr const char* kGroup = "dcamp";
  static DCAMPParams create(ParamStore& store, Rng& rng, DCAMPConfig cfg = {}, int input_dim = kFeatureDim);
};

struct EdgeList {
  ad::Index src, dst;
  std::size_t n_nodes = 0;
};

/// Directed (src -> dst) edges, or both directions when symmetric.
EdgeList make_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges, bool symmetric);

/// sum_complete w_i h_i - sum_biased w_j h_j, 1 x D_h; zero if a domain is empty.
ad::Var delta_xc(ad::Tape& tape, const ad::Var& h, const std::vector<int>& psi, const std::vector<double>& weights);

/// Per-edge shift Delta_{i,j} (E x D_h) for edges whose targets all lie in
/// `target_domain`; rows of same-domain edges are exactly zero.
ad::Var distribution_shift(Binding& bind, const LayerParams& lp, const ad::Var& h_src,
                           const ad::Var& delta, const std::vector<int>& src_domain, int target_domain);

struct LayerOutput {
  ad::Var h;          // n x D_h
  ad::Var attention;  // E x 1, normalized over each target's in-edges
  ad::Var shift;      // E x D_h
  ad::Var messages;   // E x D_h
};

LayerOutput dcamp_layer(Binding& bind, const DCAMPParams& p, const LayerParams& lp, const ad::Var& h,
                        const EdgeList& edges, const std::vector<int>& psi, const ad::Var& delta);

/// Input projection followed by cfg.rounds layers.
ad::Var forward(Binding& bind, const DCAMPParams& p, const ad::Var& x, const EdgeList& edges,
                const std::vector<int>& psi, const std::vector<double>& weights);

}  // namespace hktgnn::dcamp
