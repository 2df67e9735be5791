#pragma once

#include <span>
#include <vector>

#include "hktgnn/params.hpp"
#include "hktgnn/supply_graph.hpp"

// Graph embedding encoder: per-node topological embedding, spectral
// augmentation with the top Laplacian eigenvector, a GIN over the
// single-product network and a sum readout to one 64-dim row per product.
namespace hktgnn::gee {

enum class NodeTypeTag { Product, ListedCompany, InvestorOfListed, InvesteeOfListed };
inline constexpr int kNodeTypes = 4;

struct TopoFeatures {
  int in_degree = 0;
  int out_degree = 0;
  NodeTypeTag type = NodeTypeTag::Product;
  int spb = 0;  // hop distance from the root, stats::kUnreachable if none

  friend bool operator==(const TopoFeatures&, const TopoFeatures&) = default;
};

std::vector<TopoFeatures> node_topo_features(const SingleProductSubgraph& sub);

/// floor(log2(v + 1)) for 0 <= v, capped: values past bucket 8 and negative
/// sentinels share the overflow bucket.
inline constexpr int kMaxBucket = 8;
inline constexpr int kBuckets = kMaxBucket + 2;
int bucket(int value);

struct GEEConfig {
  int table_dim = 8;
  int node_dim = 16;
  int hidden = 64;
  int gin_layers = 2;
  int out_dim = kEmbeddingDim;
  double slope = 0.01;
};

struct GINLayerParams {
  ParamId w1, b1, w2, b2, eps;
};

struct GEEParams {
  GEEConfig cfg;
  ParamId in_table, out_table, type_table, spb_table, proj;
  std::vector<GINLayerParams> gin;
  ParamId readout, readout_bias;

  static constexpr const char* kGroup = "gee";
  static GEEParams create(ParamStore& store, Rng& rng, GEEConfig cfg = {});
};

/// Topology of several subgraphs laid out as one disjoint union.
struct GEEBatch {
  std::size_t n_graphs = 0;
  std::size_t n_nodes = 0;
  ad::Index in_bucket, out_bucket, type_index, spb_bucket;
  Matrix spectral;            // n_nodes x 1, top Laplacian eigenvector coordinate
  ad::Index edge_src, edge_dst;  // symmetrized neighborhoods
  ad::Index graph_of;
};

GEEBatch make_batch(std::span<const SingleProductSubgraph> subs);

/// Table lookups for (in-degree, out-degree, type, SPB), concatenated and projected.
ad::Var embed_nodes(Binding& bind, const GEEParams& p, const GEEBatch& batch);
/// Z = [Emb | u_o]
ad::Var augment_spectral(ad::Tape& tape, const GEEBatch& batch, const ad::Var& node_vectors);
/// Full encoder: n_graphs x out_dim.
ad::Var encode(Binding& bind, const GEEParams& p, const GEEBatch& batch);

/// Forward-only convenience: one X_E row per subgraph.
Matrix encode_subgraphs(const ParamStore& store, const GEEParams& p, std::span<const SingleProductSubgraph> subs);

}  // namespace hktgnn::gee
