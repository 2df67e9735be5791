#include "hktgnn/gee.hpp"

#include <algorithm>
#include <bit>
#include <set>

#include "hktgnn/graphstats.hpp"

namespace hktgnn::gee {

int bucket(int value) {
  if (value < 0) return kBuckets - 1;
  const int b = std::bit_width(static_cast<unsigned>(value) + 1u) - 1;
  return b > kMaxBucket ? kBuckets - 1 : b;
}

std::vector<TopoFeatures> node_topo_features(const SingleProductSubgraph& sub) {
  std::vector<TopoFeatures> f(sub.size());
  for (const auto& e : sub.edges) {
    ++f[e.dst].in_degree;
    ++f[e.src].out_degree;
  }
  const auto spb = stats::shortest_paths_from_root(sub);
  std::vector<bool> points_into_member(sub.size(), false);
  for (const auto& e : sub.edges)
    if (sub.is_member_company[e.dst] && !sub.is_member_company[e.src]) points_into_member[e.src] = true;
  for (std::size_t i = 0; i < sub.size(); ++i) {
    f[i].spb = spb[i];
    if (i == 0) {
      f[i].type = NodeTypeTag::Product;
    } else if (sub.is_member_company[i]) {
      f[i].type = NodeTypeTag::ListedCompany;
    } else if (sub.kinds[i] == NodeKind::Investor) {
      f[i].type = NodeTypeTag::InvestorOfListed;
    } else if (sub.kinds[i] == NodeKind::Investee) {
      f[i].type = NodeTypeTag::InvesteeOfListed;
    } else {
      f[i].type = points_into_member[i] ? NodeTypeTag::InvestorOfListed : NodeTypeTag::InvesteeOfListed;
    }
  }
  return f;
}

GEEParams GEEParams::create(ParamStore& store, Rng& rng, GEEConfig cfg) {
  GEEParams p;
  p.cfg = cfg;
  const int t = cfg.table_dim;
  p.in_table = store.add("gee.in_degree_table", normal_matrix(rng, kBuckets, t, 0.5), kGroup);
  p.out_table = store.add("gee.out_degree_table", normal_matrix(rng, kBuckets, t, 0.5), kGroup);
  p.type_table = store.add("gee.type_table", normal_matrix(rng, kNodeTypes, t, 0.5), kGroup);
  p.spb_table = store.add("gee.spb_table", normal_matrix(rng, kBuckets, t, 0.5), kGroup);
  p.proj = store.add("gee.proj", glorot(rng, 4 * t, cfg.node_dim), kGroup);
  int in = cfg.node_dim + 1;
  for (int l = 0; l < cfg.gin_layers; ++l) {
    const std::string pre = "gee.gin" + std::to_string(l) + ".";
    GINLayerParams g;
    g.w1 = store.add(pre + "w1", glorot(rng, in, cfg.hidden), kGroup);
    g.b1 = store.add(pre + "b1", Matrix::Zero(1, cfg.hidden), kGroup);
    g.w2 = store.add(pre + "w2", glorot(rng, cfg.hidden, cfg.hidden), kGroup);
    g.b2 = store.add(pre + "b2", Matrix::Zero(1, cfg.hidden), kGroup);
    g.eps = store.add(pre + "eps", Matrix::Zero(1, 1), kGroup);
    p.gin.push_back(g);
    in = cfg.hidden;
  }
  // Sum readout grows with subgraph size; keep the initial projection small.
  p.readout = store.add("gee.readout", glorot(rng, cfg.hidden, cfg.out_dim) * 0.1, kGroup);
  p.readout_bias = store.add("gee.readout_bias", Matrix::Zero(1, cfg.out_dim), kGroup);
  return p;
}

GEEBatch make_batch(std::span<const SingleProductSubgraph> subs) {
  GEEBatch b;
  b.n_graphs = subs.size();
  for (const auto& s : subs) b.n_nodes += s.size();
  b.spectral = Matrix::Zero(static_cast<Eigen::Index>(b.n_nodes), 1);
  std::size_t offset = 0;
  for (std::size_t g = 0; g < subs.size(); ++g) {
    const auto& sub = subs[g];
    const auto feats = node_topo_features(sub);
    const auto spectral = stats::laplacian_top_eigenvector(sub);
    for (std::size_t i = 0; i < sub.size(); ++i) {
      b.in_bucket.push_back(static_cast<std::size_t>(bucket(feats[i].in_degree)));
      b.out_bucket.push_back(static_cast<std::size_t>(bucket(feats[i].out_degree)));
      b.type_index.push_back(static_cast<std::size_t>(feats[i].type));
      b.spb_bucket.push_back(static_cast<std::size_t>(bucket(feats[i].spb)));
      b.spectral(static_cast<Eigen::Index>(offset + i), 0) = spectral.values[i];
      b.graph_of.push_back(g);
    }
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : sub.edges) {
      if (e.src == e.dst) continue;
      pairs.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst));
    }
    for (const auto& [u, v] : pairs) {
      b.edge_src.push_back(offset + u);
      b.edge_dst.push_back(offset + v);
      b.edge_src.push_back(offset + v);
      b.edge_dst.push_back(offset + u);
    }
    offset += sub.size();
  }
  return b;
}

ad::Var embed_nodes(Binding& bind, const GEEParams& p, const GEEBatch& batch) {
  const ad::Var parts[] = {
      ad::gather_rows(bind(p.in_table), batch.in_bucket),
      ad::gather_rows(bind(p.out_table), batch.out_bucket),
      ad::gather_rows(bind(p.type_table), batch.type_index),
      ad::gather_rows(bind(p.spb_table), batch.spb_bucket),
  };
  return ad::matmul(ad::concat_cols(parts), bind(p.proj));
}

ad::Var augment_spectral(ad::Tape& tape, const GEEBatch& batch, const ad::Var& node_vectors) {
  return ad::concat_cols(node_vectors, tape.constant(batch.spectral));
}

ad::Var encode(Binding& bind, const GEEParams& p, const GEEBatch& batch) {
  ad::Tape& tape = bind.tape();
  ad::Var h = augment_spectral(tape, batch, embed_nodes(bind, p, batch));
  for (const auto& layer : p.gin) {
    ad::Var agg = ad::neighbor_sum(h, bind(layer.eps), batch.edge_src, batch.edge_dst);
    ad::Var z = ad::linear(agg, bind(layer.w1), bind(layer.b1), p.cfg.slope);
    h = ad::linear(z, bind(layer.w2), bind(layer.b2), p.cfg.slope);
  }
  ad::Var pooled = ad::scatter_add_rows(h, batch.graph_of, batch.n_graphs);
  return ad::linear(pooled, bind(p.readout), bind(p.readout_bias));
}

Matrix encode_subgraphs(const ParamStore& store, const GEEParams& p, std::span<const SingleProductSubgraph> subs) {
  const GEEBatch batch = make_batch(subs);
  ad::Tape tape;
  Binding bind(tape, store, {GEEParams::kGroup});
  return encode(bind, p, batch).value();
}

}  // namespace hktgnn::gee
