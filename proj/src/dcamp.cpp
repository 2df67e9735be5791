#include "hktgnn/dcamp.hpp"

#include <set>

#include "hktgnn/domain.hpp"
#include "hktgnn/error.hpp"

namespace hktgnn::dcamp {

DCAMPParams DCAMPParams::create(ParamStore& store, Rng& rng, DCAMPConfig cfg, int input_dim) {
  DCAMPParams p;
  p.cfg = cfg;
  p.input_dim = input_dim;
  const int h = cfg.hidden;
  p.w_in = store.add("dcamp.w_in", glorot(rng, input_dim, h), kGroup);
  p.b_in = store.add("dcamp.b_in", Matrix::Zero(1, h), kGroup);
  p.p_c = store.add("dcamp.p_c", Matrix::Identity(h, h), kGroup);
  for (int l = 0; l < cfg.rounds; ++l) {
    const std::string pre = "dcamp.layer" + std::to_string(l) + ".";
    LayerParams lp;
    for (int d = 0; d < 2; ++d) {
      const std::string suffix = std::to_string(d);
      lp.w[d] = store.add(pre + "w" + suffix, glorot(rng, h, cfg.attn_dim), kGroup);
      lp.a[d] = store.add(pre + "a" + suffix, glorot(rng, 2 * cfg.attn_dim, 1), kGroup);
      lp.gate[d] = store.add(pre + "gate" + suffix, glorot(rng, 2 * h, 1), kGroup);
    }
    lp.w_update = store.add(pre + "w_update", glorot(rng, 2 * h, h) * 0.5, kGroup);
    lp.b_update = store.add(pre + "b_update", Matrix::Zero(1, h), kGroup);
    p.layers.push_back(lp);
  }
  return p;
}

EdgeList make_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges, bool symmetric) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  EdgeList out;
  out.n_nodes = n;
  auto push = [&](std::size_t s, std::size_t d) {
    if (s == d || !seen.emplace(s, d).second) return;
    out.src.push_back(s);
    out.dst.push_back(d);
  };
  for (const auto& [s, d] : edges) {
    if (s >= n || d >= n) throw ShapeError("make_edges: edge index out of range");
    push(s, d);
    if (symmetric) push(d, s);
  }
  return out;
}

ad::Var delta_xc(ad::Tape& tape, const ad::Var& h, const std::vector<int>& psi, const std::vector<double>& weights) {
  if (static_cast<std::size_t>(h.rows()) != psi.size())
    throw ShapeError("delta_xc: states " + ad::shape_of(h.value()) + " for " + std::to_string(psi.size()) + " labels");
  if (!has_both_domains(psi)) return tape.constant(Matrix::Zero(1, h.cols()));
  return ad::matmul(tape.constant(signed_domain_row(psi, weights)), h);
}

ad::Var distribution_shift(Binding& bind, const LayerParams& lp, const ad::Var& h_src,
                           const ad::Var& delta, const std::vector<int>& src_domain, int target_domain) {
  ad::Tape& tape = bind.tape();
  const auto e = static_cast<std::size_t>(h_src.rows());
  if (src_domain.size() != e) throw ShapeError("distribution_shift: domain labels do not match edge rows");
  Matrix coef(static_cast<Eigen::Index>(e), 1);
  const double sign = target_domain == 0 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < e; ++k) coef(static_cast<Eigen::Index>(k), 0) = src_domain[k] == target_domain ? 0.0 : sign;
  ad::Var gate = ad::softsign(ad::matmul(ad::concat_cols(h_src, ad::repeat_rows(delta, e)), bind(lp.gate[target_domain])));
  return ad::matmul(ad::mul(gate, tape.constant(std::move(coef))), delta);
}

LayerOutput dcamp_layer(Binding& bind, const DCAMPParams& p, const LayerParams& lp, const ad::Var& h,
                        const EdgeList& edges, const std::vector<int>& psi, const ad::Var& delta) {
  const std::size_t n = psi.size();
  const std::size_t ne = edges.src.size();
  LayerOutput out;
  if (ne == 0) {
    ad::Tape& tape = bind.tape();
    out.attention = tape.constant(Matrix::Zero(0, 1));
    out.shift = tape.constant(Matrix::Zero(0, h.cols()));
    out.messages = out.shift;
    ad::Var m = tape.constant(Matrix::Zero(h.rows(), h.cols()));
    out.h = ad::add(h, ad::linear(ad::concat_cols(h, m), bind(lp.w_update), bind(lp.b_update), p.cfg.update_slope));
    return out;
  }

  // Edges grouped by the target's domain; results are scattered back into edge order.
  ad::Var scores, shifted, shift;
  bool have = false;
  for (int d = 0; d < 2; ++d) {
    ad::Index group, src, dst;
    std::vector<int> src_domain;
    for (std::size_t k = 0; k < ne; ++k) {
      if (psi[edges.dst[k]] != d) continue;
      group.push_back(k);
      src.push_back(edges.src[k]);
      dst.push_back(edges.dst[k]);
      src_domain.push_back(psi[edges.src[k]]);
    }
    if (group.empty()) continue;
    ad::Var h_src = ad::gather_rows(h, src);
    ad::Var h_dst = ad::gather_rows(h, dst);
    ad::Var s = distribution_shift(bind, lp, h_src, delta, src_domain, d);
    ad::Var h_tilde = ad::add(h_src, s);
    ad::Var w = bind(lp.w[d]);
    ad::Var joined = ad::concat_cols(ad::matmul(h_tilde, w), ad::matmul(h_dst, w));
    ad::Var sc = ad::matmul(ad::leaky_relu(joined, p.cfg.attn_slope), bind(lp.a[d]));
    ad::Var sc_all = ad::scatter_add_rows(sc, group, ne);
    ad::Var ht_all = ad::scatter_add_rows(h_tilde, group, ne);
    ad::Var s_all = ad::scatter_add_rows(s, group, ne);
    if (!have) {
      scores = sc_all;
      shifted = ht_all;
      shift = s_all;
      have = true;
    } else {
      scores = ad::add(scores, sc_all);
      shifted = ad::add(shifted, ht_all);
      shift = ad::add(shift, s_all);
    }
  }

  out.attention = ad::segment_softmax(scores, edges.dst, n);
  out.shift = shift;
  out.messages = ad::mul_col(shifted, out.attention);
  ad::Var m = ad::scatter_add_rows(out.messages, edges.dst, n);
  out.h = ad::add(h, ad::linear(ad::concat_cols(h, m), bind(lp.w_update), bind(lp.b_update), p.cfg.update_slope));
  return out;
}

ad::Var forward(Binding& bind, const DCAMPParams& p, const ad::Var& x, const EdgeList& edges,
                const std::vector<int>& psi, const std::vector<double>& weights) {
  if (x.cols() != p.input_dim) throw ShapeError("dcamp::forward: input is " + ad::shape_of(x.value()));
  ad::Tape& tape = bind.tape();
  ad::Var h = ad::linear(x, bind(p.w_in), bind(p.b_in), p.cfg.update_slope);
  ad::Var frozen;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    ad::Var delta;
    if (p.cfg.freeze_delta && l > 0) {
      delta = frozen;
    } else {
      delta = delta_xc(tape, h, psi, weights);
      if (p.cfg.project_delta) delta = ad::matmul(delta, bind(p.p_c));
      frozen = delta;
    }
    h = dcamp_layer(bind, p, p.layers[l], h, edges, psi, delta).h;
  }
  return h;
}

}  // namespace hktgnn::dcamp
