#include "hktgnn/ccafc.hpp"

#include "hktgnn/domain.hpp"
#include "hktgnn/error.hpp"

namespace hktgnn::ccafc {

CCAFCParams CCAFCParams::create(ParamStore& store, Rng& rng, CCAFCConfig cfg, int observable_dim,
                                int unobservable_dim) {
  CCAFCParams p;
  p.cfg = cfg;
  p.observable_dim = observable_dim;
  p.unobservable_dim = unobservable_dim;
  p.w_c = store.add("ccafc.w_c", glorot(rng, observable_dim, cfg.attn_dim), kGroup);
  p.w_b = store.add("ccafc.w_b", glorot(rng, observable_dim, cfg.attn_dim), kGroup);
  p.a_cb = store.add("ccafc.a_cb", glorot(rng, 2 * cfg.attn_dim, 1), kGroup);
  p.prelu_slope = store.add("ccafc.prelu_slope", Matrix::Constant(1, 1, cfg.prelu_init), kGroup);
  p.w_gate = store.add("ccafc.w_gate", glorot(rng, 2 * unobservable_dim, unobservable_dim), kGroup);
  p.w_o2u = store.add("ccafc.w_o2u", glorot(rng, observable_dim, unobservable_dim) * 0.1, kGroup);
  return p;
}

FrontierPlan plan_frontier(const std::vector<std::vector<std::size_t>>& neighbors,
                           const std::vector<int>& psi, int max_steps) {
  if (neighbors.size() != psi.size()) throw ShapeError("plan_frontier: adjacency/psi length mismatch");
  if (max_steps < 0) throw ValidationError("plan_frontier: K must be >= 0");
  const std::size_t n = psi.size();
  FrontierPlan plan;
  plan.in_plus.resize(n);
  for (std::size_t i = 0; i < n; ++i) plan.in_plus[i] = psi[i] == 0;

  for (int step = 0; step < max_steps; ++step) {
    FrontierPlan::Step s;
    for (std::size_t i = 0; i < n; ++i) {
      if (plan.in_plus[i]) continue;
      bool any = false;
      for (std::size_t j : neighbors[i]) {
        if (!plan.in_plus[j]) continue;
        if (!any) {
          s.targets.push_back(i);
          any = true;
        }
        s.edge_target.push_back(i);
        s.edge_provider.push_back(j);
        s.edge_segment.push_back(s.targets.size() - 1);
      }
    }
    if (s.targets.empty()) break;
    for (std::size_t i : s.targets) plan.in_plus[i] = true;
    plan.steps.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!plan.in_plus[i]) plan.pending.push_back(i);
  return plan;
}

ad::Var domain_difference_u(Binding& bind, const CCAFCParams& p, const ad::Var& x_o,
                            const std::vector<int>& psi, const std::vector<double>& weights) {
  ad::Tape& tape = bind.tape();
  if (x_o.cols() != p.observable_dim)
    throw ShapeError("domain_difference_u: observable features are " + ad::shape_of(x_o.value()));
  if (!has_both_domains(psi)) return tape.constant(Matrix::Zero(1, p.unobservable_dim));
  ad::Var gap = ad::matmul(tape.constant(signed_domain_row(psi, weights)), x_o);
  return ad::matmul(gap, bind(p.w_o2u));
}

ad::Var calibrate(Binding& bind, const CCAFCParams& p, const ad::Var& x_u, const ad::Var& delta) {
  const auto k = static_cast<std::size_t>(x_u.rows());
  ad::Var d = ad::repeat_rows(delta, k);
  ad::Var gate = ad::softsign(ad::matmul(ad::concat_cols(x_u, d), bind(p.w_gate)));
  return ad::sub(x_u, ad::mul(d, gate));
}

ad::Var importance_scores(Binding& bind, const CCAFCParams& p, const ad::Var& target_rows,
                          const ad::Var& provider_rows) {
  ad::Var joined = ad::concat_cols(ad::matmul(target_rows, bind(p.w_c)), ad::matmul(provider_rows, bind(p.w_b)));
  return ad::matmul(ad::prelu(joined, bind(p.prelu_slope)), bind(p.a_cb));
}

ad::Var neighbor_importance(Binding& bind, const CCAFCParams& p, const ad::Var& target_row,
                            const ad::Var& provider_rows) {
  const auto k = static_cast<std::size_t>(provider_rows.rows());
  if (k == 0) throw ValidationError("neighbor_importance: empty provider set");
  ad::Var scores = importance_scores(bind, p, ad::repeat_rows(target_row, k), provider_rows);
  return ad::segment_softmax(scores, ad::Index(k, 0), 1);
}

Completion complete_features(Binding& bind, const CCAFCParams& p, const ad::Var& x_o,
                             const Matrix& x_u_observed, const std::vector<int>& psi,
                             const std::vector<double>& weights, const FrontierPlan& plan) {
  ad::Tape& tape = bind.tape();
  const std::size_t n = psi.size();
  if (static_cast<std::size_t>(x_o.rows()) != n || static_cast<std::size_t>(x_u_observed.rows()) != n ||
      x_u_observed.cols() != p.unobservable_dim)
    throw ShapeError("complete_features: features " + ad::shape_of(x_o.value()) + " / " +
                     ad::shape_of(x_u_observed) + " for " + std::to_string(n) + " nodes");

  Completion out;
  out.plan = plan;
  out.completed.assign(n, false);
  out.delta = domain_difference_u(bind, p, x_o, psi, weights);

  Matrix start = x_u_observed;
  for (std::size_t i = 0; i < n; ++i)
    if (psi[i] != 0) start.row(static_cast<Eigen::Index>(i)).setZero();
  ad::Var current = tape.constant(std::move(start));

  for (std::size_t t = 0; t < plan.steps.size(); ++t) {
    const auto& step = plan.steps[t];
    ad::Var providers = ad::gather_rows(current, step.edge_provider);
    if (t == 0 || p.cfg.late_calibration) providers = calibrate(bind, p, providers, out.delta);
    ad::Var scores = importance_scores(bind, p, ad::gather_rows(x_o, step.edge_target),
                                       ad::gather_rows(x_o, step.edge_provider));
    ad::Var alpha = ad::segment_softmax(scores, step.edge_segment, step.targets.size());
    ad::Var filled = ad::scatter_add_rows(ad::mul_col(providers, alpha), step.edge_target, n);
    current = ad::add(current, filled);
    for (std::size_t i : step.targets) out.completed[i] = true;
  }
  out.x_u = current;
  return out;
}

ad::Var dist_loss(const Completion& c, const std::vector<int>& psi, const std::vector<double>& weights) {
  ad::Tape& tape = c.x_u.tape();
  ad::Var inner = ad::matmul(tape.constant(signed_domain_row(psi, weights, c.completed)), c.x_u);
  return ad::squared_l2(ad::sub(c.delta, inner));
}

}  // namespace hktgnn::ccafc
