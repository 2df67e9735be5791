#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>

namespace hktgnn::testing {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  return normal_matrix(rng, rows, cols, scale);
}

std::vector<int> random_labels(Rng& rng, std::size_t n, double p_one) {
  std::bernoulli_distribution coin(p_one);
  std::vector<int> out(n);
  for (auto& v : out) v = coin(rng) ? 1 : 0;
  return out;
}

stats::Digraph random_digraph(Rng& rng, std::size_t n, double p) {
  std::bernoulli_distribution coin(p);
  stats::Digraph g;
  g.n = n;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && coin(rng)) g.edges.emplace_back(a, b);
  return g;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace {

double loss_value(const ParamStore& store, const LossFn& loss) {
  ad::Tape tape;
  Binding bind(tape, store);
  return loss(bind).scalar();
}

}  // namespace

FdReport fd_check(ParamStore& store, const LossFn& loss, const std::vector<std::size_t>& params, Rng& rng,
                  int coords, double h) {
  std::vector<Matrix> grads;
  {
    ad::Tape tape;
    Binding bind(tape, store);
    ad::Var l = loss(bind);
    tape.backward(l);
    grads = bind.gradients();
  }
  FdReport report;
  for (std::size_t p : params) {
    Matrix& value = store.value(p);
    const auto size = static_cast<std::size_t>(value.size());
    if (size == 0) continue;
    std::vector<std::size_t> picks(size);
    std::iota(picks.begin(), picks.end(), 0);
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(std::min<std::size_t>(size, static_cast<std::size_t>(coords)));
    for (std::size_t flat : picks) {
      double& x = value.data()[flat];
      const double saved = x;
      x = saved + h;
      const double up = loss_value(store, loss);
      x = saved - h;
      const double down = loss_value(store, loss);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[p].data()[flat];
      const double err = relative_error(analytic, numeric);
      ++report.checked;
      if (report.worst.empty() || err > report.max_rel) {
        report.max_rel = err;
        report.worst = store.name(p) + "[" + std::to_string(flat) + "]";
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

FdReport fd_check_all(ParamStore& store, const LossFn& loss, Rng& rng, int coords, double h) {
  std::vector<std::size_t> all(store.size());
  std::iota(all.begin(), all.end(), 0);
  return fd_check(store, loss, all, rng, coords, h);
}

std::vector<std::size_t> params_in_group(const ParamStore& store, const std::string& group) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < store.size(); ++i)
    if (store.group(i) == group) out.push_back(i);
  return out;
}

ad::Var probe_loss(const ad::Var& v, std::uint64_t seed) {
  Rng rng(seed);
  ad::Var weights = v.tape().constant(random_matrix(rng, v.rows(), v.cols()));
  return ad::sum(ad::mul(v, weights));
}

SupplyGraph chain_supply_graph(int n_products, int companies) {
  std::vector<SupplyNode> nodes;
  std::vector<SupplyEdge> edges;
  NodeId next = n_products;
  for (int i = 0; i < n_products; ++i) nodes.push_back({i, NodeKind::Product, std::nullopt});
  for (int i = 0; i + 1 < n_products; ++i) edges.push_back({i, i + 1, EdgeKind::ProductToProduct});
  for (int i = 0; i < n_products; ++i)
    for (int c = 0; c < companies; ++c) {
      CompanyRecord r;
      r.business.assign(kBusinessDim, 0.1 * (i + c));
      r.financial = std::vector<double>(kFinancialDim, static_cast<double>(i) - c);
      r.risk = (i + c) % 3 == 0;
      const NodeId company = next++;
      const NodeId investor = next++;
      nodes.push_back({company, NodeKind::ListedCompany, r});
      nodes.push_back({investor, NodeKind::Investor, std::nullopt});
      edges.push_back({company, i, EdgeKind::CompanyToProduct});
      edges.push_back({investor, company, EdgeKind::InvestOrSupplyToCompany});
    }
  return SupplyGraph(std::move(nodes), std::move(edges));
}

CBGraph random_cb_graph(Rng& rng, std::size_t n, double edge_p, double biased_p) {
  CBGraph g;
  const auto rows = static_cast<Eigen::Index>(n);
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back(static_cast<NodeId>(i));
  g.edges = random_digraph(rng, n, edge_p).edges;
  g.x_e = random_matrix(rng, rows, kEmbeddingDim);
  g.x_b = random_matrix(rng, rows, kBusinessDim);
  g.x_f = random_matrix(rng, rows, kFinancialDim);
  g.psi = random_labels(rng, n, biased_p);
  if (n >= 2) {
    g.psi[0] = 0;
    g.psi[1] = 1;
  }
  g.y = random_labels(rng, n);
  for (std::size_t i = 0; i < n; ++i) {
    g.mask_f.push_back(g.psi[i] == 0);
    if (g.psi[i]) g.x_f.row(static_cast<Eigen::Index>(i)).setZero();
  }
  g.validate();
  return g;
}

}  // namespace hktgnn::testing

namespace hktgnn::testing::oracle {

namespace {

std::vector<std::vector<bool>> adjacency(const stats::Digraph& g, bool directed) {
  std::vector<std::vector<bool>> a(g.n, std::vector<bool>(g.n, false));
  for (auto [s, d] : g.edges) {
    if (s == d) continue;
    a[s][d] = true;
    if (!directed) a[d][s] = true;
  }
  return a;
}

// Appends every walk s -> t of exactly `len` hops; with len = d(s, t) these
// are the shortest paths.
void enumerate(const std::vector<std::vector<bool>>& a, std::size_t u, std::size_t t, int len,
               std::vector<std::size_t>& path, std::vector<std::vector<std::size_t>>& out) {
  if (len == 0) {
    if (u == t) out.push_back(path);
    return;
  }
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (!a[u][v]) continue;
    path.push_back(v);
    enumerate(a, v, t, len - 1, path, out);
    path.pop_back();
  }
}

}  // namespace

std::vector<std::vector<int>> floyd_warshall(const stats::Digraph& g, bool directed) {
  const auto a = adjacency(g, directed);
  std::vector<std::vector<int>> d(g.n, std::vector<int>(g.n, kInf));
  for (std::size_t i = 0; i < g.n; ++i) {
    d[i][i] = 0;
    for (std::size_t j = 0; j < g.n; ++j)
      if (a[i][j]) d[i][j] = 1;
  }
  for (std::size_t k = 0; k < g.n; ++k)
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

std::vector<double> betweenness(const stats::Digraph& g, bool directed) {
  const std::size_t n = g.n;
  std::vector<double> c(n, 0.0);
  if (n <= 2) return c;
  const auto a = adjacency(g, directed);
  const auto d = floyd_warshall(g, directed);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < n; ++t) {
      if (s == t || d[s][t] >= kInf || (!directed && t < s)) continue;
      std::vector<std::vector<std::size_t>> paths;
      std::vector<std::size_t> path;
      enumerate(a, s, t, d[s][t], path, paths);
      for (std::size_t v = 0; v < n; ++v) {
        if (v == s || v == t) continue;
        std::size_t through = 0;
        for (const auto& p : paths)
          if (std::find(p.begin(), p.end(), v) != p.end()) ++through;
        c[v] += static_cast<double>(through) / static_cast<double>(paths.size());
      }
    }
  double pairs = static_cast<double>(n - 1) * static_cast<double>(n - 2);
  if (!directed) pairs /= 2.0;
  for (auto& x : c) x /= pairs;
  return c;
}

std::vector<double> closeness(const stats::Digraph& g, bool directed) {
  const auto d = floyd_warshall(g, directed);
  std::vector<double> c(g.n, 0.0);
  for (std::size_t s = 0; s < g.n; ++s) {
    double total = 0.0, reached = 0.0;
    for (std::size_t t = 0; t < g.n; ++t)
      if (t != s && d[s][t] < kInf) {
        total += d[s][t];
        reached += 1.0;
      }
    if (total > 0.0) c[s] = (reached / total) * (reached / static_cast<double>(g.n - 1));
  }
  return c;
}

std::vector<double> degree(const stats::Digraph& g) {
  const auto a = adjacency(g, true);
  std::vector<double> c(g.n, 0.0);
  if (g.n == 1) return {1.0};
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      if (a[i][j]) {
        c[i] += 1.0;
        c[j] += 1.0;
      }
  for (auto& x : c) x /= static_cast<double>(g.n - 1);
  return c;
}

Eigen::MatrixXd symmetric_adjacency(const stats::Digraph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.n), static_cast<Eigen::Index>(g.n));
  for (auto [s, d] : g.edges)
    if (s != d) {
      a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(d)) = 1.0;
      a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(s)) = 1.0;
    }
  return a;
}

std::pair<double, Eigen::VectorXd> top_eigenpair(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  const auto last = m.rows() - 1;
  return {solver.eigenvalues()(last), solver.eigenvectors().col(last)};
}

}  // namespace hktgnn::testing::oracle

namespace hktgnn::testing::oracle {

namespace {

double softsign(double x) { return x / (1.0 + std::abs(x)); }
double leaky(double x, double slope) { return x >= 0.0 ? x : slope * x; }

Eigen::RowVectorXd leaky_row(Eigen::RowVectorXd v, double slope) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = leaky(v(i), slope);
  return v;
}

bool both_domains(const std::vector<int>& psi) {
  return std::count(psi.begin(), psi.end(), 0) > 0 && std::count(psi.begin(), psi.end(), 1) > 0;
}

std::vector<double> softmax(const std::vector<double>& s) {
  const double m = *std::max_element(s.begin(), s.end());
  std::vector<double> e(s.size());
  double total = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) total += e[k] = std::exp(s[k] - m);
  for (auto& x : e) x /= total;
  return e;
}

}  // namespace

CompletionTrace ccafc_complete(const ParamStore& store, const ccafc::CCAFCParams& p, const Matrix& x_o,
                               const Matrix& x_u_observed, const std::vector<int>& psi,
                               const std::vector<double>& weights,
                               const std::vector<std::pair<std::size_t, std::size_t>>& edges, int k) {
  const std::size_t n = psi.size();
  const Matrix& w_c = store.value(p.w_c);
  const Matrix& w_b = store.value(p.w_b);
  const Matrix& a = store.value(p.a_cb);
  const double slope = store.value(p.prelu_slope)(0, 0);
  const Matrix& w_gate = store.value(p.w_gate);
  const Matrix& w_o2u = store.value(p.w_o2u);
  const Eigen::Index du = x_u_observed.cols();

  CompletionTrace out;
  Eigen::RowVectorXd gap = Eigen::RowVectorXd::Zero(x_o.cols());
  if (both_domains(psi))
    for (std::size_t i = 0; i < n; ++i)
      gap += (psi[i] == 0 ? weights[i] : -weights[i]) * x_o.row(static_cast<Eigen::Index>(i));
  out.delta = gap * w_o2u;
  const Eigen::RowVectorXd delta = out.delta.row(0);

  std::vector<std::set<std::size_t>> nbr(n);
  for (auto [s, d] : edges)
    if (s != d) {
      nbr[s].insert(d);
      nbr[d].insert(s);
    }

  Matrix x = x_u_observed;
  std::vector<bool> plus(n);
  for (std::size_t i = 0; i < n; ++i) {
    plus[i] = psi[i] == 0;
    if (!plus[i]) x.row(static_cast<Eigen::Index>(i)).setZero();
  }
  out.provider_values.resize(n);
  for (int t = 0; t < k; ++t) {
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < n; ++i) {
      if (plus[i]) continue;
      for (std::size_t j : nbr[i])
        if (plus[j]) {
          targets.push_back(i);
          break;
        }
    }
    if (targets.empty()) break;
    Matrix next = x;
    for (std::size_t i : targets) {
      std::vector<std::size_t> providers;
      for (std::size_t j : nbr[i])
        if (plus[j]) providers.push_back(j);
      Matrix values(static_cast<Eigen::Index>(providers.size()), du);
      std::vector<double> scores;
      for (std::size_t q = 0; q < providers.size(); ++q) {
        const auto j = static_cast<Eigen::Index>(providers[q]);
        Eigen::RowVectorXd v = x.row(j);
        if (t == 0 || p.cfg.late_calibration) {
          Eigen::RowVectorXd joined(2 * du);
          joined << v, delta;
          const Eigen::RowVectorXd g = joined * w_gate;
          for (Eigen::Index c = 0; c < du; ++c) v(c) -= delta(c) * softsign(g(c));
        }
        values.row(static_cast<Eigen::Index>(q)) = v;
        Eigen::RowVectorXd both(2 * w_c.cols());
        both << x_o.row(static_cast<Eigen::Index>(i)) * w_c, x_o.row(j) * w_b;
        scores.push_back((leaky_row(both, slope) * a)(0, 0));
      }
      const auto alpha = softmax(scores);
      Eigen::RowVectorXd filled = Eigen::RowVectorXd::Zero(du);
      for (std::size_t q = 0; q < providers.size(); ++q) filled += alpha[q] * values.row(static_cast<Eigen::Index>(q));
      next.row(static_cast<Eigen::Index>(i)) = filled;
      out.provider_values[i] = values;
    }
    x = next;
    for (std::size_t i : targets) plus[i] = true;
    out.frontier.push_back(targets);
  }
  out.x_u = x;
  return out;
}

AttentionTrace dcamp_layer(const ParamStore& store, const dcamp::DCAMPParams& p, const dcamp::LayerParams& lp,
                           const Matrix& h, const dcamp::EdgeList& edges, const std::vector<int>& psi,
                           const Matrix& delta, bool plain) {
  const std::size_t ne = edges.src.size();
  const Eigen::Index dh = h.cols();
  AttentionTrace out;
  out.shift = Matrix::Zero(static_cast<Eigen::Index>(ne), dh);
  std::vector<double> scores(ne);
  Matrix shifted(static_cast<Eigen::Index>(ne), dh);
  for (std::size_t k = 0; k < ne; ++k) {
    const auto j = static_cast<Eigen::Index>(edges.src[k]);
    const auto i = static_cast<Eigen::Index>(edges.dst[k]);
    const int d = plain ? 0 : psi[edges.dst[k]];
    Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(dh);
    if (!plain && psi[edges.src[k]] != d) {
      Eigen::RowVectorXd joined(2 * dh);
      joined << h.row(j), delta.row(0);
      const double g = softsign((joined * store.value(lp.gate[d]))(0, 0));
      s = (d == 0 ? 1.0 : -1.0) * g * delta.row(0);
    }
    out.shift.row(static_cast<Eigen::Index>(k)) = s;
    const Eigen::RowVectorXd ht = h.row(j) + s;
    shifted.row(static_cast<Eigen::Index>(k)) = ht;
    const Matrix& w = store.value(lp.w[d]);
    Eigen::RowVectorXd both(2 * w.cols());
    both << ht * w, h.row(i) * w;
    scores[k] = (leaky_row(both, p.cfg.attn_slope) * store.value(lp.a[d]))(0, 0);
  }
  out.attention.assign(ne, 0.0);
  Matrix m = Matrix::Zero(h.rows(), dh);
  for (std::size_t i = 0; i < edges.n_nodes; ++i) {
    std::vector<std::size_t> in;
    std::vector<double> s;
    for (std::size_t k = 0; k < ne; ++k)
      if (edges.dst[k] == i) {
        in.push_back(k);
        s.push_back(scores[k]);
      }
    if (in.empty()) continue;
    const auto alpha = softmax(s);
    for (std::size_t q = 0; q < in.size(); ++q) {
      out.attention[in[q]] = alpha[q];
      m.row(static_cast<Eigen::Index>(i)) += alpha[q] * shifted.row(static_cast<Eigen::Index>(in[q]));
    }
  }
  out.h = h;
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    Eigen::RowVectorXd joined(2 * dh);
    joined << h.row(r), m.row(r);
    out.h.row(r) += leaky_row(joined * store.value(lp.w_update) + store.value(lp.b_update), p.cfg.update_slope);
  }
  return out;
}

}  // namespace hktgnn::testing::oracle
