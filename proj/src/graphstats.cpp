#include "hktgnn/graphstats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "hktgnn/error.hpp"

namespace hktgnn::stats {

namespace {

std::vector<std::vector<std::size_t>> dedup(std::vector<std::vector<std::size_t>> adj) {
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return adj;
}

double norm2(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// Symmetric sparse operator applied as y = op(x); returns residual-checked
// power iteration result. `shift` is added to the diagonal during iteration
// only; the reported eigenvalue is of the unshifted operator.
template <class Apply>
SpectralVector power_iterate(std::size_t n, Apply apply, std::vector<double> v, double shift,
                             double tol, int max_iter, const char* what) {
  double nv = norm2(v);
  for (auto& x : v) x /= nv;
  std::vector<double> w(n);
  for (int it = 1; it <= max_iter; ++it) {
    apply(v, w);
    const double mu = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += (w[i] - mu * v[i]) * (w[i] - mu * v[i]);
    res = std::sqrt(res);
    for (std::size_t i = 0; i < n; ++i) w[i] += shift * v[i];
    const double nw = norm2(w);
    if (nw == 0.0) throw ConvergenceError(std::string(what) + ": iterate collapsed to zero", it);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    if (res <= tol) {
      apply(v, w);
      const double lambda = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
      return {std::move(v), lambda};
    }
  }
  throw ConvergenceError(std::string(what) + ": power iteration did not converge", max_iter);
}

}  // namespace

std::vector<std::vector<std::size_t>> Digraph::undirected_adjacency() const {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [s, d] : edges) {
    if (s == d) continue;
    adj[s].push_back(d);
    adj[d].push_back(s);
  }
  return dedup(std::move(adj));
}

std::vector<std::vector<std::size_t>> Digraph::out_adjacency() const {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [s, d] : edges)
    if (s != d) adj[s].push_back(d);
  return dedup(std::move(adj));
}

Digraph to_digraph(const CBGraph& cb) { return {cb.size(), cb.edges}; }

Digraph to_digraph(const SingleProductSubgraph& sub) {
  Digraph g{sub.size(), {}};
  g.edges.reserve(sub.edges.size());
  for (const auto& e : sub.edges) g.edges.emplace_back(e.src, e.dst);
  return g;
}

CentralityVector eigenvector_centrality(const Digraph& g, double tol, int max_iter) {
  if (g.n == 0) throw ValidationError("eigenvector_centrality: empty graph");
  const auto adj = g.undirected_adjacency();
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < g.n; ++i) {
      double s = 0.0;
      for (std::size_t j : adj[i]) s += x[j];
      y[i] = s;
    }
  };
  auto sv = power_iterate(g.n, apply, std::vector<double>(g.n, 1.0), 1.0, tol, max_iter,
                          "eigenvector_centrality");
  for (auto& x : sv.values) x = std::max(x, 0.0);
  return {std::move(sv.values), CentralityKind::Eigenvector};
}

CentralityVector degree_centrality(const Digraph& g) {
  if (g.n == 0) throw ValidationError("degree_centrality: empty graph");
  CentralityVector c{std::vector<double>(g.n, 0.0), CentralityKind::Degree};
  if (g.n == 1) {
    c.values[0] = 1.0;
    return c;
  }
  const auto out = g.out_adjacency();
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j : out[i]) {
      c.values[i] += 1.0;
      c.values[j] += 1.0;
    }
  for (auto& x : c.values) x /= static_cast<double>(g.n - 1);
  return c;
}

CentralityVector closeness_centrality(const Digraph& g, bool directed) {
  if (g.n == 0) throw ValidationError("closeness_centrality: empty graph");
  const auto adj = directed ? g.out_adjacency() : g.undirected_adjacency();
  CentralityVector c{std::vector<double>(g.n, 0.0), CentralityKind::Closeness};
  std::vector<int> dist(g.n);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < g.n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[s] = 0;
    queue.assign(1, s);
    double total = 0.0;
    std::size_t reached = 1;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v : adj[u]) {
        if (dist[v] >= 0) continue;
        dist[v] = dist[u] + 1;
        total += dist[v];
        ++reached;
        queue.push_back(v);
      }
    }
    if (total > 0.0 && g.n > 1) {
      const double r1 = static_cast<double>(reached - 1);
      c.values[s] = (r1 / total) * (r1 / static_cast<double>(g.n - 1));
    }
  }
  return c;
}

CentralityVector betweenness_centrality(const Digraph& g, bool directed) {
  if (g.n == 0) throw ValidationError("betweenness_centrality: empty graph");
  const auto adj = directed ? g.out_adjacency() : g.undirected_adjacency();
  const std::size_t n = g.n;
  CentralityVector c{std::vector<double>(n, 0.0), CentralityKind::Betweenness};
  if (n <= 2) return c;

  std::vector<std::vector<std::size_t>> pred(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<int> dist(n);
  std::vector<std::size_t> order;
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    for (auto& p : pred) p.clear();
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    order.clear();
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      order.push_back(u);
      for (std::size_t v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
        if (dist[v] == dist[u] + 1) {
          sigma[v] += sigma[u];
          pred[v].push_back(u);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t w = *it;
      for (std::size_t u : pred[w]) delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
      if (w != s) c.values[w] += delta[w];
    }
  }
  const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  for (auto& x : c.values) x *= scale;
  return c;
}

std::vector<int> shortest_paths_from_root(const SingleProductSubgraph& sub) {
  std::vector<int> dist(sub.size(), kUnreachable);
  if (sub.size() == 0) return dist;
  const auto adj = to_digraph(sub).undirected_adjacency();
  std::deque<std::size_t> queue{0};
  dist[0] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adj[u])
      if (dist[v] == kUnreachable) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }
  return dist;
}

void apply_sign_convention(std::vector<double>& v) {
  if (v.empty()) return;
  double best = 0.0;
  for (double x : v) best = std::max(best, std::abs(x));
  if (best == 0.0) return;
  const double cutoff = best * (1.0 - 1e-9);
  for (double x : v) {
    if (std::abs(x) >= cutoff) {
      if (x < 0.0)
        for (auto& y : v) y = -y;
      return;
    }
  }
}

SpectralVector laplacian_top_eigenvector(const Digraph& g, double tol, int max_iter) {
  if (g.n == 0) throw ValidationError("laplacian_top_eigenvector: empty graph");
  const auto adj = g.undirected_adjacency();
  const bool edgeless =
      std::all_of(adj.begin(), adj.end(), [](const auto& row) { return row.empty(); });
  if (edgeless) {
    std::vector<double> e1(g.n, 0.0);
    e1[0] = 1.0;
    return {std::move(e1), 0.0};
  }
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < g.n; ++i) {
      double s = static_cast<double>(adj[i].size()) * x[i];
      for (std::size_t j : adj[i]) s -= x[j];
      y[i] = s;
    }
  };
  // Index-dependent start so that no eigenvector is orthogonal to it by symmetry.
  std::vector<double> start(g.n);
  for (std::size_t i = 0; i < g.n; ++i) start[i] = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i + 1));
  auto sv = power_iterate(g.n, apply, std::move(start), 0.0, tol, max_iter, "laplacian_top_eigenvector");
  apply_sign_convention(sv.values);
  return sv;
}

SpectralVector laplacian_top_eigenvector(const SingleProductSubgraph& sub) {
  return laplacian_top_eigenvector(to_digraph(sub));
}

}  // namespace hktgnn::stats
