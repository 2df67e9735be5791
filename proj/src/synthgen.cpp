#include "hktgnn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "hktgnn/error.hpp"

namespace hktgnn::synth {

namespace {

using Rng = std::mt19937_64;

constexpr int kCategories = 5;
constexpr int kContinuous = kBusinessDim - kCategories;

enum class Cause { None, ZeroCompany, MissingStatements, MissingRelations };

struct Company {
  NodeId id = 0;
  CompanyRecord record;
  bool shareable = false;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Heavy-tailed company count clipped to [lo, hi].
int draw_company_count(Rng& rng, int lo, int hi) {
  std::lognormal_distribution<double> d(1.5, 0.8);
  const int c = static_cast<int>(std::floor(d(rng)));
  return std::clamp(c, lo, hi);
}

std::vector<std::pair<int, int>> sample_product_edges(Rng& rng, int n, int m) {
  std::vector<std::pair<int, int>> out;
  if (m == 0) return out;
  const long long possible = static_cast<long long>(n) * (n - 1);
  if (2LL * m > possible) {
    std::vector<std::pair<int, int>> all;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b) all.emplace_back(a, b);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(static_cast<std::size_t>(m));
    std::sort(all.begin(), all.end());
    return all;
  }
  std::lognormal_distribution<double> activity(0.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (auto& x : w) x = activity(rng);
  std::discrete_distribution<int> pick(w.begin(), w.end());
  std::set<std::pair<int, int>> seen;
  while (static_cast<int>(out.size()) < m) {
    const int a = pick(rng);
    const int b = pick(rng);
    if (a == b || !seen.emplace(a, b).second) continue;
    out.emplace_back(a, b);
  }
  return out;
}

// Per-product risk factor z: a standardized mix of an own draw g and the mean
// g of adjacent products, so risk is partly predictable from the neighborhood.
std::vector<double> latent_factor(Rng& rng, int n, const std::vector<std::pair<int, int>>& edges) {
  std::normal_distribution<double> normal;
  std::vector<double> g(static_cast<std::size_t>(n));
  for (auto& x : g) x = normal(rng);
  std::vector<double> sum(g.size(), 0.0);
  std::vector<int> deg(g.size(), 0);
  for (auto [a, b] : edges) {
    sum[a] += g[b];
    sum[b] += g[a];
    ++deg[a];
    ++deg[b];
  }
  constexpr double kOwn = 0.3;
  std::vector<double> z(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) z[i] = kOwn * g[i] + (deg[i] ? sum[i] / deg[i] : 0.0);
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
  double var = 0.0;
  for (double x : z) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(z.size()));
  for (auto& x : z) x = sd > 0.0 ? (x - mean) / sd : 0.0;
  return z;
}

std::vector<Cause> assign_causes(Rng& rng, int n, double fraction, bool companies_available) {
  std::vector<Cause> causes(static_cast<std::size_t>(n), Cause::None);
  const int nb = static_cast<int>(std::lround(fraction * n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int zero = companies_available ? static_cast<int>(std::lround(0.2 * nb)) : nb;
  const int statements = companies_available ? static_cast<int>(std::lround(0.4 * nb)) : 0;
  for (int k = 0; k < nb; ++k) {
    Cause c = k < zero ? Cause::ZeroCompany : k < zero + statements ? Cause::MissingStatements
                                                                     : Cause::MissingRelations;
    causes[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = c;
  }
  return causes;
}

struct Loadings {
  std::vector<double> category;    // kCategories
  std::vector<double> business;    // kContinuous
  std::vector<double> financial;   // kFinancialDim
};

Loadings draw_loadings(Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  auto sign = [&] { return coin(rng) ? 1.0 : -1.0; };
  Loadings l;
  for (int k = 0; k < kCategories; ++k) l.category.push_back(k - 2.0);
  for (int k = 0; k < kContinuous; ++k) l.business.push_back(sign());
  for (int k = 0; k < kFinancialDim; ++k) l.financial.push_back(sign());
  return l;
}

CompanyRecord draw_record(Rng& rng, const Loadings& l, double s, double z, bool risky) {
  std::normal_distribution<double> normal;
  CompanyRecord r;
  r.business.assign(kBusinessDim, 0.0);
  std::vector<double> logits(kCategories);
  for (int k = 0; k < kCategories; ++k) logits[k] = 0.1 * s * z * l.category[k] + normal(rng);
  r.business[static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin())] = 1.0;
  for (int k = 0; k < kContinuous; ++k)
    r.business[static_cast<std::size_t>(kCategories + k)] = 0.1 * s * z * l.business[k] + normal(rng);
  std::vector<double> f(kFinancialDim);
  for (int k = 0; k < kFinancialDim; ++k)
    f[k] = s * z * l.financial[k] + (risky ? 0.5 * s * l.financial[k] : 0.0) + normal(rng);
  r.financial = std::move(f);
  r.risk = risky;
  return r;
}

}  // namespace

void GenConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ValidationError("invalid " + field + ": " + why);
  };
  if (n_products < 1) fail("n_products", "must be >= 1");
  if (n_product_edges < 0) fail("n_product_edges", "must be >= 0");
  if (static_cast<long long>(n_product_edges) > static_cast<long long>(n_products) * (n_products - 1))
    fail("n_product_edges", "exceeds n_products * (n_products - 1)");
  if (companies_min < 0 || companies_max < companies_min) fail("companies_per_product", "need 0 <= min <= max");
  if (investors_min < 0 || investors_max < investors_min) fail("investors_per_company", "need 0 <= min <= max");
  if (!(biased_fraction >= 0.0 && biased_fraction <= 1.0)) fail("biased_fraction", "must lie in [0, 1]");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) fail("signal_strength", "must lie in [0, 1]");
  if (!(share_fraction >= 0.0 && share_fraction <= 1.0)) fail("share_fraction", "must lie in [0, 1]");
  if (companies_max == 0 && std::lround(biased_fraction * n_products) < n_products)
    fail("companies_per_product", "complete products need at least one company");
}

SupplyGraph generate_supply_graph(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int n = cfg.n_products;
  const auto product_edges = sample_product_edges(rng, n, cfg.n_product_edges);
  const auto z = latent_factor(rng, n, product_edges);
  const auto causes = assign_causes(rng, n, cfg.biased_fraction, cfg.companies_max > 0);
  const Loadings loadings = draw_loadings(rng);
  const double s = cfg.signal_strength;

  std::vector<SupplyNode> nodes;
  std::vector<SupplyEdge> edges;
  for (int i = 0; i < n; ++i) nodes.push_back({i, NodeKind::Product, std::nullopt});
  for (auto [a, b] : product_edges) edges.push_back({a, b, EdgeKind::ProductToProduct});

  NodeId next_id = n;
  std::vector<Company> companies;
  std::vector<std::size_t> shareable;
  std::vector<SupplyEdge> membership;
  std::bernoulli_distribution share(cfg.share_fraction);
  std::bernoulli_distribution extra_flag(0.3);
  std::uniform_real_distribution<double> unit;

  for (int i = 0; i < n; ++i) {
    const Cause cause = causes[static_cast<std::size_t>(i)];
    if (cause == Cause::ZeroCompany) continue;
    const int lo = std::max(cfg.companies_min, 1);
    const int count = draw_company_count(rng, lo, std::max(cfg.companies_max, lo));
    const bool risky = unit(rng) < sigmoid(4.0 * s * z[static_cast<std::size_t>(i)]);

    std::set<std::size_t> members;
    std::vector<std::size_t> fresh;
    for (int slot = 0; slot < count; ++slot) {
      if (slot > 0 && !shareable.empty() && share(rng)) {
        std::uniform_int_distribution<std::size_t> pick(0, shareable.size() - 1);
        members.insert(shareable[pick(rng)]);
        continue;
      }
      const bool flagged = risky && (fresh.empty() || extra_flag(rng));
      Company c;
      c.id = next_id++;
      c.record = draw_record(rng, loadings, s, z[static_cast<std::size_t>(i)], flagged);
      companies.push_back(std::move(c));
      fresh.push_back(companies.size() - 1);
      members.insert(companies.size() - 1);
    }

    // The first company is always exclusive to this product; biased causes land there.
    Company& first = companies[fresh.front()];
    if (cause == Cause::MissingStatements) {
      first.record.financial.reset();
      first.record.has_statements = false;
    } else if (cause == Cause::MissingRelations) {
      first.record.has_relations = false;
    }
    if (cause == Cause::None)
      for (std::size_t c : fresh)
        if (!companies[c].record.risk) {
          companies[c].shareable = true;
          shareable.push_back(c);
        }
    for (std::size_t c : members) membership.push_back({companies[c].id, i, EdgeKind::CompanyToProduct});
  }

  std::uniform_int_distribution<int> investors(cfg.investors_min, cfg.investors_max);
  std::bernoulli_distribution invests_in(0.5);
  std::vector<SupplyNode> others;
  std::vector<SupplyEdge> relations;
  for (const auto& c : companies) {
    if (!c.record.has_relations) continue;
    const int k = investors(rng);
    for (int j = 0; j < k; ++j) {
      const NodeId id = next_id++;
      if (invests_in(rng)) {
        others.push_back({id, NodeKind::Investor, std::nullopt});
        relations.push_back({id, c.id, EdgeKind::InvestOrSupplyToCompany});
      } else {
        others.push_back({id, NodeKind::Investee, std::nullopt});
        relations.push_back({c.id, id, EdgeKind::InvestOrSupplyToCompany});
      }
    }
  }

  for (auto& c : companies) nodes.push_back({c.id, NodeKind::ListedCompany, std::move(c.record)});
  nodes.insert(nodes.end(), others.begin(), others.end());
  edges.insert(edges.end(), membership.begin(), membership.end());
  edges.insert(edges.end(), relations.begin(), relations.end());
  return SupplyGraph(std::move(nodes), std::move(edges));
}

JoinMode JoinMode::random_join(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("invalid join probability: must lie in [0, 1]");
  return {false, p};
}

JoinMode JoinMode::parse(const std::string& text) {
  if (text == "full") return full_join();
  if (text.size() > 1 && text[0] == 'p') {
    const std::string digits = text.substr(1);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
        digits.size() <= 3) {
      const int pct = std::stoi(digits);
      if (pct <= 100) return random_join(pct / 100.0);
    }
  }
  throw ValidationError("invalid mode '" + text + "' (expected full, p25, p50 or p75)");
}

std::string JoinMode::name() const {
  if (full) return "full";
  return "p" + std::to_string(static_cast<int>(std::lround(p * 100.0)));
}

CompanyGraph derive_company_graph(const SupplyGraph& g, const JoinMode& mode, std::uint64_t seed) {
  const auto subs = extract_single_product_subgraphs(g);
  const ProductFeatures pf = aggregate_product_features(g, subs);
  std::map<NodeId, std::size_t> product_row;
  for (std::size_t i = 0; i < g.products().size(); ++i) product_row.emplace(g.products()[i], i);

  std::map<NodeId, std::vector<NodeId>> companies_of;
  std::map<NodeId, std::vector<std::size_t>> products_of;
  for (const auto& e : g.edges())
    if (e.kind == EdgeKind::CompanyToProduct) {
      companies_of[e.dst].push_back(e.src);
      products_of[e.src].push_back(product_row.at(e.dst));
    }

  std::set<std::pair<NodeId, NodeId>> candidates;
  for (const auto& e : g.edges()) {
    if (e.kind != EdgeKind::ProductToProduct) continue;
    auto a = companies_of.find(e.src);
    auto b = companies_of.find(e.dst);
    if (a == companies_of.end() || b == companies_of.end()) continue;
    for (NodeId x : a->second)
      for (NodeId y : b->second)
        if (x != y) candidates.emplace(x, y);
  }

  std::vector<std::pair<NodeId, NodeId>> kept;
  if (mode.full) {
    kept.assign(candidates.begin(), candidates.end());
  } else {
    Rng rng(seed);
    std::bernoulli_distribution keep(mode.p);
    for (const auto& c : candidates)
      if (keep(rng)) kept.push_back(c);
  }

  CompanyGraph out;
  std::set<NodeId> present;
  for (auto [a, b] : kept) {
    present.insert(a);
    present.insert(b);
  }
  out.companies.assign(present.begin(), present.end());
  std::map<NodeId, std::size_t> row;
  for (std::size_t i = 0; i < out.companies.size(); ++i) row.emplace(out.companies[i], i);
  out.graph.n = out.companies.size();
  for (auto [a, b] : kept) out.graph.edges.emplace_back(row.at(a), row.at(b));

  out.features = Matrix::Zero(static_cast<Eigen::Index>(out.companies.size()), kCompanyFeatureDim);
  for (std::size_t i = 0; i < out.companies.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto& rec = *g.node(out.companies[i]).record;
    if (rec.financial)
      for (int k = 0; k < kFinancialDim; ++k) out.features(r, k) = (*rec.financial)[static_cast<std::size_t>(k)];
    const auto& rows = products_of.at(out.companies[i]);
    for (std::size_t p : rows)
      out.features.row(r).tail(kBusinessDim) += pf.business.row(static_cast<Eigen::Index>(p));
    out.features.row(r).tail(kBusinessDim) /= static_cast<double>(rows.size());
    out.labels.push_back(rec.risk ? 1 : 0);
  }
  return out;
}

StatsRow dataset_stats(const std::string& name, const stats::Digraph& g) {
  if (g.n == 0) throw ValidationError("dataset_stats: graph '" + name + "' is empty");
  auto mean_pct = [](const stats::CentralityVector& c) {
    return 100.0 * std::accumulate(c.values.begin(), c.values.end(), 0.0) / static_cast<double>(c.values.size());
  };
  std::set<std::pair<std::size_t, std::size_t>> distinct;
  for (auto [a, b] : g.edges)
    if (a != b) distinct.emplace(a, b);
  StatsRow row;
  row.name = name;
  row.edges = static_cast<double>(distinct.size());
  row.betweenness = mean_pct(stats::betweenness_centrality(g));
  row.degree = mean_pct(stats::degree_centrality(g));
  row.eigenvector = mean_pct(stats::eigenvector_centrality(g, 1e-10, 100000));
  row.closeness = mean_pct(stats::closeness_centrality(g));
  return row;
}

std::vector<StatsRow> summarize_stats(const std::string& name, const std::vector<StatsRow>& rows) {
  if (rows.empty()) return {};
  StatsRow lo = rows.front(), hi = rows.front(), mean;
  auto fields = [](StatsRow& r) {
    return std::array<double*, 5>{&r.edges, &r.betweenness, &r.degree, &r.eigenvector, &r.closeness};
  };
  auto lf = fields(lo), hf = fields(hi), mf = fields(mean);
  for (auto r : rows) {
    auto f = fields(r);
    for (std::size_t k = 0; k < f.size(); ++k) {
      *lf[k] = std::min(*lf[k], *f[k]);
      *hf[k] = std::max(*hf[k], *f[k]);
      *mf[k] += *f[k] / static_cast<double>(rows.size());
    }
  }
  lo.name = name + " [min]";
  hi.name = name + " [max]";
  mean.name = name + " [mean]";
  return {lo, hi, mean};
}

}  // namespace hktgnn::synth
