#include "hktgnn/supply_graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "hktgnn/error.hpp"

namespace hktgnn {

namespace {

bool is_company_side(NodeKind k) {
  return k == NodeKind::ListedCompany || k == NodeKind::Investor || k == NodeKind::Investee;
}

std::string describe(const SupplyEdge& e) {
  return std::to_string(e.src) + "->" + std::to_string(e.dst) + " (" +
         std::string(to_string(e.kind)) + ")";
}

bool same_shape(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Product: return "product";
    case NodeKind::ListedCompany: return "listed_company";
    case NodeKind::Investor: return "investor";
    case NodeKind::Investee: return "investee";
  }
  return "?";
}

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::InvestOrSupplyToCompany: return "invest_or_supply";
    case EdgeKind::CompanyToProduct: return "company_to_product";
    case EdgeKind::ProductToProduct: return "product_to_product";
  }
  return "?";
}

NodeKind parse_node_kind(std::string_view text) {
  for (auto k : {NodeKind::Product, NodeKind::ListedCompany, NodeKind::Investor, NodeKind::Investee})
    if (to_string(k) == text) return k;
  throw ValidationError("unknown node kind '" + std::string(text) + "'");
}

EdgeKind parse_edge_kind(std::string_view text) {
  for (auto k : {EdgeKind::InvestOrSupplyToCompany, EdgeKind::CompanyToProduct,
                 EdgeKind::ProductToProduct})
    if (to_string(k) == text) return k;
  throw ValidationError("unknown edge kind '" + std::string(text) + "'");
}

SupplyGraph::SupplyGraph(std::vector<SupplyNode> nodes, std::vector<SupplyEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (!index_.emplace(n.id, i).second)
      throw ValidationError("duplicate node id " + std::to_string(n.id));
    if (n.kind == NodeKind::Product) products_.push_back(n.id);
    if (n.record) {
      if (n.kind != NodeKind::ListedCompany)
        throw ValidationError("node " + std::to_string(n.id) + ": only listed companies carry records");
      const auto& r = *n.record;
      if (r.business.size() != kBusinessDim)
        throw ValidationError("node " + std::to_string(n.id) + ": business info must have 17 entries");
      if (r.financial && r.financial->size() != kFinancialDim)
        throw ValidationError("node " + std::to_string(n.id) + ": financial statement must have 18 entries");
      if (!r.financial && r.has_statements)
        throw ValidationError("node " + std::to_string(n.id) +
                              ": has_statements=true but no financial statement");
    }
  }
  std::sort(products_.begin(), products_.end());

  for (const auto& e : edges_) {
    auto s = index_.find(e.src);
    auto d = index_.find(e.dst);
    if (s == index_.end() || d == index_.end())
      throw ValidationError("edge " + describe(e) + " references a missing node");
    if (e.src == e.dst) throw ValidationError("self-loop " + describe(e));
    const NodeKind sk = nodes_[s->second].kind;
    const NodeKind dk = nodes_[d->second].kind;
    bool ok = false;
    switch (e.kind) {
      case EdgeKind::CompanyToProduct:
        ok = sk == NodeKind::ListedCompany && dk == NodeKind::Product;
        break;
      case EdgeKind::ProductToProduct:
        ok = sk == NodeKind::Product && dk == NodeKind::Product;
        break;
      case EdgeKind::InvestOrSupplyToCompany:
        ok = is_company_side(sk) && is_company_side(dk) &&
             (sk == NodeKind::ListedCompany || dk == NodeKind::ListedCompany);
        break;
    }
    if (!ok) throw ValidationError("edge " + describe(e) + " connects incompatible node kinds");
  }
}

const SupplyNode& SupplyGraph::node(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown node id " + std::to_string(id));
  return nodes_[it->second];
}

std::vector<SingleProductSubgraph> extract_single_product_subgraphs(const SupplyGraph& g) {
  std::map<NodeId, std::vector<NodeId>> companies_of;  // product -> companies
  std::map<NodeId, std::vector<std::pair<NodeId, NodeId>>> relations_of;  // company -> invest edges
  for (const auto& e : g.edges()) {
    if (e.kind == EdgeKind::CompanyToProduct) {
      companies_of[e.dst].push_back(e.src);
    } else if (e.kind == EdgeKind::InvestOrSupplyToCompany) {
      if (g.node(e.src).kind == NodeKind::ListedCompany) relations_of[e.src].emplace_back(e.src, e.dst);
      if (g.node(e.dst).kind == NodeKind::ListedCompany) relations_of[e.dst].emplace_back(e.src, e.dst);
    }
  }

  std::vector<SingleProductSubgraph> out;
  out.reserve(g.products().size());
  for (NodeId p : g.products()) {
    std::set<NodeId> members;
    if (auto it = companies_of.find(p); it != companies_of.end())
      members.insert(it->second.begin(), it->second.end());

    std::set<NodeId> others;
    std::set<std::pair<NodeId, NodeId>> relation_edges;
    for (NodeId c : members) {
      auto it = relations_of.find(c);
      if (it == relations_of.end()) continue;
      for (const auto& [s, d] : it->second) {
        relation_edges.emplace(s, d);
        if (!members.contains(s)) others.insert(s);
        if (!members.contains(d)) others.insert(d);
      }
    }

    SingleProductSubgraph sub;
    sub.root = p;
    std::set<NodeId> rest(members);
    rest.insert(others.begin(), others.end());
    sub.nodes.push_back(p);
    sub.nodes.insert(sub.nodes.end(), rest.begin(), rest.end());
    std::unordered_map<NodeId, std::size_t> local;
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
      local.emplace(sub.nodes[i], i);
      sub.kinds.push_back(g.node(sub.nodes[i]).kind);
      sub.is_member_company.push_back(members.contains(sub.nodes[i]));
    }
    for (NodeId c : members) sub.edges.push_back({local.at(c), 0, EdgeKind::CompanyToProduct});
    for (const auto& [s, d] : relation_edges)
      sub.edges.push_back({local.at(s), local.at(d), EdgeKind::InvestOrSupplyToCompany});
    out.push_back(std::move(sub));
  }
  return out;
}

std::vector<int> assign_psi(const SupplyGraph& g, const std::vector<SingleProductSubgraph>& subs) {
  std::vector<int> psi;
  psi.reserve(subs.size());
  for (const auto& sub : subs) {
    int biased = 1;  // no attached companies
    for (std::size_t i = 0; i < sub.size(); ++i) {
      if (!sub.is_member_company[i]) continue;
      if (biased == 1) biased = 0;
      const auto& rec = g.node(sub.nodes[i]).record;
      if (!rec || !rec->has_relations || !rec->has_statements) {
        biased = 1;
        break;
      }
    }
    psi.push_back(biased);
  }
  return psi;
}

std::vector<int> assign_psi(const SupplyGraph& g) {
  return assign_psi(g, extract_single_product_subgraphs(g));
}

ProductFeatures aggregate_product_features(const SupplyGraph& g,
                                           const std::vector<SingleProductSubgraph>& subs) {
  const auto n = static_cast<Eigen::Index>(subs.size());
  ProductFeatures f;
  f.business = Matrix::Zero(n, kBusinessDim);
  f.financial = Matrix::Zero(n, kFinancialDim);
  f.psi = assign_psi(g, subs);
  f.financial_observed.assign(subs.size(), false);
  f.risk.assign(subs.size(), 0);

  for (Eigen::Index row = 0; row < n; ++row) {
    const auto& sub = subs[static_cast<std::size_t>(row)];
    int companies = 0;
    int statements = 0;
    bool risky = false;
    for (std::size_t i = 0; i < sub.size(); ++i) {
      if (!sub.is_member_company[i]) continue;
      const auto& rec = g.node(sub.nodes[i]).record;
      if (!rec) continue;
      ++companies;
      for (int k = 0; k < kBusinessDim; ++k) f.business(row, k) += rec->business[static_cast<std::size_t>(k)];
      if (rec->financial) {
        ++statements;
        for (int k = 0; k < kFinancialDim; ++k)
          f.financial(row, k) += (*rec->financial)[static_cast<std::size_t>(k)];
      }
      risky = risky || rec->risk;
    }
    if (companies > 0) f.business.row(row) /= companies;
    if (statements > 0) f.financial.row(row) /= statements;
    const bool zero_company = sub.size() == 1 || companies == 0;
    f.risk[static_cast<std::size_t>(row)] = (risky || zero_company) ? 1 : 0;
    f.financial_observed[static_cast<std::size_t>(row)] = f.psi[static_cast<std::size_t>(row)] == 0;
  }
  return f;
}

void CBGraph::validate() const {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  if (x_e.rows() != n || x_b.rows() != n || x_f.rows() != n)
    throw ValidationError("CBGraph: feature row counts must equal node count");
  if (x_e.cols() != kEmbeddingDim || x_b.cols() != kBusinessDim || x_f.cols() != kFinancialDim)
    throw ValidationError("CBGraph: feature columns must be (64, 17, 18)");
  if (mask_f.size() != nodes.size() || y.size() != nodes.size() || psi.size() != nodes.size())
    throw ValidationError("CBGraph: label/mask lengths must equal node count");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if ((psi[i] != 0 && psi[i] != 1) || (y[i] != 0 && y[i] != 1))
      throw ValidationError("CBGraph: labels must be binary");
    if (psi[i] == 0 && !mask_f[i])
      throw ValidationError("CBGraph: complete node " + std::to_string(nodes[i]) +
                            " has unobserved financial features");
  }
  for (const auto& [s, d] : edges)
    if (s >= nodes.size() || d >= nodes.size()) throw ValidationError("CBGraph: edge index out of range");
}

bool operator==(const CBGraph& a, const CBGraph& b) {
  return a.nodes == b.nodes && a.edges == b.edges && same_shape(a.x_e, b.x_e) &&
         same_shape(a.x_b, b.x_b) && same_shape(a.x_f, b.x_f) && a.x_e == b.x_e &&
         a.x_b == b.x_b && a.x_f == b.x_f && a.mask_f == b.mask_f && a.y == b.y && a.psi == b.psi;
}

CBGraph build_cb_graph(const SupplyGraph& g, const std::vector<SingleProductSubgraph>& subs,
                       const Matrix& x_e) {
  const auto n = static_cast<Eigen::Index>(g.products().size());
  if (x_e.rows() != n || x_e.cols() != kEmbeddingDim)
    throw ShapeError("build_cb_graph: X_E must be " + std::to_string(n) + "x64, got " +
                     std::to_string(x_e.rows()) + "x" + std::to_string(x_e.cols()));
  if (subs.size() != g.products().size())
    throw ShapeError("build_cb_graph: one subgraph per product expected");

  ProductFeatures f = aggregate_product_features(g, subs);
  CBGraph cb;
  cb.nodes = g.products();
  std::unordered_map<NodeId, std::size_t> row;
  for (std::size_t i = 0; i < cb.nodes.size(); ++i) row.emplace(cb.nodes[i], i);
  for (const auto& e : g.edges())
    if (e.kind == EdgeKind::ProductToProduct) cb.edges.emplace_back(row.at(e.src), row.at(e.dst));
  cb.x_e = x_e;
  cb.x_b = std::move(f.business);
  cb.x_f = std::move(f.financial);
  cb.mask_f = std::move(f.financial_observed);
  cb.y = std::move(f.risk);
  cb.psi = std::move(f.psi);
  cb.validate();
  return cb;
}

CBGraph build_cb_graph(const SupplyGraph& g, const Matrix& x_e) {
  return build_cb_graph(g, extract_single_product_subgraphs(g), x_e);
}

}  // namespace hktgnn
