#include <doctest.h>

#include <map>
#include <set>

#include "hktgnn/error.hpp"
#include "hktgnn/graph_io.hpp"
#include "hktgnn/supply_graph.hpp"
#include "hktgnn/synthgen.hpp"
#include "support.hpp"

using namespace hktgnn;

namespace {

CompanyRecord record(double fill, bool risk = false) {
  CompanyRecord r;
  r.business.assign(kBusinessDim, fill);
  r.financial = std::vector<double>(kFinancialDim, fill);
  r.risk = risk;
  return r;
}

// Companies attached to each product and everything one relation edge away
// from them, found by scanning the edge list.
std::map<NodeId, std::set<NodeId>> brute_force_members(const SupplyGraph& g) {
  std::map<NodeId, std::set<NodeId>> out;
  for (NodeId p : g.products()) {
    std::set<NodeId> members{p};
    std::set<NodeId> companies;
    for (const auto& e : g.edges())
      if (e.kind == EdgeKind::CompanyToProduct && e.dst == p) companies.insert(e.src);
    members.insert(companies.begin(), companies.end());
    for (const auto& e : g.edges()) {
      if (e.kind != EdgeKind::InvestOrSupplyToCompany) continue;
      if (companies.contains(e.src) || companies.contains(e.dst)) {
        members.insert(e.src);
        members.insert(e.dst);
      }
    }
    out[p] = members;
  }
  return out;
}

}  // namespace

TEST_SUITE("graph_model") {
  TEST_CASE("supply graph rejects invariant violations") {
    std::vector<SupplyNode> nodes{{0, NodeKind::Product, std::nullopt}, {1, NodeKind::ListedCompany, record(1.0)}};
    CHECK_NOTHROW(SupplyGraph(nodes, {{1, 0, EdgeKind::CompanyToProduct}}));
    CHECK_THROWS_AS(SupplyGraph(nodes, {{0, 1, EdgeKind::CompanyToProduct}}), ValidationError);
    CHECK_THROWS_AS(SupplyGraph(nodes, {{0, 0, EdgeKind::ProductToProduct}}), ValidationError);
    CHECK_THROWS_AS(SupplyGraph(nodes, {{1, 9, EdgeKind::CompanyToProduct}}), ValidationError);
    CHECK_THROWS_AS(SupplyGraph(nodes, {{1, 0, EdgeKind::InvestOrSupplyToCompany}}), ValidationError);

    auto dup = nodes;
    dup.push_back({1, NodeKind::Investor, std::nullopt});
    CHECK_THROWS_AS(SupplyGraph(dup, {}), ValidationError);

    auto bad = nodes;
    bad[1].record->financial.reset();
    CHECK_THROWS_AS(SupplyGraph(bad, {}), ValidationError);  // has_statements still true
    bad[1].record->has_statements = false;
    CHECK_NOTHROW(SupplyGraph(bad, {}));

    auto short_business = nodes;
    short_business[1].record->business.pop_back();
    CHECK_THROWS_AS(SupplyGraph(short_business, {}), ValidationError);
  }

  TEST_CASE("one product with two companies and an investor forms one four-node subgraph") {
    std::vector<SupplyNode> nodes{{0, NodeKind::Product, std::nullopt},
                                  {1, NodeKind::ListedCompany, record(1.0)},
                                  {2, NodeKind::ListedCompany, record(2.0)},
                                  {3, NodeKind::Investor, std::nullopt}};
    SupplyGraph g(nodes, {{1, 0, EdgeKind::CompanyToProduct},
                          {2, 0, EdgeKind::CompanyToProduct},
                          {3, 1, EdgeKind::InvestOrSupplyToCompany}});
    auto subs = extract_single_product_subgraphs(g);
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].size() == 4);
    CHECK(subs[0].nodes.front() == 0);
    CHECK(subs[0].edges.size() == 3);
  }

  TEST_CASE("no products gives no subgraphs") {
    SupplyGraph g({{5, NodeKind::ListedCompany, record(0.0)}}, {});
    CHECK(extract_single_product_subgraphs(g).empty());
  }

  TEST_CASE("subgraph membership equals brute-force reachability on generated graphs") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      synth::GenConfig cfg;
      cfg.n_products = 40;
      cfg.n_product_edges = 90;
      cfg.seed = seed;
      const SupplyGraph g = synth::generate_supply_graph(cfg);
      const auto expected = brute_force_members(g);
      const auto subs = extract_single_product_subgraphs(g);
      REQUIRE(subs.size() == g.products().size());
      std::set<NodeId> attached;
      for (const auto& sub : subs) {
        std::set<NodeId> got(sub.nodes.begin(), sub.nodes.end());
        CHECK(got == expected.at(sub.root));
        CHECK(sub.kinds[0] == NodeKind::Product);
        for (std::size_t i = 1; i < sub.size(); ++i) CHECK(sub.kinds[i] != NodeKind::Product);
        for (std::size_t i = 0; i < sub.size(); ++i)
          if (sub.is_member_company[i]) attached.insert(sub.nodes[i]);
      }
      std::set<NodeId> with_product;
      for (const auto& e : g.edges())
        if (e.kind == EdgeKind::CompanyToProduct) with_product.insert(e.src);
      CHECK(attached == with_product);
    }
  }

  TEST_CASE("psi follows the three biased situations") {
    std::vector<SupplyNode> nodes{{0, NodeKind::Product, std::nullopt}, {1, NodeKind::Product, std::nullopt},
                                  {2, NodeKind::Product, std::nullopt}};
    std::vector<SupplyEdge> edges;
    NodeId id = 10;
    for (int c = 0; c < 5; ++c) {
      nodes.push_back({id, NodeKind::ListedCompany, record(1.0)});
      edges.push_back({id++, 0, EdgeKind::CompanyToProduct});
    }
    for (int c = 0; c < 5; ++c) {
      CompanyRecord r = record(1.0);
      if (c == 2) {
        r.financial.reset();
        r.has_statements = false;
      }
      nodes.push_back({id, NodeKind::ListedCompany, r});
      edges.push_back({id++, 1, EdgeKind::CompanyToProduct});
    }
    SupplyGraph g(nodes, edges);
    CHECK(assign_psi(g) == std::vector<int>{0, 1, 1});

    CompanyRecord no_relations = record(1.0);
    no_relations.has_relations = false;
    SupplyGraph h({{0, NodeKind::Product, std::nullopt}, {1, NodeKind::ListedCompany, no_relations}},
                  {{1, 0, EdgeKind::CompanyToProduct}});
    CHECK(assign_psi(h) == std::vector<int>{1});
  }

  TEST_CASE("product features are company means and Y is any-risky") {
    std::vector<SupplyNode> nodes{{0, NodeKind::Product, std::nullopt},
                                  {1, NodeKind::ListedCompany, record(1.0)},
                                  {2, NodeKind::ListedCompany, record(3.0)},
                                  {3, NodeKind::Product, std::nullopt},
                                  {4, NodeKind::Product, std::nullopt},
                                  {5, NodeKind::ListedCompany, record(7.0, true)}};
    SupplyGraph g(nodes, {{1, 0, EdgeKind::CompanyToProduct},
                          {2, 0, EdgeKind::CompanyToProduct},
                          {5, 4, EdgeKind::CompanyToProduct}});
    auto subs = extract_single_product_subgraphs(g);
    auto f = aggregate_product_features(g, subs);
    CHECK(f.financial(0, 0) == 2.0);
    CHECK(f.business(0, 16) == 2.0);
    CHECK(f.risk == std::vector<int>{0, 1, 1});
    CHECK(f.psi == std::vector<int>{0, 1, 0});
    CHECK(f.financial_observed == std::vector<bool>{true, false, true});
    CHECK(f.financial.row(1).isZero());
    CHECK(f.business.row(1).isZero());
  }

  TEST_CASE("aggregated features match a naive loop on a generated graph") {
    synth::GenConfig cfg;
    cfg.n_products = 60;
    cfg.n_product_edges = 150;
    cfg.seed = 11;
    const SupplyGraph g = synth::generate_supply_graph(cfg);
    const auto subs = extract_single_product_subgraphs(g);
    const auto f = aggregate_product_features(g, subs);
    for (std::size_t row = 0; row < g.products().size(); ++row) {
      const NodeId p = g.products()[row];
      std::vector<double> fin(kFinancialDim, 0.0), bus(kBusinessDim, 0.0);
      int statements = 0, companies = 0;
      bool risky = false;
      for (const auto& e : g.edges()) {
        if (e.kind != EdgeKind::CompanyToProduct || e.dst != p) continue;
        const auto& r = *g.node(e.src).record;
        ++companies;
        risky = risky || r.risk;
        for (int k = 0; k < kBusinessDim; ++k) bus[k] += r.business[k];
        if (r.financial) {
          ++statements;
          for (int k = 0; k < kFinancialDim; ++k) fin[k] += (*r.financial)[k];
        }
      }
      const auto r = static_cast<Eigen::Index>(row);
      for (int k = 0; k < kFinancialDim; ++k)
        CHECK(f.financial(r, k) == doctest::Approx(statements ? fin[k] / statements : 0.0).epsilon(1e-12));
      for (int k = 0; k < kBusinessDim; ++k)
        CHECK(f.business(r, k) == doctest::Approx(companies ? bus[k] / companies : 0.0).epsilon(1e-12));
      CHECK(f.risk[row] == ((risky || companies == 0) ? 1 : 0));
    }
  }

  TEST_CASE("cb graph from the default generator has 430 nodes, 1875 edges and 99 columns") {
    const SupplyGraph g = synth::generate_supply_graph({});
    const CBGraph cb = build_cb_graph(g, Matrix::Zero(430, kEmbeddingDim));
    CHECK(cb.size() == 430);
    CHECK(cb.edges.size() == 1875);
    CHECK(cb.feature_columns() == 99);
    for (std::size_t i = 0; i < cb.size(); ++i)
      if (cb.psi[i] == 0) CHECK(cb.mask_f[i]);
    CHECK_THROWS_AS(build_cb_graph(g, Matrix::Zero(430, 63)), ShapeError);
    CHECK_THROWS_AS(build_cb_graph(g, Matrix::Zero(429, 64)), ShapeError);
  }

  TEST_CASE("cb graph without product edges is valid") {
    const SupplyGraph g = testing::chain_supply_graph(1, 2);
    const CBGraph cb = build_cb_graph(g, Matrix::Zero(1, kEmbeddingDim));
    CHECK(cb.edges.empty());
    CHECK_NOTHROW(cb.validate());
  }

  TEST_CASE("extract, aggregate and build are deterministic") {
    const SupplyGraph g = synth::generate_supply_graph({});
    Rng rng(5);
    const Matrix xe = testing::random_matrix(rng, 430, kEmbeddingDim);
    CHECK(build_cb_graph(g, xe) == build_cb_graph(g, xe));
  }

  TEST_CASE("cb graph validation") {
    Rng rng(2);
    CBGraph cb = testing::random_cb_graph(rng, 6, 0.3);
    CBGraph bad = cb;
    bad.mask_f[0] = false;  // node 0 is complete
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cb;
    bad.y[2] = 2;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cb;
    bad.x_b = Matrix::Zero(6, 16);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }

  TEST_CASE("supply graph json round trip") {
    const SupplyGraph g = synth::generate_supply_graph({});
    CHECK(io::supply_graph_from_json(io::to_json(g)) == g);
    Rng rng(3);
    const CBGraph cb = testing::random_cb_graph(rng, 9, 0.2);
    CHECK(io::cb_graph_from_json(io::to_json(cb)) == cb);
  }
}
