#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hktgnn/graphstats.hpp"
#include "hktgnn/supply_graph.hpp"

// Seeded synthetic supply chains with a planted risk signal, and the derived
// company-level graphs used for the baseline statistics table.
namespace hktgnn::synth {

struct GenConfig {
  int n_products = 430;
  int n_product_edges = 1875;
  int companies_min = 0;
  int companies_max = 40;
  int investors_min = 0;
  int investors_max = 2;
  double biased_fraction = 0.3;
  double signal_strength = 0.8;
  double share_fraction = 0.25;  // chance a company slot reuses an existing complete company
  std::uint64_t seed = 7;

  /// Throws ValidationError naming the offending field.
  void validate() const;

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

SupplyGraph generate_supply_graph(const GenConfig& cfg);

struct JoinMode {
  bool full = true;
  double p = 1.0;  // keep probability for random joins

  static JoinMode full_join() { return {true, 1.0}; }
  static JoinMode random_join(double p);
  /// "full", "p25", "p50", "p75" or "p<percent>".
  static JoinMode parse(const std::string& text);
  std::string name() const;
};

inline constexpr int kCompanyFeatureDim = kFinancialDim + kBusinessDim;

struct CompanyGraph {
  std::vector<NodeId> companies;  // ascending; row order of features/labels
  stats::Digraph graph;
  Matrix features;                // own statement (zero-filled) | mean business info of its products
  std::vector<int> labels;
};

/// Connects the companies of every product edge A -> B (A's companies point to
/// B's), deduplicated; random joins keep each candidate independently. Companies
/// left without edges are dropped.
CompanyGraph derive_company_graph(const SupplyGraph& g, const JoinMode& mode, std::uint64_t seed);

struct StatsRow {
  std::string name;
  double edges = 0.0;
  double betweenness = 0.0;  // mean, percent
  double degree = 0.0;
  double eigenvector = 0.0;
  double closeness = 0.0;
};

StatsRow dataset_stats(const std::string& name, const stats::Digraph& g);

/// [min], [max] and [mean] rows over instances of one derivation mode.
std::vector<StatsRow> summarize_stats(const std::string& name, const std::vector<StatsRow>& rows);

}  // namespace hktgnn::synth
