#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace hktgnn {

using NodeId = std::int64_t;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kEmbeddingDim = 64;   // X^E columns
inline constexpr int kBusinessDim = 17;    // X^B columns
inline constexpr int kFinancialDim = 18;   // X^F columns
inline constexpr int kObservableDim = kEmbeddingDim + kBusinessDim;
inline constexpr int kFeatureDim = kObservableDim + kFinancialDim;

enum class NodeKind { Product, ListedCompany, Investor, Investee };
enum class EdgeKind { InvestOrSupplyToCompany, CompanyToProduct, ProductToProduct };

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeKind kind);
NodeKind parse_node_kind(std::string_view text);
EdgeKind parse_edge_kind(std::string_view text);

struct CompanyRecord {
  std::vector<double> business;                  // kBusinessDim entries
  std::optional<std::vector<double>> financial;  // kFinancialDim entries when present
  bool risk = false;
  bool has_relations = true;
  bool has_statements = true;

  friend bool operator==(const CompanyRecord&, const CompanyRecord&) = default;
};

struct SupplyNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::Product;
  std::optional<CompanyRecord> record;

  friend bool operator==(const SupplyNode&, const SupplyNode&) = default;
};

struct SupplyEdge {
  NodeId src = 0;
  NodeId dst = 0;
  EdgeKind kind = EdgeKind::ProductToProduct;

  friend bool operator==(const SupplyEdge&, const SupplyEdge&) = default;
};

/// Heterogeneous directed supply graph. Immutable once constructed; the
/// constructor checks every structural invariant and throws ValidationError.
class SupplyGraph {
 public:
  SupplyGraph() = default;
  SupplyGraph(std::vector<SupplyNode> nodes, std::vector<SupplyEdge> edges);

  const std::vector<SupplyNode>& nodes() const noexcept { return nodes_; }
  const std::vector<SupplyEdge>& edges() const noexcept { return edges_; }

  bool contains(NodeId id) const { return index_.contains(id); }
  const SupplyNode& node(NodeId id) const;

  /// Product ids in ascending order; this is the row order of every CBGraph.
  const std::vector<NodeId>& products() const noexcept { return products_; }

  friend bool operator==(const SupplyGraph& a, const SupplyGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<SupplyNode> nodes_;
  std::vector<SupplyEdge> edges_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<NodeId> products_;
};

struct LocalEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeKind kind = EdgeKind::CompanyToProduct;
};

/// One product, its listed companies and their investors/investees.
/// nodes[0] is always the root product; the rest are sorted by id.
struct SingleProductSubgraph {
  NodeId root = 0;
  std::vector<NodeId> nodes;
  std::vector<NodeKind> kinds;
  std::vector<bool> is_member_company;  // attached to the root by a CompanyToProduct edge
  std::vector<LocalEdge> edges;

  std::size_t size() const noexcept { return nodes.size(); }
};

std::vector<SingleProductSubgraph> extract_single_product_subgraphs(const SupplyGraph& g);

/// Complete/biased label per product (1 = biased), in SupplyGraph::products() order.
std::vector<int> assign_psi(const SupplyGraph& g, const std::vector<SingleProductSubgraph>& subs);
std::vector<int> assign_psi(const SupplyGraph& g);

struct ProductFeatures {
  Matrix business;               // |V| x 17
  Matrix financial;              // |V| x 18, mean of the observed statements
  std::vector<bool> financial_observed;
  std::vector<int> risk;         // Y
  std::vector<int> psi;          // Psi
};

ProductFeatures aggregate_product_features(const SupplyGraph& g,
                                           const std::vector<SingleProductSubgraph>& subs);

/// Homogeneous product graph with partitioned features X = [X_E | X_B | X_F].
/// Rows of X_F whose mask entry is false are not observed and must not be read
/// as data.
struct CBGraph {
  std::vector<NodeId> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // row indices, src -> dst
  Matrix x_e;
  Matrix x_b;
  Matrix x_f;
  std::vector<bool> mask_f;
  std::vector<int> y;
  std::vector<int> psi;

  std::size_t size() const noexcept { return nodes.size(); }
  std::size_t feature_columns() const noexcept {
    return static_cast<std::size_t>(x_e.cols() + x_b.cols() + x_f.cols());
  }
  /// Throws ValidationError if any type invariant fails.
  void validate() const;

  friend bool operator==(const CBGraph& a, const CBGraph& b);
};

CBGraph build_cb_graph(const SupplyGraph& g, const Matrix& x_e);
CBGraph build_cb_graph(const SupplyGraph& g, const std::vector<SingleProductSubgraph>& subs,
                       const Matrix& x_e);

}  // namespace hktgnn
