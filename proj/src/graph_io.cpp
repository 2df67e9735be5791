#include "hktgnn/graph_io.hpp"

#include <fstream>
#include <unordered_map>

#include "hktgnn/error.hpp"

namespace hktgnn::io {

namespace {

std::vector<double> vector_field(const Json& j, const char* key, std::size_t expected, NodeId id) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != expected)
    throw ValidationError("node " + std::to_string(id) + ": field '" + key + "' must be an array of " +
                          std::to_string(expected) + " numbers");
  std::vector<double> v;
  v.reserve(expected);
  for (const auto& x : arr) {
    if (!x.is_number())
      throw ValidationError("node " + std::to_string(id) + ": field '" + key + "' must be numeric");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

Json to_json(const SupplyGraph& g) {
  Json nodes = Json::array();
  for (const auto& n : g.nodes()) {
    Json jn;
    jn["id"] = n.id;
    jn["kind"] = to_string(n.kind);
    if (n.record) {
      const auto& r = *n.record;
      jn["business"] = r.business;
      if (r.financial) jn["financial"] = *r.financial;
      jn["risk"] = r.risk;
      jn["has_relations"] = r.has_relations;
      jn["has_statements"] = r.has_statements;
    }
    nodes.push_back(std::move(jn));
  }
  Json edges = Json::array();
  for (const auto& e : g.edges())
    edges.push_back(Json{{"src", e.src}, {"dst", e.dst}, {"kind", to_string(e.kind)}});
  return Json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

SupplyGraph supply_graph_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges"))
    throw ValidationError("graph file must have top-level 'nodes' and 'edges'");
  std::vector<SupplyNode> nodes;
  try {
    for (const auto& jn : j.at("nodes")) {
      SupplyNode n;
      n.id = jn.at("id").get<NodeId>();
      n.kind = parse_node_kind(jn.at("kind").get<std::string>());
      if (jn.contains("business")) {
        CompanyRecord r;
        r.business = vector_field(jn, "business", kBusinessDim, n.id);
        if (jn.contains("financial")) r.financial = vector_field(jn, "financial", kFinancialDim, n.id);
        r.risk = jn.value("risk", false);
        r.has_relations = jn.value("has_relations", true);
        r.has_statements = jn.value("has_statements", r.financial.has_value());
        n.record = std::move(r);
      }
      nodes.push_back(std::move(n));
    }
    std::vector<SupplyEdge> edges;
    for (const auto& je : j.at("edges")) {
      edges.push_back({je.at("src").get<NodeId>(), je.at("dst").get<NodeId>(),
                       parse_edge_kind(je.at("kind").get<std::string>())});
    }
    return SupplyGraph(std::move(nodes), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("graph schema violation: ") + e.what());
  }
}

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError("field '" + field + "' must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError("field '" + field + "' has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json to_json(const CBGraph& cb) {
  Json edges = Json::array();
  for (const auto& [s, d] : cb.edges) edges.push_back(Json::array({cb.nodes[s], cb.nodes[d]}));
  Json mask = Json::array();
  for (bool b : cb.mask_f) mask.push_back(b);
  return Json{{"nodes", cb.nodes}, {"edges", std::move(edges)}, {"X_E", to_json(cb.x_e)},
              {"X_B", to_json(cb.x_b)}, {"X_F", to_json(cb.x_f)},  {"mask_F", std::move(mask)},
              {"Y", cb.y},          {"Psi", cb.psi}};
}

CBGraph cb_graph_from_json(const Json& j) {
  for (const char* key : {"nodes", "edges", "X_E", "X_B", "X_F", "mask_F", "Y", "Psi"})
    if (!j.contains(key)) throw ValidationError(std::string("product graph file is missing '") + key + "'");
  CBGraph cb;
  try {
    cb.nodes = j.at("nodes").get<std::vector<NodeId>>();
    std::unordered_map<NodeId, std::size_t> row;
    for (std::size_t i = 0; i < cb.nodes.size(); ++i)
      if (!row.emplace(cb.nodes[i], i).second)
        throw ValidationError("product graph: duplicate node id " + std::to_string(cb.nodes[i]));
    for (const auto& e : j.at("edges")) {
      const auto s = row.find(e.at(0).get<NodeId>());
      const auto d = row.find(e.at(1).get<NodeId>());
      if (s == row.end() || d == row.end()) throw ValidationError("product graph: edge references a missing node");
      cb.edges.emplace_back(s->second, d->second);
    }
    cb.x_e = matrix_from_json(j.at("X_E"), "X_E");
    cb.x_b = matrix_from_json(j.at("X_B"), "X_B");
    cb.x_f = matrix_from_json(j.at("X_F"), "X_F");
    cb.mask_f = j.at("mask_F").get<std::vector<bool>>();
    cb.y = j.at("Y").get<std::vector<int>>();
    cb.psi = j.at("Psi").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("product graph schema violation: ") + e.what());
  }
  cb.validate();
  return cb;
}

SupplyGraph load_supply_graph(const std::filesystem::path& path) {
  return supply_graph_from_json(load_json(path));
}

void save_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out << j.dump(1) << '\n';
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace hktgnn::io
