#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hktgnn/supply_graph.hpp"

namespace hktgnn::io {

using Json = nlohmann::ordered_json;

Json to_json(const SupplyGraph& g);
SupplyGraph supply_graph_from_json(const Json& j);

Json to_json(const CBGraph& cb);
CBGraph cb_graph_from_json(const Json& j);
Json to_json(const Matrix& m);  // row-major array of rows
Matrix matrix_from_json(const Json& j, const std::string& field);

SupplyGraph load_supply_graph(const std::filesystem::path& path);
void save_json(const Json& j, const std::filesystem::path& path);
Json load_json(const std::filesystem::path& path);

}  // namespace hktgnn::io
