#include "hktgnn/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "hktgnn/error.hpp"

namespace hktgnn::io {

namespace {

std::string split_text(const std::array<double, 3>& s) {
  std::ostringstream out;
  out << s[0] << ':' << s[1] << ':' << s[2];
  return out.str();
}

std::ofstream open_csv(const std::filesystem::path& path, const Json& config) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out << "# config: " << config.dump() << '\n';
  out << std::fixed << std::setprecision(6);
  return out;
}

}  // namespace

Json to_json(const TrainConfig& cfg) {
  return Json{{"lambda", cfg.lambda},
              {"gamma", cfg.gamma},
              {"k", cfg.k},
              {"lr", cfg.lr},
              {"epochs", cfg.epochs},
              {"runs", cfg.runs},
              {"split", split_text(cfg.split)},
              {"m", cfg.rounds},
              {"embed_dim", cfg.embed_dim},
              {"embed_scale", cfg.embed_scale},
              {"hidden", cfg.hidden},
              {"seeds", cfg.resolved_seeds()},
              {"freeze_gee", cfg.freeze_gee},
              {"use_centrality", cfg.use_centrality},
              {"symmetric_neighbors", cfg.symmetric_neighbors},
              {"late_calibration", cfg.late_calibration},
              {"freeze_delta", cfg.freeze_delta}};
}

Json to_json(const synth::GenConfig& cfg) {
  return Json{{"n_products", cfg.n_products},
              {"n_product_edges", cfg.n_product_edges},
              {"companies_per_product", Json::array({cfg.companies_min, cfg.companies_max})},
              {"investors_per_company", Json::array({cfg.investors_min, cfg.investors_max})},
              {"biased_fraction", cfg.biased_fraction},
              {"signal_strength", cfg.signal_strength},
              {"share_fraction", cfg.share_fraction},
              {"seed", cfg.seed}};
}

synth::GenConfig gen_config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("generator config must be a JSON object");
  synth::GenConfig cfg;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_products") cfg.n_products = v.get<int>();
      else if (key == "n_product_edges") cfg.n_product_edges = v.get<int>();
      else if (key == "companies_per_product") {
        cfg.companies_min = v.at(0).get<int>();
        cfg.companies_max = v.at(1).get<int>();
      } else if (key == "investors_per_company") {
        cfg.investors_min = v.at(0).get<int>();
        cfg.investors_max = v.at(1).get<int>();
      } else if (key == "biased_fraction") cfg.biased_fraction = v.get<double>();
      else if (key == "signal_strength") cfg.signal_strength = v.get<double>();
      else if (key == "share_fraction") cfg.share_fraction = v.get<double>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else throw ValidationError("unknown generator config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("generator config schema violation: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Json to_json(const RunResult& r) {
  return Json{{"seed", r.seed},        {"f1", r.f1},         {"auc", r.auc},
              {"best_epoch", r.best_epoch}, {"val_f1", r.val_f1}, {"val_auc", r.val_auc}};
}

Json to_json(const RunReport& r) {
  Json runs = Json::array();
  for (const auto& run : r.runs) runs.push_back(to_json(run));
  return Json{{"model", r.model},       {"config", to_json(r.config)}, {"runs", std::move(runs)},
              {"f1_mean", r.f1_mean},   {"f1_std", r.f1_std},          {"auc_mean", r.auc_mean},
              {"auc_std", r.auc_std}};
}

Json to_json(const std::vector<AblationArm>& arms, const TrainConfig& base) {
  Json out{{"config", to_json(base)}, {"arms", Json::array()}};
  for (const auto& arm : arms) {
    Json a = to_json(arm.report);
    a["name"] = arm.name;
    out["arms"].push_back(std::move(a));
  }
  return out;
}

void write_sweep_csv(const std::filesystem::path& path, SweepParam param,
                     const std::vector<std::pair<std::string, RunReport>>& points, const Json& config) {
  auto out = open_csv(path, config);
  out << to_string(param) << ",f1_mean,f1_std,auc_mean,auc_std\n";
  for (const auto& [label, r] : points)
    out << label << ',' << r.f1_mean << ',' << r.f1_std << ',' << r.auc_mean << ',' << r.auc_std << '\n';
}

void write_stats_csv(const std::filesystem::path& path, const std::vector<synth::StatsRow>& rows,
                     const Json& config) {
  auto out = open_csv(path, config);
  out << "name,edges,betw%,deg%,eig%,close%\n";
  for (const auto& r : rows) {
    out << r.name << ',' << std::setprecision(r.edges == std::floor(r.edges) ? 0 : 1) << r.edges
        << std::setprecision(6);
    out << ',' << r.betweenness << ',' << r.degree << ',' << r.eigenvector << ',' << r.closeness << '\n';
  }
}

}  // namespace hktgnn::io
