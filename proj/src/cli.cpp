#include "hktgnn/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hktgnn/error.hpp"
#include "hktgnn/graph_io.hpp"
#include "hktgnn/report.hpp"
#include "hktgnn/synthgen.hpp"
#include "hktgnn/train.hpp"

namespace hktgnn {

namespace {

void setup_logging() {
  auto logger = spdlog::get("hktgnn");
  if (!logger) logger = spdlog::stderr_color_mt("hktgnn");
  spdlog::set_default_logger(logger);
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("HKTGNN_LOG")) {
    level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::info;
  }
  spdlog::set_level(level);
}

std::array<double, 3> parse_split(const std::string& text) {
  std::array<double, 3> out{};
  std::istringstream in(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ':')) {
    if (i >= 3) throw ValidationError("invalid split '" + text + "': expected A:B:C");
    try {
      std::size_t used = 0;
      out[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw ValidationError("invalid split '" + text + "': '" + part + "' is not a number");
    }
    ++i;
  }
  if (i != 3) throw ValidationError("invalid split '" + text + "': expected A:B:C");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw ValidationError("invalid seeds '" + text + "': expected a comma-separated list of integers");
    out.push_back(std::stoull(part));
  }
  if (out.empty()) throw ValidationError("invalid seeds: list is empty");
  return out;
}

struct TrainFlags {
  TrainConfig cfg;
  std::string split;
  std::string seeds;
  std::string graph;
  std::uint64_t embed_seed = 0;

  void attach(CLI::App& app) {
    app.add_option("--graph", graph, "Supply graph (generate) or product graph (embed) JSON")->required();
    app.add_option("--seed", cfg.seed, "First Monte Carlo seed");
    app.add_option("--seeds", seeds, "Comma-separated seed list (overrides --seed/--runs)");
    app.add_option("--k", cfg.k, "Feature completion steps");
    app.add_option("--lambda", cfg.lambda, "Weight of the distillation loss");
    app.add_option("--gamma", cfg.gamma, "Weight of the distribution-consistency loss");
    app.add_option("--lr", cfg.lr, "Adam learning rate");
    app.add_option("--epochs", cfg.epochs, "Training iterations per run");
    app.add_option("--runs", cfg.runs, "Monte Carlo runs");
    app.add_option("--split", split, "Train:validation:test ratio");
    app.add_option("--embed-scale", cfg.embed_scale, "Column std of the standardized embedding");
    app.add_option("--m", cfg.rounds, "Message passing layers");
    app.add_option("--jobs", cfg.jobs, "Parallel Monte Carlo runs");
    app.add_option("--embed-seed", embed_seed, "Encoder initialization seed for precomputed X_E");
    app.add_flag("--freeze-gee", cfg.freeze_gee, "Keep the graph encoder at its initialization");
    app.add_flag("--no-centrality", "Uniform instead of centrality domain weights")
        ->each([this](const std::string&) { cfg.use_centrality = false; });
    app.add_flag("--symmetric-neighbors", cfg.symmetric_neighbors, "Pass messages along both edge directions");
    app.add_flag("--no-late-calibration", "Calibrate provider values in the first completion step only")
        ->each([this](const std::string&) { cfg.late_calibration = false; });
    app.add_flag("--freeze-delta", cfg.freeze_delta, "Compute the message-passing domain gap once from the inputs");
  }

  /// Validates everything before any data is touched.
  TrainConfig resolve() {
    if (!split.empty()) cfg.split = parse_split(split);
    if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
    cfg.validate();
    return cfg;
  }
};

Dataset load_dataset(const std::string& path, std::uint64_t embed_seed) {
  const io::Json j = io::load_json(path);
  if (j.is_object() && j.contains("X_E")) return make_dataset(io::cb_graph_from_json(j));
  return make_dataset(io::supply_graph_from_json(j), embed_seed);
}

// Nodes completed in each iteration, by product id, plus those left pending.
io::Json frontier_json(const Dataset& d, int k) {
  const auto plan = ccafc::plan_frontier(d.neighbors, d.graph.psi, k);
  io::Json steps = io::Json::array();
  for (const auto& step : plan.steps) {
    io::Json ids = io::Json::array();
    for (std::size_t i : step.targets) ids.push_back(d.graph.nodes[i]);
    steps.push_back(std::move(ids));
  }
  io::Json pending = io::Json::array();
  for (std::size_t i : plan.pending) pending.push_back(d.graph.nodes[i]);
  return {{"k", k}, {"iterations", std::move(steps)}, {"pending", std::move(pending)}};
}

void announce(const std::string& what, const std::string& path) { spdlog::info("wrote {} to {}", what, path); }

}  // namespace

int run_cli(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"Supply-chain risk assessment on heterogeneous product graphs"};
  app.require_subcommand(1);

  // generate
  synth::GenConfig gen;
  std::string gen_config_path, gen_out = "graph.json";
  std::optional<int> gen_products, gen_edges;
  std::optional<double> gen_biased, gen_signal;
  std::optional<std::uint64_t> gen_seed;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic supply graph");
  generate->add_option("--config", gen_config_path, "Generator config JSON")->check(CLI::ExistingFile);
  generate->add_option("--out", gen_out, "Output graph JSON");
  generate->add_option("--seed", gen_seed, "Generator seed");
  generate->add_option("--products", gen_products, "Number of products");
  generate->add_option("--product-edges", gen_edges, "Number of product-to-product edges");
  generate->add_option("--biased-fraction", gen_biased, "Fraction of biased products");
  generate->add_option("--signal-strength", gen_signal, "Planted feature-label correlation");

  // derive / stats
  std::string derive_graph, derive_mode = "full", derive_out = "company_graph.json";
  std::uint64_t derive_seed = 1;
  auto* derive = app.add_subcommand("derive", "Derive a company-level graph");
  derive->add_option("--graph", derive_graph, "Supply graph JSON")->required();
  derive->add_option("--mode", derive_mode, "full, p25, p50 or p75");
  derive->add_option("--seed", derive_seed, "Random join seed");
  derive->add_option("--out", derive_out, "Output JSON");

  std::string stats_graph, stats_out = "stats.csv", stats_modes = "full,p25,p50,p75";
  std::uint64_t stats_seed = 1;
  int stats_instances = 10;
  auto* stats_cmd = app.add_subcommand("stats", "Centrality statistics of derived company graphs");
  stats_cmd->add_option("--graph", stats_graph, "Supply graph JSON")->required();
  stats_cmd->add_option("--out", stats_out, "Output CSV");
  stats_cmd->add_option("--seed", stats_seed, "First random join seed");
  stats_cmd->add_option("--modes", stats_modes, "Comma-separated derivation modes");
  stats_cmd->add_option("--instances", stats_instances, "Random join instances per mode")
      ->check(CLI::PositiveNumber);

  // embed
  std::string embed_graph, embed_out = "product_graph.json";
  std::uint64_t embed_seed = 0;
  auto* embed = app.add_subcommand("embed", "Build the product graph with encoder embeddings");
  embed->add_option("--graph", embed_graph, "Supply graph JSON")->required();
  embed->add_option("--out", embed_out, "Output product graph JSON");
  embed->add_option("--seed", embed_seed, "Encoder initialization seed");

  TrainFlags train_flags, eval_flags, sweep_flags, ablate_flags;
  std::string train_out = "report.json", frontier_out, eval_out = "evaluation.json", ablate_out = "ablation.json";
  std::string sweep_param, sweep_out;
  auto* train = app.add_subcommand("train", "Monte Carlo training runs");
  train_flags.attach(*train);
  train->add_option("--out", train_out, "Output report JSON");
  train->add_option("--frontier-out", frontier_out, "Write the completion frontier per iteration to this JSON");
  auto* evaluate = app.add_subcommand("evaluate", "Paired runs of the full model and the MLP baseline");
  eval_flags.attach(*evaluate);
  evaluate->add_option("--out", eval_out, "Output JSON");
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one hyperparameter");
  sweep_flags.attach(*sweep_cmd);
  sweep_cmd->add_option("--param", sweep_param, "K, lambda, gamma or split")->required();
  sweep_cmd->add_option("--out", sweep_out, "Output CSV (default sweep_<param>.csv)");
  auto* ablate_cmd = app.add_subcommand("ablate", "Centrality, completion and baseline ablations");
  ablate_flags.attach(*ablate_cmd);
  ablate_cmd->add_option("--out", ablate_out, "Output JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  int phase = 2;  // validation errors before any compute are usage errors
  try {
    if (generate->parsed()) {
      if (!gen_config_path.empty()) gen = io::gen_config_from_json(io::load_json(gen_config_path));
      if (gen_seed) gen.seed = *gen_seed;
      if (gen_products) gen.n_products = *gen_products;
      if (gen_edges) gen.n_product_edges = *gen_edges;
      if (gen_biased) gen.biased_fraction = *gen_biased;
      if (gen_signal) gen.signal_strength = *gen_signal;
      gen.validate();
      phase = 1;
      io::Json j = io::to_json(synth::generate_supply_graph(gen));
      j["config"] = io::to_json(gen);
      io::save_json(j, gen_out);
      announce("supply graph", gen_out);
    } else if (derive->parsed()) {
      const auto mode = synth::JoinMode::parse(derive_mode);
      const SupplyGraph g = io::load_supply_graph(derive_graph);
      phase = 1;
      const auto cg = synth::derive_company_graph(g, mode, derive_seed);
      io::Json edges = io::Json::array();
      for (auto [a, b] : cg.graph.edges) edges.push_back(io::Json::array({cg.companies[a], cg.companies[b]}));
      io::Json j{{"config", {{"graph", derive_graph}, {"mode", mode.name()}, {"seed", derive_seed}}},
                 {"companies", cg.companies},
                 {"edges", std::move(edges)},
                 {"features", io::to_json(cg.features)},
                 {"labels", cg.labels}};
      io::save_json(j, derive_out);
      announce("company graph", derive_out);
    } else if (stats_cmd->parsed()) {
      std::vector<synth::JoinMode> modes;
      std::istringstream in(stats_modes);
      std::string m;
      while (std::getline(in, m, ',')) modes.push_back(synth::JoinMode::parse(m));
      const SupplyGraph g = io::load_supply_graph(stats_graph);
      phase = 1;
      std::vector<synth::StatsRow> rows;
      for (const auto& mode : modes) {
        if (mode.full) {
          rows.push_back(synth::dataset_stats(mode.name(), synth::derive_company_graph(g, mode, stats_seed).graph));
          continue;
        }
        std::vector<synth::StatsRow> instances;
        for (int i = 0; i < stats_instances; ++i) {
          const std::uint64_t seed = stats_seed + static_cast<std::uint64_t>(i);
          instances.push_back(synth::dataset_stats(mode.name() + " seed " + std::to_string(seed),
                                                   synth::derive_company_graph(g, mode, seed).graph));
        }
        rows.insert(rows.end(), instances.begin(), instances.end());
        for (auto& r : synth::summarize_stats(mode.name(), instances)) rows.push_back(std::move(r));
      }
      io::write_stats_csv(stats_out, rows,
                          {{"graph", stats_graph}, {"modes", stats_modes}, {"seed", stats_seed},
                           {"instances", stats_instances}});
      announce("statistics", stats_out);
    } else if (embed->parsed()) {
      const SupplyGraph g = io::load_supply_graph(embed_graph);
      phase = 1;
      const Dataset d = make_dataset(g, embed_seed);
      io::Json j = io::to_json(d.graph);
      j["config"] = {{"graph", embed_graph}, {"seed", embed_seed}};
      io::save_json(j, embed_out);
      announce("product graph", embed_out);
    } else if (train->parsed()) {
      const TrainConfig cfg = train_flags.resolve();
      const Dataset d = load_dataset(train_flags.graph, train_flags.embed_seed);
      phase = 1;
      if (!frontier_out.empty()) {
        io::save_json(frontier_json(d, cfg.k), frontier_out);
        announce("completion frontier", frontier_out);
      }
      const RunReport r = monte_carlo(d, cfg);
      io::save_json(io::to_json(r), train_out);
      spdlog::info("F1 {:.4f} +- {:.4f}, AUC {:.4f} +- {:.4f}", r.f1_mean, r.f1_std, r.auc_mean, r.auc_std);
      announce("report", train_out);
    } else if (evaluate->parsed()) {
      const TrainConfig cfg = eval_flags.resolve();
      const Dataset d = load_dataset(eval_flags.graph, eval_flags.embed_seed);
      phase = 1;
      const RunReport full = monte_carlo(d, cfg);
      const RunReport mlp = monte_carlo(d, cfg, ModelKind::Mlp);
      io::Json j{{"config", io::to_json(cfg)},
                 {"models", io::Json::array({io::to_json(full), io::to_json(mlp)})}};
      io::save_json(j, eval_out);
      announce("evaluation", eval_out);
    } else if (sweep_cmd->parsed()) {
      const SweepParam p = parse_sweep_param(sweep_param);
      const TrainConfig cfg = sweep_flags.resolve();
      const Dataset d = load_dataset(sweep_flags.graph, sweep_flags.embed_seed);
      phase = 1;
      const auto points = sweep(d, cfg, p);
      const std::string out = sweep_out.empty() ? "sweep_" + to_string(p) + ".csv" : sweep_out;
      io::Json config = io::to_json(cfg);
      config["param"] = to_string(p);
      config["graph"] = sweep_flags.graph;
      io::write_sweep_csv(out, p, points, config);
      announce("sweep", out);
    } else if (ablate_cmd->parsed()) {
      const TrainConfig cfg = ablate_flags.resolve();
      const Dataset d = load_dataset(ablate_flags.graph, ablate_flags.embed_seed);
      phase = 1;
      const auto arms = ablate(d, cfg);
      io::save_json(io::to_json(arms, cfg), ablate_out);
      for (const auto& arm : arms)
        spdlog::info("{}: F1 {:.4f} AUC {:.4f}", arm.name, arm.report.f1_mean, arm.report.auc_mean);
      announce("ablation", ablate_out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return phase;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace hktgnn
