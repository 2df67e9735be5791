#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hktgnn/ccafc.hpp"
#include "hktgnn/dcamp.hpp"
#include "hktgnn/error.hpp"
#include "hktgnn/gee.hpp"
#include "hktgnn/params.hpp"
#include "hktgnn/supply_graph.hpp"

namespace hktgnn {

struct TrainConfig {
  double lambda = 0.0;  // KL distillation weight
  double gamma = 0.1;   // distribution-consistency weight
  int k = 2;            // completion steps
  double lr = 3e-2;
  int epochs = 300;
  int runs = 10;
  std::array<double, 3> split{7.0, 1.0, 2.0};
  int rounds = 2;       // message passing layers
  int embed_dim = kEmbeddingDim;
  double embed_scale = 0.25;  // column std of X_E after standardization
  int hidden = 64;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // overrides seed..seed+runs-1 when non-empty
  int jobs = 1;

  bool freeze_gee = false;
  bool use_centrality = true;
  bool symmetric_neighbors = false;
  bool late_calibration = true;
  bool freeze_delta = false;

  // Remove a loss term from the graph entirely (used to check that a zero
  // weight is equivalent to removal).
  bool drop_kl_term = false;
  bool drop_dist_term = false;

  void validate() const;
  std::vector<std::uint64_t> resolved_seeds() const;
};

/// Product graph plus what training needs besides it.
struct Dataset {
  CBGraph graph;
  std::optional<gee::GEEBatch> topology;  // absent: X_E is taken from graph as a constant
  std::vector<double> centrality;         // eigenvector centrality of the product graph
  std::vector<std::vector<std::size_t>> neighbors;  // undirected adjacency
};

/// Builds X_E with a randomly initialized encoder seeded by embed_seed.
Dataset make_dataset(const SupplyGraph& g, std::uint64_t embed_seed = 0);
Dataset make_dataset(CBGraph graph);

struct Split {
  ad::Index train, val, test;
};

/// Largest-remainder sizes for n items; throws if any part would be empty.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratio);
Split split_dataset(std::size_t n, const std::array<double, 3>& ratio, std::uint64_t seed);

struct HeadParams {
  ParamId w1[2], b1[2], w2[2], b2[2];
  double slope = 0.01;

  static constexpr const char* kGroup = "heads";
  static HeadParams create(ParamStore& store, Rng& rng, int hidden);
};

struct DTCOutput {
  ad::Var probs;  // n x 2, node i scored by the head of its domain
  ad::Var kl;     // mean KL(teacher || student) over biased nodes, teacher detached
};

DTCOutput dtc_classify(Binding& bind, const HeadParams& p, const ad::Var& h, const std::vector<int>& psi);

struct LossBreakdown {
  double clf = 0.0;
  double kl = 0.0;
  double dist = 0.0;
  double total = 0.0;
};

struct LossTerms {
  ad::Var clf;
  std::optional<ad::Var> kl;
  std::optional<ad::Var> dist;
};

/// L_total = L_clf + lambda L_kl + gamma L_dist. Throws on non-finite parts.
ad::Var total_loss(const LossTerms& parts, double lambda, double gamma, LossBreakdown* breakdown = nullptr);

struct Model {
  ParamStore store;
  gee::GEEParams gee;
  ccafc::CCAFCParams ccafc;
  dcamp::DCAMPParams dcamp;
  HeadParams heads;
};

Model init_model(const TrainConfig& cfg, std::uint64_t seed);

/// Everything a run needs that depends only on the data and config.
struct RunContext {
  ccafc::FrontierPlan plan;
  dcamp::EdgeList edges;
  std::vector<double> weights;
  ad::Index train_rows;
  std::optional<Matrix> fixed_x_e;  // encoder output when it is not trained
};

RunContext make_context(const Dataset& data, const TrainConfig& cfg, const Model& model, const Split& split);

struct ForwardPass {
  ad::Var total;
  LossBreakdown loss;
  Matrix probs;  // n x 2
  std::vector<bool> completed;
};

/// Full forward pass of the pipeline on one tape.
ForwardPass hktgnn_forward(Binding& bind, const Model& model, const Dataset& data, const TrainConfig& cfg,
                           const RunContext& ctx);

std::vector<std::string> frozen_groups(const Dataset& data, const TrainConfig& cfg);

struct StepRecord {
  int epoch = 0;
  LossBreakdown loss;
  const ccafc::FrontierPlan* plan = nullptr;
  const ParamStore* params = nullptr;  // state before this step's update
};
using StepObserver = std::function<void(const StepRecord&)>;

struct RunResult {
  std::uint64_t seed = 0;
  double f1 = 0.0;
  double auc = 0.0;
  int best_epoch = -1;
  double val_f1 = 0.0;
  double val_auc = 0.0;
  double train_f1 = 0.0;
};

/// Thrown when any loss term becomes non-finite during training.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::uint64_t seed, int epoch)
      : Error(what + " (seed " + std::to_string(seed) + ", epoch " + std::to_string(epoch) + ")"),
        seed_(seed), epoch_(epoch) {}
  std::uint64_t seed() const noexcept { return seed_; }
  int epoch() const noexcept { return epoch_; }

 private:
  std::uint64_t seed_;
  int epoch_;
};

/// One seeded HKTGNN run: split, then `epochs` full-batch Adam steps; the
/// reported test metrics come from the epoch with the best validation F1
/// (ties: validation AUC, then earliest).
RunResult train_once(const Dataset& data, const TrainConfig& cfg, std::uint64_t seed,
                     const StepObserver& observer = {}, Model* final_model = nullptr);

/// Two-hidden-layer perceptron on raw node features (unobserved X_F zero-filled),
/// same split, optimizer and model selection as train_once.
RunResult mlp_once(const Dataset& data, const TrainConfig& cfg, std::uint64_t seed);

enum class ModelKind { Hktgnn, Mlp };

struct RunReport {
  std::string model;
  TrainConfig config;
  std::vector<RunResult> runs;
  double f1_mean = 0.0, f1_std = 0.0, auc_mean = 0.0, auc_std = 0.0;
};

RunReport summarize(std::string model, const TrainConfig& cfg, std::vector<RunResult> runs);
RunReport monte_carlo(const Dataset& data, const TrainConfig& cfg, ModelKind kind = ModelKind::Hktgnn);

enum class SweepParam { K, Lambda, Gamma, Split };
SweepParam parse_sweep_param(const std::string& name);
std::string to_string(SweepParam p);

struct SweepPoint {
  std::string label;
  TrainConfig config;
};
std::vector<SweepPoint> sweep_grid(SweepParam p, const TrainConfig& base);
std::vector<std::pair<std::string, RunReport>> sweep(const Dataset& data, const TrainConfig& base, SweepParam p);

struct AblationArm {
  std::string name;
  RunReport report;
};
/// Paired arms on identical seeds: full model, centrality off, K = 0, and the MLP baseline.
std::vector<AblationArm> ablate(const Dataset& data, const TrainConfig& base);

}  // namespace hktgnn
