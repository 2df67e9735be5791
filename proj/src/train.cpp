#include "hktgnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <mutex>
#include <thread>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <spdlog/spdlog.h>

#include "hktgnn/domain.hpp"
#include "hktgnn/graphstats.hpp"
#include "hktgnn/metrics.hpp"

namespace hktgnn {

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ValidationError("invalid " + field + ": " + why);
  };
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda", "must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma", "must be >= 0");
  if (k < 0) fail("k", "must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr", "must be > 0");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (runs < 1 && seeds.empty()) fail("runs", "must be >= 1");
  for (double r : split)
    if (!(r > 0.0) || !std::isfinite(r)) fail("split", "every part must be positive");
  if (rounds < 0) fail("m", "must be >= 0");
  if (embed_dim != kEmbeddingDim) fail("embed_dim", "must be 64");
  if (!(embed_scale > 0.0) || !std::isfinite(embed_scale)) fail("embed_scale", "must be > 0");
  if (hidden < 1) fail("hidden", "must be >= 1");
  if (jobs < 1) fail("jobs", "must be >= 1");
}

std::vector<std::uint64_t> TrainConfig::resolved_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out(static_cast<std::size_t>(std::max(runs, 0)));
  std::iota(out.begin(), out.end(), seed);
  return out;
}

namespace {

// Tape values are large short-lived matrices. Keeping them on the heap instead
// of fresh mmap regions avoids a page-fault storm on every epoch.
void configure_allocator() {
#ifdef __GLIBC__
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

Dataset finish_dataset(CBGraph graph, std::optional<gee::GEEBatch> topology) {
  Dataset d;
  d.graph = std::move(graph);
  d.topology = std::move(topology);
  const auto g = stats::to_digraph(d.graph);
  d.neighbors = g.undirected_adjacency();
  d.centrality = d.graph.size() ? stats::eigenvector_centrality(g).values : std::vector<double>{};
  return d;
}

Matrix model_input_zero_filled(const CBGraph& g, double embed_scale) {
  Matrix x(static_cast<Eigen::Index>(g.size()), kFeatureDim);
  ad::Tape tape;
  x << embed_scale * ad::standardize_columns(tape.constant(g.x_e)).value(), g.x_b, g.x_f;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!g.mask_f[i]) x.row(static_cast<Eigen::Index>(i)).tail(kFinancialDim).setZero();
  return x;
}

struct Scores {
  std::vector<double> p1;
  std::vector<int> pred;
};

Scores scores_of(const Matrix& probs) {
  Scores s;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    s.p1.push_back(probs(r, 1));
    s.pred.push_back(probs(r, 1) > 0.5 ? 1 : 0);
  }
  return s;
}

struct Evaluation {
  double f1 = 0.0;
  double auc = std::numeric_limits<double>::quiet_NaN();
};

Evaluation evaluate(const Scores& s, const std::vector<int>& y, const ad::Index& rows) {
  std::vector<int> pred, lab;
  std::vector<double> score;
  for (std::size_t r : rows) {
    pred.push_back(s.pred[r]);
    lab.push_back(y[r]);
    score.push_back(s.p1[r]);
  }
  Evaluation e;
  e.f1 = f1_score(pred, lab);
  try {
    e.auc = auc_score(score, lab);
  } catch (const DegenerateSplit&) {
  }
  return e;
}

bool better(const Evaluation& cand, const Evaluation& best) {
  if (cand.f1 != best.f1) return cand.f1 > best.f1;
  const double a = std::isnan(cand.auc) ? -1.0 : cand.auc;
  const double b = std::isnan(best.auc) ? -1.0 : best.auc;
  return a > b;
}

// Tracks the best validation epoch and the test metrics seen at that epoch.
class Selector {
 public:
  Selector(const std::vector<int>& y, const Split& split) : y_(y), split_(split) {}

  void observe(int epoch, const Matrix& probs) {
    const Scores s = scores_of(probs);
    const Evaluation val = evaluate(s, y_, split_.val);
    if (best_epoch_ >= 0 && !better(val, best_val_)) return;
    best_epoch_ = epoch;
    best_val_ = val;
    best_scores_ = s;
  }

  RunResult result(std::uint64_t seed) const {
    RunResult r;
    r.seed = seed;
    r.best_epoch = best_epoch_;
    r.val_f1 = best_val_.f1;
    r.val_auc = best_val_.auc;
    const Evaluation test = evaluate(best_scores_, y_, split_.test);
    if (std::isnan(test.auc)) throw DegenerateSplit("test split has a single class (seed " + std::to_string(seed) + ")");
    r.f1 = test.f1;
    r.auc = test.auc;
    r.train_f1 = evaluate(best_scores_, y_, split_.train).f1;
    return r;
  }

 private:
  const std::vector<int>& y_;
  const Split& split_;
  int best_epoch_ = -1;
  Evaluation best_val_;
  Scores best_scores_;
};

}  // namespace

Dataset make_dataset(const SupplyGraph& g, std::uint64_t embed_seed) {
  const auto subs = extract_single_product_subgraphs(g);
  gee::GEEBatch batch = gee::make_batch(subs);
  ParamStore store;
  Rng rng(embed_seed);
  const auto params = gee::GEEParams::create(store, rng);
  ad::Tape tape;
  Binding bind(tape, store, {gee::GEEParams::kGroup});
  Matrix x_e = gee::encode(bind, params, batch).value();
  return finish_dataset(build_cb_graph(g, subs, x_e), std::move(batch));
}

Dataset make_dataset(CBGraph graph) {
  graph.validate();
  return finish_dataset(std::move(graph), std::nullopt);
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratio) {
  const double total = ratio[0] + ratio[1] + ratio[2];
  for (double r : ratio)
    if (!(r > 0.0)) throw ValidationError("split ratio parts must be positive");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * ratio[i] / total;
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  for (int i = 0; i < 3; ++i)
    if (sizes[i] == 0)
      throw ValidationError("split of " + std::to_string(n) + " nodes leaves the " +
                            (i == 0 ? "train" : i == 1 ? "validation" : "test") + " set empty");
  return sizes;
}

Split split_dataset(std::size_t n, const std::array<double, 3>& ratio, std::uint64_t seed) {
  const auto sizes = split_sizes(n, ratio);
  ad::Index perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed ^ 0x5bd1e995ULL);
  std::shuffle(perm.begin(), perm.end(), rng);
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
               perm.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

HeadParams HeadParams::create(ParamStore& store, Rng& rng, int hidden) {
  HeadParams p;
  for (int d = 0; d < 2; ++d) {
    const std::string pre = "heads.domain" + std::to_string(d) + ".";
    p.w1[d] = store.add(pre + "w1", glorot(rng, hidden, hidden), kGroup);
    p.b1[d] = store.add(pre + "b1", Matrix::Zero(1, hidden), kGroup);
    p.w2[d] = store.add(pre + "w2", glorot(rng, hidden, 2), kGroup);
    p.b2[d] = store.add(pre + "b2", Matrix::Zero(1, 2), kGroup);
  }
  return p;
}

DTCOutput dtc_classify(Binding& bind, const HeadParams& p, const ad::Var& h, const std::vector<int>& psi) {
  ad::Tape& tape = bind.tape();
  const std::size_t n = psi.size();
  if (static_cast<std::size_t>(h.rows()) != n) throw ShapeError("dtc_classify: states do not match labels");
  auto head = [&](int d, const ad::Var& x) {
    ad::Var z = ad::linear(x, bind(p.w1[d]), bind(p.b1[d]), p.slope);
    return ad::linear(z, bind(p.w2[d]), bind(p.b2[d]));
  };
  ad::Index rows[2];
  for (std::size_t i = 0; i < n; ++i) rows[psi[i] ? 1 : 0].push_back(i);

  DTCOutput out;
  ad::Var logits;
  bool have = false;
  for (int d = 0; d < 2; ++d) {
    if (rows[d].empty()) continue;
    ad::Var part = ad::scatter_add_rows(head(d, ad::gather_rows(h, rows[d])), rows[d], n);
    logits = have ? ad::add(logits, part) : part;
    have = true;
  }
  if (!have) logits = tape.constant(Matrix::Zero(0, 2));
  out.probs = ad::softmax_rows(logits);

  if (rows[1].empty()) {
    out.kl = tape.constant(Matrix::Zero(1, 1));
  } else {
    ad::Var hb = ad::gather_rows(h, rows[1]);
    ad::Var teacher = ad::detach(ad::softmax_rows(head(0, hb)));
    ad::Var student = ad::softmax_rows(head(1, hb));
    out.kl = ad::kl_divergence_rows(teacher, student);
  }
  return out;
}

ad::Var total_loss(const LossTerms& parts, double lambda, double gamma, LossBreakdown* breakdown) {
  LossBreakdown b;
  b.clf = parts.clf.scalar();
  b.kl = parts.kl ? parts.kl->scalar() : 0.0;
  b.dist = parts.dist ? parts.dist->scalar() : 0.0;
  if (!std::isfinite(b.clf) || !std::isfinite(b.kl) || !std::isfinite(b.dist))
    throw Error("total_loss: non-finite loss term (clf " + std::to_string(b.clf) + ", kl " +
                std::to_string(b.kl) + ", dist " + std::to_string(b.dist) + ")");
  ad::Var total = parts.clf;
  double value = b.clf;
  if (parts.kl) {
    total = ad::add(total, ad::scale(*parts.kl, lambda));
    value = value + lambda * b.kl;
  }
  if (parts.dist) {
    total = ad::add(total, ad::scale(*parts.dist, gamma));
    value = value + gamma * b.dist;
  }
  b.total = total.scalar();
  if (b.total != value) throw Error("total_loss: weighted sum is not additive");
  if (breakdown) *breakdown = b;
  return total;
}

Model init_model(const TrainConfig& cfg, std::uint64_t seed) {
  Model m;
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  m.gee = gee::GEEParams::create(m.store, rng);
  ccafc::CCAFCConfig cc;
  cc.late_calibration = cfg.late_calibration;
  m.ccafc = ccafc::CCAFCParams::create(m.store, rng, cc);
  dcamp::DCAMPConfig dc;
  dc.hidden = cfg.hidden;
  dc.rounds = cfg.rounds;
  dc.symmetric_neighbors = cfg.symmetric_neighbors;
  dc.freeze_delta = cfg.freeze_delta;
  m.dcamp = dcamp::DCAMPParams::create(m.store, rng, dc);
  m.heads = HeadParams::create(m.store, rng, cfg.hidden);
  return m;
}

std::vector<std::string> frozen_groups(const Dataset& data, const TrainConfig& cfg) {
  if (cfg.freeze_gee || !data.topology) return {gee::GEEParams::kGroup};
  return {};
}

RunContext make_context(const Dataset& data, const TrainConfig& cfg, const Model& model, const Split& split) {
  RunContext ctx;
  ctx.plan = ccafc::plan_frontier(data.neighbors, data.graph.psi, cfg.k);
  ctx.edges = dcamp::make_edges(data.graph.size(), data.graph.edges, cfg.symmetric_neighbors);
  ctx.weights = domain_weights(data.graph.psi, data.centrality, cfg.use_centrality);
  ctx.train_rows = split.train;
  if (!data.topology) {
    ctx.fixed_x_e = data.graph.x_e;
  } else if (cfg.freeze_gee) {
    ad::Tape tape;
    Binding bind(tape, model.store, {gee::GEEParams::kGroup});
    ctx.fixed_x_e = gee::encode(bind, model.gee, *data.topology).value();
  }
  return ctx;
}

ForwardPass hktgnn_forward(Binding& bind, const Model& model, const Dataset& data, const TrainConfig& cfg,
                           const RunContext& ctx) {
  ad::Tape& tape = bind.tape();
  const CBGraph& g = data.graph;
  const ad::Var x_e = ad::scale(ad::standardize_columns(ctx.fixed_x_e ? tape.constant(*ctx.fixed_x_e)
                                                                     : gee::encode(bind, model.gee, *data.topology)),
                                cfg.embed_scale);
  ad::Var x_o = ad::concat_cols(x_e, tape.constant(g.x_b));

  ccafc::Completion c = ccafc::complete_features(bind, model.ccafc, x_o, g.x_f, g.psi, ctx.weights, ctx.plan);
  ad::Var x = ad::concat_cols(x_o, c.x_u);
  ad::Var h = dcamp::forward(bind, model.dcamp, x, ctx.edges, g.psi, ctx.weights);
  DTCOutput dtc = dtc_classify(bind, model.heads, h, g.psi);

  LossTerms parts;
  parts.clf = ad::binary_cross_entropy(ad::column(dtc.probs, 1), g.y, ctx.train_rows);
  if (!cfg.drop_kl_term) parts.kl = dtc.kl;
  if (!cfg.drop_dist_term) parts.dist = ccafc::dist_loss(c, g.psi, ctx.weights);

  ForwardPass out;
  out.total = total_loss(parts, cfg.lambda, cfg.gamma, &out.loss);
  out.probs = dtc.probs.value();
  out.completed = std::move(c.completed);
  return out;
}

RunResult train_once(const Dataset& data, const TrainConfig& cfg, std::uint64_t seed,
                     const StepObserver& observer, Model* final_model) {
  cfg.validate();
  configure_allocator();
  const Split split = split_dataset(data.graph.size(), cfg.split, seed);
  Model model = init_model(cfg, seed);
  const RunContext ctx = make_context(data, cfg, model, split);
  const auto frozen = frozen_groups(data, cfg);
  Adam adam(model.store, AdamConfig{cfg.lr});
  Selector selector(data.graph.y, split);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    Binding bind(tape, model.store, frozen);
    ForwardPass fp;
    try {
      fp = hktgnn_forward(bind, model, data, cfg, ctx);
    } catch (const Error& e) {
      throw TrainingDiverged(e.what(), seed, epoch);
    }
    if (!fp.probs.allFinite()) throw TrainingDiverged("non-finite predictions", seed, epoch);
    selector.observe(epoch, fp.probs);
    if (observer) observer(StepRecord{epoch, fp.loss, &ctx.plan, &model.store});
    tape.backward(fp.total);
    std::vector<bool> trainable(model.store.size());
    for (std::size_t i = 0; i < model.store.size(); ++i) trainable[i] = bind.trainable(i);
    adam.step(model.store, bind.gradients(), trainable);
    if (epoch % 50 == 0)
      spdlog::debug("seed {} epoch {}: total {:.5f} clf {:.5f} kl {:.5f} dist {:.5f}", seed, epoch,
                    fp.loss.total, fp.loss.clf, fp.loss.kl, fp.loss.dist);
  }
  if (final_model) *final_model = std::move(model);
  return selector.result(seed);
}

RunResult mlp_once(const Dataset& data, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  configure_allocator();
  const Split split = split_dataset(data.graph.size(), cfg.split, seed);
  const Matrix input = model_input_zero_filled(data.graph, cfg.embed_scale);
  ParamStore store;
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 29);
  const int h = cfg.hidden;
  const ParamId w1 = store.add("mlp.w1", glorot(rng, kFeatureDim, h), "mlp");
  const ParamId b1 = store.add("mlp.b1", Matrix::Zero(1, h), "mlp");
  const ParamId w2 = store.add("mlp.w2", glorot(rng, h, h), "mlp");
  const ParamId b2 = store.add("mlp.b2", Matrix::Zero(1, h), "mlp");
  const ParamId w3 = store.add("mlp.w3", glorot(rng, h, 2), "mlp");
  const ParamId b3 = store.add("mlp.b3", Matrix::Zero(1, 2), "mlp");
  Adam adam(store, AdamConfig{cfg.lr});
  Selector selector(data.graph.y, split);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    Binding bind(tape, store);
    ad::Var x = tape.constant(input);
    ad::Var z1 = ad::linear(x, bind(w1), bind(b1), 0.01);
    ad::Var z2 = ad::linear(z1, bind(w2), bind(b2), 0.01);
    ad::Var probs = ad::softmax_rows(ad::linear(z2, bind(w3), bind(b3)));
    ad::Var loss = ad::binary_cross_entropy(ad::column(probs, 1), data.graph.y, split.train);
    if (!std::isfinite(loss.scalar())) throw TrainingDiverged("non-finite MLP loss", seed, epoch);
    selector.observe(epoch, probs.value());
    tape.backward(loss);
    adam.step(store, bind.gradients());
  }
  return selector.result(seed);
}

RunReport summarize(std::string model, const TrainConfig& cfg, std::vector<RunResult> runs) {
  RunReport r;
  r.model = std::move(model);
  r.config = cfg;
  std::vector<double> f1, auc;
  for (const auto& run : runs) {
    f1.push_back(run.f1);
    auc.push_back(run.auc);
  }
  const MeanStd f = mean_std(f1), a = mean_std(auc);
  r.f1_mean = f.mean;
  r.f1_std = f.std;
  r.auc_mean = a.mean;
  r.auc_std = a.std;
  r.runs = std::move(runs);
  return r;
}

RunReport monte_carlo(const Dataset& data, const TrainConfig& cfg, ModelKind kind) {
  cfg.validate();
  TrainConfig resolved = cfg;
  resolved.seeds = cfg.resolved_seeds();
  resolved.runs = static_cast<int>(resolved.seeds.size());
  const auto& seeds = resolved.seeds;
  std::vector<RunResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  auto work = [&](std::size_t i) {
    try {
      results[i] = kind == ModelKind::Hktgnn ? train_once(data, resolved, seeds[i]) : mlp_once(data, resolved, seeds[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto jobs = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), seeds.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < seeds.size(); i += jobs) work(i);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& r : results)
    spdlog::info("{} seed {}: test F1 {:.4f} AUC {:.4f} (best epoch {})",
                 kind == ModelKind::Hktgnn ? "hktgnn" : "mlp", r.seed, r.f1, r.auc, r.best_epoch);
  return summarize(kind == ModelKind::Hktgnn ? "hktgnn" : "mlp", resolved, std::move(results));
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "K" || name == "k") return SweepParam::K;
  if (name == "lambda") return SweepParam::Lambda;
  if (name == "gamma") return SweepParam::Gamma;
  if (name == "split") return SweepParam::Split;
  throw ValidationError("unknown sweep parameter '" + name + "' (expected K, lambda, gamma or split)");
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::K: return "K";
    case SweepParam::Lambda: return "lambda";
    case SweepParam::Gamma: return "gamma";
    case SweepParam::Split: return "split";
  }
  return "?";
}

std::vector<SweepPoint> sweep_grid(SweepParam p, const TrainConfig& base) {
  std::vector<SweepPoint> grid;
  auto fmt1 = [](int tenth) { return std::to_string(tenth / 10) + "." + std::to_string(tenth % 10); };
  switch (p) {
    case SweepParam::K:
      for (int k = 0; k <= 6; ++k) {
        TrainConfig c = base;
        c.k = k;
        grid.push_back({std::to_string(k), c});
      }
      break;
    case SweepParam::Lambda:
    case SweepParam::Gamma:
      for (int t = 0; t <= 10; ++t) {
        TrainConfig c = base;
        (p == SweepParam::Lambda ? c.lambda : c.gamma) = t / 10.0;
        grid.push_back({fmt1(t), c});
      }
      break;
    case SweepParam::Split: {
      const std::array<std::array<int, 3>, 10> rows{{{5, 1, 4}, {5, 4, 1}, {5, 2, 3}, {5, 3, 2}, {6, 2, 2},
                                                      {6, 1, 3}, {6, 3, 1}, {7, 2, 1}, {8, 1, 1}, {7, 1, 2}}};
      for (const auto& r : rows) {
        TrainConfig c = base;
        c.split = {double(r[0]), double(r[1]), double(r[2])};
        grid.push_back({std::to_string(r[0]) + ":" + std::to_string(r[1]) + ":" + std::to_string(r[2]), c});
      }
      break;
    }
  }
  return grid;
}

std::vector<std::pair<std::string, RunReport>> sweep(const Dataset& data, const TrainConfig& base, SweepParam p) {
  std::vector<std::pair<std::string, RunReport>> out;
  for (const auto& point : sweep_grid(p, base)) {
    spdlog::info("sweep {} = {}", to_string(p), point.label);
    out.emplace_back(point.label, monte_carlo(data, point.config));
  }
  return out;
}

std::vector<AblationArm> ablate(const Dataset& data, const TrainConfig& base) {
  TrainConfig no_centrality = base;
  no_centrality.use_centrality = false;
  TrainConfig k0 = base;
  k0.k = 0;
  std::vector<AblationArm> arms;
  arms.push_back({"hktgnn", monte_carlo(data, base)});
  arms.push_back({"no_centrality", monte_carlo(data, no_centrality)});
  arms.push_back({"k0", monte_carlo(data, k0)});
  arms.push_back({"mlp", monte_carlo(data, base, ModelKind::Mlp)});
  return arms;
}

}  // namespace hktgnn
