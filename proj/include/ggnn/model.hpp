#pragma once

// G-GNN composite: parallel kernels over standardized pretrained features and
// raw attributes, fused as H = α·H(s) + β·H(a) + H(o), trained full-batch with
// masked cross-entropy and Adam; plus the experiment drivers built on it
// (α/β grid sweep, feature ablation, plain-graph random-split protocol).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ggnn/dense_matrix.hpp"
#include "ggnn/error.hpp"
#include "ggnn/graph.hpp"
#include "ggnn/kernels.hpp"
#include "ggnn/nn.hpp"
#include "ggnn/rng.hpp"
#include "ggnn/sparse_matrix.hpp"

namespace ggnn {

enum class Mode { attributed, plain };

/// Which feature matrices take part; `concat` feeds [X | X(s) | X(a)] to a
/// single kernel instead of three parallel ones.
enum class FeatureSubset { x, x_xs, x_xa, x_xs_xa, concat };

inline std::string_view to_string(FeatureSubset s) {
  switch (s) {
    case FeatureSubset::x: return "X";
    case FeatureSubset::x_xs: return "X+Xs";
    case FeatureSubset::x_xa: return "X+Xa";
    case FeatureSubset::x_xs_xa: return "X+Xs+Xa";
    case FeatureSubset::concat: return "concat";
  }
  return "?";
}

inline FeatureSubset parse_feature_subset(std::string_view s) {
  if (s == "X" || s == "x") return FeatureSubset::x;
  if (s == "X+Xs" || s == "x+xs") return FeatureSubset::x_xs;
  if (s == "X+Xa" || s == "x+xa") return FeatureSubset::x_xa;
  if (s == "X+Xs+Xa" || s == "x+xs+xa" || s == "full") return FeatureSubset::x_xs_xa;
  if (s == "concat") return FeatureSubset::concat;
  throw ConfigError("unknown feature subset '" + std::string(s) + "'");
}

inline std::string_view to_string(Mode m) { return m == Mode::plain ? "plain" : "attributed"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "attributed") return Mode::attributed;
  if (s == "plain") return Mode::plain;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

struct TrainConfig {
  KernelConfig kernel;
  Real alpha = 0.01;
  Real beta = 0.01;
  std::size_t epochs = 300;
  AdamConfig adam;
  std::uint64_t seed = 0;
  Mode mode = Mode::attributed;
  FeatureSubset subset = FeatureSubset::x_xs_xa;

  void validate() const {
    kernel.validate();
    adam.validate();
    if (alpha < 0 || beta < 0) throw ConfigError("alpha and beta must be >= 0");
  }

  /// Baseline kernel hyperparameters with their epoch budgets.
  static TrainConfig preset(KernelKind kind) {
    TrainConfig c;
    c.kernel = KernelConfig::preset(kind);
    c.epochs = kind == KernelKind::sage ? 200 : 300;
    return c;
  }

  /// Plain-graph setting: GCN kernel, hidden 256, no dropout.
  static TrainConfig plain_preset() {
    TrainConfig c = preset(KernelKind::gcn);
    c.mode = Mode::plain;
    c.kernel.hidden_dim = 256;
    c.kernel.dropout_p = 0;
    return c;
  }
};

/// Model inputs. Pretrained tables are row-standardized by `prepare_inputs`;
/// the raw attribute matrix is used as given (optionally L1 row-normalized).
struct FusionInputs {
  std::optional<DenseMatrix> x_struct;
  std::optional<DenseMatrix> x_attr;
  std::optional<SparseMatrix> x_raw;
};

enum class RawFeatureNorm { none, row_sum };

/// Standardizes the pretrained tables once and optionally divides each raw
/// attribute row by its sum.
inline FusionInputs prepare_inputs(std::optional<SparseMatrix> raw, std::optional<DenseMatrix> x_struct,
                                   std::optional<DenseMatrix> x_attr, RawFeatureNorm norm = RawFeatureNorm::row_sum) {
  FusionInputs in;
  if (raw && norm == RawFeatureNorm::row_sum) {
    std::vector<Real> inv(raw->rows());
    for (std::size_t r = 0; r < raw->rows(); ++r) {
      const Real s = raw->row_sum(r);
      inv[r] = s != 0 ? 1 / s : 0;
    }
    raw = raw->scaled(inv, {});
  }
  in.x_raw = std::move(raw);
  if (x_struct) in.x_struct = row_standardize(*x_struct);
  if (x_attr) in.x_attr = row_standardize(*x_attr);
  return in;
}

enum class Branch : std::uint64_t { structure = 1, attribute = 2, raw = 3, concat = 4 };

/// Parallel kernels plus fusion weights. Kernels do not share parameters.
class GgnnModel {
 public:
  GgnnModel(const FusionInputs& in, std::size_t n, std::size_t classes, const TrainConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    auto need_rows = [n](std::size_t rows, const char* what) {
      if (rows != n) throw ShapeError(std::string(what) + " row count must equal node count");
    };
    if (in.x_struct) need_rows(in.x_struct->rows(), "x_struct");
    if (in.x_attr) need_rows(in.x_attr->rows(), "x_attr");
    if (in.x_raw) need_rows(in.x_raw->rows(), "x_raw");

    auto add = [&](Branch b, std::size_t width, Real weight) {
      Rng init = make_rng(cfg.seed, {10, static_cast<std::uint64_t>(b)});
      branches_.push_back({b, weight, KernelState(cfg.kernel, width, classes, init)});
    };
    if (cfg.mode == Mode::plain) {
      if (!in.x_struct) throw ConfigError("plain mode needs the structure embedding table");
      add(Branch::structure, in.x_struct->cols(), 1.0);
      return;
    }
    const auto s = cfg.subset;
    const bool use_xs = s == FeatureSubset::x_xs || s == FeatureSubset::x_xs_xa || s == FeatureSubset::concat;
    const bool use_xa = s == FeatureSubset::x_xa || s == FeatureSubset::x_xs_xa || s == FeatureSubset::concat;
    if (!in.x_raw) throw ConfigError("attributed mode needs the raw attribute matrix");
    if (use_xs && !in.x_struct) throw ConfigError("feature subset needs the structure embedding table");
    if (use_xa && !in.x_attr) throw ConfigError("feature subset needs the attribute embedding table");
    if (s == FeatureSubset::concat) {
      const DenseMatrix* tail[] = {&*in.x_struct, &*in.x_attr};
      concat_input_ = hstack_sparse(*in.x_raw, tail);
      add(Branch::concat, concat_input_->cols(), 1.0);
      return;
    }
    if (use_xs) add(Branch::structure, in.x_struct->cols(), cfg.alpha);
    if (use_xa) add(Branch::attribute, in.x_attr->cols(), cfg.beta);
    add(Branch::raw, in.x_raw->cols(), 1.0);
  }

  /// H = Σ_b weight_b · kernel_b(input_b).
  DenseMatrix forward(const FusionInputs& in, const GraphOperators& ops, bool training, Rng& rng) {
    DenseMatrix h;
    for (auto& b : branches_) {
      DenseMatrix hb = b.state.forward(input_for(b.which, in), ops, training, rng);
      if (h.empty()) {
        h = std::move(hb);
        h *= b.weight;
      } else {
        h.add_scaled(hb, b.weight);
      }
    }
    return h;
  }

  /// Same as forward but returns the unweighted output of every branch.
  std::vector<DenseMatrix> branch_outputs(const FusionInputs& in, const GraphOperators& ops, bool training, Rng& rng) {
    std::vector<DenseMatrix> out;
    for (auto& b : branches_) out.push_back(b.state.forward(input_for(b.which, in), ops, training, rng));
    return out;
  }

  /// Backpropagates ∂L/∂H into every branch, scaled by its fusion weight.
  void backward(const DenseMatrix& upstream) {
    for (auto& b : branches_) {
      DenseMatrix g = upstream;
      g *= b.weight;
      b.state.backward(g);
    }
  }

  void zero_grad() {
    for (auto& b : branches_) b.state.zero_grad();
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& b : branches_)
      for (auto& p : b.state.parameters()) out.push_back(&p);
    return out;
  }

  std::vector<DenseMatrix> snapshot() {
    std::vector<DenseMatrix> out;
    for (auto* p : parameters()) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<DenseMatrix>& values) {
    auto ps = parameters();
    if (values.size() != ps.size()) throw ShapeError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (!ps[i]->value.same_shape(values[i])) throw ShapeError("restore: parameter shape mismatch");
      ps[i]->value = values[i];
    }
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  std::size_t branch_count() const noexcept { return branches_.size(); }
  std::vector<Branch> branch_kinds() const {
    std::vector<Branch> out;
    for (const auto& b : branches_) out.push_back(b.which);
    return out;
  }

  /// Changes fusion weights of a built model (frozen-state experiments).
  void set_weights(Real alpha, Real beta) {
    for (auto& b : branches_) {
      if (b.which == Branch::structure && cfg_.mode == Mode::attributed) b.weight = alpha;
      if (b.which == Branch::attribute) b.weight = beta;
    }
    cfg_.alpha = alpha;
    cfg_.beta = beta;
  }

 private:
  struct BranchState {
    Branch which;
    Real weight;
    KernelState state;
  };

  FeatureRef input_for(Branch b, const FusionInputs& in) const {
    switch (b) {
      case Branch::structure:
        if (!in.x_struct) throw ConfigError("structure branch without x_struct");
        return *in.x_struct;
      case Branch::attribute:
        if (!in.x_attr) throw ConfigError("attribute branch without x_attr");
        return *in.x_attr;
      case Branch::raw:
        if (!in.x_raw) throw ConfigError("raw branch without x_raw");
        return *in.x_raw;
      case Branch::concat: return *concat_input_;
    }
    throw ConfigError("unknown branch");
  }

  TrainConfig cfg_;
  std::vector<BranchState> branches_;
  std::optional<SparseMatrix> concat_input_;
};

/// Fraction of nodes in `mask` whose argmax prediction equals their label.
inline Real accuracy(const DenseMatrix& logits, const Graph& g, const std::vector<bool>& mask) {
  const auto pred = argmax_rows(logits);
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    if (!mask[i]) continue;
    ++total;
    correct += pred[i] == g.labels[i];
  }
  if (total == 0) throw ConfigError("evaluate: mask selects no nodes");
  return static_cast<Real>(correct) / static_cast<Real>(total);
}

inline Real evaluate(GgnnModel& model, const FusionInputs& in, const Graph& g, const GraphOperators& ops, SplitKind which) {
  Rng unused(0);
  const DenseMatrix h = model.forward(in, ops, false, unused);
  return accuracy(softmax_rows(h), g, g.masks.get(which));
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  Real train_loss = 0;
  std::optional<Real> valid_acc;
};

struct RunSummary {
  std::optional<Real> test_acc;
  std::size_t best_epoch = 0;
  Real alpha = 0;
  Real beta = 0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  GgnnModel model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran or no validation mask
  std::optional<Real> best_valid;
  RunSummary summary;
};

/// Full-batch training. With a nonempty validation mask the parameters of the
/// first epoch reaching the best validation accuracy are restored at the end;
/// otherwise the final parameters are kept.
inline TrainResult ggnn_train(const FusionInputs& in, const Graph& g, const GraphOperators& ops, const TrainConfig& cfg,
                              const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (Masks::count(g.masks.train) == 0) throw ConfigError("training needs at least one labeled train node");
  const std::size_t classes = g.num_classes();
  TrainResult r{GgnnModel(in, g.n, classes, cfg), {}, 0, std::nullopt, {}};
  const bool has_valid = Masks::count(g.masks.valid) > 0;
  Rng dropout_rng = make_rng(cfg.seed, {20});
  std::vector<DenseMatrix> best;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    r.model.zero_grad();
    const DenseMatrix h = r.model.forward(in, ops, true, dropout_rng);
    const LossAndGrad lg = softmax_cross_entropy(h, g.labels, g.masks.train);
    r.model.backward(lg.grad);
    for (auto* p : r.model.parameters()) adam_step(*p, cfg.adam);

    EpochRecord rec{epoch, lg.loss, std::nullopt};
    if (has_valid) {
      rec.valid_acc = evaluate(r.model, in, g, ops, SplitKind::valid);
      if (!r.best_valid || *rec.valid_acc > *r.best_valid) {
        r.best_valid = rec.valid_acc;
        r.best_epoch = epoch;
        best = r.model.snapshot();
      }
    }
    r.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (!best.empty()) r.model.restore(best);
  if (!has_valid) r.best_epoch = cfg.epochs;

  r.summary.best_epoch = r.best_epoch;
  r.summary.alpha = cfg.alpha;
  r.summary.beta = cfg.beta;
  r.summary.seed = cfg.seed;
  if (Masks::count(g.masks.test) > 0) r.summary.test_acc = evaluate(r.model, in, g, ops, SplitKind::test);
  return r;
}

// ---------------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------------

namespace detail {

/// Runs task(i) for i in [0, count) on up to `jobs` threads; results are
/// written by index so aggregation does not depend on scheduling.
template <typename Task>
void run_indexed(std::size_t count, unsigned jobs, Task&& task) {
  jobs = std::max(1u, jobs);
  if (jobs == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(jobs, count); ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
          try {
            task(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

struct RunOutcome {
  std::uint64_t seed = 0;
  Real valid_acc = 0;  // best validation accuracy
  Real test_acc = 0;   // test accuracy at the best-validation parameters
  std::size_t best_epoch = 0;
};

inline Real mean_of(const std::vector<RunOutcome>& runs, Real RunOutcome::*field) {
  if (runs.empty()) return 0;
  Real s = 0;
  for (const auto& r : runs) s += r.*field;
  return s / static_cast<Real>(runs.size());
}

/// Trains one model per seed with otherwise identical config.
inline std::vector<RunOutcome> run_seeds(const FusionInputs& in, const Graph& g, const GraphOperators& ops,
                                         const TrainConfig& cfg, std::span<const std::uint64_t> seeds, unsigned jobs = 1) {
  std::vector<RunOutcome> out(seeds.size());
  detail::run_indexed(seeds.size(), jobs, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.seed = seeds[i];
    TrainResult r = ggnn_train(in, g, ops, c);
    out[i] = {seeds[i], r.best_valid.value_or(0), r.summary.test_acc.value_or(0), r.best_epoch};
  });
  return out;
}

struct GridPoint {
  Real alpha = 0;
  Real beta = 0;
};

inline std::vector<GridPoint> default_alpha_beta_grid() {
  const Real values[] = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05};
  std::vector<GridPoint> grid;
  for (Real a : values)
    for (Real b : values) grid.push_back({a, b});
  return grid;
}

struct SweepPoint {
  GridPoint point;
  std::vector<RunOutcome> runs;
  Real mean_valid = 0;
  Real mean_test = 0;
};

struct SweepReport {
  std::vector<SweepPoint> points;
  std::size_t best = 0;

  const SweepPoint& selected() const { return points.at(best); }
};

/// Trains every grid point for every seed and selects the point with the
/// highest mean validation accuracy; ties go to smaller α, then smaller β.
inline SweepReport sweep_alpha_beta(const FusionInputs& in, const Graph& g, const GraphOperators& ops,
                                    const TrainConfig& base, std::span<const GridPoint> grid,
                                    std::span<const std::uint64_t> seeds, unsigned jobs = 1) {
  if (grid.empty()) throw ConfigError("sweep: grid is empty");
  if (seeds.empty()) throw ConfigError("sweep: no seeds");
  SweepReport rep;
  rep.points.resize(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    rep.points[p].point = grid[p];
    rep.points[p].runs.resize(seeds.size());
  }
  detail::run_indexed(grid.size() * seeds.size(), jobs, [&](std::size_t task) {
    const std::size_t p = task / seeds.size(), s = task % seeds.size();
    TrainConfig c = base;
    c.alpha = grid[p].alpha;
    c.beta = grid[p].beta;
    c.seed = seeds[s];
    TrainResult r = ggnn_train(in, g, ops, c);
    rep.points[p].runs[s] = {seeds[s], r.best_valid.value_or(0), r.summary.test_acc.value_or(0), r.best_epoch};
  });
  for (auto& sp : rep.points) {
    sp.mean_valid = mean_of(sp.runs, &RunOutcome::valid_acc);
    sp.mean_test = mean_of(sp.runs, &RunOutcome::test_acc);
  }
  for (std::size_t p = 1; p < rep.points.size(); ++p) {
    const auto& cand = rep.points[p];
    const auto& cur = rep.points[rep.best];
    const bool better = cand.mean_valid > cur.mean_valid ||
                        (cand.mean_valid == cur.mean_valid &&
                         (cand.point.alpha < cur.point.alpha ||
                          (cand.point.alpha == cur.point.alpha && cand.point.beta < cur.point.beta)));
    if (better) rep.best = p;
  }
  return rep;
}

/// Trains with only the requested feature matrices (omitted branches are not
/// instantiated) or with the single-kernel concatenation.
inline std::vector<RunOutcome> ablate(const FusionInputs& in, const Graph& g, const GraphOperators& ops,
                                      const TrainConfig& cfg, FeatureSubset subset, std::span<const std::uint64_t> seeds,
                                      unsigned jobs = 1) {
  if (cfg.mode == Mode::plain) throw ConfigError("ablation is defined for attributed graphs only");
  TrainConfig c = cfg;
  c.subset = subset;
  return run_seeds(in, g, ops, c, seeds, jobs);
}

struct PlainSplitRow {
  Real ratio = 0;
  std::vector<Real> accuracies;  // one per split
  Real mean = 0;
};

/// Random, unstratified split with round(ratio·n) training nodes and the rest
/// as test nodes. A split leaving some class without training nodes is redrawn
/// (at most 10 retries).
inline Masks random_label_split(const Graph& g, Real ratio, std::uint64_t seed) {
  if (!(ratio > 0 && ratio < 1)) throw ConfigError("label ratio must lie in (0, 1)");
  for (int l : g.labels)
    if (l < 0) throw ConfigError("plain split protocol needs labels for every node");
  const std::size_t classes = g.num_classes();
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<Real>(g.n)));
  for (std::uint64_t attempt = 0; attempt <= 10; ++attempt) {
    std::vector<std::size_t> order(g.n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, {30, attempt});
    std::shuffle(order.begin(), order.end(), rng);
    Masks m(g.n);
    std::vector<bool> seen(classes, false);
    for (std::size_t i = 0; i < g.n; ++i) {
      if (i < n_train) {
        m.train[order[i]] = true;
        seen[static_cast<std::size_t>(g.labels[order[i]])] = true;
      } else {
        m.test[order[i]] = true;
      }
    }
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }) && n_train < g.n) return m;
  }
  throw ConfigError("could not draw a split covering every class in 10 retries");
}

/// Plain-graph protocol: for each ratio, `splits` random splits, each trained
/// in plain mode (structure table only) and scored on the held-out nodes.
inline std::vector<PlainSplitRow> plain_split_experiment(const Graph& g, const GraphOperators& ops, const FusionInputs& in,
                                                         std::span<const Real> ratios, std::size_t splits,
                                                         const TrainConfig& cfg, unsigned jobs = 1) {
  if (cfg.mode != Mode::plain) throw ConfigError("plain split experiment runs in plain mode");
  for (Real r : ratios)
    if (!(r > 0 && r < 1)) throw ConfigError("label ratio must lie in (0, 1)");
  std::vector<PlainSplitRow> rows(ratios.size());
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    rows[r].ratio = ratios[r];
    rows[r].accuracies.resize(splits);
  }
  detail::run_indexed(ratios.size() * splits, jobs, [&](std::size_t task) {
    const std::size_t r = task / splits, s = task % splits;
    Graph split_graph = g;
    const std::uint64_t split_seed = derive_seed(cfg.seed, {31, r, s});
    split_graph.masks = random_label_split(g, ratios[r], split_seed);
    TrainConfig c = cfg;
    c.seed = derive_seed(cfg.seed, {32, r, s});
    rows[r].accuracies[s] = ggnn_train(in, split_graph, ops, c).summary.test_acc.value_or(0);
  });
  for (auto& row : rows)
    row.mean = row.accuracies.empty()
                   ? 0
                   : std::accumulate(row.accuracies.begin(), row.accuracies.end(), Real{0}) / static_cast<Real>(splits);
  return rows;
}

}  // namespace ggnn
