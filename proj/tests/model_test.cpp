#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

namespace ggnn {
namespace {

FusionInputs inputs_for(const Graph& g, std::uint64_t seed, std::size_t dim = 4) {
  return prepare_inputs(*g.attributes, testing::random_dense(g.n, dim, seed), testing::random_dense(g.n, dim, seed + 1));
}

TrainConfig quiet_config(KernelKind kind = KernelKind::gcn, std::size_t epochs = 50) {
  TrainConfig c = TrainConfig::preset(kind);
  c.kernel.hidden_dim = 8;
  c.epochs = epochs;
  return c;
}

TEST(TrainConfig, Presets) {
  EXPECT_EQ(TrainConfig::preset(KernelKind::gcn).epochs, 300u);
  EXPECT_EQ(TrainConfig::preset(KernelKind::sage).epochs, 200u);
  EXPECT_EQ(TrainConfig::preset(KernelKind::appnp).kernel.hidden_dim, 64u);
  const TrainConfig plain = TrainConfig::plain_preset();
  EXPECT_EQ(plain.mode, Mode::plain);
  EXPECT_EQ(plain.kernel.hidden_dim, 256u);
  EXPECT_EQ(plain.kernel.dropout_p, 0.0);
  TrainConfig bad = quiet_config();
  bad.alpha = -0.1;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(parse_feature_subset("X+Xs+Xa"), FeatureSubset::x_xs_xa);
  EXPECT_EQ(parse_feature_subset("concat"), FeatureSubset::concat);
  EXPECT_THROW(parse_feature_subset("Xq"), ConfigError);
}

TEST(PrepareInputs, StandardizesTablesAndNormalizesRawRows) {
  Graph g = testing::five_node_fixture();
  FusionInputs in = inputs_for(g, 3);
  for (std::size_t r = 0; r < g.n; ++r) {
    EXPECT_NEAR(in.x_raw->row_sum(r), 1.0, 1e-12);
    Real mean = 0;
    for (Real v : in.x_struct->row(r)) mean += v;
    EXPECT_NEAR(mean, 0.0, 1e-12);
  }
  FusionInputs untouched = prepare_inputs(*g.attributes, std::nullopt, std::nullopt, RawFeatureNorm::none);
  EXPECT_EQ(testing::max_abs_diff(untouched.x_raw->to_dense(), g.attributes->to_dense()), 0.0);
}

TEST(GgnnModel, ZeroWeightsLeaveOnlyRawBranch) {
  Graph g = testing::five_node_fixture();
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 1);
  TrainConfig cfg = quiet_config();
  cfg.alpha = cfg.beta = 0;
  GgnnModel m(in, g.n, 3, cfg);
  Rng rng(0);
  auto branches = m.branch_outputs(in, ops, false, rng);
  ASSERT_EQ(m.branch_kinds(), (std::vector<Branch>{Branch::structure, Branch::attribute, Branch::raw}));
  EXPECT_EQ(testing::max_abs_diff(m.forward(in, ops, false, rng), branches[2]), 0.0);
}

TEST(GgnnModel, UnitWeightsSumIndependentBranches) {
  Graph g = testing::five_node_fixture();
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 1);
  TrainConfig cfg = quiet_config();
  cfg.alpha = cfg.beta = 1;
  GgnnModel m(in, g.n, 3, cfg);
  Rng rng(0);

  // Independently built kernels with the same per-branch init streams.
  DenseMatrix sum(g.n, 3);
  const std::pair<Branch, FeatureRef> branches[] = {
      {Branch::structure, *in.x_struct}, {Branch::attribute, *in.x_attr}, {Branch::raw, *in.x_raw}};
  for (const auto& [b, x] : branches) {
    Rng init = make_rng(cfg.seed, {10, static_cast<std::uint64_t>(b)});
    KernelState st(cfg.kernel, x.cols(), 3, init);
    sum += st.forward(x, ops, false, rng);
  }
  EXPECT_LT(testing::max_abs_diff(m.forward(in, ops, false, rng), sum), 1e-12);
}

TEST(GgnnModel, FusionIsLinearInWeights) {
  Graph g = testing::five_node_fixture();
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 2);
  GgnnModel m(in, g.n, 3, quiet_config());
  Rng rng(0);
  auto at = [&](Real a, Real b) {
    m.set_weights(a, b);
    return m.forward(in, ops, false, rng);
  };
  const DenseMatrix h00 = at(0, 0), h10 = at(1, 0), h01 = at(0, 1);
  for (auto [a, b] : {std::pair{0.3, 0.7}, {0.01, 0.05}, {2.0, 0.0}}) {
    DenseMatrix expected = h00;
    expected.add_scaled(h10 - h00, a);
    expected.add_scaled(h01 - h00, b);
    EXPECT_LT(testing::max_abs_diff(at(a, b), expected), 1e-10);
  }
}

TEST(GgnnModel, ZeroAlphaIsolatesStructureTable) {
  Graph g = testing::five_node_fixture();
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 2);
  TrainConfig cfg = quiet_config();
  cfg.alpha = 0;
  GgnnModel m(in, g.n, 3, cfg);
  Rng rng(0);
  const DenseMatrix before = m.forward(in, ops, false, rng);
  FusionInputs perturbed = in;
  perturbed.x_struct = testing::random_dense(g.n, 4, 99, 10.0);
  EXPECT_EQ(testing::max_abs_diff(m.forward(perturbed, ops, false, rng), before), 0.0);
}

TEST(GgnnModel, PlainModeIgnoresAttributes) {
  Graph g = testing::five_node_fixture();
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 2);
  TrainConfig cfg = TrainConfig::plain_preset();
  cfg.kernel.hidden_dim = 8;
  GgnnModel m(in, g.n, 3, cfg);
  EXPECT_EQ(m.branch_count(), 1u);
  Rng rng(0);
  const DenseMatrix before = m.forward(in, ops, false, rng);
  FusionInputs other = in;
  other.x_attr = testing::random_dense(g.n, 4, 50);
  other.x_raw = SparseMatrix::from_dense(testing::random_dense(g.n, 6, 51));
  EXPECT_EQ(testing::max_abs_diff(m.forward(other, ops, false, rng), before), 0.0);
  other.x_attr.reset();
  other.x_raw.reset();
  EXPECT_EQ(testing::max_abs_diff(m.forward(other, ops, false, rng), before), 0.0);
}

TEST(GgnnModel, MissingInputsRejected) {
  Graph g = testing::five_node_fixture();
  FusionInputs in = inputs_for(g, 2);
  FusionInputs no_raw = in;
  no_raw.x_raw.reset();
  EXPECT_THROW(GgnnModel(no_raw, g.n, 3, quiet_config()), ConfigError);
  FusionInputs no_attr = in;
  no_attr.x_attr.reset();
  EXPECT_THROW(GgnnModel(no_attr, g.n, 3, quiet_config()), ConfigError);
  TrainConfig xs_only = quiet_config();
  xs_only.subset = FeatureSubset::x_xs;
  EXPECT_NO_THROW(GgnnModel(no_attr, g.n, 3, xs_only));
  FusionInputs no_struct = in;
  no_struct.x_struct.reset();
  EXPECT_THROW(GgnnModel(no_struct, g.n, 3, TrainConfig::plain_preset()), ConfigError);
  FusionInputs short_rows = in;
  short_rows.x_struct = DenseMatrix(4, 4);
  EXPECT_THROW(GgnnModel(short_rows, g.n, 3, quiet_config()), ShapeError);
}

class WholeModelGradient : public ::testing::TestWithParam<std::tuple<KernelKind, FeatureSubset>> {};

TEST_P(WholeModelGradient, MatchesFiniteDifferences) {
  auto [kind, subset] = GetParam();
  Graph g = testing::five_node_fixture();
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 4);
  TrainConfig cfg = quiet_config(kind);
  cfg.kernel.dropout_p = 0;
  cfg.kernel.hidden_dim = 5;
  cfg.alpha = 0.7;
  cfg.beta = 0.3;
  cfg.subset = subset;
  GgnnModel m(in, g.n, 3, cfg);
  Rng rng(0);
  auto loss = [&] { return softmax_cross_entropy(m.forward(in, ops, true, rng), g.labels, g.masks.train).loss; };
  m.zero_grad();
  m.backward(softmax_cross_entropy(m.forward(in, ops, true, rng), g.labels, g.masks.train).grad);
  EXPECT_LT(finite_difference_check(loss, std::span<Parameter* const>(m.parameters()), 1e-6), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(
    KindsAndSubsets, WholeModelGradient,
    ::testing::Combine(::testing::Values(KernelKind::gcn, KernelKind::sage, KernelKind::appnp),
                       ::testing::Values(FeatureSubset::x_xs_xa, FeatureSubset::x_xs, FeatureSubset::concat)),
    [](const auto& info) {
      std::string s = std::string(to_string(std::get<0>(info.param))) + "_" +
                      std::string(to_string(std::get<1>(info.param)));
      for (char& ch : s)
        if (ch == '+') ch = '_';
      return s;
    });

TEST(Evaluate, Examples) {
  Graph g = testing::make_graph(4, {});
  g.labels = {0, 1, 0, 1};
  std::vector<bool> all(4, true);
  EXPECT_DOUBLE_EQ(accuracy(DenseMatrix{{1, 0}, {0, 1}, {1, 0}, {0, 1}}, g, all), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(DenseMatrix{{1, 0}, {1, 0}, {1, 0}, {1, 0}}, g, all), 0.5);
  EXPECT_THROW(accuracy(DenseMatrix(4, 2), g, std::vector<bool>(4, false)), ConfigError);
}

TEST(Train, SeparableFixtureReachesPerfectTrainAccuracy) {
  Graph g = testing::make_graph(4, {{0, 1}, {2, 3}});
  g.labels = {0, 0, 1, 1};
  g.masks.train = {true, true, true, true};
  g.attributes = SparseMatrix::from_triplets(4, 2, {{0, 0, 1}, {1, 0, 1}, {2, 1, 1}, {3, 1, 1}});
  FusionInputs in = inputs_for(g, 5);
  TrainConfig cfg = TrainConfig::preset(KernelKind::gcn);
  cfg.epochs = 200;
  auto r = ggnn_train(in, g, GraphOperators::from(g), cfg);
  EXPECT_DOUBLE_EQ(evaluate(r.model, in, g, GraphOperators::from(g), SplitKind::train), 1.0);
  EXPECT_EQ(r.best_epoch, 200u);  // no validation nodes: final parameters kept
}

TEST(Train, ZeroEpochsKeepsInitialization) {
  Graph g = testing::five_node_fixture();
  FusionInputs in = inputs_for(g, 5);
  TrainConfig cfg = quiet_config(KernelKind::gcn, 0);
  auto r = ggnn_train(in, g, GraphOperators::from(g), cfg);
  EXPECT_TRUE(r.history.empty());
  GgnnModel fresh(in, g.n, 3, cfg);
  auto a = r.model.snapshot(), b = fresh.snapshot();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(testing::max_abs_diff(a[i], b[i]), 0.0);
}

TEST(Train, NoTrainNodesRejected) {
  Graph g = testing::five_node_fixture();
  g.masks.train.assign(5, false);
  EXPECT_THROW(ggnn_train(inputs_for(g, 1), g, GraphOperators::from(g), quiet_config()), ConfigError);
}

TEST(Train, SameSeedSameLossSequence) {
  Graph g = testing::attributed_sbm(3, 15, 7);
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 8);
  for (KernelKind kind : {KernelKind::gcn, KernelKind::sage, KernelKind::appnp}) {
    TrainConfig cfg = quiet_config(kind, 30);
    auto a = ggnn_train(in, g, ops, cfg), b = ggnn_train(in, g, ops, cfg);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
      EXPECT_EQ(a.history[i].valid_acc, b.history[i].valid_acc);
    }
    cfg.seed = 1;
    auto c = ggnn_train(in, g, ops, cfg);
    EXPECT_NE(a.history[0].train_loss, c.history[0].train_loss);
  }
}

TEST(Train, FirstEpochLossIsNearLogClasses) {
  for (std::size_t classes : {2u, 3u, 5u})
    for (KernelKind kind : {KernelKind::gcn, KernelKind::sage, KernelKind::appnp}) {
      Graph g = testing::attributed_sbm(classes, 12, classes);
      TrainConfig cfg = TrainConfig::preset(kind);
      cfg.epochs = 1;
      auto r = ggnn_train(inputs_for(g, 1, 8), g, GraphOperators::from(g), cfg);
      const Real ln_c = std::log(static_cast<Real>(classes));
      EXPECT_NEAR(r.history[0].train_loss, ln_c, 0.2 * ln_c) << to_string(kind) << " c=" << classes;
    }
}

TEST(Train, RestoresBestValidationParameters) {
  Graph g = testing::attributed_sbm(3, 20, 11);
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 2);
  TrainConfig cfg = quiet_config(KernelKind::gcn, 60);
  std::vector<EpochRecord> seen;
  auto r = ggnn_train(in, g, ops, cfg, [&](const EpochRecord& e) { seen.push_back(e); });
  ASSERT_EQ(seen.size(), 60u);
  Real best = -1;
  std::size_t best_epoch = 0;
  for (const auto& e : seen)
    if (*e.valid_acc > best) {
      best = *e.valid_acc;
      best_epoch = e.epoch;
    }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(*r.best_valid, best);
  EXPECT_DOUBLE_EQ(evaluate(r.model, in, g, ops, SplitKind::valid), best);
  ASSERT_TRUE(r.summary.test_acc.has_value());
}

TEST(Train, LearnsAttributedCommunities) {
  Graph g = testing::attributed_sbm(3, 30, 21);
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 3);
  for (KernelKind kind : {KernelKind::gcn, KernelKind::sage, KernelKind::appnp}) {
    TrainConfig cfg = TrainConfig::preset(kind);
    cfg.epochs = 100;
    auto r = ggnn_train(in, g, ops, cfg);
    EXPECT_GT(*r.summary.test_acc, 0.8) << to_string(kind);
  }
}

TEST(Sweep, SinglePointGridReturnsIt) {
  Graph g = testing::attributed_sbm(2, 10, 3);
  auto ops = GraphOperators::from(g);
  const GridPoint grid[] = {{0.02, 0.005}};
  const std::uint64_t seeds[] = {0};
  auto rep = sweep_alpha_beta(inputs_for(g, 1), g, ops, quiet_config(KernelKind::gcn, 5), grid, seeds);
  ASSERT_EQ(rep.points.size(), 1u);
  EXPECT_EQ(rep.selected().point.alpha, 0.02);
  EXPECT_EQ(rep.selected().point.beta, 0.005);
  EXPECT_THROW(sweep_alpha_beta(inputs_for(g, 1), g, ops, quiet_config(), std::span<const GridPoint>{}, seeds),
               ConfigError);
}

TEST(Sweep, DefaultGridReportsThirtySixPoints) {
  auto grid = default_alpha_beta_grid();
  ASSERT_EQ(grid.size(), 36u);
  EXPECT_EQ(grid.front().alpha, 0.001);
  EXPECT_EQ(grid.back().beta, 0.05);
  Graph g = testing::attributed_sbm(2, 8, 3);
  const std::uint64_t seeds[] = {0};
  auto rep = sweep_alpha_beta(inputs_for(g, 1), g, GraphOperators::from(g), quiet_config(KernelKind::gcn, 2), grid,
                              seeds, 4);
  EXPECT_EQ(rep.points.size(), 36u);
  for (const auto& p : rep.points) EXPECT_EQ(p.runs.size(), 1u);
}

TEST(Sweep, ParallelMatchesSerial) {
  Graph g = testing::attributed_sbm(2, 10, 3);
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 1);
  const GridPoint grid[] = {{0.001, 0.001}, {0.05, 0.01}, {0.5, 0.5}};
  const std::uint64_t seeds[] = {0, 1};
  auto a = sweep_alpha_beta(in, g, ops, quiet_config(KernelKind::gcn, 10), grid, seeds, 1);
  auto b = sweep_alpha_beta(in, g, ops, quiet_config(KernelKind::gcn, 10), grid, seeds, 3);
  EXPECT_EQ(a.best, b.best);
  for (std::size_t p = 0; p < 3; ++p) {
    EXPECT_EQ(a.points[p].mean_valid, b.points[p].mean_valid);
    EXPECT_EQ(a.points[p].mean_test, b.points[p].mean_test);
  }
}

TEST(Sweep, NoiseFeaturesSelectZeroWeights) {
  // Pretrained tables are pure noise and large weights let the model memorize
  // the training nodes through them.
  const GridPoint grid[] = {{0, 0}, {1, 1}, {3, 3}};
  int chose_zero = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Graph g = testing::attributed_sbm(3, 25, seed, 0.15, 0.03, 6, 3, 0.6, 5, 10);
    auto ops = GraphOperators::from(g);
    FusionInputs in = inputs_for(g, seed + 100, 16);
    const std::uint64_t seeds[] = {seed};
    auto rep = sweep_alpha_beta(in, g, ops, quiet_config(KernelKind::gcn, 100), grid, seeds);
    chose_zero += rep.selected().point.alpha == 0 && rep.selected().point.beta == 0;
  }
  EXPECT_GE(chose_zero, 6);
}

TEST(Ablate, RawOnlyMatchesSingleKernel) {
  Graph g = testing::attributed_sbm(2, 10, 3);
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 1);
  TrainConfig cfg = quiet_config();
  cfg.subset = FeatureSubset::x;
  GgnnModel m(in, g.n, 2, cfg);
  EXPECT_EQ(m.branch_kinds(), std::vector<Branch>{Branch::raw});
  Rng init = make_rng(cfg.seed, {10, static_cast<std::uint64_t>(Branch::raw)});
  KernelState st(cfg.kernel, in.x_raw->cols(), 2, init);
  Rng rng(0);
  EXPECT_EQ(testing::max_abs_diff(m.forward(in, ops, false, rng), st.forward(*in.x_raw, ops, false, rng)), 0.0);
}

TEST(Ablate, FullSubsetMatchesDefaultTraining) {
  Graph g = testing::attributed_sbm(2, 10, 3);
  auto ops = GraphOperators::from(g);
  FusionInputs in = inputs_for(g, 1);
  TrainConfig cfg = quiet_config(KernelKind::gcn, 20);
  const std::uint64_t seeds[] = {4};
  auto ab = ablate(in, g, ops, cfg, FeatureSubset::x_xs_xa, seeds);
  auto direct = run_seeds(in, g, ops, cfg, seeds);
  EXPECT_EQ(ab[0].test_acc, direct[0].test_acc);
  EXPECT_EQ(ab[0].valid_acc, direct[0].valid_acc);
}

TEST(Ablate, ConcatBuildsOneWideKernel) {
  Graph g = testing::attributed_sbm(2, 10, 3);
  FusionInputs in = inputs_for(g, 1, 4);
  TrainConfig cfg = quiet_config();
  cfg.subset = FeatureSubset::concat;
  GgnnModel m(in, g.n, 2, cfg);
  EXPECT_EQ(m.branch_kinds(), std::vector<Branch>{Branch::concat});
  EXPECT_EQ(m.parameters()[0]->value.rows(), g.attributes->cols() + 8);
}

TEST(Ablate, PlainModeRejected) {
  Graph g = testing::attributed_sbm(2, 10, 3);
  const std::uint64_t seeds[] = {0};
  EXPECT_THROW(ablate(inputs_for(g, 1), g, GraphOperators::from(g), TrainConfig::plain_preset(), FeatureSubset::x, seeds),
               ConfigError);
}

Graph fully_labeled(const Graph& src) {
  Graph g = src;
  g.masks = Masks(g.n);
  return g;
}

TEST(PlainSplit, RandomSplitSizesAndCoverage) {
  Graph g = fully_labeled(testing::attributed_sbm(3, 10, 2));
  Masks m = random_label_split(g, 0.3, 5);
  EXPECT_EQ(Masks::count(m.train), 9u);
  EXPECT_EQ(Masks::count(m.test), 21u);
  EXPECT_EQ(Masks::count(m.valid), 0u);
  for (std::size_t i = 0; i < g.n; ++i) EXPECT_NE(m.train[i], m.test[i]);
  EXPECT_THROW(random_label_split(g, 1.0, 5), ConfigError);
  EXPECT_THROW(random_label_split(g, 0.0, 5), ConfigError);
}

TEST(PlainSplit, DegenerateRatioExhaustsRetries) {
  // A single training node can never cover three classes.
  Graph g = fully_labeled(testing::attributed_sbm(3, 10, 2));
  EXPECT_THROW(random_label_split(g, 1.0 / 30, 1), ConfigError);
}

TEST(PlainSplit, DeterministicAndLearns) {
  Graph g = fully_labeled(testing::attributed_sbm(3, 20, 4, 0.35, 0.01));
  auto ops = GraphOperators::from(g);
  WalkConfig wc;
  wc.walk_length = 40;
  auto corpus = generate_walks(g, wc);
  SgnsConfig sc;
  sc.dim = 16;
  sc.epochs = 2;
  FusionInputs in = prepare_inputs(std::nullopt, train_structure_embeddings(WalkPairs(corpus, 5), g.n, sc).vectors,
                                   std::nullopt);
  TrainConfig cfg = TrainConfig::plain_preset();
  cfg.kernel.hidden_dim = 32;
  cfg.epochs = 60;
  const Real ratios[] = {0.5};
  auto a = plain_split_experiment(g, ops, in, ratios, 2, cfg);
  auto b = plain_split_experiment(g, ops, in, ratios, 2, cfg);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].accuracies, b[0].accuracies);
  EXPECT_GT(a[0].mean, 0.7);
  const Real bad[] = {1.5};
  EXPECT_THROW(plain_split_experiment(g, ops, in, bad, 1, cfg), ConfigError);
  EXPECT_THROW(plain_split_experiment(g, ops, in, ratios, 1, quiet_config()), ConfigError);
}

}  // namespace
}  // namespace ggnn
