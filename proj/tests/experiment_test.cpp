#include <gtest/gtest.h>

#include <cstdlib>

#include "fixtures.hpp"

namespace ggnn {
namespace {

using testing::TempDir;

TEST(Settings, PresetsByKernel) {
  ExperimentConfig gcn = resolve_settings({});
  EXPECT_EQ(gcn.train.kernel.kind, KernelKind::gcn);
  EXPECT_EQ(gcn.train.kernel.hidden_dim, 16u);
  EXPECT_DOUBLE_EQ(gcn.train.adam.learning_rate, 0.01);
  EXPECT_EQ(gcn.seeds.size(), 10u);
  EXPECT_EQ(gcn.walk.walk_length, 100u);
  EXPECT_EQ(gcn.sgns.dim, 8u);
  EXPECT_EQ(gcn.sgns.negatives, 64u);

  Settings s;
  s.set("kernel", "appnp");
  ExperimentConfig appnp = resolve_settings(s);
  EXPECT_EQ(appnp.train.kernel.hidden_dim, 64u);
  EXPECT_EQ(appnp.train.kernel.appnp_steps, 10u);
  EXPECT_DOUBLE_EQ(appnp.train.kernel.appnp_teleport, 0.1);

  Settings p;
  p.set("mode", "plain");
  ExperimentConfig plain = resolve_settings(p);
  EXPECT_EQ(plain.train.mode, Mode::plain);
  EXPECT_EQ(plain.train.kernel.hidden_dim, 256u);
  EXPECT_EQ(plain.sgns.dim, 32u);
}

TEST(Settings, KeysOverridePreset) {
  Settings s;
  s.set("kernel", "sage");
  s.set("hidden_dim", "32");
  s.set("alpha", "0");
  s.set("beta", "0.5");
  s.set("seeds", "0..2,10");
  s.set("seed", "7");
  s.set("threads", "2");
  ExperimentConfig c = resolve_settings(s);
  EXPECT_EQ(c.train.kernel.kind, KernelKind::sage);
  EXPECT_EQ(c.train.kernel.hidden_dim, 32u);
  EXPECT_DOUBLE_EQ(c.train.alpha, 0.0);
  EXPECT_DOUBLE_EQ(c.train.beta, 0.5);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2, 10}));
  EXPECT_EQ(c.walk.seed, 7u);
  EXPECT_EQ(c.sgns.seed, 7u);
  EXPECT_EQ(c.sgns.threads, 2u);
}

TEST(Settings, RejectsBadInput) {
  Settings s;
  EXPECT_THROW(s.set("hiden_dim", "3"), ConfigError);
  auto bad = [](const char* k, const char* v) {
    Settings t;
    t.set(k, v);
    return resolve_settings(t);
  };
  EXPECT_THROW(bad("hidden_dim", "abc"), ConfigError);
  EXPECT_THROW(bad("hidden_dim", "3x"), ConfigError);
  EXPECT_THROW(bad("alpha", "-1"), ConfigError);
  EXPECT_THROW(bad("kernel", "gat"), ConfigError);
  EXPECT_THROW(bad("seeds", "5..2"), ConfigError);
  EXPECT_THROW(bad("seeds", "1,,2"), ConfigError);
  EXPECT_THROW(bad("jobs", "0"), ConfigError);
  EXPECT_THROW(bad("dropout", "1.5"), ConfigError);
}

TEST(Settings, FileLayerAndPrecedence) {
  TempDir dir;
  auto path = dir.write("run.conf", "# comment\nkernel = appnp\nhidden_dim = 12  # inline\n\nepochs=5\n");
  Settings layered = read_settings_file(path);
  Settings flags;
  flags.set("hidden_dim", "20");
  layered.merge(flags);
  ExperimentConfig c = resolve_settings(layered);
  EXPECT_EQ(c.train.kernel.kind, KernelKind::appnp);
  EXPECT_EQ(c.train.kernel.hidden_dim, 20u);
  EXPECT_EQ(c.train.epochs, 5u);
  EXPECT_THROW(read_settings_file(dir.write("bad.conf", "kernel appnp\n")), ConfigError);
  EXPECT_THROW(read_settings_file(dir.write("bad2.conf", "colour = red\n")), ConfigError);
}

TEST(Settings, EnvironmentLayer) {
  ::setenv("GGNN_EPOCHS", "17", 1);
  ::setenv("GGNN_WALK_LENGTH", "40", 1);
  Settings env = settings_from_env();
  ::unsetenv("GGNN_EPOCHS");
  ::unsetenv("GGNN_WALK_LENGTH");
  ExperimentConfig c = resolve_settings(env);
  EXPECT_EQ(c.train.epochs, 17u);
  EXPECT_EQ(c.walk.walk_length, 40u);
}

TEST(Settings, SnapshotRoundTrip) {
  Settings s;
  s.set("kernel", "appnp");
  s.set("alpha", "0.002");
  s.set("lr", "0.1");
  s.set("seeds", "3,5");
  ExperimentConfig c = resolve_settings(s);
  const auto snap = settings_snapshot(c);
  EXPECT_EQ(snap.size(), settings_keys().size());
  Settings again;
  for (const auto& [k, v] : snap) again.set(k, v);
  EXPECT_EQ(settings_snapshot(resolve_settings(again)), snap);
}

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(5e-4), "5e-04");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::strtod(format_real(x).c_str(), nullptr), x);
}

TEST(Aggregate, Examples) {
  const std::vector<Real> xs{0.8, 0.84, 0.82};
  Aggregate a = aggregate(xs);
  EXPECT_EQ(a.count, 3u);
  EXPECT_NEAR(a.mean, 0.82, 1e-15);
  EXPECT_DOUBLE_EQ(a.min, 0.8);
  EXPECT_DOUBLE_EQ(a.max, 0.84);
  EXPECT_NEAR(a.half_range, 0.02, 1e-15);
  EXPECT_EQ(aggregate(std::vector<Real>{}).count, 0u);
}

TEST(Aggregate, EqualsRecomputationFromRuns) {
  std::vector<RunOutcome> runs{{0, 0.7, 0.75, 3}, {1, 0.71, 0.80, 4}, {2, 0.69, 0.77, 5}};
  Aggregate a = aggregate_test(runs);
  EXPECT_DOUBLE_EQ(a.mean, mean_of(runs, &RunOutcome::test_acc));
  EXPECT_DOUBLE_EQ(a.min, 0.75);
  EXPECT_DOUBLE_EQ(a.max, 0.80);
}

TEST(ModelFile, RoundTripGivesIdenticalPredictions) {
  TempDir dir;
  Graph g = testing::attributed_sbm(3, 12, 5);
  FusionInputs in = prepare_inputs(g.attributes, testing::random_dense(g.n, 4, 1), testing::random_dense(g.n, 4, 2));
  GraphOperators ops = GraphOperators::from(g);
  Settings s;
  s.set("kernel", "appnp");
  s.set("epochs", "20");
  s.set("hidden_dim", "8");
  ExperimentConfig cfg = resolve_settings(s);
  TrainResult r = ggnn_train(in, g, ops, cfg.train);
  save_model(cfg, r.model, dir / "m.txt");

  SavedModel m = load_model(dir / "m.txt");
  EXPECT_EQ(settings_snapshot(m.config), settings_snapshot(cfg));
  GgnnModel back(in, g.n, g.num_classes(), m.config.train);
  back.restore(m.parameters);
  Rng unused = make_rng(0);
  EXPECT_EQ(testing::max_abs_diff(back.forward(in, ops, false, unused), r.model.forward(in, ops, false, unused)), 0.0);
  EXPECT_EQ(evaluate(back, in, g, ops, SplitKind::test), r.summary.test_acc.value());
}

TEST(ModelFile, FormatErrors) {
  TempDir dir;
  EXPECT_THROW(load_model(dir.write("a", "hello\n")), FormatError);
  EXPECT_THROW(load_model(dir.write("b", "ggnn-model 1\nparams 1\n2 2\n1 2\n")), FormatError);
  EXPECT_THROW(load_model(dir.write("c", "ggnn-model 1\nparams 1\n1 2\n1\n")), FormatError);
  EXPECT_THROW(load_model(dir.write("d", "ggnn-model 1\nbogus 3\nparams 0\n")), ConfigError);
}

}  // namespace
}  // namespace ggnn
