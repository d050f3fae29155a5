// ggnn: import, pretrain, train, eval, sweep, ablate, plain.
//
// Exit status: 0 success, 2 configuration or usage error, 3 malformed or
// inconsistent input files, 4 any other runtime failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ggnn/ggnn.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ggnn;

namespace {

constexpr const char* kVersion = "1.0.0";

enum ExitCode { kOk = 0, kConfig = 2, kFormat = 3, kRuntime = 4 };

// ---------------------------------------------------------------------------
// Settings plumbing
// ---------------------------------------------------------------------------

struct SettingsFlags {
  std::map<std::string, std::string> values;
  std::string config_file;
};

std::string dashed(std::string k) {
  for (char& c : k)
    if (c == '_') c = '-';
  return k;
}

void add_settings_flags(CLI::App* cmd, SettingsFlags& f) {
  cmd->add_option("--config", f.config_file, "flat key = value settings file")->check(CLI::ExistingFile);
  for (const auto& k : settings_keys()) cmd->add_option("--" + dashed(k), f.values[k], "setting " + k);
}

/// preset < config file < GGNN_* environment < flags; `forced` wins over all.
ExperimentConfig resolve(const CLI::App* cmd, const SettingsFlags& f, const Settings& forced = {}) {
  Settings s;
  if (!f.config_file.empty()) s.merge(read_settings_file(f.config_file));
  s.merge(settings_from_env());
  Settings flags;
  for (const auto& k : settings_keys())
    if (cmd->count("--" + dashed(k)) > 0) flags.set(k, f.values.at(k));
  s.merge(flags);
  s.merge(forced);
  return resolve_settings(s);
}

json config_json(const ExperimentConfig& c) {
  json out = json::object();
  for (const auto& [k, v] : settings_snapshot(c)) out[k] = v;
  return out;
}

// ---------------------------------------------------------------------------
// Manifests and record files
// ---------------------------------------------------------------------------

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `<dir>/manifest.json`. An existing manifest is never replaced: an
/// identical one means this is a rerun, a different one is an error.
fs::path write_manifest(const fs::path& dir, const json& m) {
  fs::create_directories(dir);
  const fs::path path = dir / "manifest.json";
  const std::string text = m.dump(2) + "\n";
  if (fs::exists(path)) {
    if (read_text(path) == text) return path;
    throw ConfigError(path.string() + " already exists with a different run description; manifests are immutable, "
                      "choose a new --out directory");
  }
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

json manifest_base(const std::string& command, const ExperimentConfig& cfg, const DatasetFiles& data) {
  json m;
  m["tool"] = "ggnn";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config_json(cfg);
  m["dataset"] = {{"path", data.dir.string()}, {"checksum", dataset_checksum(data.dir)}};
  json seeds = json::array();
  for (auto s : cfg.seeds) seeds.push_back(s);
  m["seeds"] = seeds;
  return m;
}

void record_inputs(json& m, const fs::path& emb_dir, const TrainConfig& t) {
  json in = json::object();
  auto add = [&](const char* key, const char* file) {
    const fs::path p = emb_dir / file;
    in[key] = {{"path", p.string()}, {"checksum", fs::exists(p) ? file_checksum(p) : std::string("missing")}};
  };
  if (needs_structure_table(t)) add("structure_embedding", "structure.emb");
  if (needs_attribute_table(t)) add("attribute_embedding", "attribute.emb");
  m["inputs"] = in;
}

/// Line-delimited JSON records; the first line names the manifest.
class RecordFile {
 public:
  RecordFile(const fs::path& path, const fs::path& manifest) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write " + path.string());
    write({{"record", "header"}, {"manifest", manifest.filename().string()}, {"manifest_checksum", file_checksum(manifest)}});
  }
  void write(const json& j) { out_ << j.dump() << '\n'; }

 private:
  std::ofstream out_;
};

json aggregate_json(const std::string& metric, const Aggregate& a) {
  return {{"record", "aggregate"}, {"metric", metric},  {"count", a.count},          {"mean", a.mean},
          {"min", a.min},          {"max", a.max},      {"half_range", a.half_range}};
}

json run_json(const RunOutcome& r) {
  return {{"record", "run"}, {"seed", r.seed}, {"valid_acc", r.valid_acc}, {"test_acc", r.test_acc},
          {"best_epoch", r.best_epoch}};
}

std::string pct(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100 * v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared loading
// ---------------------------------------------------------------------------

struct Loaded {
  DatasetFiles files;
  Graph graph;
  GraphOperators ops;
};

Loaded load(const std::string& data) {
  Loaded l{DatasetFiles{data}, load_dataset(data), {}};
  l.ops = GraphOperators::from(l.graph);
  return l;
}

fs::path emb_dir_or_default(const std::string& emb, const DatasetFiles& files) {
  return emb.empty() ? files.embeddings() : fs::path(emb);
}

std::vector<Real> parse_real_list(const std::string& v, Real step = 0.1) {
  std::vector<Real> out;
  std::stringstream ss(v);
  std::string item;
  auto num = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const Real x = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("expected a number, got '" + s + "'");
    }
  };
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (auto dots = item.find(".."); dots != std::string::npos) {
      const Real lo = num(item.substr(0, dots)), hi = num(item.substr(dots + 2));
      const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
      if (count < 0) throw ConfigError("descending range '" + item + "'");
      for (long k = 0; k <= count; ++k) out.push_back(std::round((lo + static_cast<Real>(k) * step) * 1e9) / 1e9);
    } else {
      out.push_back(num(item));
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

// ---------------------------------------------------------------------------
// import
// ---------------------------------------------------------------------------

struct ImportArgs {
  std::string format = "linqs";
  std::string source;
  std::string name;
  std::string out;
  std::string split;
  bool plain = false;
  std::uint64_t split_seed = 0;
  std::size_t per_class = 20;
  std::size_t valid = 500;
  std::size_t test = 1000;
};

fs::path first_existing(const fs::path& dir, const std::string& file) {
  for (const auto& p : {dir / file, dir / "data" / file})
    if (fs::exists(p)) return p;
  throw ConfigError("cannot find " + file + " under " + dir.string());
}

int cmd_import(const ImportArgs& a) {
  ImportedDataset d;
  fs::path nodes_file, cites_file;
  std::string name = a.name;
  if (a.format == "linqs") {
    if (name.empty()) throw ConfigError("--name is required for the linqs format (the file stem, e.g. cora)");
    nodes_file = first_existing(a.source, name + ".content");
    cites_file = first_existing(a.source, name + ".cites");
    d = import_linqs(nodes_file, cites_file, !a.plain);
  } else if (a.format == "pubmed") {
    if (name.empty()) name = "pubmed";
    nodes_file = first_existing(a.source, "Pubmed-Diabetes.NODE.paper.tab");
    cites_file = first_existing(a.source, "Pubmed-Diabetes.DIRECTED.cites.tab");
    d = import_pubmed(nodes_file, cites_file, !a.plain);
  } else {
    throw ConfigError("unknown format '" + a.format + "' (expected linqs or pubmed)");
  }

  json split;
  if (!a.split.empty()) {
    d.graph.masks = split_from_ids(d, a.split);
    split = {{"kind", "file"}, {"path", a.split}, {"checksum", file_checksum(a.split)}};
  } else {
    d.graph.masks = planetoid_split(d.graph, a.per_class, a.valid, a.test, a.split_seed);
    split = {{"kind", "per_class"},
             {"train_per_class", a.per_class},
             {"valid", a.valid},
             {"test", a.test},
             {"seed", a.split_seed}};
  }
  d.graph.validate();
  save_dataset(d, a.out);

  const DatasetStats got = stats_of(d);
  std::string key = name;
  for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::vector<std::string> warnings;
  if (auto want = published_stats(key)) warnings = compare_stats(got, *want, a.plain);
  if (d.dropped_citations)
    warnings.push_back(std::to_string(d.dropped_citations) + " citations name papers absent from the node file");
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  json meta;
  meta["name"] = name;
  meta["format"] = a.format;
  meta["plain"] = a.plain;
  meta["sources"] = {{{"path", nodes_file.string()}, {"checksum", file_checksum(nodes_file)}},
                     {{"path", cites_file.string()}, {"checksum", file_checksum(cites_file)}}};
  meta["split"] = split;
  meta["stats"] = {{"nodes", got.nodes},     {"citations", got.edges},
                   {"undirected_edges", d.graph.adjacency.nnz() / 2},
                   {"attributes", got.attributes}, {"classes", got.classes},
                   {"train", got.train},     {"valid", got.valid},
                   {"test", got.test}};
  meta["warnings"] = warnings;
  meta["checksum"] = dataset_checksum(a.out);
  std::ofstream(fs::path(a.out) / "dataset.json", std::ios::binary) << meta.dump(2) << '\n';

  std::cout << name << ": " << got.nodes << " nodes, " << got.edges << " citations ("
            << d.graph.adjacency.nnz() / 2 << " undirected edges), " << got.attributes << " attributes, "
            << got.classes << " classes, split " << got.train << "/" << got.valid << "/" << got.test
            << ", checksum " << meta["checksum"].get<std::string>() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

struct PretrainArgs {
  std::string data;
  std::string out;
  bool attr = false;
  bool no_attr = false;
  SettingsFlags settings;
};

int cmd_pretrain(const CLI::App* cmd, PretrainArgs& a) {
  const ExperimentConfig cfg = resolve(cmd, a.settings);
  Loaded l = load(a.data);
  if (a.attr && !l.graph.attributes)
    throw ConfigError("--attr requested but " + a.data + " is a plain dataset (no features.tsv)");
  const bool with_attr = !a.no_attr && l.graph.attributes.has_value();
  const fs::path out = emb_dir_or_default(a.out, l.files);

  json m = manifest_base("pretrain", cfg, l.files);
  m.erase("seeds");
  m["artifacts"] = {{"structure_embedding", (out / "structure.emb").string()},
                    {"attribute_embedding", with_attr ? json((out / "attribute.emb").string()) : json(nullptr)},
                    {"log", (out / "pretrain.jsonl").string()}};
  const fs::path manifest = write_manifest(out, m);

  PretrainedTables t = pretrain_tables(l.graph, cfg.walk, cfg.sgns, with_attr);
  export_embeddings(t.structure.vectors, out / "structure.emb");
  if (t.attribute) export_embeddings(t.attribute->vectors, out / "attribute.emb");

  RecordFile log(out / "pretrain.jsonl", manifest);
  auto table_record = [&](const char* which, const EmbeddingTable& e, const fs::path& p) {
    log.write({{"record", "table"},
               {"table", which},
               {"rows", e.vectors.rows()},
               {"dim", e.vectors.cols()},
               {"epoch_loss", e.epoch_loss},
               {"checksum", file_checksum(p)}});
  };
  table_record("structure", t.structure, out / "structure.emb");
  if (t.attribute) table_record("attribute", *t.attribute, out / "attribute.emb");
  std::cout << "wrote " << (out / "structure.emb").string() << " (" << t.structure.vectors.rows() << "x"
            << t.structure.vectors.cols() << ")";
  if (t.attribute) std::cout << " and " << (out / "attribute.emb").string();
  std::cout << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// train / eval
// ---------------------------------------------------------------------------

struct RunArgs {
  std::string data;
  std::string emb;
  std::string out;
  SettingsFlags settings;
};

struct TrainArgs : RunArgs {
  std::string save_model;
};

int cmd_train(const CLI::App* cmd, TrainArgs& a) {
  ExperimentConfig cfg = resolve(cmd, a.settings);
  drop_zero_weight_branches(cfg.train);
  Loaded l = load(a.data);
  const fs::path emb = emb_dir_or_default(a.emb, l.files);
  const FusionInputs in = load_inputs(l.graph, l.files, emb, cfg.train, cfg.feature_norm);

  json m = manifest_base("train", cfg, l.files);
  record_inputs(m, emb, cfg.train);
  m["artifacts"] = {{"metrics", (fs::path(a.out) / "metrics.jsonl").string()},
                    {"model", a.save_model.empty() ? json(nullptr) : json(a.save_model)}};
  const fs::path manifest = write_manifest(a.out, m);

  std::vector<std::vector<EpochRecord>> history(cfg.seeds.size());
  std::vector<RunOutcome> runs(cfg.seeds.size());
  std::optional<TrainResult> first;
  std::mutex first_mutex;
  detail::run_indexed(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    TrainConfig c = cfg.train;
    c.seed = cfg.seeds[i];
    TrainResult r = ggnn_train(in, l.graph, l.ops, c);
    history[i] = r.history;
    runs[i] = {c.seed, r.best_valid.value_or(0), r.summary.test_acc.value_or(0), r.best_epoch};
    if (i == 0) {
      std::lock_guard lock(first_mutex);
      first.emplace(std::move(r));
    }
  });

  RecordFile metrics(fs::path(a.out) / "metrics.jsonl", manifest);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (const auto& e : history[i])
      metrics.write({{"record", "epoch"},
                     {"seed", runs[i].seed},
                     {"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"valid_acc", e.valid_acc ? json(*e.valid_acc) : json(nullptr)}});
    metrics.write(run_json(runs[i]));
  }
  const Aggregate agg = aggregate_test(runs);
  metrics.write(aggregate_json("test_acc", agg));
  if (!a.save_model.empty()) save_model(cfg, first->model, a.save_model);

  std::cout << to_string(cfg.train.kernel.kind) << " " << to_string(cfg.train.subset) << " alpha=" << cfg.train.alpha
            << " beta=" << cfg.train.beta << ": test accuracy " << pct(agg.mean) << " +/- " << pct(agg.half_range)
            << " (min " << pct(agg.min) << ", max " << pct(agg.max) << ", " << agg.count << " seeds)\n";
  return kOk;
}

struct EvalArgs {
  std::string data;
  std::string emb;
  std::string model;
  std::string split = "test";
};

int cmd_eval(const EvalArgs& a) {
  SavedModel saved = load_model(a.model);
  Loaded l = load(a.data);
  const fs::path emb = emb_dir_or_default(a.emb, l.files);
  const FusionInputs in = load_inputs(l.graph, l.files, emb, saved.config.train, saved.config.feature_norm);
  GgnnModel model(in, l.graph.n, l.graph.num_classes(), saved.config.train);
  model.restore(saved.parameters);
  SplitKind which;
  if (a.split == "train") which = SplitKind::train;
  else if (a.split == "valid") which = SplitKind::valid;
  else if (a.split == "test") which = SplitKind::test;
  else throw ConfigError("--split must be train, valid or test");
  const Real acc = evaluate(model, in, l.graph, l.ops, which);
  std::cout << json{{"split", a.split}, {"nodes", Masks::count(l.graph.masks.get(which))}, {"accuracy", acc}}.dump()
            << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// sweep / ablate / plain
// ---------------------------------------------------------------------------

struct SweepArgs : RunArgs {
  std::string grid = "default";
  std::string alphas;
  std::string betas;
};

int cmd_sweep(const CLI::App* cmd, SweepArgs& a) {
  const ExperimentConfig cfg = resolve(cmd, a.settings);
  std::vector<GridPoint> grid;
  if (!a.alphas.empty() || !a.betas.empty()) {
    if (a.alphas.empty() || a.betas.empty()) throw ConfigError("--alphas and --betas go together");
    for (Real al : parse_real_list(a.alphas))
      for (Real be : parse_real_list(a.betas)) grid.push_back({al, be});
  } else if (a.grid == "default") {
    grid = default_alpha_beta_grid();
  } else {
    throw ConfigError("unknown grid '" + a.grid + "' (use default or --alphas/--betas)");
  }
  Loaded l = load(a.data);
  const fs::path emb = emb_dir_or_default(a.emb, l.files);
  const FusionInputs in = load_inputs(l.graph, l.files, emb, cfg.train, cfg.feature_norm);

  json m = manifest_base("sweep", cfg, l.files);
  record_inputs(m, emb, cfg.train);
  json g = json::array();
  for (const auto& p : grid) g.push_back({p.alpha, p.beta});
  m["grid"] = g;
  m["artifacts"] = {{"report", (fs::path(a.out) / "sweep.tsv").string()},
                    {"metrics", (fs::path(a.out) / "metrics.jsonl").string()}};
  const fs::path manifest = write_manifest(a.out, m);

  const SweepReport rep = sweep_alpha_beta(in, l.graph, l.ops, cfg.train, grid, cfg.seeds, cfg.jobs);
  RecordFile metrics(fs::path(a.out) / "metrics.jsonl", manifest);
  std::ofstream tsv(fs::path(a.out) / "sweep.tsv", std::ios::binary);
  tsv << "alpha\tbeta\tmean_valid\tmean_test\tmin_test\tmax_test\thalf_range\tselected\n";
  for (std::size_t p = 0; p < rep.points.size(); ++p) {
    const auto& sp = rep.points[p];
    const Aggregate agg = aggregate_test(sp.runs);
    for (const auto& r : sp.runs) {
      json j = run_json(r);
      j["alpha"] = sp.point.alpha;
      j["beta"] = sp.point.beta;
      metrics.write(j);
    }
    tsv << format_real(sp.point.alpha) << '\t' << format_real(sp.point.beta) << '\t' << format_real(sp.mean_valid)
        << '\t' << format_real(sp.mean_test) << '\t' << format_real(agg.min) << '\t' << format_real(agg.max) << '\t'
        << format_real(agg.half_range) << '\t' << (p == rep.best ? 1 : 0) << '\n';
  }
  const auto& best = rep.selected();
  metrics.write({{"record", "selection"},
                 {"alpha", best.point.alpha},
                 {"beta", best.point.beta},
                 {"mean_valid", best.mean_valid},
                 {"mean_test", best.mean_test}});
  std::cout << "selected alpha=" << format_real(best.point.alpha) << " beta=" << format_real(best.point.beta)
            << ": valid " << pct(best.mean_valid) << ", test " << pct(best.mean_test) << " over " << grid.size()
            << " grid points\n";
  return kOk;
}

struct AblateArgs : RunArgs {
  std::string subsets = "X,X+Xs,X+Xa,X+Xs+Xa,concat";
};

int cmd_ablate(const CLI::App* cmd, AblateArgs& a) {
  const ExperimentConfig cfg = resolve(cmd, a.settings);
  if (cfg.train.mode == Mode::plain) throw ConfigError("ablation needs an attributed dataset (mode attributed)");
  std::vector<FeatureSubset> subsets;
  std::stringstream ss(a.subsets);
  for (std::string item; std::getline(ss, item, ',');) subsets.push_back(parse_feature_subset(trim(item)));
  if (subsets.empty()) throw ConfigError("--subsets is empty");

  Loaded l = load(a.data);
  const fs::path emb = emb_dir_or_default(a.emb, l.files);
  // Load exactly the tables some subset needs.
  TrainConfig widest = cfg.train;
  bool xs = false, xa = false;
  for (auto s : subsets) {
    TrainConfig t = cfg.train;
    t.subset = s;
    xs = xs || needs_structure_table(t);
    xa = xa || needs_attribute_table(t);
  }
  widest.subset = xs ? (xa ? FeatureSubset::x_xs_xa : FeatureSubset::x_xs) : (xa ? FeatureSubset::x_xa : FeatureSubset::x);
  const FusionInputs in = load_inputs(l.graph, l.files, emb, widest, cfg.feature_norm);

  json m = manifest_base("ablate", cfg, l.files);
  record_inputs(m, emb, widest);
  json names = json::array();
  for (auto s : subsets) names.push_back(std::string(to_string(s)));
  m["subsets"] = names;
  m["artifacts"] = {{"report", (fs::path(a.out) / "ablation.tsv").string()},
                    {"metrics", (fs::path(a.out) / "metrics.jsonl").string()}};
  const fs::path manifest = write_manifest(a.out, m);

  RecordFile metrics(fs::path(a.out) / "metrics.jsonl", manifest);
  std::ofstream tsv(fs::path(a.out) / "ablation.tsv", std::ios::binary);
  tsv << "subset\tmean_test\tmin_test\tmax_test\thalf_range";
  for (auto s : cfg.seeds) tsv << "\tseed_" << s;
  tsv << '\n';
  for (auto s : subsets) {
    const auto runs = ablate(in, l.graph, l.ops, cfg.train, s, cfg.seeds, cfg.jobs);
    const Aggregate agg = aggregate_test(runs);
    for (const auto& r : runs) {
      json j = run_json(r);
      j["subset"] = std::string(to_string(s));
      metrics.write(j);
    }
    json aj = aggregate_json("test_acc", agg);
    aj["subset"] = std::string(to_string(s));
    metrics.write(aj);
    tsv << to_string(s) << '\t' << format_real(agg.mean) << '\t' << format_real(agg.min) << '\t'
        << format_real(agg.max) << '\t' << format_real(agg.half_range);
    for (const auto& r : runs) tsv << '\t' << format_real(r.test_acc);
    tsv << '\n';
    std::cout << to_string(s) << ": " << pct(agg.mean) << " +/- " << pct(agg.half_range) << '\n';
  }
  return kOk;
}

struct PlainArgs : RunArgs {
  std::string ratios = "0.1..0.9";
  std::size_t splits = 10;
};

int cmd_plain(const CLI::App* cmd, PlainArgs& a) {
  Settings forced;
  forced.set("mode", "plain");
  const ExperimentConfig cfg = resolve(cmd, a.settings, forced);
  const std::vector<Real> ratios = parse_real_list(a.ratios);
  if (a.splits == 0) throw ConfigError("--splits must be >= 1");
  Loaded l = load(a.data);
  const fs::path emb = emb_dir_or_default(a.emb, l.files);
  const FusionInputs in = load_inputs(l.graph, l.files, emb, cfg.train, cfg.feature_norm);

  json m = manifest_base("plain", cfg, l.files);
  m["seeds"] = json::array({cfg.seeds.front()});
  record_inputs(m, emb, cfg.train);
  m["ratios"] = ratios;
  m["splits"] = a.splits;
  m["artifacts"] = {{"report", (fs::path(a.out) / "plain.tsv").string()},
                    {"metrics", (fs::path(a.out) / "metrics.jsonl").string()}};
  const fs::path manifest = write_manifest(a.out, m);

  TrainConfig t = cfg.train;
  t.seed = cfg.seeds.front();
  const auto rows = plain_split_experiment(l.graph, l.ops, in, ratios, a.splits, t, cfg.jobs);

  RecordFile metrics(fs::path(a.out) / "metrics.jsonl", manifest);
  std::ofstream tsv(fs::path(a.out) / "plain.tsv", std::ios::binary);
  tsv << "row";
  for (const auto& r : rows) tsv << '\t' << std::llround(100 * r.ratio) << '%';
  tsv << "\nmean";
  for (const auto& r : rows) tsv << '\t' << format_real(r.mean);
  tsv << '\n';
  for (std::size_t s = 0; s < a.splits; ++s) {
    tsv << "split_" << s;
    for (const auto& r : rows) tsv << '\t' << format_real(r.accuracies[s]);
    tsv << '\n';
  }
  for (const auto& r : rows) {
    for (std::size_t s = 0; s < a.splits; ++s)
      metrics.write({{"record", "split"}, {"ratio", r.ratio}, {"split", s}, {"test_acc", r.accuracies[s]}});
    json aj = aggregate_json("test_acc", aggregate(r.accuracies));
    aj["ratio"] = r.ratio;
    metrics.write(aj);
    std::cout << std::llround(100 * r.ratio) << "%: " << pct(r.mean) << '\n';
  }
  return kOk;
}

void add_run_options(CLI::App* cmd, RunArgs& a, bool needs_out = true) {
  cmd->add_option("--data", a.data, "imported dataset directory")->required();
  cmd->add_option("--emb", a.emb, "embedding directory (default <data>/embeddings)");
  auto* out = cmd->add_option("--out", a.out, "output directory for manifest, metrics and reports");
  if (needs_out) out->required();
  add_settings_flags(cmd, a.settings);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ggnn: global-feature graph neural networks for node classification"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  ImportArgs import_args;
  auto* import_cmd = app.add_subcommand("import", "convert a public citation benchmark into a dataset directory");
  import_cmd->add_option("--format", import_args.format, "linqs (Cora, Citeseer) or pubmed");
  import_cmd->add_option("--source", import_args.source, "directory holding the source files")->required();
  import_cmd->add_option("--name", import_args.name, "file stem for linqs (cora, citeseer); dataset name");
  import_cmd->add_option("--out", import_args.out, "dataset directory to write")->required();
  import_cmd->add_option("--split", import_args.split, "split file listing 'paper_id train|valid|test'");
  import_cmd->add_flag("--plain", import_args.plain, "drop node features");
  import_cmd->add_option("--split-seed", import_args.split_seed, "seed of the generated split");
  import_cmd->add_option("--train-per-class", import_args.per_class, "generated split: training nodes per class");
  import_cmd->add_option("--valid", import_args.valid, "generated split: validation nodes");
  import_cmd->add_option("--test", import_args.test, "generated split: test nodes");

  PretrainArgs pretrain_args;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "train the structure and attribute embedding tables");
  pretrain_cmd->add_option("--data", pretrain_args.data, "imported dataset directory")->required();
  pretrain_cmd->add_option("--out", pretrain_args.out, "embedding directory (default <data>/embeddings)");
  auto* attr_flag = pretrain_cmd->add_flag("--attr", pretrain_args.attr, "require the attribute table");
  pretrain_cmd->add_flag("--no-attr", pretrain_args.no_attr, "skip the attribute table")->excludes(attr_flag);
  add_settings_flags(pretrain_cmd, pretrain_args.settings);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train one configuration over every seed");
  add_run_options(train_cmd, train_args);
  train_cmd->add_option("--save-model", train_args.save_model, "write the first seed's model here");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score a saved model on one split");
  eval_cmd->add_option("--data", eval_args.data, "imported dataset directory")->required();
  eval_cmd->add_option("--emb", eval_args.emb, "embedding directory (default <data>/embeddings)");
  eval_cmd->add_option("--model", eval_args.model, "model file from train --save-model")->required();
  eval_cmd->add_option("--split", eval_args.split, "train, valid or test");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid search over the fusion weights alpha and beta");
  add_run_options(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--grid", sweep_args.grid, "named grid (default: 6x6 over 0.001..0.05)");
  sweep_cmd->add_option("--alphas", sweep_args.alphas, "explicit alpha values, e.g. 0.001,0.01");
  sweep_cmd->add_option("--betas", sweep_args.betas, "explicit beta values");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "compare feature subsets and simple concatenation");
  add_run_options(ablate_cmd, ablate_args);
  ablate_cmd->add_option("--subsets", ablate_args.subsets, "comma list of X, X+Xs, X+Xa, X+Xs+Xa, concat");

  PlainArgs plain_args;
  auto* plain_cmd = app.add_subcommand("plain", "plain-graph protocol over random label ratios");
  add_run_options(plain_cmd, plain_args);
  plain_cmd->add_option("--ratios", plain_args.ratios, "label ratios, e.g. 0.1..0.9 or 0.5");
  plain_cmd->add_option("--splits", plain_args.splits, "random splits per ratio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*import_cmd) return cmd_import(import_args);
    if (*pretrain_cmd) return cmd_pretrain(pretrain_cmd, pretrain_args);
    if (*train_cmd) return cmd_train(train_cmd, train_args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*sweep_cmd) return cmd_sweep(sweep_cmd, sweep_args);
    if (*ablate_cmd) return cmd_ablate(ablate_cmd, ablate_args);
    if (*plain_cmd) return cmd_plain(plain_cmd, plain_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const BoundsError& e) {
    std::cerr << "bounds error: " << e.what() << '\n';
    return kFormat;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kConfig;
}
