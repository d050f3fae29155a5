#pragma once

// Experiment settings and artifacts shared by the command-line tool and the
// acceptance harness.
//
// Settings are flat `key = value` pairs layered as
//   preset < config file < GGNN_<KEY> environment variables < flags.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ggnn/dataset.hpp"
#include "ggnn/dense_matrix.hpp"
#include "ggnn/error.hpp"
#include "ggnn/graph.hpp"
#include "ggnn/model.hpp"
#include "ggnn/pretrain.hpp"

namespace ggnn {

/// Shortest decimal that parses back to the same double.
inline std::string format_real(Real v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("format_real: conversion failed");
  return std::string(buf, end);
}

/// Every recognised settings key, in the order used for snapshots.
inline const std::vector<std::string>& settings_keys() {
  static const std::vector<std::string> keys{
      "kernel",      "mode",        "subset",         "hidden_dim",     "dropout", "appnp_steps",
      "appnp_teleport", "alpha",    "beta",           "epochs",         "lr",      "weight_decay",
      "seeds",       "feature_norm", "seed",          "walks_per_node", "walk_length", "window",
      "dim",         "negatives",   "sgns_lr",        "sgns_epochs",    "threads", "jobs"};
  return keys;
}

inline bool is_settings_key(const std::string& k) {
  const auto& keys = settings_keys();
  return std::find(keys.begin(), keys.end(), k) != keys.end();
}

class Settings {
 public:
  void set(const std::string& key, const std::string& value) {
    if (!is_settings_key(key)) throw ConfigError("unknown setting '" + key + "'");
    values_[key] = value;
  }
  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }
  /// Later layers win.
  void merge(const Settings& over) {
    for (const auto& [k, v] : over.values_) values_[k] = v;
  }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

inline std::string trim(std::string s) {
  auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && sp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && sp(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

/// `key = value` per line; `#` starts a comment.
inline Settings read_settings_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  Settings s;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key or value");
    s.set(key, value);
  }
  return s;
}

/// GGNN_<KEY> for every known key, e.g. GGNN_HIDDEN_DIM=32.
inline Settings settings_from_env() {
  Settings s;
  for (const auto& k : settings_keys()) {
    std::string var = "GGNN_";
    for (char c : k) var += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(var.c_str()); v && *v) s.set(k, v);
  }
  return s;
}

struct ExperimentConfig {
  TrainConfig train;
  WalkConfig walk;
  SgnsConfig sgns;
  std::vector<std::uint64_t> seeds;  // training seeds
  RawFeatureNorm feature_norm = RawFeatureNorm::row_sum;
  unsigned jobs = 1;
};

namespace detail {

template <typename T>
T setting_number(const std::string& key, const std::string& v) {
  T out{};
  const char* b = v.data();
  const char* e = b + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e) throw ConfigError("setting '" + key + "' expects a number, got '" + v + "'");
  return out;
}

/// "0..9", "1,4,7" or a mix ("0..2,10").
inline std::vector<std::uint64_t> parse_seed_list(const std::string& v) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    std::size_t comma = v.find(',', start);
    if (comma == std::string::npos) comma = v.size();
    const std::string item = trim(v.substr(start, comma - start));
    start = comma + 1;
    if (item.empty()) throw ConfigError("seeds: empty entry in '" + v + "'");
    if (auto dots = item.find(".."); dots != std::string::npos) {
      const auto lo = setting_number<std::uint64_t>("seeds", item.substr(0, dots));
      const auto hi = setting_number<std::uint64_t>("seeds", item.substr(dots + 2));
      if (hi < lo) throw ConfigError("seeds: descending range '" + item + "'");
      for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(setting_number<std::uint64_t>("seeds", item));
    }
  }
  return out;
}

inline std::string format_seed_list(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

}  // namespace detail

/// Builds the full configuration. The kernel and mode pick the preset; every
/// other key overrides one field of it.
inline ExperimentConfig resolve_settings(const Settings& s) {
  ExperimentConfig c;
  const Mode mode = parse_mode(s.get("mode").value_or("attributed"));
  if (mode == Mode::plain) {
    c.train = TrainConfig::plain_preset();
    if (auto k = s.get("kernel")) c.train.kernel.kind = parse_kernel_kind(*k);
    c.sgns.dim = 32;
  } else {
    c.train = TrainConfig::preset(parse_kernel_kind(s.get("kernel").value_or("gcn")));
  }
  c.seeds = detail::parse_seed_list("0..9");

  using detail::setting_number;
  for (const auto& [k, v] : s.values()) {
    if (k == "kernel" || k == "mode") continue;
    if (k == "subset") c.train.subset = parse_feature_subset(v);
    else if (k == "hidden_dim") c.train.kernel.hidden_dim = setting_number<std::size_t>(k, v);
    else if (k == "dropout") c.train.kernel.dropout_p = setting_number<Real>(k, v);
    else if (k == "appnp_steps") c.train.kernel.appnp_steps = setting_number<std::size_t>(k, v);
    else if (k == "appnp_teleport") c.train.kernel.appnp_teleport = setting_number<Real>(k, v);
    else if (k == "alpha") c.train.alpha = setting_number<Real>(k, v);
    else if (k == "beta") c.train.beta = setting_number<Real>(k, v);
    else if (k == "epochs") c.train.epochs = setting_number<std::size_t>(k, v);
    else if (k == "lr") c.train.adam.learning_rate = setting_number<Real>(k, v);
    else if (k == "weight_decay") c.train.adam.weight_decay = setting_number<Real>(k, v);
    else if (k == "seeds") c.seeds = detail::parse_seed_list(v);
    else if (k == "feature_norm") {
      if (v == "row_sum") c.feature_norm = RawFeatureNorm::row_sum;
      else if (v == "none") c.feature_norm = RawFeatureNorm::none;
      else throw ConfigError("feature_norm must be row_sum or none");
    } else if (k == "seed") {
      c.walk.seed = c.sgns.seed = setting_number<std::uint64_t>(k, v);
    } else if (k == "walks_per_node") c.walk.walks_per_node = setting_number<std::size_t>(k, v);
    else if (k == "walk_length") c.walk.walk_length = setting_number<std::size_t>(k, v);
    else if (k == "window") c.walk.window = setting_number<std::size_t>(k, v);
    else if (k == "dim") c.sgns.dim = setting_number<std::size_t>(k, v);
    else if (k == "negatives") c.sgns.negatives = setting_number<std::size_t>(k, v);
    else if (k == "sgns_lr") c.sgns.learning_rate = setting_number<Real>(k, v);
    else if (k == "sgns_epochs") c.sgns.epochs = setting_number<std::size_t>(k, v);
    else if (k == "threads") c.walk.threads = c.sgns.threads = setting_number<unsigned>(k, v);
    else if (k == "jobs") c.jobs = setting_number<unsigned>(k, v);
  }
  c.train.mode = mode;
  if (c.seeds.empty()) throw ConfigError("seeds: empty list");
  if (c.jobs == 0) throw ConfigError("jobs must be >= 1");
  if (c.walk.threads == 0) throw ConfigError("threads must be >= 1");
  c.train.validate();
  return c;
}

/// Inverse of resolve_settings: every key with its effective value.
inline std::vector<std::pair<std::string, std::string>> settings_snapshot(const ExperimentConfig& c) {
  const auto& t = c.train;
  return {
      {"kernel", std::string(to_string(t.kernel.kind))},
      {"mode", std::string(to_string(t.mode))},
      {"subset", std::string(to_string(t.subset))},
      {"hidden_dim", std::to_string(t.kernel.hidden_dim)},
      {"dropout", format_real(t.kernel.dropout_p)},
      {"appnp_steps", std::to_string(t.kernel.appnp_steps)},
      {"appnp_teleport", format_real(t.kernel.appnp_teleport)},
      {"alpha", format_real(t.alpha)},
      {"beta", format_real(t.beta)},
      {"epochs", std::to_string(t.epochs)},
      {"lr", format_real(t.adam.learning_rate)},
      {"weight_decay", format_real(t.adam.weight_decay)},
      {"seeds", detail::format_seed_list(c.seeds)},
      {"feature_norm", c.feature_norm == RawFeatureNorm::row_sum ? "row_sum" : "none"},
      {"seed", std::to_string(c.sgns.seed)},
      {"walks_per_node", std::to_string(c.walk.walks_per_node)},
      {"walk_length", std::to_string(c.walk.walk_length)},
      {"window", std::to_string(c.walk.window)},
      {"dim", std::to_string(c.sgns.dim)},
      {"negatives", std::to_string(c.sgns.negatives)},
      {"sgns_lr", format_real(c.sgns.learning_rate)},
      {"sgns_epochs", std::to_string(c.sgns.epochs)},
      {"threads", std::to_string(c.sgns.threads)},
      {"jobs", std::to_string(c.jobs)},
  };
}

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

struct Aggregate {
  std::size_t count = 0;
  Real mean = 0;
  Real min = 0;
  Real max = 0;
  Real half_range = 0;  // (max - min) / 2, the "± range" of a results table
};

inline Aggregate aggregate(std::span<const Real> xs) {
  Aggregate a;
  a.count = xs.size();
  if (xs.empty()) return a;
  auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  a.min = *lo;
  a.max = *hi;
  Real s = 0;
  for (Real x : xs) s += x;
  a.mean = s / static_cast<Real>(xs.size());
  a.half_range = (a.max - a.min) / 2;
  return a;
}

inline Aggregate aggregate_test(const std::vector<RunOutcome>& runs) {
  std::vector<Real> xs;
  for (const auto& r : runs) xs.push_back(r.test_acc);
  return aggregate(xs);
}

// ---------------------------------------------------------------------------
// Pretraining and model inputs
// ---------------------------------------------------------------------------

struct PretrainedTables {
  EmbeddingTable structure;
  std::optional<EmbeddingTable> attribute;
};

/// One walk corpus feeds both tables. The attribute table gets its own SGNS
/// and sampling streams so that it does not replay the structure negatives.
inline PretrainedTables pretrain_tables(const Graph& g, const WalkConfig& walk, const SgnsConfig& sgns,
                                        bool with_attributes) {
  if (with_attributes && !g.attributes) throw ConfigError("attribute embeddings requested on a plain dataset");
  const WalkCorpus corpus = generate_walks(g, walk);
  PretrainedTables out;
  out.structure = train_structure_embeddings(WalkPairs(corpus, walk.window), g.n, sgns);
  if (with_attributes) {
    SgnsConfig a = sgns;
    a.seed = derive_seed(sgns.seed, {51});
    ContextAttributePairs pairs(corpus, g, walk.window, derive_seed(sgns.seed, {52}));
    out.attribute = train_attribute_embeddings(pairs, g.n, pairs.num_attributes(), a);
  }
  return out;
}

/// Branches with zero fusion weight contribute nothing to H; dropping them
/// lets the baselines run without pretrained tables.
inline void drop_zero_weight_branches(TrainConfig& t) {
  if (t.mode != Mode::attributed) return;
  const bool xs = t.alpha != 0, xa = t.beta != 0;
  if (t.subset == FeatureSubset::x_xs_xa) t.subset = xs ? (xa ? FeatureSubset::x_xs_xa : FeatureSubset::x_xs)
                                                        : (xa ? FeatureSubset::x_xa : FeatureSubset::x);
  else if (t.subset == FeatureSubset::x_xs && !xs) t.subset = FeatureSubset::x;
  else if (t.subset == FeatureSubset::x_xa && !xa) t.subset = FeatureSubset::x;
}

inline bool needs_structure_table(const TrainConfig& t) {
  return t.mode == Mode::plain || t.subset == FeatureSubset::x_xs || t.subset == FeatureSubset::x_xs_xa ||
         t.subset == FeatureSubset::concat;
}

inline bool needs_attribute_table(const TrainConfig& t) {
  return t.mode == Mode::attributed && (t.subset == FeatureSubset::x_xa || t.subset == FeatureSubset::x_xs_xa ||
                                        t.subset == FeatureSubset::concat);
}

/// Loads only the tables `t` needs. A missing file is a ConfigError whose
/// message names the command that creates it.
inline FusionInputs load_inputs(const Graph& g, const DatasetFiles& files, const std::filesystem::path& emb_dir,
                                const TrainConfig& t, RawFeatureNorm norm) {
  auto table = [&](const char* file) {
    const auto path = emb_dir / file;
    if (!std::filesystem::exists(path))
      throw ConfigError("missing " + path.string() + "; create it with `ggnn pretrain --data " + files.dir.string() +
                        (t.mode == Mode::plain ? " --dim 32 --no-attr" : "") + " --out " + emb_dir.string() + "`");
    DenseMatrix m = import_embeddings(path);
    if (m.rows() != g.n)
      throw ValidationError(path.string() + " has " + std::to_string(m.rows()) + " rows but the graph has " +
                            std::to_string(g.n) + " nodes");
    return m;
  };
  std::optional<DenseMatrix> xs, xa;
  if (needs_structure_table(t)) xs = table("structure.emb");
  if (needs_attribute_table(t)) xa = table("attribute.emb");
  std::optional<SparseMatrix> raw;
  if (t.mode == Mode::attributed) {
    if (!g.attributes) throw ConfigError("dataset " + files.dir.string() + " has no attributes; use --mode plain");
    raw = *g.attributes;
  }
  return prepare_inputs(std::move(raw), std::move(xs), std::move(xa), norm);
}

// ---------------------------------------------------------------------------
// Saved models: settings lines, then every parameter matrix.
//
//   ggnn-model 1
//   <key> <value>          (one per settings key)
//   params <count>
//   <rows> <cols>
//   <row values ...>       (rows lines)
// ---------------------------------------------------------------------------

struct SavedModel {
  ExperimentConfig config;
  std::vector<DenseMatrix> parameters;
};

inline void save_model(const ExperimentConfig& cfg, GgnnModel& model, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "ggnn-model 1\n";
  for (const auto& [k, v] : settings_snapshot(cfg)) out << k << ' ' << v << '\n';
  const auto params = model.snapshot();
  out << "params " << params.size() << '\n';
  for (const auto& p : params) {
    out << p.rows() << ' ' << p.cols() << '\n';
    for (std::size_t r = 0; r < p.rows(); ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) out << (c ? " " : "") << format_real(p(r, c));
      out << '\n';
    }
  }
}

inline SavedModel load_model(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || trim(line) != "ggnn-model 1") throw FormatError("not a ggnn model file", 1);
  Settings s;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = detail::split_fields(line);
    if (f.size() != 2) throw FormatError("model header line must be 'key value'", line_no);
    if (f[0] == "params") {
      count = detail::parse_number<std::size_t>(f[1], line_no, "parameter count");
      break;
    }
    s.set(std::string(f[0]), std::string(f[1]));
  }
  SavedModel m{resolve_settings(s), {}};
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw FormatError("model file truncated", line_no + 1);
    ++line_no;
    auto shape = detail::split_fields(line);
    if (shape.size() != 2) throw FormatError("parameter shape must be 'rows cols'", line_no);
    const auto rows = detail::parse_number<std::size_t>(shape[0], line_no, "rows");
    const auto cols = detail::parse_number<std::size_t>(shape[1], line_no, "cols");
    DenseMatrix p(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw FormatError("model file truncated", line_no + 1);
      ++line_no;
      auto v = detail::split_fields(line);
      if (v.size() != cols) throw FormatError("parameter row has the wrong width", line_no);
      for (std::size_t c = 0; c < cols; ++c) p(r, c) = detail::parse_number<Real>(v[c], line_no, "parameter");
    }
    m.parameters.push_back(std::move(p));
  }
  return m;
}

}  // namespace ggnn
