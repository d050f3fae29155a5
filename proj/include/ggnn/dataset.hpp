#pragma once

// Dataset directories and importers for the public citation benchmarks.
//
// A dataset directory holds the graph-core files
//   edges.tsv  features.tsv (absent for plain graphs)  labels.tsv  split.tsv
// plus id_map.tsv (node index -> original paper id) and classes.tsv.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ggnn/graph.hpp"
#include "ggnn/rng.hpp"

namespace ggnn {

struct ImportedDataset {
  Graph graph;
  std::vector<std::string> node_ids;     // original id of each node index
  std::vector<std::string> class_names;  // class index -> source label
  std::size_t citation_lines = 0;        // citation records read
  std::size_t dropped_citations = 0;     // records naming unknown papers
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

/// Turns (source label per node, citation pairs) into a Graph; citations to
/// unknown ids are counted and dropped, reciprocal and repeated citations
/// collapse into one undirected edge.
inline void finish_import(ImportedDataset& d, const std::vector<std::string>& raw_labels,
                          const std::vector<std::pair<std::string, std::string>>& cites,
                          std::optional<SparseMatrix> attributes) {
  const std::size_t n = d.node_ids.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i)
    if (!index.emplace(d.node_ids[i], i).second) throw FormatError("duplicate paper id " + d.node_ids[i]);

  d.class_names = raw_labels;
  std::sort(d.class_names.begin(), d.class_names.end());
  d.class_names.erase(std::unique(d.class_names.begin(), d.class_names.end()), d.class_names.end());

  Graph& g = d.graph;
  g.n = n;
  g.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    g.labels[i] = static_cast<int>(std::lower_bound(d.class_names.begin(), d.class_names.end(), raw_labels[i]) -
                                   d.class_names.begin());

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  d.citation_lines = cites.size();
  for (const auto& [a, b] : cites) {
    auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end() || ib == index.end()) {
      ++d.dropped_citations;
      continue;
    }
    pairs.emplace_back(std::min(ia->second, ib->second), std::max(ia->second, ib->second));
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<EdgeRecord> edges;
  edges.reserve(pairs.size());
  for (auto [a, b] : pairs) edges.push_back({a, b, 1.0});
  g.adjacency = build_symmetric_adjacency(n, edges);
  g.attributes = std::move(attributes);
  g.masks = Masks(n);
}

}  // namespace detail

/// LINQS layout (Cora, Citeseer): `<name>.content` rows are
/// `paper_id f_1 ... f_F label`, `<name>.cites` rows are `cited citing`.
inline ImportedDataset import_linqs(const std::filesystem::path& content, const std::filesystem::path& cites,
                                    bool with_features = true) {
  ImportedDataset d;
  std::vector<std::string> labels;
  std::vector<Triplet> t;
  std::size_t width = 0;
  {
    auto in = detail::open_input(content);
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
      auto f = detail::split_ws(line);
      if (f.empty()) continue;
      if (f.size() < 2) throw FormatError("content row needs an id and a label", line_no);
      const std::size_t w = f.size() - 2;
      if (d.node_ids.empty()) width = w;
      else if (w != width) throw FormatError("content rows disagree on attribute count", line_no);
      const std::size_t row = d.node_ids.size();
      d.node_ids.push_back(f.front());
      labels.push_back(f.back());
      if (with_features)
        for (std::size_t j = 0; j < w; ++j) {
          const Real v = detail::parse_number<Real>(f[j + 1], line_no, "attribute");
          if (v != 0) t.push_back({row, j, v});
        }
    }
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  {
    auto in = detail::open_input(cites);
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
      auto f = detail::split_ws(line);
      if (f.empty()) continue;
      if (f.size() != 2) throw FormatError("cites row must be 'cited citing'", line_no);
      pairs.emplace_back(f[0], f[1]);
    }
  }
  std::optional<SparseMatrix> attrs;
  if (with_features) attrs = SparseMatrix::from_triplets(d.node_ids.size(), width, t);
  detail::finish_import(d, labels, pairs, std::move(attrs));
  return d;
}

/// Pubmed-Diabetes tab layout: the node file declares `numeric:<word>:0.0`
/// columns on its second line and then lists `id label=k word=value ...`;
/// the citation file lists `id paper:<a> | paper:<b>`.
inline ImportedDataset import_pubmed(const std::filesystem::path& nodes, const std::filesystem::path& cites,
                                     bool with_features = true) {
  ImportedDataset d;
  std::vector<std::string> labels;
  std::vector<Triplet> t;
  std::unordered_map<std::string, std::size_t> vocab;
  {
    auto in = detail::open_input(nodes);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw FormatError("pubmed node file is empty", 1);
    ++line_no;
    if (!std::getline(in, line)) throw FormatError("pubmed node file lacks the column declaration", 2);
    ++line_no;
    for (const auto& col : detail::split_on(line, '\t')) {
      auto parts = detail::split_on(col, ':');
      if (parts.size() >= 2 && parts[0] == "numeric") vocab.emplace(parts[1], vocab.size());
    }
    if (vocab.empty()) throw FormatError("pubmed node file declares no numeric columns", 2);
    while (std::getline(in, line)) {
      ++line_no;
      auto f = detail::split_on(line, '\t');
      if (f.size() < 2 || f[0].empty()) continue;
      const std::size_t row = d.node_ids.size();
      d.node_ids.push_back(f[0]);
      std::optional<std::string> label;
      for (std::size_t k = 1; k < f.size(); ++k) {
        const auto eq = f[k].find('=');
        if (eq == std::string::npos) continue;
        const std::string key = f[k].substr(0, eq), value = f[k].substr(eq + 1);
        if (key == "label") {
          label = value;
        } else if (key != "summary" && with_features) {
          auto it = vocab.find(key);
          if (it == vocab.end()) throw FormatError("undeclared pubmed column " + key, line_no);
          const Real v = detail::parse_number<Real>(value, line_no, "attribute");
          if (v != 0) t.push_back({row, it->second, v});
        }
      }
      if (!label) throw FormatError("pubmed node row has no label", line_no);
      labels.push_back(*label);
    }
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  {
    auto in = detail::open_input(cites);
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
      auto f = detail::split_ws(line);
      if (f.size() != 4 || f[2] != "|") continue;  // header lines
      auto strip = [&](const std::string& s) {
        const auto c = s.find(':');
        if (c == std::string::npos) throw FormatError("citation endpoint must be 'paper:<id>'", line_no);
        return s.substr(c + 1);
      };
      pairs.emplace_back(strip(f[1]), strip(f[3]));
    }
  }
  std::optional<SparseMatrix> attrs;
  if (with_features) attrs = SparseMatrix::from_triplets(d.node_ids.size(), vocab.size(), t);
  detail::finish_import(d, labels, pairs, std::move(attrs));
  return d;
}

/// Planetoid-shaped split: `per_class` training nodes from every class, then
/// `valid` and `test` nodes from the remainder, all in a seeded random order.
inline Masks planetoid_split(const Graph& g, std::size_t per_class, std::size_t valid, std::size_t test,
                             std::uint64_t seed) {
  std::vector<std::size_t> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {40});
  std::shuffle(order.begin(), order.end(), rng);
  Masks m(g.n);
  std::vector<std::size_t> taken(g.num_classes(), 0);
  std::vector<std::size_t> rest;
  for (std::size_t i : order) {
    const int l = g.labels[i];
    if (l >= 0 && taken[static_cast<std::size_t>(l)] < per_class) {
      m.train[i] = true;
      ++taken[static_cast<std::size_t>(l)];
    } else {
      rest.push_back(i);
    }
  }
  for (std::size_t c = 0; c < taken.size(); ++c)
    if (taken[c] < per_class) throw ConfigError("class " + std::to_string(c) + " has fewer than per_class nodes");
  if (rest.size() < valid + test) throw ConfigError("graph too small for the requested valid/test sizes");
  for (std::size_t k = 0; k < valid; ++k) m.valid[rest[k]] = true;
  for (std::size_t k = valid; k < valid + test; ++k) m.test[rest[k]] = true;
  return m;
}

/// Applies a split listed by original paper id (`id<TAB>train|valid|test`).
inline Masks split_from_ids(const ImportedDataset& d, const std::filesystem::path& path) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < d.node_ids.size(); ++i) index.emplace(d.node_ids[i], i);
  Masks m(d.graph.n);
  auto in = detail::open_input(path);
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (detail::skip_line(line)) continue;
    auto f = detail::split_ws(line);
    if (f.size() != 2) throw FormatError("split row must be 'id split'", line_no);
    auto it = index.find(f[0]);
    if (it == index.end()) throw FormatError("split names unknown paper " + f[0], line_no);
    SplitKind kind;
    if (f[1] == "train") kind = SplitKind::train;
    else if (f[1] == "valid") kind = SplitKind::valid;
    else if (f[1] == "test") kind = SplitKind::test;
    else throw FormatError("unknown split name " + f[1], line_no);
    if (m.train[it->second] || m.valid[it->second] || m.test[it->second])
      throw ValidationError("paper " + f[0] + " listed twice in split file");
    m.get(kind)[it->second] = true;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dataset directories
// ---------------------------------------------------------------------------

struct DatasetFiles {
  std::filesystem::path dir;

  std::filesystem::path edges() const { return dir / "edges.tsv"; }
  std::filesystem::path features() const { return dir / "features.tsv"; }
  std::filesystem::path labels() const { return dir / "labels.tsv"; }
  std::filesystem::path split() const { return dir / "split.tsv"; }
  std::filesystem::path id_map() const { return dir / "id_map.tsv"; }
  std::filesystem::path classes() const { return dir / "classes.tsv"; }
  std::filesystem::path embeddings() const { return dir / "embeddings"; }
  std::filesystem::path structure_embedding() const { return embeddings() / "structure.emb"; }
  std::filesystem::path attribute_embedding() const { return embeddings() / "attribute.emb"; }
  bool plain() const { return !std::filesystem::exists(features()); }
};

inline void save_dataset(const ImportedDataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetFiles f{dir};
  save_edges(d.graph, f.edges());
  if (d.graph.attributes) save_features(*d.graph.attributes, f.features());
  else std::filesystem::remove(f.features());
  save_labels(d.graph, f.labels());
  save_split(d.graph, f.split());
  auto ids = detail::open_output(f.id_map());
  for (std::size_t i = 0; i < d.node_ids.size(); ++i) ids << i << '\t' << d.node_ids[i] << '\n';
  auto cls = detail::open_output(f.classes());
  for (std::size_t c = 0; c < d.class_names.size(); ++c) cls << c << '\t' << d.class_names[c] << '\n';
}

inline Graph load_dataset(const std::filesystem::path& dir) {
  DatasetFiles f{dir};
  if (!std::filesystem::exists(f.edges()))
    throw ConfigError("no dataset at " + dir.string() + " (expected edges.tsv; run `ggnn import` first)");
  std::optional<std::filesystem::path> features;
  if (!f.plain()) features = f.features();
  return load_graph(f.edges(), features, f.labels(), f.split());
}

namespace detail {

constexpr std::uint64_t fnv_offset = 1469598103934665603ULL;
constexpr std::uint64_t fnv_prime = 1099511628211ULL;

inline std::uint64_t fnv1a_file(const std::filesystem::path& p, std::uint64_t h) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= fnv_prime;
    }
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace detail

/// FNV-1a of one file, as 16 hex digits.
inline std::string file_checksum(const std::filesystem::path& p) {
  return detail::hex64(detail::fnv1a_file(p, detail::fnv_offset));
}

/// FNV-1a over the graph-core files in a fixed order. Detects silent drift
/// between runs; not a cryptographic digest.
inline std::string dataset_checksum(const std::filesystem::path& dir) {
  DatasetFiles f{dir};
  std::uint64_t h = detail::fnv_offset;
  for (const auto& p : {f.edges(), f.features(), f.labels(), f.split()}) {
    if (!std::filesystem::exists(p)) continue;
    h = detail::fnv1a_file(p, h);
    h ^= 0xff;  // file separator
    h *= detail::fnv_prime;
  }
  return detail::hex64(h);
}

// ---------------------------------------------------------------------------
// Published statistics
// ---------------------------------------------------------------------------

struct DatasetStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;  // citation records
  std::size_t attributes = 0;
  std::size_t classes = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

inline std::optional<DatasetStats> published_stats(const std::string& name) {
  static const std::map<std::string, DatasetStats> table{
      {"cora", {2708, 5429, 1433, 7, 140, 500, 1000}},
      {"citeseer", {3327, 4732, 3703, 6, 120, 500, 1000}},
      {"pubmed", {19717, 44338, 500, 3, 60, 500, 1000}},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

inline DatasetStats stats_of(const ImportedDataset& d) {
  const Graph& g = d.graph;
  return {g.n,
          d.citation_lines,
          g.attributes ? g.attributes->cols() : 0,
          g.num_classes(),
          Masks::count(g.masks.train),
          Masks::count(g.masks.valid),
          Masks::count(g.masks.test)};
}

/// Human-readable differences; empty when everything matches.
inline std::vector<std::string> compare_stats(const DatasetStats& got, const DatasetStats& want, bool plain) {
  std::vector<std::string> out;
  auto check = [&](const char* what, std::size_t g, std::size_t w) {
    if (g != w) out.push_back(std::string(what) + ": got " + std::to_string(g) + ", published " + std::to_string(w));
  };
  check("nodes", got.nodes, want.nodes);
  check("citations", got.edges, want.edges);
  if (!plain) check("attributes", got.attributes, want.attributes);
  check("classes", got.classes, want.classes);
  check("train nodes", got.train, want.train);
  check("valid nodes", got.valid, want.valid);
  check("test nodes", got.test, want.test);
  return out;
}

}  // namespace ggnn
