#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ggnn/dense_matrix.hpp"
#include "ggnn/error.hpp"
#include "ggnn/sparse_matrix.hpp"

namespace ggnn {

enum class SplitKind { train, valid, test };

inline std::string_view to_string(SplitKind s) {
  switch (s) {
    case SplitKind::train: return "train";
    case SplitKind::valid: return "valid";
    case SplitKind::test: return "test";
  }
  return "?";
}

/// Node-level boolean masks. At most one of the three is set per node.
struct Masks {
  std::vector<bool> train;
  std::vector<bool> valid;
  std::vector<bool> test;

  explicit Masks(std::size_t n = 0) : train(n, false), valid(n, false), test(n, false) {}

  const std::vector<bool>& get(SplitKind s) const {
    switch (s) {
      case SplitKind::train: return train;
      case SplitKind::valid: return valid;
      default: return test;
    }
  }
  std::vector<bool>& get(SplitKind s) { return const_cast<std::vector<bool>&>(std::as_const(*this).get(s)); }

  static std::size_t count(const std::vector<bool>& m) {
    return static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
  }
};

/// Attributed or plain graph with labels and a train/valid/test split.
struct Graph {
  std::size_t n = 0;
  SparseMatrix adjacency;
  std::optional<SparseMatrix> attributes;
  std::vector<int> labels;  // -1 = unknown
  Masks masks;

  bool has_attributes() const noexcept { return attributes.has_value(); }

  std::size_t num_classes() const {
    int c = -1;
    for (int l : labels) c = std::max(c, l);
    return static_cast<std::size_t>(c + 1);
  }

  /// Throws ValidationError/ShapeError when any structural invariant is broken.
  void validate() const {
    if (adjacency.rows() != n || adjacency.cols() != n) throw ShapeError("graph: adjacency must be n x n");
    for (Real v : adjacency.values())
      if (v < 0 || !std::isfinite(v)) throw ValidationError("graph: adjacency weights must be finite and nonnegative");
    if (attributes && attributes->rows() != n) throw ShapeError("graph: attribute row count must equal n");
    if (labels.size() != n) throw ShapeError("graph: label vector must have length n");
    if (masks.train.size() != n || masks.valid.size() != n || masks.test.size() != n)
      throw ShapeError("graph: masks must have length n");
    for (std::size_t i = 0; i < n; ++i) {
      const int k = int(masks.train[i]) + int(masks.valid[i]) + int(masks.test[i]);
      if (k > 1) throw ValidationError("graph: node " + std::to_string(i) + " appears in more than one split");
      if (masks.train[i] && labels[i] < 0)
        throw ValidationError("graph: train node " + std::to_string(i) + " has no label");
      if (labels[i] < -1) throw ValidationError("graph: label of node " + std::to_string(i) + " is below -1");
    }
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == '\t' || line[i] == ' ' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != '\t' && line[j] != ' ' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw FormatError(std::string("cannot parse ") + what + " '" + std::string(s) + "'", line_no);
  return v;
}

inline std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError("cannot open " + p.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw FormatError("cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

inline bool skip_line(std::string_view line) {
  for (char ch : line) {
    if (ch == '#') return true;
    if (ch != ' ' && ch != '\t' && ch != '\r') return false;
  }
  return true;
}

}  // namespace detail

struct EdgeRecord {
  std::size_t src;
  std::size_t dst;
  Real weight;
};

struct EdgeFile {
  std::vector<EdgeRecord> edges;
  std::optional<std::size_t> declared_nodes;  // from a "# nodes N" directive
};

/// Reads `src<TAB>dst[<TAB>weight]` lines. `#` lines are comments; the
/// directive `# nodes N` declares the node count so trailing isolated nodes
/// survive a round trip.
inline EdgeFile read_edge_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  EdgeFile ef;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (detail::skip_line(line)) {
      auto f = detail::split_fields(line);
      if (f.size() == 3 && f[0] == "#" && f[1] == "nodes")
        ef.declared_nodes = detail::parse_number<std::size_t>(f[2], line_no, "node count");
      continue;
    }
    auto f = detail::split_fields(line);
    if (f.size() < 2 || f.size() > 3) throw FormatError("edge line needs 2 or 3 fields", line_no);
    EdgeRecord e{detail::parse_number<std::size_t>(f[0], line_no, "node id"),
                 detail::parse_number<std::size_t>(f[1], line_no, "node id"), 1.0};
    if (f.size() == 3) e.weight = detail::parse_number<Real>(f[2], line_no, "edge weight");
    if (e.weight < 0 || !std::isfinite(e.weight)) throw FormatError("edge weight must be finite and nonnegative", line_no);
    ef.edges.push_back(e);
  }
  return ef;
}

/// Sparse feature triplets with an `n f` header line.
inline SparseMatrix read_feature_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::pair<std::size_t, std::size_t>> shape;
  std::vector<Triplet> t;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    auto f = detail::split_fields(line);
    if (!shape) {
      if (f.size() != 2) throw FormatError("feature header must be 'n f'", line_no);
      shape = {detail::parse_number<std::size_t>(f[0], line_no, "row count"),
               detail::parse_number<std::size_t>(f[1], line_no, "feature count")};
      continue;
    }
    if (f.size() != 3) throw FormatError("feature line needs node, feature, value", line_no);
    Triplet e{detail::parse_number<std::size_t>(f[0], line_no, "node id"),
              detail::parse_number<std::size_t>(f[1], line_no, "feature id"),
              detail::parse_number<Real>(f[2], line_no, "feature value")};
    if (e.row >= shape->first || e.col >= shape->second)
      throw BoundsError("feature triplet out of range at line " + std::to_string(line_no));
    t.push_back(e);
  }
  if (!shape) throw FormatError("feature file is empty: " + path.string());
  return SparseMatrix::from_triplets(shape->first, shape->second, std::move(t));
}

/// `node<TAB>label` pairs; `n` is only used for bounds checks when known.
inline std::vector<std::pair<std::size_t, int>> read_label_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<std::pair<std::size_t, int>> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (detail::skip_line(line)) continue;
    auto f = detail::split_fields(line);
    if (f.size() != 2) throw FormatError("label line needs node and label", line_no);
    const int label = detail::parse_number<int>(f[1], line_no, "label");
    if (label < -1) throw FormatError("label must be >= -1", line_no);
    out.emplace_back(detail::parse_number<std::size_t>(f[0], line_no, "node id"), label);
  }
  return out;
}

inline std::vector<std::pair<std::size_t, SplitKind>> read_split_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<std::pair<std::size_t, SplitKind>> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (detail::skip_line(line)) continue;
    auto f = detail::split_fields(line);
    if (f.size() != 2) throw FormatError("split line needs node and split name", line_no);
    SplitKind s;
    if (f[1] == "train") s = SplitKind::train;
    else if (f[1] == "valid") s = SplitKind::valid;
    else if (f[1] == "test") s = SplitKind::test;
    else throw FormatError("unknown split '" + std::string(f[1]) + "'", line_no);
    out.emplace_back(detail::parse_number<std::size_t>(f[0], line_no, "node id"), s);
  }
  return out;
}

/// Symmetric adjacency from an edge list: every record contributes its weight
/// to both (src,dst) and (dst,src); repeated undirected edges are summed. A
/// self-loop contributes once.
inline SparseMatrix build_symmetric_adjacency(std::size_t n, const std::vector<EdgeRecord>& edges) {
  std::vector<Triplet> t;
  t.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n)
      throw BoundsError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ") outside node range " +
                        std::to_string(n));
    t.push_back({e.src, e.dst, e.weight});
    if (e.src != e.dst) t.push_back({e.dst, e.src, e.weight});
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

/// Loads and validates a graph from the four text files. The node count is
/// taken from the feature header, else the edge-file directive, else the
/// largest id seen in any file plus one.
inline Graph load_graph(const std::filesystem::path& edge_path, const std::optional<std::filesystem::path>& feature_path,
                        const std::filesystem::path& label_path, const std::filesystem::path& split_path) {
  EdgeFile ef = read_edge_file(edge_path);
  std::optional<SparseMatrix> features;
  if (feature_path) features = read_feature_file(*feature_path);
  auto labels = read_label_file(label_path);
  auto split = read_split_file(split_path);

  std::optional<std::size_t> n;
  if (features) n = features->rows();
  if (ef.declared_nodes) {
    if (n && *n != *ef.declared_nodes) throw ValidationError("edge file node count disagrees with feature header");
    n = ef.declared_nodes;
  }
  if (!n) {
    std::size_t m = 0;
    for (const auto& e : ef.edges) m = std::max({m, e.src + 1, e.dst + 1});
    for (const auto& [v, _] : labels) m = std::max(m, v + 1);
    for (const auto& [v, _] : split) m = std::max(m, v + 1);
    n = m;
  }

  Graph g;
  g.n = *n;
  g.adjacency = build_symmetric_adjacency(g.n, ef.edges);
  g.attributes = std::move(features);
  g.labels.assign(g.n, -1);
  for (const auto& [v, l] : labels) {
    if (v >= g.n) throw BoundsError("label for node " + std::to_string(v) + " outside node range");
    g.labels[v] = l;
  }
  g.masks = Masks(g.n);
  for (const auto& [v, s] : split) {
    if (v >= g.n) throw BoundsError("split entry for node " + std::to_string(v) + " outside node range");
    auto& m = g.masks.get(s);
    if (m[v]) throw ValidationError("node " + std::to_string(v) + " listed twice in split file");
    m[v] = true;
  }
  g.validate();
  return g;
}

/// Writes each undirected edge once (src <= dst); weight omitted when 1.
inline void save_edges(const Graph& g, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "# nodes " << g.n << '\n';
  for (std::size_t r = 0; r < g.n; ++r) {
    auto cols = g.adjacency.row_cols(r);
    auto vals = g.adjacency.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] < r) continue;
      out << r << '\t' << cols[k];
      if (vals[k] != 1.0) out << '\t' << vals[k];
      out << '\n';
    }
  }
}

inline void save_features(const SparseMatrix& x, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << x.rows() << ' ' << x.cols() << '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto cols = x.row_cols(r);
    auto vals = x.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) out << r << '\t' << cols[k] << '\t' << vals[k] << '\n';
  }
}

inline void save_labels(const Graph& g, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (std::size_t i = 0; i < g.n; ++i)
    if (g.labels[i] >= 0) out << i << '\t' << g.labels[i] << '\n';
}

inline void save_split(const Graph& g, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (SplitKind s : {SplitKind::train, SplitKind::valid, SplitKind::test})
    for (std::size_t i = 0; i < g.n; ++i)
      if (g.masks.get(s)[i]) out << i << '\t' << to_string(s) << '\n';
}

/// Â̂ = D̂^{-1/2} (A + I) D̂^{-1/2} with D̂ the row sums of A + I.
inline SparseMatrix normalize_adjacency(const Graph& g) {
  std::vector<Triplet> t = g.adjacency.triplets();
  for (std::size_t i = 0; i < g.n; ++i) t.push_back({i, i, 1.0});
  SparseMatrix a_hat = SparseMatrix::from_triplets(g.n, g.n, std::move(t));
  std::vector<Real> inv_sqrt(g.n);
  for (std::size_t i = 0; i < g.n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(a_hat.row_sum(i));
  return a_hat.scaled(inv_sqrt, inv_sqrt);
}

/// D̂^{-1} (A + I): mean over the neighborhood including the node itself.
inline SparseMatrix mean_aggregation(const Graph& g) {
  std::vector<Triplet> t = g.adjacency.triplets();
  for (std::size_t i = 0; i < g.n; ++i) t.push_back({i, i, 1.0});
  SparseMatrix a_hat = SparseMatrix::from_triplets(g.n, g.n, std::move(t));
  std::vector<Real> inv(g.n);
  for (std::size_t i = 0; i < g.n; ++i) inv[i] = 1.0 / a_hat.row_sum(i);
  return a_hat.scaled(inv, {});
}

/// Propagation operators derived once per graph and shared by every kernel.
struct GraphOperators {
  SparseMatrix sym_norm;   // Â̂
  SparseMatrix mean_norm;  // D̂^{-1}Â

  static GraphOperators from(const Graph& g) { return {normalize_adjacency(g), mean_aggregation(g)}; }
};

}  // namespace ggnn
