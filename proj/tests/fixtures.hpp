#pragma once

// Shared test fixtures and dense reference implementations. The reference
// code here deliberately uses plain dense loops so it stays independent of the
// sparse paths it checks.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ggnn/ggnn.hpp"

namespace ggnn::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ggnn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name) << content;
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

/// Graph from an undirected edge list with unit weights and no labels/split.
inline Graph make_graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<EdgeRecord> recs;
  for (auto [a, b] : edges) recs.push_back({a, b, 1.0});
  Graph g;
  g.n = n;
  g.adjacency = build_symmetric_adjacency(n, recs);
  g.labels.assign(n, -1);
  g.masks = Masks(n);
  return g;
}

/// Erdos-Renyi style random graph (each pair with probability p), connected
/// through an added path so no node is isolated.
inline Graph random_graph(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j)
      if (coin(rng)) e.emplace_back(i, j);
  return make_graph(n, e);
}

inline DenseMatrix random_dense(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

/// Two K5 cliques {0..4} and {5..9} joined by the edge 4-5.
inline Graph barbell() {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t base : {0u, 5u})
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = i + 1; j < 5; ++j) e.emplace_back(base + i, base + j);
  e.emplace_back(4, 5);
  return make_graph(10, e);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

/// Mean cosine within clusters minus mean cosine across clusters.
inline std::pair<double, double> cluster_cosines(const DenseMatrix& t, const std::vector<int>& cluster) {
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = i + 1; j < t.rows(); ++j) {
      const double c = cosine(t.row(i), t.row(j));
      if (cluster[i] == cluster[j]) {
        intra += c;
        ++ni;
      } else {
        inter += c;
        ++nx;
      }
    }
  return {intra / ni, inter / nx};
}

// ---------------------------------------------------------------------------
// Dense reference implementations
// ---------------------------------------------------------------------------

using Dense = std::vector<std::vector<double>>;

inline Dense to_nested(const DenseMatrix& m) {
  Dense d(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

inline Dense mul(const Dense& a, const Dense& b) {
  Dense c(a.size(), std::vector<double>(b.empty() ? 0 : b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < c[i].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Dense relu_ref(Dense a) {
  for (auto& r : a)
    for (double& v : r) v = std::max(0.0, v);
  return a;
}

inline Dense add_ref(Dense a, const Dense& b, double s = 1.0) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += s * b[i][j];
  return a;
}

inline Dense scale_ref(Dense a, double s) {
  for (auto& r : a)
    for (double& v : r) v *= s;
  return a;
}

/// A + I, dense.
inline Dense with_self_loops(const Graph& g) {
  Dense a = to_nested(g.adjacency.to_dense());
  for (std::size_t i = 0; i < g.n; ++i) a[i][i] += 1;
  return a;
}

/// D^{-1/2} (A+I) D^{-1/2} by explicit diagonal matrices.
inline Dense sym_norm_ref(const Graph& g) {
  Dense a = with_self_loops(g);
  const std::size_t n = g.n;
  Dense d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (double v : a[i]) s += v;
    d[i][i] = 1.0 / std::sqrt(s);
  }
  return mul(mul(d, a), d);
}

inline Dense mean_norm_ref(const Graph& g) {
  Dense a = with_self_loops(g);
  for (auto& r : a) {
    double s = 0;
    for (double v : r) s += v;
    for (double& v : r) v /= s;
  }
  return a;
}

inline double max_abs_diff(const DenseMatrix& a, const Dense& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b[i][j]));
  return m;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

/// Labeled 5-node fixture with a train/valid/test split and sparse features.
inline Graph five_node_fixture(std::size_t features = 6) {
  Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}, {1, 4}});
  g.labels = {0, 1, 0, 1, 2};
  g.masks.train = {true, true, false, false, true};
  g.masks.valid = {false, false, true, false, false};
  g.masks.test = {false, false, false, true, false};
  std::vector<Triplet> t;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < features; ++j)
      if ((i + j) % 2 == 0) t.push_back({i, j, u(rng)});
  g.attributes = SparseMatrix::from_triplets(5, features, t);
  return g;
}


/// Attributed stochastic block model: `classes` communities of `per_class`
/// nodes, edges within a community with probability p_in and across with
/// p_out. Each node switches on `active` binary attributes, drawn from its
/// class's own block of `block` attributes with probability `signal` and from
/// the whole vocabulary otherwise. Masks: the first `train_per_class` nodes of
/// each class train, the next `valid_per_class` validate, the rest test.
inline Graph attributed_sbm(std::size_t classes, std::size_t per_class, std::uint64_t seed, double p_in = 0.3,
                            double p_out = 0.02, std::size_t block = 6, std::size_t active = 3, double signal = 0.7,
                            std::size_t train_per_class = 4, std::size_t valid_per_class = 4) {
  const std::size_t n = classes * per_class, f = classes * block;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < (i / per_class == j / per_class ? p_in : p_out)) e.emplace_back(i, j);
  Graph g = make_graph(n, e);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i / per_class;
    g.labels[i] = static_cast<int>(c);
    const std::size_t pos = i % per_class;
    if (pos < train_per_class) g.masks.train[i] = true;
    else if (pos < train_per_class + valid_per_class) g.masks.valid[i] = true;
    else g.masks.test[i] = true;
    std::vector<bool> on(f, false);
    for (std::size_t k = 0; k < active; ++k) {
      const std::size_t col = u(rng) < signal ? c * block + static_cast<std::size_t>(u(rng) * block) % block
                                              : static_cast<std::size_t>(u(rng) * f) % f;
      on[col] = true;
    }
    for (std::size_t j = 0; j < f; ++j)
      if (on[j]) t.push_back({i, j, 1.0});
  }
  g.attributes = SparseMatrix::from_triplets(n, f, t);
  return g;
}

/// Writes `g` in the LINQS layout (`<name>.content`, `<name>.cites`) with
/// paper ids `p<7i+3>` and labels `topic_<c>`. Every edge is cited once; the
/// first edge is also cited back and one citation names an unknown paper.
inline void write_linqs(const Graph& g, const std::filesystem::path& dir, const std::string& name) {
  auto id = [](std::size_t i) { return "p" + std::to_string(7 * i + 3); };
  std::ofstream content(dir / (name + ".content"));
  for (std::size_t i = 0; i < g.n; ++i) {
    content << id(i);
    for (std::size_t j = 0; j < g.attributes->cols(); ++j) content << '\t' << (g.attributes->at(i, j) != 0 ? 1 : 0);
    content << "\ttopic_" << g.labels[i] << '\n';
  }
  std::ofstream cites(dir / (name + ".cites"));
  bool first = true;
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j : g.adjacency.row_cols(i))
      if (j > i) {
        cites << id(i) << '\t' << id(j) << '\n';
        if (first) cites << id(j) << '\t' << id(i) << '\n';
        first = false;
      }
  cites << "unknown_paper\t" << id(0) << '\n';
}

}  // namespace ggnn::testing
