#pragma once

// Unsupervised global features: truncated random walks, skip-gram pair
// extraction and skip-gram training with negative sampling (SGNS) for the
// structure table X^(s) and the attribute table X^(a).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ggnn/dense_matrix.hpp"
#include "ggnn/error.hpp"
#include "ggnn/graph.hpp"
#include "ggnn/rng.hpp"
#include "ggnn/sparse_matrix.hpp"

namespace ggnn {

using Walk = std::vector<std::uint32_t>;
using WalkCorpus = std::vector<Walk>;

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 100;
  std::size_t window = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (walks_per_node < 1) throw ConfigError("walks_per_node must be >= 1");
    if (walk_length < 2) throw ConfigError("walk_length must be >= 2");
    if (window < 1) throw ConfigError("window must be >= 1");
  }
};

namespace detail {

/// Runs body(begin, end) over [0, count) split into `threads` contiguous chunks.
template <typename Body>
void parallel_chunks(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    body(std::size_t{0}, count, 0u);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = count * t / threads;
    const std::size_t e = count * (t + 1) / threads;
    pool.emplace_back([&body, b, e, t] { body(b, e, t); });
  }
}

/// Cumulative weights per CSR row for O(log deg) proportional sampling.
class RowSampler {
 public:
  explicit RowSampler(const SparseMatrix& m) : m_(&m), cumulative_(m.nnz()) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      Real acc = 0;
      auto vals = m.row_values(r);
      const std::size_t off = m.row_ptr()[r];
      for (std::size_t k = 0; k < vals.size(); ++k) cumulative_[off + k] = acc += std::max<Real>(vals[k], 0);
    }
  }

  bool has_mass(std::size_t r) const {
    const std::size_t b = m_->row_ptr()[r], e = m_->row_ptr()[r + 1];
    return e > b && cumulative_[e - 1] > 0;
  }

  /// Column index drawn with probability proportional to the row's values.
  std::size_t sample(std::size_t r, Rng& rng) const {
    const std::size_t b = m_->row_ptr()[r], e = m_->row_ptr()[r + 1];
    const Real total = cumulative_[e - 1];
    const Real u = uniform01(rng) * total;
    auto first = cumulative_.begin() + static_cast<std::ptrdiff_t>(b);
    auto last = cumulative_.begin() + static_cast<std::ptrdiff_t>(e);
    auto it = std::upper_bound(first, last, u);
    if (it == last) --it;
    // skip zero-weight entries that share the cumulative value
    while (it != first && *(it - 1) == *it) --it;
    return m_->col_idx()[b + static_cast<std::size_t>(it - first)];
  }

 private:
  const SparseMatrix* m_;
  std::vector<Real> cumulative_;
};

}  // namespace detail

/// Truncated uniform random walks (next hop proportional to edge weight).
/// Each walk starts at its own node and is drawn from a stream derived from
/// (seed, round, node), so the corpus does not depend on the thread count.
/// Walks stop early at nodes with no outgoing weight.
inline WalkCorpus generate_walks(const Graph& g, const WalkConfig& cfg) {
  cfg.validate();
  detail::RowSampler sampler(g.adjacency);
  WalkCorpus corpus(cfg.walks_per_node * g.n);
  for (std::size_t round = 0; round < cfg.walks_per_node; ++round) {
    std::vector<std::uint32_t> order(g.n);
    std::iota(order.begin(), order.end(), 0u);
    Rng order_rng = make_rng(cfg.seed, {1, round});
    std::shuffle(order.begin(), order.end(), order_rng);
    detail::parallel_chunks(g.n, cfg.threads, [&](std::size_t b, std::size_t e, unsigned) {
      for (std::size_t i = b; i < e; ++i) {
        const std::uint32_t start = order[i];
        Rng rng = make_rng(cfg.seed, {2, round, start});
        Walk& w = corpus[round * g.n + i];
        w.reserve(cfg.walk_length);
        w.push_back(start);
        while (w.size() < cfg.walk_length && sampler.has_mass(w.back()))
          w.push_back(static_cast<std::uint32_t>(sampler.sample(w.back(), rng)));
      }
    });
  }
  return corpus;
}

inline void save_walks(const WalkCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& w : corpus) {
    for (std::size_t i = 0; i < w.size(); ++i) out << (i ? " " : "") << w[i];
    out << '\n';
  }
}

inline WalkCorpus load_walks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  WalkCorpus corpus;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    Walk w;
    for (auto f : detail::split_fields(line)) w.push_back(detail::parse_number<std::uint32_t>(f, line_no, "node id"));
    if (!w.empty()) corpus.push_back(std::move(w));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Pair streams
// ---------------------------------------------------------------------------

/// (source, target) training example; the target is a node or an attribute id.
struct IndexPair {
  std::uint32_t source;
  std::uint32_t target;

  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Visits every (walk[i], walk[j]) with j != i and |i - j| <= window.
template <typename Visitor>
void extract_pairs(const Walk& walk, std::size_t window, Visitor&& visit) {
  if (window < 1) throw ConfigError("window must be >= 1");
  const std::size_t len = walk.size();
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(len - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j)
      if (j != i) visit(IndexPair{walk[i], walk[j]});
  }
}

inline std::vector<IndexPair> extract_pairs(const WalkCorpus& corpus, std::size_t window) {
  std::vector<IndexPair> out;
  for (const auto& w : corpus) extract_pairs(w, window, [&](IndexPair p) { out.push_back(p); });
  return out;
}

/// Closed-form pair count of one walk: Σ_i |{j : j != i, |i-j| <= window}|.
inline std::size_t pair_count(std::size_t len, std::size_t window) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < len; ++i) total += std::min(len - 1, i + window) - (i > window ? i - window : 0);
  return total;
}

/// Materialized pairs; each pair is its own partition unit.
class PairList {
 public:
  explicit PairList(std::vector<IndexPair> pairs) : pairs_(std::move(pairs)) {}

  std::size_t units() const noexcept { return pairs_.size(); }

  template <typename Visitor>
  void visit(std::size_t /*epoch*/, std::size_t begin, std::size_t end, Visitor&& f) const {
    for (std::size_t i = begin; i < end; ++i) f(pairs_[i]);
  }

 private:
  std::vector<IndexPair> pairs_;
};

/// Skip-gram (source, context node) pairs streamed from a walk corpus; one
/// partition unit per walk.
class WalkPairs {
 public:
  WalkPairs(const WalkCorpus& corpus, std::size_t window) : corpus_(&corpus), window_(window) {
    if (window < 1) throw ConfigError("window must be >= 1");
  }

  std::size_t units() const noexcept { return corpus_->size(); }

  template <typename Visitor>
  void visit(std::size_t /*epoch*/, std::size_t begin, std::size_t end, Visitor&& f) const {
    for (std::size_t i = begin; i < end; ++i) extract_pairs((*corpus_)[i], window_, f);
  }

 private:
  const WalkCorpus* corpus_;
  std::size_t window_;
};

/// For every (source, context) pair, one attribute of the context node drawn
/// proportional to its attribute value; contexts without nonzero attributes
/// emit nothing. The draw for walk w in epoch e uses a stream derived from
/// (seed, e, w), so each epoch sees a fresh but reproducible sample.
class ContextAttributePairs {
 public:
  ContextAttributePairs(const WalkCorpus& corpus, const Graph& g, std::size_t window, std::uint64_t seed)
      : corpus_(&corpus), window_(window), seed_(seed) {
    if (!g.attributes) throw ConfigError("context attributes need an attribute matrix");
    if (window < 1) throw ConfigError("window must be >= 1");
    attributes_ = &*g.attributes;
    sampler_.emplace(*attributes_);
  }

  std::size_t units() const noexcept { return corpus_->size(); }
  std::size_t num_attributes() const noexcept { return attributes_->cols(); }

  template <typename Visitor>
  void visit(std::size_t epoch, std::size_t begin, std::size_t end, Visitor&& f) const {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = make_rng(seed_, {3, epoch, i});
      extract_pairs((*corpus_)[i], window_, [&](IndexPair p) {
        if (!sampler_->has_mass(p.target)) return;
        f(IndexPair{p.source, static_cast<std::uint32_t>(sampler_->sample(p.target, rng))});
      });
    }
  }

 private:
  const WalkCorpus* corpus_;
  const SparseMatrix* attributes_ = nullptr;
  std::optional<detail::RowSampler> sampler_;
  std::size_t window_;
  std::uint64_t seed_;
};

/// Collects a whole epoch of a stream; used by tests and small inputs.
template <typename Stream>
std::vector<IndexPair> collect_pairs(const Stream& s, std::size_t epoch = 0) {
  std::vector<IndexPair> out;
  s.visit(epoch, 0, s.units(), [&](IndexPair p) { out.push_back(p); });
  return out;
}

// ---------------------------------------------------------------------------
// Noise distribution
// ---------------------------------------------------------------------------

/// Negative-sampling distribution proportional to count^power, sampled in
/// O(1) through an alias table (Vose's construction).
class NoiseDistribution {
 public:
  NoiseDistribution(std::span<const std::uint64_t> counts, Real power = 0.75) {
    const std::size_t n = counts.size();
    probabilities_.resize(n);
    for (std::size_t i = 0; i < n; ++i) probabilities_[i] = std::pow(static_cast<Real>(counts[i]), power);
    const Real total = std::accumulate(probabilities_.begin(), probabilities_.end(), Real{0});
    if (!(total > 0)) throw ConfigError("noise distribution has no mass");
    for (Real& p : probabilities_) p /= total;

    accept_.assign(n, 1);
    alias_.resize(n);
    std::iota(alias_.begin(), alias_.end(), 0u);
    std::vector<Real> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = probabilities_[i] * static_cast<Real>(n);
      (scaled[i] < 1 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back(), l = large.back();
      small.pop_back();
      accept_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1 - scaled[s];
      if (scaled[l] < 1) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers on either list are 1 up to rounding.
  }

  std::uint32_t operator()(Rng& rng) const {
    const Real u = uniform01(rng) * static_cast<Real>(accept_.size());
    const auto i = std::min(static_cast<std::size_t>(u), accept_.size() - 1);
    return u - static_cast<Real>(i) < accept_[i] ? static_cast<std::uint32_t>(i) : alias_[i];
  }
  std::span<const Real> probabilities() const noexcept { return probabilities_; }
  std::size_t size() const noexcept { return probabilities_.size(); }

 private:
  std::vector<Real> probabilities_;
  std::vector<Real> accept_;
  std::vector<std::uint32_t> alias_;
};

template <typename Stream>
std::vector<std::uint64_t> target_counts(const Stream& s, std::size_t vocab) {
  std::vector<std::uint64_t> counts(vocab, 0);
  s.visit(0, 0, s.units(), [&](IndexPair p) {
    if (p.target >= vocab) throw BoundsError("pair target outside vocabulary");
    ++counts[p.target];
  });
  return counts;
}

// ---------------------------------------------------------------------------
// SGNS
// ---------------------------------------------------------------------------

struct SgnsConfig {
  std::size_t dim = 8;
  std::size_t negatives = 64;
  Real learning_rate = 0.025;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // > 1 enables lock-free (non-reproducible) updates
  bool track_objective = false;  // evaluate the fixed-sample objective after each epoch

  void validate() const {
    if (dim < 1) throw ConfigError("embedding dim must be >= 1");
    if (negatives < 1) throw ConfigError("negatives must be >= 1");
    if (learning_rate < 0) throw ConfigError("learning rate must be >= 0");
  }
};

/// Node table (one row per node) plus, optionally, the output table that
/// scored the targets during training (one row per target id).
struct EmbeddingTable {
  DenseMatrix vectors;
  std::optional<DenseMatrix> output;
  std::vector<Real> epoch_loss;       // running mean per-pair loss of each epoch
  std::vector<Real> epoch_objective;  // end-of-epoch loss on a fixed negative sample, if tracked

  std::size_t rows() const noexcept { return vectors.rows(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
};

inline Real log_sigmoid(Real x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
inline Real sigmoid(Real x) { return x >= 0 ? 1 / (1 + std::exp(-x)) : std::exp(x) / (1 + std::exp(x)); }

/// -log σ(v·c_pos) - Σ_k log σ(-v·c_neg_k)
inline Real sgns_pair_loss(std::span<const Real> source, const DenseMatrix& context, std::uint32_t positive,
                           std::span<const std::uint32_t> negatives) {
  auto dot = [&](std::uint32_t t) {
    auto c = context.row(t);
    Real s = 0;
    for (std::size_t d = 0; d < source.size(); ++d) s += source[d] * c[d];
    return s;
  };
  Real loss = -log_sigmoid(dot(positive));
  for (auto t : negatives) loss -= log_sigmoid(-dot(t));
  return loss;
}

namespace detail {

}  // namespace detail

/// Source-table initialization used by SGNS training: uniform in ±0.5/dim.
inline DenseMatrix initial_source_table(std::size_t rows, const SgnsConfig& cfg) {
  DenseMatrix t(rows, cfg.dim);
  Rng init = make_rng(cfg.seed, {5});
  const Real half = 0.5 / static_cast<Real>(cfg.dim);
  for (Real& x : t.values()) x = (2 * uniform01(init) - 1) * half;
  return t;
}

namespace detail {

template <bool Shared>
struct Cell {
  static Real load(const Real& x) {
    if constexpr (Shared) return std::atomic_ref<const Real>(x).load(std::memory_order_relaxed);
    else return x;
  }
  static void store(Real& x, Real v) {
    if constexpr (Shared) std::atomic_ref<Real>(x).store(v, std::memory_order_relaxed);
    else x = v;
  }
};

template <bool Shared, typename Stream>
Real sgns_worker(const Stream& stream, DenseMatrix& source, DenseMatrix& context, const NoiseDistribution& noise_proto,
                 const SgnsConfig& cfg, std::size_t epoch, std::size_t begin, std::size_t end, unsigned worker,
                 std::atomic<std::uint64_t>& processed, std::uint64_t total_work, std::uint64_t& pairs_seen) {
  using C = Cell<Shared>;
  const NoiseDistribution& noise = noise_proto;
  Rng rng = make_rng(cfg.seed, {4, epoch, worker});
  const std::size_t dim = cfg.dim;
  std::vector<Real> v(dim), grad_v(dim), c(dim);
  std::vector<std::uint32_t> targets;
  targets.reserve(cfg.negatives + 1);
  Real loss_sum = 0;
  std::uint64_t local = 0;
  Real lr = cfg.learning_rate;
  auto update_lr = [&] {
    const Real progress = static_cast<Real>(processed.load(std::memory_order_relaxed)) / static_cast<Real>(total_work + 1);
    lr = std::max(cfg.learning_rate * 1e-4, cfg.learning_rate * (1 - progress));
  };
  update_lr();

  stream.visit(epoch, begin, end, [&](IndexPair p) {
    Real* src = &source(p.source, 0);
    for (std::size_t d = 0; d < dim; ++d) {
      v[d] = C::load(src[d]);
      grad_v[d] = 0;
    }
    targets.clear();
    targets.push_back(p.target);
    for (std::size_t k = 0; k < cfg.negatives; ++k) {
      std::uint32_t t = noise(rng);
      for (int tries = 0; t == p.target && tries < 64; ++tries) t = noise(rng);
      if (t != p.target) targets.push_back(t);
    }
    auto dot = [&](std::uint32_t target) {
      const Real* ctx = &context(target, 0);
      Real f = 0;
      for (std::size_t d = 0; d < dim; ++d) f += v[d] * (c[d] = C::load(ctx[d]));
      return f;
    };
    // The reported loss is taken at the parameters the pair started from, so a
    // negative drawn twice is not counted at its already-updated value.
    for (std::size_t k = 0; k < targets.size(); ++k) loss_sum -= log_sigmoid(k == 0 ? dot(targets[k]) : -dot(targets[k]));
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const Real f = dot(targets[k]);
      const Real g = ((k == 0 ? 1 : 0) - sigmoid(f)) * lr;
      Real* ctx = &context(targets[k], 0);
      for (std::size_t d = 0; d < dim; ++d) {
        grad_v[d] += g * c[d];
        C::store(ctx[d], c[d] + g * v[d]);
      }
    }
    for (std::size_t d = 0; d < dim; ++d) C::store(src[d], v[d] + grad_v[d]);
    if ((++local & 0x3ff) == 0) {
      processed.fetch_add(0x400, std::memory_order_relaxed);
      update_lr();
    }
  });
  processed.fetch_add(local & 0x3ff, std::memory_order_relaxed);
  pairs_seen = local;
  return loss_sum;
}

/// Mean per-pair loss of the whole stream at fixed parameters. Negatives are
/// drawn from a stream that depends only on the seed, so repeated calls score
/// the same sample.
template <typename Stream>
Real sgns_objective(const Stream& stream, const DenseMatrix& source, const DenseMatrix& context,
                    const NoiseDistribution& noise_proto, const SgnsConfig& cfg) {
  const NoiseDistribution& noise = noise_proto;
  Rng rng = make_rng(cfg.seed, {6});
  std::vector<std::uint32_t> negatives;
  Real total = 0;
  std::uint64_t pairs = 0;
  stream.visit(0, 0, stream.units(), [&](IndexPair p) {
    negatives.clear();
    for (std::size_t k = 0; k < cfg.negatives; ++k) {
      std::uint32_t t = noise(rng);
      for (int tries = 0; t == p.target && tries < 64; ++tries) t = noise(rng);
      if (t != p.target) negatives.push_back(t);
    }
    total += sgns_pair_loss(source.row(p.source), context, p.target, negatives);
    ++pairs;
  });
  return pairs ? total / static_cast<Real>(pairs) : 0;
}

template <typename Stream>
EmbeddingTable train_sgns(const Stream& stream, std::size_t num_sources, std::size_t num_targets, const SgnsConfig& cfg) {
  cfg.validate();
  const auto counts = target_counts(stream, num_targets);
  const std::uint64_t pairs_per_epoch = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (pairs_per_epoch == 0) throw ConfigError("sgns: pair stream is empty");
  NoiseDistribution noise(counts);

  EmbeddingTable table;
  table.vectors = initial_source_table(num_sources, cfg);
  DenseMatrix context(num_targets, cfg.dim);

  std::atomic<std::uint64_t> processed{0};
  const std::uint64_t total_work = pairs_per_epoch * cfg.epochs;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const unsigned threads = std::max(1u, cfg.threads);
    std::vector<Real> losses(threads, 0);
    std::vector<std::uint64_t> seen(threads, 0);
    if (threads == 1) {
      losses[0] = sgns_worker<false>(stream, table.vectors, context, noise, cfg, epoch, 0, stream.units(), 0, processed,
                                     total_work, seen[0]);
    } else {
      parallel_chunks(stream.units(), threads, [&](std::size_t b, std::size_t e, unsigned t) {
        losses[t] = sgns_worker<true>(stream, table.vectors, context, noise, cfg, epoch, b, e, t, processed, total_work,
                                      seen[t]);
      });
    }
    const Real loss = std::accumulate(losses.begin(), losses.end(), Real{0});
    const auto n = std::accumulate(seen.begin(), seen.end(), std::uint64_t{0});
    table.epoch_loss.push_back(n ? loss / static_cast<Real>(n) : 0);
    if (cfg.track_objective) table.epoch_objective.push_back(sgns_objective(stream, table.vectors, context, noise, cfg));
  }
  table.output = std::move(context);
  return table;
}

}  // namespace detail

/// Trains X^(s): nodes predict their random-walk context nodes.
template <typename Stream>
EmbeddingTable train_structure_embeddings(const Stream& pairs, std::size_t n, const SgnsConfig& cfg) {
  return detail::train_sgns(pairs, n, n, cfg);
}

/// Trains X^(a): nodes predict attributes sampled from their context nodes.
/// A single-attribute vocabulary leaves no valid negatives and is rejected.
template <typename Stream>
EmbeddingTable train_attribute_embeddings(const Stream& attr_pairs, std::size_t n, std::size_t num_attributes,
                                          const SgnsConfig& cfg) {
  if (num_attributes < 2) throw ConfigError("attribute embeddings need at least two attributes");
  return detail::train_sgns(attr_pairs, n, num_attributes, cfg);
}

// ---------------------------------------------------------------------------
// Embedding files: `n dim` header, then `id v_1 ... v_dim` per row.
// ---------------------------------------------------------------------------

inline void export_embeddings(const DenseMatrix& t, const std::filesystem::path& path) {
  if (t.rows() == 0 || t.cols() == 0) throw ConfigError("refusing to export an empty embedding table");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << std::setprecision(17);
  out << t.rows() << ' ' << t.cols() << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out << r;
    for (Real v : t.row(r)) out << ' ' << v;
    out << '\n';
  }
}

inline DenseMatrix import_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("embedding file is empty", 1);
  auto head = detail::split_fields(line);
  if (head.size() != 2) throw FormatError("embedding header must be 'n dim'", 1);
  const auto n = detail::parse_number<std::size_t>(head[0], 1, "row count");
  const auto dim = detail::parse_number<std::size_t>(head[1], 1, "dimension");
  DenseMatrix t(n, dim);
  std::vector<bool> seen(n, false);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = detail::split_fields(line);
    if (f.empty()) continue;
    if (f.size() != dim + 1) throw FormatError("embedding row has wrong number of values", line_no);
    const auto id = detail::parse_number<std::size_t>(f[0], line_no, "node id");
    if (id >= n) throw FormatError("embedding row id outside declared range", line_no);
    if (seen[id]) throw FormatError("duplicate embedding row", line_no);
    seen[id] = true;
    for (std::size_t d = 0; d < dim; ++d) t(id, d) = detail::parse_number<Real>(f[d + 1], line_no, "value");
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw FormatError("embedding file has fewer rows than its header declares");
  return t;
}

}  // namespace ggnn
