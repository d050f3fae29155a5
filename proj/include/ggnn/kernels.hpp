#pragma once

// GNN kernels mapping (features, graph) to class-width logits: two-layer GCN,
// GraphSage with mean aggregation, and APPNP. Each kernel owns its weights and
// the activations cached by the last forward pass; backward accumulates weight
// gradients and returns the input gradient for dense inputs.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ggnn/dense_matrix.hpp"
#include "ggnn/error.hpp"
#include "ggnn/graph.hpp"
#include "ggnn/nn.hpp"
#include "ggnn/rng.hpp"
#include "ggnn/sparse_matrix.hpp"

namespace ggnn {

enum class KernelKind { gcn, sage, appnp };

inline std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::gcn: return "gcn";
    case KernelKind::sage: return "sage";
    case KernelKind::appnp: return "appnp";
  }
  return "?";
}

inline KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "gcn") return KernelKind::gcn;
  if (s == "sage" || s == "graphsage") return KernelKind::sage;
  if (s == "appnp") return KernelKind::appnp;
  throw ConfigError("unknown kernel kind '" + std::string(s) + "'");
}

struct KernelConfig {
  KernelKind kind = KernelKind::gcn;
  std::size_t hidden_dim = 16;
  std::size_t num_layers = 2;
  Real dropout_p = 0.5;
  std::size_t appnp_steps = 10;
  Real appnp_teleport = 0.1;

  void validate() const {
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (num_layers != 2) throw ConfigError("only two-layer kernels are supported");
    check_dropout_rate(dropout_p);
    if (!(appnp_teleport > 0 && appnp_teleport <= 1)) throw ConfigError("appnp_teleport must lie in (0, 1]");
  }

  /// Baseline hyperparameters of the three kernels on the citation benchmarks.
  static KernelConfig preset(KernelKind kind) {
    KernelConfig c;
    c.kind = kind;
    if (kind == KernelKind::appnp) c.hidden_dim = 64;
    return c;
  }
};

/// Non-owning view of a kernel input: dense (pretrained tables) or sparse
/// (bag-of-words attributes).
class FeatureRef {
 public:
  FeatureRef(const DenseMatrix& d) : v_(&d) {}   // NOLINT(google-explicit-constructor)
  FeatureRef(const SparseMatrix& s) : v_(&s) {}  // NOLINT(google-explicit-constructor)

  std::size_t rows() const {
    return std::visit([](auto* m) { return m->rows(); }, v_);
  }
  std::size_t cols() const {
    return std::visit([](auto* m) { return m->cols(); }, v_);
  }
  bool dense() const noexcept { return std::holds_alternative<const DenseMatrix*>(v_); }
  const DenseMatrix& as_dense() const { return *std::get<const DenseMatrix*>(v_); }
  const SparseMatrix& as_sparse() const { return *std::get<const SparseMatrix*>(v_); }

 private:
  std::variant<const DenseMatrix*, const SparseMatrix*> v_;
};

namespace detail {

/// First-layer input after dropout, kept for the weight gradient.
class DroppedInput {
 public:
  DroppedInput() = default;
  DroppedInput(FeatureRef x, Real p, bool training, Rng& rng) {
    if (x.dense()) data_ = dropout(x.as_dense(), p, training, rng, &mask_);
    else data_ = dropout(x.as_sparse(), p, training, rng, &mask_);
  }

  /// x · w
  DenseMatrix times(const DenseMatrix& w) const {
    if (auto* d = std::get_if<DenseMatrix>(&data_)) return matmul(*d, w);
    return spmm(std::get<SparseMatrix>(data_), w);
  }
  /// xᵀ · g
  DenseMatrix transpose_times(const DenseMatrix& g) const {
    if (auto* d = std::get_if<DenseMatrix>(&data_)) return matmul_tn(*d, g);
    return spmm_transposed(std::get<SparseMatrix>(data_), g);
  }
  /// ∂L/∂x given ∂L/∂(x·w); only available for dense inputs.
  std::optional<DenseMatrix> input_grad(const DenseMatrix& g, const DenseMatrix& w) const {
    if (!std::holds_alternative<DenseMatrix>(data_)) return std::nullopt;
    return apply_mask(matmul_nt(g, w), mask_);
  }

 private:
  std::variant<DenseMatrix, SparseMatrix> data_;
  DropoutMask mask_;
};

inline void require_rows(FeatureRef x, const GraphOperators& ops) {
  if (x.rows() != ops.sym_norm.rows()) throw ShapeError("kernel: feature rows do not match node count");
}

}  // namespace detail

/// H = Â̂ · ReLU(Â̂ · X · W0) · W1, dropout on X and on the hidden layer.
class GcnKernel {
 public:
  GcnKernel(std::size_t in_dim, std::size_t classes, const KernelConfig& cfg, Rng& init)
      : cfg_(cfg), params_{Parameter(glorot_uniform(in_dim, cfg.hidden_dim, init)),
                           Parameter(glorot_uniform(cfg.hidden_dim, classes, init))} {}

  DenseMatrix forward(FeatureRef x, const GraphOperators& ops, bool training, Rng& rng) {
    detail::require_rows(x, ops);
    if (x.cols() != w0().rows()) throw ShapeError("gcn: feature width does not match W0");
    ops_ = &ops;
    input_ = detail::DroppedInput(x, cfg_.dropout_p, training, rng);
    pre_ = spmm(ops.sym_norm, input_.times(w0()));
    hidden_ = dropout(relu(pre_), cfg_.dropout_p, training, rng, &hidden_mask_);
    cached_ = true;
    return spmm(ops.sym_norm, matmul(hidden_, w1()));
  }

  std::optional<DenseMatrix> backward(const DenseMatrix& upstream) {
    if (!cached_) throw StateError("gcn: backward called before forward");
    const DenseMatrix d_t1 = spmm_transposed(ops_->sym_norm, upstream);
    params_[1].gradient += matmul_tn(hidden_, d_t1);
    const DenseMatrix d_hidden = apply_mask(matmul_nt(d_t1, w1()), hidden_mask_);
    const DenseMatrix d_t0 = spmm_transposed(ops_->sym_norm, relu_backward(pre_, d_hidden));
    params_[0].gradient += input_.transpose_times(d_t0);
    return input_.input_grad(d_t0, w0());
  }

  std::span<Parameter> parameters() noexcept { return params_; }
  std::size_t in_dim() const noexcept { return params_[0].value.rows(); }
  std::size_t hidden_dim() const noexcept { return params_[0].value.cols(); }
  std::size_t out_dim() const noexcept { return params_[1].value.cols(); }

 private:
  const DenseMatrix& w0() const { return params_[0].value; }
  const DenseMatrix& w1() const { return params_[1].value; }

  KernelConfig cfg_;
  std::array<Parameter, 2> params_;
  const GraphOperators* ops_ = nullptr;
  detail::DroppedInput input_;
  DenseMatrix pre_, hidden_;
  DropoutMask hidden_mask_;
  bool cached_ = false;
};

/// GraphSage, mean aggregator over the closed neighborhood, full batch:
/// h1 = ReLU(M·X·Wn0 + X·Ws0), H = M·h1·Wn1 + h1·Ws1 with M = D̂^{-1}Â.
class SageKernel {
 public:
  SageKernel(std::size_t in_dim, std::size_t classes, const KernelConfig& cfg, Rng& init)
      : cfg_(cfg),
        params_{Parameter(glorot_uniform(in_dim, cfg.hidden_dim, init)), Parameter(glorot_uniform(in_dim, cfg.hidden_dim, init)),
                Parameter(glorot_uniform(cfg.hidden_dim, classes, init)),
                Parameter(glorot_uniform(cfg.hidden_dim, classes, init))} {}

  DenseMatrix forward(FeatureRef x, const GraphOperators& ops, bool training, Rng& rng) {
    detail::require_rows(x, ops);
    if (x.cols() != params_[0].value.rows()) throw ShapeError("sage: feature width does not match weights");
    ops_ = &ops;
    input_ = detail::DroppedInput(x, cfg_.dropout_p, training, rng);
    pre_ = spmm(ops.mean_norm, input_.times(neigh(0)));
    pre_ += input_.times(self(0));
    hidden_ = dropout(relu(pre_), cfg_.dropout_p, training, rng, &hidden_mask_);
    cached_ = true;
    DenseMatrix out = spmm(ops.mean_norm, matmul(hidden_, neigh(1)));
    out += matmul(hidden_, self(1));
    return out;
  }

  std::optional<DenseMatrix> backward(const DenseMatrix& upstream) {
    if (!cached_) throw StateError("sage: backward called before forward");
    const DenseMatrix d_agg1 = spmm_transposed(ops_->mean_norm, upstream);
    params_[2].gradient += matmul_tn(hidden_, d_agg1);
    params_[3].gradient += matmul_tn(hidden_, upstream);
    DenseMatrix d_hidden = matmul_nt(d_agg1, neigh(1));
    d_hidden += matmul_nt(upstream, self(1));
    const DenseMatrix d_pre = relu_backward(pre_, apply_mask(d_hidden, hidden_mask_));
    const DenseMatrix d_agg0 = spmm_transposed(ops_->mean_norm, d_pre);
    params_[0].gradient += input_.transpose_times(d_agg0);
    params_[1].gradient += input_.transpose_times(d_pre);
    auto dx = input_.input_grad(d_agg0, neigh(0));
    if (dx) *dx += *input_.input_grad(d_pre, self(0));
    return dx;
  }

  std::span<Parameter> parameters() noexcept { return params_; }
  std::size_t in_dim() const noexcept { return params_[0].value.rows(); }
  std::size_t hidden_dim() const noexcept { return params_[0].value.cols(); }
  std::size_t out_dim() const noexcept { return params_[2].value.cols(); }

 private:
  const DenseMatrix& neigh(int layer) const { return params_[layer == 0 ? 0 : 2].value; }
  const DenseMatrix& self(int layer) const { return params_[layer == 0 ? 1 : 3].value; }

  KernelConfig cfg_;
  std::array<Parameter, 4> params_;  // Wn0, Ws0, Wn1, Ws1
  const GraphOperators* ops_ = nullptr;
  detail::DroppedInput input_;
  DenseMatrix pre_, hidden_;
  DropoutMask hidden_mask_;
  bool cached_ = false;
};

/// APPNP: H0 = ReLU(X·W0)·W1 (dropout on X and hidden), then K steps of
/// Z ← (1-a)·Â̂·Z + a·H0 starting from Z = H0.
class AppnpKernel {
 public:
  AppnpKernel(std::size_t in_dim, std::size_t classes, const KernelConfig& cfg, Rng& init)
      : cfg_(cfg), params_{Parameter(glorot_uniform(in_dim, cfg.hidden_dim, init)),
                           Parameter(glorot_uniform(cfg.hidden_dim, classes, init))} {}

  DenseMatrix forward(FeatureRef x, const GraphOperators& ops, bool training, Rng& rng) {
    detail::require_rows(x, ops);
    if (x.cols() != params_[0].value.rows()) throw ShapeError("appnp: feature width does not match W0");
    ops_ = &ops;
    input_ = detail::DroppedInput(x, cfg_.dropout_p, training, rng);
    pre_ = input_.times(params_[0].value);
    hidden_ = dropout(relu(pre_), cfg_.dropout_p, training, rng, &hidden_mask_);
    cached_ = true;
    const DenseMatrix h0 = matmul(hidden_, params_[1].value);
    return propagate(h0, ops.sym_norm, cfg_.appnp_steps, cfg_.appnp_teleport);
  }

  std::optional<DenseMatrix> backward(const DenseMatrix& upstream) {
    if (!cached_) throw StateError("appnp: backward called before forward");
    const Real a = cfg_.appnp_teleport;
    // Z_{k+1} = (1-a) Â̂ Z_k + a H0, Z_0 = H0
    DenseMatrix g = upstream;
    DenseMatrix d_h0(upstream.rows(), upstream.cols());
    for (std::size_t k = 0; k < cfg_.appnp_steps; ++k) {
      d_h0.add_scaled(g, a);
      DenseMatrix next = spmm_transposed(ops_->sym_norm, g);
      next *= (1 - a);
      g = std::move(next);
    }
    d_h0 += g;
    params_[1].gradient += matmul_tn(hidden_, d_h0);
    const DenseMatrix d_pre = relu_backward(pre_, apply_mask(matmul_nt(d_h0, params_[1].value), hidden_mask_));
    params_[0].gradient += input_.transpose_times(d_pre);
    return input_.input_grad(d_pre, params_[0].value);
  }

  static DenseMatrix propagate(const DenseMatrix& h0, const SparseMatrix& a_norm, std::size_t steps, Real teleport) {
    DenseMatrix z = h0;
    for (std::size_t k = 0; k < steps; ++k) {
      DenseMatrix next = spmm(a_norm, z);
      next *= (1 - teleport);
      next.add_scaled(h0, teleport);
      z = std::move(next);
    }
    return z;
  }

  std::span<Parameter> parameters() noexcept { return params_; }
  std::size_t in_dim() const noexcept { return params_[0].value.rows(); }
  std::size_t hidden_dim() const noexcept { return params_[0].value.cols(); }
  std::size_t out_dim() const noexcept { return params_[1].value.cols(); }

 private:
  KernelConfig cfg_;
  std::array<Parameter, 2> params_;
  const GraphOperators* ops_ = nullptr;
  detail::DroppedInput input_;
  DenseMatrix pre_, hidden_;
  DropoutMask hidden_mask_;
  bool cached_ = false;
};

/// One kernel instance of any kind.
class KernelState {
 public:
  KernelState(const KernelConfig& cfg, std::size_t in_dim, std::size_t classes, Rng& init)
      : cfg_(cfg), impl_(make(cfg, in_dim, classes, init)) {}

  const KernelConfig& config() const noexcept { return cfg_; }
  KernelKind kind() const noexcept { return cfg_.kind; }

  DenseMatrix forward(FeatureRef x, const GraphOperators& ops, bool training, Rng& rng) {
    return std::visit([&](auto& k) { return k.forward(x, ops, training, rng); }, impl_);
  }
  std::optional<DenseMatrix> backward(const DenseMatrix& upstream) {
    return std::visit([&](auto& k) { return k.backward(upstream); }, impl_);
  }
  std::span<Parameter> parameters() {
    return std::visit([](auto& k) { return k.parameters(); }, impl_);
  }
  std::size_t in_dim() const {
    return std::visit([](const auto& k) { return k.in_dim(); }, impl_);
  }
  std::size_t hidden_dim() const {
    return std::visit([](const auto& k) { return k.hidden_dim(); }, impl_);
  }
  std::size_t out_dim() const {
    return std::visit([](const auto& k) { return k.out_dim(); }, impl_);
  }
  void zero_grad() {
    for (auto& p : parameters()) p.zero_grad();
  }

 private:
  using Impl = std::variant<GcnKernel, SageKernel, AppnpKernel>;

  static Impl make(const KernelConfig& cfg, std::size_t in_dim, std::size_t classes, Rng& init) {
    cfg.validate();
    if (in_dim == 0 || classes == 0) throw ShapeError("kernel: input width and class count must be positive");
    switch (cfg.kind) {
      case KernelKind::gcn: return GcnKernel(in_dim, classes, cfg, init);
      case KernelKind::sage: return SageKernel(in_dim, classes, cfg, init);
      case KernelKind::appnp: return AppnpKernel(in_dim, classes, cfg, init);
    }
    throw ConfigError("unknown kernel kind");
  }

  KernelConfig cfg_;
  Impl impl_;
};

/// Dispatches to the configured kernel after checking that `st` was built for
/// the same kind and widths.
inline DenseMatrix kernel_apply(const KernelConfig& cfg, FeatureRef x, const GraphOperators& ops, KernelState& st,
                                bool training, Rng& rng) {
  cfg.validate();
  if (st.kind() != cfg.kind) throw ConfigError("kernel_apply: state was built for a different kernel kind");
  if (st.hidden_dim() != cfg.hidden_dim) throw ShapeError("kernel_apply: hidden width does not match kernel state");
  if (x.cols() != st.in_dim()) throw ShapeError("kernel_apply: feature width does not match kernel state");
  return st.forward(x, ops, training, rng);
}

}  // namespace ggnn
