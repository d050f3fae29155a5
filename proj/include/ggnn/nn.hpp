#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ggnn/dense_matrix.hpp"
#include "ggnn/error.hpp"
#include "ggnn/rng.hpp"
#include "ggnn/sparse_matrix.hpp"

namespace ggnn {

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

inline DenseMatrix relu(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (Real& v : out.values()) v = v > 0 ? v : 0;
  return out;
}

/// Passes `upstream` where the forward input was strictly positive.
inline DenseMatrix relu_backward(const DenseMatrix& input, const DenseMatrix& upstream) {
  if (!input.same_shape(upstream)) throw ShapeError("relu_backward: shape mismatch");
  DenseMatrix out = upstream;
  auto in = input.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i)
    if (!(in[i] > 0)) o[i] = 0;
  return out;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Per-element scale factors of one dropout draw: 0 for dropped elements,
/// 1/(1-p) for kept ones. An empty mask means identity.
struct DropoutMask {
  std::vector<Real> scale;

  bool identity() const noexcept { return scale.empty(); }
};

inline void check_dropout_rate(Real p) {
  if (!(p >= 0 && p < 1)) throw ConfigError("dropout probability must lie in [0, 1)");
}

inline DropoutMask draw_dropout_mask(std::size_t count, Real p, bool training, Rng& rng) {
  check_dropout_rate(p);
  DropoutMask m;
  if (!training || p == 0) return m;
  m.scale.resize(count);
  const Real keep_scale = 1.0 / (1.0 - p);
  for (Real& s : m.scale) s = uniform01(rng) < p ? 0 : keep_scale;
  return m;
}

inline DenseMatrix apply_mask(const DenseMatrix& x, const DropoutMask& m) {
  if (m.identity()) return x;
  if (m.scale.size() != x.size()) throw ShapeError("dropout mask size mismatch");
  DenseMatrix out = x;
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= m.scale[i];
  return out;
}

/// Inverted dropout; the mask is returned through `mask` for the backward pass.
inline DenseMatrix dropout(const DenseMatrix& x, Real p, bool training, Rng& rng, DropoutMask* mask = nullptr) {
  DropoutMask m = draw_dropout_mask(x.size(), p, training, rng);
  DenseMatrix out = apply_mask(x, m);
  if (mask) *mask = std::move(m);
  return out;
}

/// Sparse variant: drops stored entries only, pattern is preserved.
inline SparseMatrix dropout(const SparseMatrix& x, Real p, bool training, Rng& rng, DropoutMask* mask = nullptr) {
  DropoutMask m = draw_dropout_mask(x.nnz(), p, training, rng);
  SparseMatrix out = x;
  if (!m.identity()) {
    auto v = out.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= m.scale[i];
  }
  if (mask) *mask = std::move(m);
  return out;
}

// ---------------------------------------------------------------------------
// Softmax and loss
// ---------------------------------------------------------------------------

inline DenseMatrix softmax_rows(const DenseMatrix& h) {
  DenseMatrix z(h.rows(), h.cols());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    auto in = h.row(r);
    auto out = z.row(r);
    if (in.empty()) continue;
    const Real mx = *std::max_element(in.begin(), in.end());
    Real sum = 0;
    for (std::size_t j = 0; j < in.size(); ++j) sum += out[j] = std::exp(in[j] - mx);
    for (Real& v : out) v /= sum;
  }
  return z;
}

struct LossAndGrad {
  Real loss = 0;
  DenseMatrix grad;  // with respect to the logits
};

namespace detail {
inline std::size_t checked_train_count(std::size_t rows, std::span<const int> labels, const std::vector<bool>& mask,
                                       std::size_t classes) {
  if (labels.size() != rows || mask.size() != rows) throw ShapeError("cross entropy: label/mask length mismatch");
  std::size_t count = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!mask[i]) continue;
    if (labels[i] < 0) throw ValidationError("cross entropy: masked node " + std::to_string(i) + " has no label");
    if (static_cast<std::size_t>(labels[i]) >= classes) throw BoundsError("cross entropy: label exceeds class count");
    ++count;
  }
  if (count == 0) throw ConfigError("cross entropy: mask selects no nodes");
  return count;
}
}  // namespace detail

/// Mean negative log-likelihood of probabilities `z` over masked rows. The
/// gradient is taken with respect to the logits that produced `z`:
/// (z - onehot(y)) / |mask| on masked rows, zero elsewhere.
inline LossAndGrad masked_cross_entropy(const DenseMatrix& z, std::span<const int> labels, const std::vector<bool>& mask) {
  const std::size_t count = detail::checked_train_count(z.rows(), labels, mask, z.cols());
  LossAndGrad out{0, DenseMatrix(z.rows(), z.cols())};
  const Real inv = 1.0 / static_cast<Real>(count);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (!mask[i]) continue;
    const auto y = static_cast<std::size_t>(labels[i]);
    out.loss -= std::log(std::max(z(i, y), Real{1e-300}));
    auto g = out.grad.row(i);
    auto zr = z.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = zr[j] * inv;
    g[y] -= inv;
  }
  out.loss *= inv;
  return out;
}

/// Same loss computed directly from logits with log-sum-exp.
inline LossAndGrad softmax_cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                                         const std::vector<bool>& mask) {
  const std::size_t count = detail::checked_train_count(logits.rows(), labels, mask, logits.cols());
  LossAndGrad out{0, DenseMatrix(logits.rows(), logits.cols())};
  const Real inv = 1.0 / static_cast<Real>(count);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    auto h = logits.row(i);
    const Real mx = *std::max_element(h.begin(), h.end());
    Real sum = 0;
    for (Real v : h) sum += std::exp(v - mx);
    const Real lse = mx + std::log(sum);
    const auto y = static_cast<std::size_t>(labels[i]);
    out.loss += lse - h[y];
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = std::exp(h[j] - lse) * inv;
    g[y] -= inv;
  }
  out.loss *= inv;
  return out;
}

// ---------------------------------------------------------------------------
// Row standardization
// ---------------------------------------------------------------------------

/// Each row → (row - mean) / population std. Rows whose std is below 1e-8
/// become all zero.
inline DenseMatrix row_standardize(const DenseMatrix& x) {
  DenseMatrix out(x.rows(), x.cols());
  if (x.cols() == 0) return out;
  const Real d = static_cast<Real>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    Real mean = 0;
    for (Real v : in) mean += v;
    mean /= d;
    Real var = 0;
    for (Real v : in) var += (v - mean) * (v - mean);
    const Real sd = std::sqrt(var / d);
    if (sd < 1e-8) continue;
    auto o = out.row(r);
    for (std::size_t j = 0; j < in.size(); ++j) o[j] = (in[j] - mean) / sd;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters and Adam
// ---------------------------------------------------------------------------

struct Parameter {
  DenseMatrix value;
  DenseMatrix gradient;
  DenseMatrix adam_m;
  DenseMatrix adam_v;
  std::size_t step_count = 0;

  Parameter() = default;
  explicit Parameter(DenseMatrix v)
      : value(std::move(v)),
        gradient(value.rows(), value.cols()),
        adam_m(value.rows(), value.cols()),
        adam_v(value.rows(), value.cols()) {}

  void zero_grad() { gradient.set_zero(); }
};

/// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline DenseMatrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  DenseMatrix w(fan_in, fan_out);
  const Real a = std::sqrt(6.0 / static_cast<Real>(fan_in + fan_out));
  for (Real& v : w.values()) v = (2 * uniform01(rng) - 1) * a;
  return w;
}

struct AdamConfig {
  Real learning_rate = 0.01;
  Real weight_decay = 5e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;

  void validate() const {
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ConfigError("adam: betas must lie in (0, 1)");
    if (!(epsilon > 0)) throw ConfigError("adam: epsilon must be positive");
    if (learning_rate < 0 || weight_decay < 0) throw ConfigError("adam: learning rate and weight decay must be >= 0");
  }
};

/// One bias-corrected Adam update. Weight decay is an L2 term folded into the
/// gradient before the moment updates.
inline void adam_step(Parameter& p, const AdamConfig& cfg) {
  ++p.step_count;
  const Real bc1 = 1 - std::pow(cfg.beta1, static_cast<Real>(p.step_count));
  const Real bc2 = 1 - std::pow(cfg.beta2, static_cast<Real>(p.step_count));
  auto w = p.value.values();
  auto g = p.gradient.values();
  auto m = p.adam_m.values();
  auto v = p.adam_v.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Real gi = g[i] + cfg.weight_decay * w[i];
    m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * gi * gi;
    const Real m_hat = m[i] / bc1;
    const Real v_hat = v[i] / bc2;
    w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// A value tensor paired with its analytic gradient.
struct GradientSlot {
  DenseMatrix* value;
  const DenseMatrix* analytic;
};

/// Central-difference check of analytic gradients. `loss_fn` must be
/// deterministic and read the current contents of the slots. Returns the max
/// of |a - n| / max(|a|, |n|, 1e-8) over the checked coordinates; when
/// `max_coords_per_slot` is nonzero a random subset of that size is checked.
inline Real finite_difference_check(const std::function<Real()>& loss_fn, std::span<const GradientSlot> slots, Real h,
                                    std::size_t max_coords_per_slot = 0, std::uint64_t seed = 0) {
  Rng rng = make_rng(seed, {0xfdc});
  Real worst = 0;
  for (const auto& slot : slots) {
    if (!slot.value->same_shape(*slot.analytic)) throw ShapeError("finite_difference_check: gradient shape mismatch");
    auto vals = slot.value->values();
    std::vector<std::size_t> coords(vals.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_coords_per_slot && coords.size() > max_coords_per_slot) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_slot);
    }
    for (std::size_t i : coords) {
      const Real orig = vals[i];
      vals[i] = orig + h;
      const Real up = loss_fn();
      vals[i] = orig - h;
      const Real down = loss_fn();
      vals[i] = orig;
      const Real numeric = (up - down) / (2 * h);
      const Real analytic = slot.analytic->values()[i];
      const Real denom = std::max({std::abs(analytic), std::abs(numeric), Real{1e-8}});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

/// Convenience overload for parameters whose `gradient` already holds the
/// analytic result at the current values.
inline Real finite_difference_check(const std::function<Real()>& loss_fn, std::span<Parameter* const> params, Real h,
                                    std::size_t max_coords_per_slot = 0, std::uint64_t seed = 0) {
  std::vector<DenseMatrix> frozen;
  frozen.reserve(params.size());
  for (auto* p : params) frozen.push_back(p->gradient);
  std::vector<GradientSlot> slots;
  for (std::size_t i = 0; i < params.size(); ++i) slots.push_back({&params[i]->value, &frozen[i]});
  return finite_difference_check(loss_fn, std::span<const GradientSlot>(slots), h, max_coords_per_slot, seed);
}

/// Index of the largest entry in each row (first one on ties).
inline std::vector<int> argmax_rows(const DenseMatrix& h) {
  std::vector<int> out(h.rows(), 0);
  for (std::size_t r = 0; r < h.rows(); ++r) {
    auto row = h.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace ggnn
