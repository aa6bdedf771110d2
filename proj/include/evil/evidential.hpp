#pragma once

// Subjective-logic core: evidence transform, Dirichlet belief/uncertainty
// decomposition, Dirichlet density and sampling. Pure functions, no training
// state.

#include <cmath>
#include <limits>
#include <vector>

#include "evil/rng.hpp"
#include "evil/tensor.hpp"

namespace evil {

template <typename T>
struct EvidenceMap {
  Tensor<T> values;  // [n,K,h,w], nonnegative
  T tau = T(0);      // scaling parameter in (0,1)
};

template <typename T>
struct DirichletParams {
  Tensor<T> alpha;        // [n,K,h,w], entries >= 1
  Tensor<T> strength;     // [n,1,h,w], S = sum_k alpha_k
  Tensor<T> belief;       // [n,K,h,w], b_k = (alpha_k - 1) / S
  Tensor<T> uncertainty;  // [n,1,h,w], u = K / S
};

using SimplexPoint = std::vector<double>;

inline double default_tau(int64_t num_classes) {
  return 1.0 / static_cast<double>(num_classes);
}

// e = exp(tanh(z) / tau), elementwise. Bounded in [exp(-1/tau), exp(1/tau)].
template <typename T>
EvidenceMap<T> evidence_from_logits(const Tensor<T>& logits, T tau) {
  if (!(tau > T(0) && tau < T(1)))
    throw std::invalid_argument("evidence_from_logits: tau must be in (0,1)");
  if (logits.c() < 2)
    throw std::invalid_argument("evidence_from_logits: need K >= 2 classes");
  if (!logits.all_finite())
    throw std::invalid_argument("evidence_from_logits: non-finite logits");
  EvidenceMap<T> out;
  out.tau = tau;
  out.values = logits;
  for (T& x : out.values.v) x = std::exp(std::tanh(x) / tau);
  return out;
}

// Chain rule through the evidence transform:
// de/dz = e * (1 - tanh(z)^2) / tau. Accumulates into dlogits.
template <typename T>
void evidence_backward(const Tensor<T>& logits, T tau,
                       const Tensor<T>& devidence, Tensor<T>& dlogits) {
  require_same_shape(logits, devidence, "evidence_backward");
  require_same_shape(logits, dlogits, "evidence_backward");
  const int64_t n = logits.numel();
  for (int64_t i = 0; i < n; ++i) {
    const T th = std::tanh(logits.v[i]);
    const T e = std::exp(th / tau);
    dlogits.v[i] += devidence.v[i] * e * (T(1) - th * th) / tau;
  }
}

// alpha = e + 1, S = sum alpha, b_k = e_k / S, u = K / S.
template <typename T>
DirichletParams<T> belief_and_uncertainty(const EvidenceMap<T>& ev) {
  const Tensor<T>& e = ev.values;
  for (const T& x : e.v)
    if (!(x >= T(0)))
      throw std::invalid_argument("belief_and_uncertainty: negative evidence");
  const int64_t n = e.n(), k = e.c(), h = e.h(), w = e.w();
  DirichletParams<T> dp;
  dp.alpha = e;
  for (T& x : dp.alpha.v) x += T(1);
  dp.strength = Tensor<T>(n, 1, h, w);
  dp.belief = Tensor<T>(n, k, h, w);
  dp.uncertainty = Tensor<T>(n, 1, h, w);
  const int64_t hw = h * w;
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t p = 0; p < hw; ++p) {
      T s = T(0);
      for (int64_t ic = 0; ic < k; ++ic)
        s += dp.alpha.v[(in * k + ic) * hw + p];
      dp.strength.v[in * hw + p] = s;
      dp.uncertainty.v[in * hw + p] = static_cast<T>(k) / s;
      for (int64_t ic = 0; ic < k; ++ic)
        dp.belief.v[(in * k + ic) * hw + p] =
            (dp.alpha.v[(in * k + ic) * hw + p] - T(1)) / s;
    }
  }
  return dp;
}

namespace detail {
constexpr double kSimplexSumTol = 1e-9;
constexpr double kSimplexNegTol = -1e-12;
}  // namespace detail

inline bool on_simplex(const SimplexPoint& p) {
  double s = 0.0;
  for (double x : p) {
    if (x < detail::kSimplexNegTol) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= detail::kSimplexSumTol;
}

// Dirichlet density D(p | alpha). Zero off the simplex. At a boundary point
// p_k = 0: the factor is 1 when alpha_k = 1, 0 when alpha_k > 1, and the
// density diverges when alpha_k < 1 (returned as +infinity).
inline double dirichlet_pdf(const SimplexPoint& p,
                            const std::vector<double>& alpha) {
  if (p.size() != alpha.size())
    throw std::invalid_argument("dirichlet_pdf: dimension mismatch");
  if (alpha.size() < 2)
    throw std::invalid_argument("dirichlet_pdf: need K >= 2");
  for (double a : alpha)
    if (!(a > 0.0))
      throw std::invalid_argument("dirichlet_pdf: alpha entries must be > 0");
  if (!on_simplex(p)) return 0.0;
  double log_b = 0.0;  // log multinomial beta
  double a_sum = 0.0;
  for (double a : alpha) {
    log_b += std::lgamma(a);
    a_sum += a;
  }
  log_b -= std::lgamma(a_sum);
  double log_num = 0.0;
  for (size_t k = 0; k < p.size(); ++k) {
    const double pk = std::max(p[k], 0.0);
    const double ex = alpha[k] - 1.0;
    if (pk == 0.0) {
      if (ex > 0.0) return 0.0;
      if (ex < 0.0) return std::numeric_limits<double>::infinity();
      // alpha_k == 1: p^0 = 1
    } else {
      log_num += ex * std::log(pk);
    }
  }
  return std::exp(log_num - log_b);
}

// n independent draws from Dir(alpha) via normalized Gamma variates.
inline std::vector<SimplexPoint> sample_dirichlet(
    const std::vector<double>& alpha, int64_t n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_dirichlet: n must be >= 1");
  for (double a : alpha)
    if (!(a > 0.0))
      throw std::invalid_argument("sample_dirichlet: alpha entries must be > 0");
  Rng rng(seed);
  std::vector<SimplexPoint> draws(static_cast<size_t>(n));
  for (auto& p : draws) {
    p.resize(alpha.size());
    double s = 0.0;
    for (size_t k = 0; k < alpha.size(); ++k) {
      p[k] = rng.gamma(alpha[k]);
      s += p[k];
    }
    for (double& x : p) x /= s;
  }
  return draws;
}

}  // namespace evil
