#pragma once

// Differentiable training objectives for the dual-network framework: the
// evidential loss family on Dirichlet parameters, soft dice, cross-entropy,
// and the masked consistency terms. Every loss is a mean over batch and
// pixels and ships an analytic gradient (verified against finite differences
// in the test suite).

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>

#include "evil/evidential.hpp"
#include "evil/schedules.hpp"
#include "evil/tensor.hpp"

namespace evil {

inline double psi(double x) { return boost::math::digamma(x); }
inline double psi1(double x) { return boost::math::trigamma(x); }

template <typename T>
Tensor<T> one_hot(const IntGrid& labels, int64_t num_classes) {
  if (labels.c() != 1) throw std::invalid_argument("one_hot: labels must be [n,1,h,w]");
  Tensor<T> y(labels.n(), num_classes, labels.h(), labels.w());
  const int64_t hw = labels.pixels();
  for (int64_t in = 0; in < labels.n(); ++in)
    for (int64_t p = 0; p < hw; ++p) {
      const int32_t cls = labels.v[in * hw + p];
      if (cls < 0 || cls >= num_classes)
        throw std::invalid_argument("one_hot: label " + std::to_string(cls) +
                                    " outside [0," + std::to_string(num_classes) + ")");
      y.v[(in * num_classes + cls) * hw + p] = T(1);
    }
  return y;
}

template <typename T>
void require_one_hot(const Tensor<T>& y, const char* what) {
  const int64_t k = y.c(), hw = y.pixels();
  for (int64_t in = 0; in < y.n(); ++in)
    for (int64_t p = 0; p < hw; ++p) {
      T s = T(0);
      for (int64_t ic = 0; ic < k; ++ic) {
        const T x = y.v[(in * k + ic) * hw + p];
        if (x != T(0) && x != T(1))
          throw std::invalid_argument(std::string(what) + ": labels not one-hot");
        s += x;
      }
      if (s != T(1))
        throw std::invalid_argument(std::string(what) + ": labels not one-hot");
    }
}

// L_dig = mean_i sum_k y_ik (psi(S_i) - psi(alpha_ik)).
// dalpha, when given, is overwritten with dL/dalpha.
template <typename T>
T digamma_loss(const DirichletParams<T>& dp, const Tensor<T>& y,
               Tensor<T>* dalpha = nullptr) {
  require_same_shape(dp.alpha, y, "digamma_loss");
  require_one_hot(y, "digamma_loss");
  const int64_t n = y.n(), k = y.c(), hw = y.pixels();
  const double inv = 1.0 / static_cast<double>(n * hw);
  if (dalpha) {
    *dalpha = Tensor<T>(n, k, y.h(), y.w());
  }
  double loss = 0.0;
  for (int64_t in = 0; in < n; ++in)
    for (int64_t p = 0; p < hw; ++p) {
      const double s = dp.strength.v[in * hw + p];
      const double psi_s = psi(s);
      const double psi1_s = dalpha ? psi1(s) : 0.0;
      for (int64_t ic = 0; ic < k; ++ic) {
        const int64_t idx = (in * k + ic) * hw + p;
        const double a = dp.alpha.v[idx];
        const double yk = y.v[idx];
        if (yk != 0.0) loss += yk * (psi_s - psi(a));
        if (dalpha)
          dalpha->v[idx] = static_cast<T>((psi1_s - yk * psi1(a)) * inv);
      }
    }
  return static_cast<T>(loss * inv);
}

// alpha~ = y + (1 - y) .* alpha: the true-class concentration is clamped to 1.
template <typename T>
Tensor<T> make_alpha_tilde(const Tensor<T>& alpha, const Tensor<T>& y) {
  require_same_shape(alpha, y, "make_alpha_tilde");
  require_one_hot(y, "make_alpha_tilde");
  Tensor<T> at = alpha;
  for (int64_t i = 0; i < at.numel(); ++i)
    at.v[i] = y.v[i] + (T(1) - y.v[i]) * alpha.v[i];
  return at;
}

// KL[ Dir(alpha~) || Dir(1) ], mean over pixels. Zero iff alpha~ = 1.
template <typename T>
T kl_to_uniform(const Tensor<T>& alpha_tilde, Tensor<T>* dalpha_tilde = nullptr) {
  const int64_t n = alpha_tilde.n(), k = alpha_tilde.c(), hw = alpha_tilde.pixels();
  if (k < 2) throw std::invalid_argument("kl_to_uniform: need K >= 2");
  for (const T& a : alpha_tilde.v)
    if (!(static_cast<double>(a) >= 1.0 - 1e-6))
      throw std::invalid_argument("kl_to_uniform: concentration entries must be >= 1");
  const double inv = 1.0 / static_cast<double>(n * hw);
  if (dalpha_tilde) *dalpha_tilde = Tensor<T>(n, k, alpha_tilde.h(), alpha_tilde.w());
  const double lgamma_k = std::lgamma(static_cast<double>(k));
  double loss = 0.0;
  for (int64_t in = 0; in < n; ++in)
    for (int64_t p = 0; p < hw; ++p) {
      double s = 0.0;
      for (int64_t ic = 0; ic < k; ++ic)
        s += alpha_tilde.v[(in * k + ic) * hw + p];
      const double psi_s = psi(s);
      double kl = std::lgamma(s) - lgamma_k;
      for (int64_t ic = 0; ic < k; ++ic) {
        const int64_t idx = (in * k + ic) * hw + p;
        const double a = alpha_tilde.v[idx];
        kl -= std::lgamma(a);
        kl += (a - 1.0) * (psi(a) - psi_s);
      }
      loss += kl;
      if (dalpha_tilde) {
        const double psi1_s = psi1(s);
        for (int64_t ic = 0; ic < k; ++ic) {
          const int64_t idx = (in * k + ic) * hw + p;
          const double a = alpha_tilde.v[idx];
          dalpha_tilde->v[idx] =
              static_cast<T>(((a - 1.0) * psi1(a) - (s - k) * psi1_s) * inv);
        }
      }
    }
  return static_cast<T>(loss * inv);
}

// L_evi = L_dig + beta * KL(alpha~). dalpha accumulates both terms.
template <typename T>
T evidential_loss(const DirichletParams<T>& dp, const Tensor<T>& y, T beta,
                  Tensor<T>* dalpha = nullptr) {
  if (!(beta >= T(0) && beta <= T(1)))
    throw std::invalid_argument("evidential_loss: beta must be in [0,1]");
  const T dig = digamma_loss(dp, y, dalpha);
  Tensor<T> at = make_alpha_tilde(dp.alpha, y);
  Tensor<T> dat;
  const T kl = kl_to_uniform(at, dalpha ? &dat : nullptr);
  if (dalpha)
    for (int64_t i = 0; i < dalpha->numel(); ++i)
      dalpha->v[i] += beta * (T(1) - y.v[i]) * dat.v[i];
  return dig + beta * kl;
}

// Per-class soft dice over the pooled spatial+batch domain, mean over all K
// classes: loss = 1 - mean_k (2*sum(y_k p_k) + eps) / (sum y_k + sum p_k + eps).
template <typename T>
T soft_dice_loss(const Tensor<T>& probs, const Tensor<T>& y,
                 T smooth = T(1e-5), Tensor<T>* dprobs = nullptr) {
  require_same_shape(probs, y, "soft_dice_loss");
  const int64_t n = probs.n(), k = probs.c(), hw = probs.pixels();
  if (n * hw == 0) throw std::invalid_argument("soft_dice_loss: empty spatial domain");
  if (dprobs) *dprobs = Tensor<T>(n, k, y.h(), y.w());
  double mean_dice = 0.0;
  for (int64_t ic = 0; ic < k; ++ic) {
    double inter = 0.0, ysum = 0.0, psum = 0.0;
    for (int64_t in = 0; in < n; ++in)
      for (int64_t p = 0; p < hw; ++p) {
        const int64_t idx = (in * k + ic) * hw + p;
        inter += static_cast<double>(probs.v[idx]) * y.v[idx];
        ysum += y.v[idx];
        psum += probs.v[idx];
      }
    const double num = 2.0 * inter + smooth;
    const double den = ysum + psum + smooth;
    mean_dice += num / den;
    if (dprobs) {
      // d(num/den)/dp = (2 y den - num) / den^2; loss carries -1/K
      const double c = -1.0 / static_cast<double>(k);
      for (int64_t in = 0; in < n; ++in)
        for (int64_t p = 0; p < hw; ++p) {
          const int64_t idx = (in * k + ic) * hw + p;
          dprobs->v[idx] = static_cast<T>(
              c * (2.0 * y.v[idx] * den - num) / (den * den));
        }
    }
  }
  return static_cast<T>(1.0 - mean_dice / static_cast<double>(k));
}

namespace detail {

// p = softmax(x) per pixel over the channel axis
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
  Tensor<T> p = x;
  const int64_t n = x.n(), k = x.c(), hw = x.pixels();
  for (int64_t in = 0; in < n; ++in)
    for (int64_t px = 0; px < hw; ++px) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t ic = 0; ic < k; ++ic)
        mx = std::max(mx, static_cast<double>(x.v[(in * k + ic) * hw + px]));
      double z = 0.0;
      for (int64_t ic = 0; ic < k; ++ic)
        z += std::exp(static_cast<double>(x.v[(in * k + ic) * hw + px]) - mx);
      for (int64_t ic = 0; ic < k; ++ic) {
        const int64_t idx = (in * k + ic) * hw + px;
        p.v[idx] = static_cast<T>(std::exp(static_cast<double>(x.v[idx]) - mx) / z);
      }
    }
  return p;
}

// dL/dx_k = p_k (dL/dp_k - sum_j p_j dL/dp_j), accumulated into dx
template <typename T>
void softmax_backward(const Tensor<T>& p, const Tensor<T>& dp, Tensor<T>& dx) {
  const int64_t n = p.n(), k = p.c(), hw = p.pixels();
  for (int64_t in = 0; in < n; ++in)
    for (int64_t px = 0; px < hw; ++px) {
      double dot = 0.0;
      for (int64_t ic = 0; ic < k; ++ic) {
        const int64_t idx = (in * k + ic) * hw + px;
        dot += static_cast<double>(p.v[idx]) * dp.v[idx];
      }
      for (int64_t ic = 0; ic < k; ++ic) {
        const int64_t idx = (in * k + ic) * hw + px;
        dx.v[idx] += static_cast<T>(p.v[idx] * (dp.v[idx] - dot));
      }
    }
}

}  // namespace detail

// The certain-part loss: p_hat = softmax(belief) per pixel, then soft dice.
// dalpha, when given, is overwritten with dL/dalpha.
template <typename T>
T certain_dice_loss(const DirichletParams<T>& dp, const Tensor<T>& y,
                    Tensor<T>* dalpha = nullptr) {
  require_same_shape(dp.belief, y, "certain_dice_loss");
  require_one_hot(y, "certain_dice_loss");
  Tensor<T> p_hat = detail::softmax_channels(dp.belief);
  Tensor<T> dphat;
  const T loss = soft_dice_loss(p_hat, y, T(1e-5), dalpha ? &dphat : nullptr);
  if (!dalpha) return loss;
  const int64_t n = y.n(), k = y.c(), hw = y.pixels();
  Tensor<T> db(n, k, y.h(), y.w());
  detail::softmax_backward(p_hat, dphat, db);
  // b_j = (alpha_j - 1)/S: dL/dalpha_j = db_j / S - (sum_k db_k b_k) / S
  *dalpha = Tensor<T>(n, k, y.h(), y.w());
  for (int64_t in = 0; in < n; ++in)
    for (int64_t px = 0; px < hw; ++px) {
      const double s = dp.strength.v[in * hw + px];
      double dot = 0.0;
      for (int64_t ic = 0; ic < k; ++ic) {
        const int64_t idx = (in * k + ic) * hw + px;
        dot += static_cast<double>(db.v[idx]) * dp.belief.v[idx];
      }
      for (int64_t ic = 0; ic < k; ++ic) {
        const int64_t idx = (in * k + ic) * hw + px;
        dalpha->v[idx] = static_cast<T>((db.v[idx] - dot) / s);
      }
    }
  return loss;
}

// L_Eseg = L_evi(beta) + gamma * L_certain, gradients w.r.t. alpha.
template <typename T>
T eseg_loss(const DirichletParams<T>& dp, const Tensor<T>& y,
            const ScheduleState& sch, Tensor<T>* dalpha = nullptr) {
  Tensor<T> d_certain;
  const T evi = evidential_loss(dp, y, static_cast<T>(sch.beta), dalpha);
  const T certain =
      certain_dice_loss(dp, y, dalpha ? &d_certain : nullptr);
  if (dalpha)
    for (int64_t i = 0; i < dalpha->numel(); ++i)
      dalpha->v[i] += static_cast<T>(sch.gamma) * d_certain.v[i];
  return evi + static_cast<T>(sch.gamma) * certain;
}

// Full chain from E-Net logits; accumulates dL/dlogits (alpha = e + 1, so
// dL/de = dL/dalpha).
template <typename T>
T eseg_loss_from_logits(const Tensor<T>& logits, T tau, const Tensor<T>& y,
                        const ScheduleState& sch, Tensor<T>* dlogits = nullptr) {
  EvidenceMap<T> ev = evidence_from_logits(logits, tau);
  DirichletParams<T> dp = belief_and_uncertainty(ev);
  Tensor<T> dalpha;
  const T loss = eseg_loss(dp, y, sch, dlogits ? &dalpha : nullptr);
  if (dlogits) evidence_backward(logits, tau, dalpha, *dlogits);
  return loss;
}

template <typename T>
T evidential_loss_from_logits(const Tensor<T>& logits, T tau, const Tensor<T>& y,
                              T beta, Tensor<T>* dlogits = nullptr) {
  EvidenceMap<T> ev = evidence_from_logits(logits, tau);
  DirichletParams<T> dp = belief_and_uncertainty(ev);
  Tensor<T> dalpha;
  const T loss = evidential_loss(dp, y, beta, dlogits ? &dalpha : nullptr);
  if (dlogits) evidence_backward(logits, tau, dalpha, *dlogits);
  return loss;
}

// L_Sseg = 0.5 * (cross-entropy + soft dice) on softmax probabilities.
template <typename T>
T sseg_loss(const Tensor<T>& logits, const Tensor<T>& y,
            Tensor<T>* dlogits = nullptr) {
  require_same_shape(logits, y, "sseg_loss");
  require_one_hot(y, "sseg_loss");
  const int64_t n = logits.n(), k = logits.c(), hw = logits.pixels();
  if (n * hw == 0) throw std::invalid_argument("sseg_loss: empty spatial domain");
  Tensor<T> q = detail::softmax_channels(logits);
  const double inv = 1.0 / static_cast<double>(n * hw);

  // cross-entropy via logsumexp for stability
  double ce = 0.0;
  for (int64_t in = 0; in < n; ++in)
    for (int64_t px = 0; px < hw; ++px) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t ic = 0; ic < k; ++ic)
        mx = std::max(mx, static_cast<double>(logits.v[(in * k + ic) * hw + px]));
      double z = 0.0, zt = 0.0;
      for (int64_t ic = 0; ic < k; ++ic) {
        const int64_t idx = (in * k + ic) * hw + px;
        z += std::exp(static_cast<double>(logits.v[idx]) - mx);
        zt += y.v[idx] * static_cast<double>(logits.v[idx]);
      }
      ce += std::log(z) + mx - zt;
    }
  ce *= inv;

  Tensor<T> dq;
  const T dice = soft_dice_loss(q, y, T(1e-5), dlogits ? &dq : nullptr);

  if (dlogits) {
    // dCE/dz = (q - y)/N, times the 0.5 weight
    for (int64_t i = 0; i < logits.numel(); ++i)
      dlogits->v[i] += static_cast<T>(0.5 * inv * (q.v[i] - y.v[i]));
    for (int64_t i = 0; i < dq.numel(); ++i) dq.v[i] *= T(0.5);
    detail::softmax_backward(q, dq, *dlogits);
  }
  return static_cast<T>(0.5 * (ce + static_cast<double>(dice)));
}

// Cross-entropy averaged over pixels where mask = 1; zero for an empty mask.
template <typename T>
T masked_cross_entropy(const Tensor<T>& logits, const IntGrid& pseudo,
                       const ByteGrid& mask, Tensor<T>* dlogits = nullptr) {
  const int64_t n = logits.n(), k = logits.c(), hw = logits.pixels();
  if (pseudo.n() != n || pseudo.c() != 1 || pseudo.pixels() != hw)
    throw std::invalid_argument("masked_cross_entropy: pseudo-label shape mismatch");
  if (mask.n() != n || mask.c() != 1 || mask.pixels() != hw)
    throw std::invalid_argument("masked_cross_entropy: mask shape mismatch");
  int64_t count = 0;
  for (uint8_t m : mask.v) {
    if (m > 1) throw std::invalid_argument("masked_cross_entropy: mask must be binary");
    count += m;
  }
  if (count == 0) return T(0);
  const double inv = 1.0 / static_cast<double>(count);
  Tensor<T> q = detail::softmax_channels(logits);
  double ce = 0.0;
  for (int64_t in = 0; in < n; ++in)
    for (int64_t px = 0; px < hw; ++px) {
      if (!mask.v[in * hw + px]) continue;
      const int32_t cls = pseudo.v[in * hw + px];
      if (cls < 0 || cls >= k)
        throw std::invalid_argument("masked_cross_entropy: pseudo label outside [0,K)");
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t ic = 0; ic < k; ++ic)
        mx = std::max(mx, static_cast<double>(logits.v[(in * k + ic) * hw + px]));
      double z = 0.0;
      for (int64_t ic = 0; ic < k; ++ic)
        z += std::exp(static_cast<double>(logits.v[(in * k + ic) * hw + px]) - mx);
      ce += std::log(z) + mx - static_cast<double>(logits.v[(in * k + cls) * hw + px]);
      if (dlogits)
        for (int64_t ic = 0; ic < k; ++ic) {
          const int64_t idx = (in * k + ic) * hw + px;
          const double yk = (ic == cls) ? 1.0 : 0.0;
          dlogits->v[idx] += static_cast<T>(inv * (q.v[idx] - yk));
        }
    }
  return static_cast<T>(ce * inv);
}

// L_con = L_evi(alpha1, onehot(Y2), beta) + L_ce(logits2, M .* Y1). Pseudo
// labels enter as integer grids, so no gradient can flow into them.
template <typename T>
T consistency_loss(const DirichletParams<T>& dp1, const Tensor<T>& logits2,
                   const IntGrid& pseudo1, const IntGrid& pseudo2,
                   const ByteGrid& mask, T beta) {
  Tensor<T> y2 = one_hot<T>(pseudo2, dp1.alpha.c());
  return evidential_loss(dp1, y2, beta) +
         masked_cross_entropy(logits2, pseudo1, mask);
}

// argmax over the channel axis
template <typename T>
IntGrid channel_argmax(const Tensor<T>& x) {
  IntGrid out(x.n(), 1, x.h(), x.w());
  const int64_t n = x.n(), k = x.c(), hw = x.pixels();
  for (int64_t in = 0; in < n; ++in)
    for (int64_t px = 0; px < hw; ++px) {
      int32_t best = 0;
      T best_v = x.v[(in * k + 0) * hw + px];
      for (int64_t ic = 1; ic < k; ++ic) {
        const T v = x.v[(in * k + ic) * hw + px];
        if (v > best_v) {
          best_v = v;
          best = static_cast<int32_t>(ic);
        }
      }
      out.v[in * hw + px] = best;
    }
  return out;
}

// M = 1 where u < threshold
template <typename T>
ByteGrid uncertainty_mask(const Tensor<T>& uncertainty, T threshold) {
  ByteGrid m(uncertainty.n(), 1, uncertainty.h(), uncertainty.w());
  for (int64_t i = 0; i < uncertainty.numel(); ++i)
    m.v[i] = uncertainty.v[i] < threshold ? 1 : 0;
  return m;
}

}  // namespace evil
