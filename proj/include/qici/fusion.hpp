#pragma once

// Track-to-track fusion of (mean, covariance) pairs under unknown
// cross-correlation: covariance intersection (CI) and inverse covariance
// intersection (ICI), for two or many estimates of a fixed dimension D.

#include "qici/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace qici {

template <int D>
struct VectorEstimate {
  Vec<D> x = Vec<D>::Zero();
  Mat<D> P = Mat<D>::Identity();
};

/// Throws std::invalid_argument unless P is symmetric (1e-10, scaled) and
/// Cholesky-factorizable.
template <int D>
void validate(const VectorEstimate<D>& e) {
  if (!e.x.allFinite() || !e.P.allFinite()) {
    throw std::invalid_argument("estimate has non-finite entries");
  }
  const double scale = std::max(1.0, e.P.cwiseAbs().maxCoeff());
  if (asymmetry(e.P) > 1e-10 * scale) {
    throw std::invalid_argument("covariance is not symmetric");
  }
}

enum class FusionRule { CI, ICI };

class FusionWeights {
 public:
  FusionWeights() = default;

  /// Validates each weight in [0, 1] and sum == 1 within 1e-12.
  explicit FusionWeights(std::vector<double> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.empty()) throw std::invalid_argument("fusion weights are empty");
    double sum = 0.0;
    for (double a : alpha_) {
      if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("fusion weight outside [0, 1]");
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("fusion weights do not sum to 1");
  }

  std::size_t size() const { return alpha_.size(); }
  double operator[](std::size_t i) const { return alpha_[i]; }
  const std::vector<double>& values() const { return alpha_; }

 private:
  std::vector<double> alpha_;
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha outside [0, 1]");
}

template <int D>
VectorEstimate<D> finish(const Mat<D>& info, const Vec<D>& info_vec) {
  Mat<D> P;
  try {
    P = spd_inverse(info, "fused information matrix");
  } catch (const FactorizationError& e) {
    throw FusionDegeneracyError(e.what());
  }
  VectorEstimate<D> out;
  out.P = P;
  out.x = P * info_vec;
  return out;
}

}  // namespace detail

/// Weights proportional to 1/trace(P_i), normalized to sum to one.
template <int D>
FusionWeights trace_weights(std::span<const Mat<D>> covariances) {
  if (covariances.empty()) throw std::invalid_argument("trace_weights needs at least one matrix");
  std::vector<double> w;
  w.reserve(covariances.size());
  double total = 0.0;
  for (const auto& P : covariances) {
    const double tr = P.trace();
    if (!(tr > 0.0) || !std::isfinite(tr)) {
      throw std::invalid_argument("covariance trace must be positive");
    }
    w.push_back(1.0 / tr);
    total += 1.0 / tr;
  }
  for (double& a : w) a /= total;
  // Force an exact unit sum so FusionWeights' 1e-12 check cannot trip on
  // accumulated rounding for long lists.
  const double drift = 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
  *std::max_element(w.begin(), w.end()) += drift;
  return FusionWeights(std::move(w));
}

template <int D>
FusionWeights trace_weights(const std::vector<Mat<D>>& covariances) {
  return trace_weights<D>(std::span<const Mat<D>>(covariances));
}

/// CI: P^-1 = a P1^-1 + (1-a) P2^-1, P^-1 x = a P1^-1 x1 + (1-a) P2^-1 x2.
template <int D>
VectorEstimate<D> ci_fuse_two(const VectorEstimate<D>& e1, const VectorEstimate<D>& e2,
                              double alpha) {
  detail::check_alpha(alpha);
  validate(e1);
  validate(e2);
  if (alpha == 1.0) return e1;
  if (alpha == 0.0) return e2;
  const Mat<D> I1 = spd_inverse(e1.P, "P1");
  const Mat<D> I2 = spd_inverse(e2.P, "P2");
  return detail::finish<D>(alpha * I1 + (1.0 - alpha) * I2,
                           alpha * I1 * e1.x + (1.0 - alpha) * I2 * e2.x);
}

/// ICI: P^-1 = P1^-1 + P2^-1 - (a P1 + (1-a) P2)^-1 with gains
/// K1 = P1^-1 - a G, K2 = P2^-1 - (1-a) G, G = (a P1 + (1-a) P2)^-1.
template <int D>
VectorEstimate<D> ici_fuse_two(const VectorEstimate<D>& e1, const VectorEstimate<D>& e2,
                               double alpha) {
  detail::check_alpha(alpha);
  validate(e1);
  validate(e2);
  const Mat<D> I1 = spd_inverse(e1.P, "P1");
  const Mat<D> I2 = spd_inverse(e2.P, "P2");
  const Mat<D> G = spd_inverse(Mat<D>(alpha * e1.P + (1.0 - alpha) * e2.P), "P_beta");
  const Mat<D> K1 = I1 - alpha * G;
  const Mat<D> K2 = I2 - (1.0 - alpha) * G;
  return detail::finish<D>(I1 + I2 - G, K1 * e1.x + K2 * e2.x);
}

/// Multi-estimate ICI with caller-supplied information matrices P_i^-1.
///
/// P = [sum P_i^-1 - (n-1) B]^-1, x = P sum (P_i^-1 - (n-1) a_i B) x_i,
/// B = (sum a_i P_i)^-1.
template <int D>
VectorEstimate<D> ici_fuse_multi(std::span<const VectorEstimate<D>> estimates,
                                 std::span<const Mat<D>> informations,
                                 const FusionWeights& weights) {
  const std::size_t n = estimates.size();
  if (n == 0) throw std::invalid_argument("ici_fuse_multi needs at least one estimate");
  if (informations.size() != n || weights.size() != n) {
    throw std::invalid_argument("estimate, information and weight counts differ");
  }
  if (n == 1) return estimates[0];

  Mat<D> p_beta = Mat<D>::Zero();
  for (std::size_t i = 0; i < n; ++i) p_beta += weights[i] * estimates[i].P;
  const Mat<D> B = spd_inverse(p_beta, "P_beta");
  const double m = static_cast<double>(n - 1);

  Mat<D> info = -m * B;
  Vec<D> info_vec = Vec<D>::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    info += informations[i];
    info_vec += informations[i] * estimates[i].x - (m * weights[i]) * (B * estimates[i].x);
  }
  return detail::finish<D>(info, info_vec);
}

template <int D>
VectorEstimate<D> ici_fuse_multi(std::span<const VectorEstimate<D>> estimates,
                                 const FusionWeights& weights) {
  if (estimates.empty()) throw std::invalid_argument("ici_fuse_multi needs at least one estimate");
  for (const auto& e : estimates) validate(e);
  if (estimates.size() == 1) return estimates[0];
  std::vector<Mat<D>> infos;
  infos.reserve(estimates.size());
  for (const auto& e : estimates) infos.push_back(spd_inverse(e.P, "P_i"));
  return ici_fuse_multi<D>(estimates, infos, weights);
}

/// Multi-estimate CI with caller-supplied information matrices:
/// P = [sum a_i P_i^-1]^-1, x = P sum a_i P_i^-1 x_i.
template <int D>
VectorEstimate<D> ci_fuse_multi(std::span<const VectorEstimate<D>> estimates,
                                std::span<const Mat<D>> informations,
                                const FusionWeights& weights) {
  const std::size_t n = estimates.size();
  if (n == 0) throw std::invalid_argument("ci_fuse_multi needs at least one estimate");
  if (informations.size() != n || weights.size() != n) {
    throw std::invalid_argument("estimate, information and weight counts differ");
  }
  if (n == 1) return estimates[0];
  Mat<D> info = Mat<D>::Zero();
  Vec<D> info_vec = Vec<D>::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    info += weights[i] * informations[i];
    info_vec += weights[i] * (informations[i] * estimates[i].x);
  }
  return detail::finish<D>(info, info_vec);
}

template <int D>
VectorEstimate<D> ci_fuse_multi(std::span<const VectorEstimate<D>> estimates,
                                const FusionWeights& weights) {
  if (estimates.empty()) throw std::invalid_argument("ci_fuse_multi needs at least one estimate");
  for (const auto& e : estimates) validate(e);
  if (estimates.size() == 1) return estimates[0];
  std::vector<Mat<D>> infos;
  infos.reserve(estimates.size());
  for (const auto& e : estimates) infos.push_back(spd_inverse(e.P, "P_i"));
  return ci_fuse_multi<D>(estimates, infos, weights);
}

template <int D>
VectorEstimate<D> fuse_two(const VectorEstimate<D>& e1, const VectorEstimate<D>& e2,
                           double alpha, FusionRule rule) {
  return rule == FusionRule::CI ? ci_fuse_two(e1, e2, alpha) : ici_fuse_two(e1, e2, alpha);
}

/// Weight in [0, 1] minimizing trace of the two-estimate fused covariance.
///
/// A 101-point scan brackets the minimum, golden-section search refines it to
/// 1e-6, and ties (flat objective) resolve to 0.5.
template <int D>
double optimize_alpha_two(const VectorEstimate<D>& e1, const VectorEstimate<D>& e2,
                          FusionRule rule) {
  auto objective = [&](double a) {
    try {
      return fuse_two(e1, e2, a, rule).P.trace();
    } catch (const FusionDegeneracyError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  constexpr int kGrid = 100;
  std::array<double, kGrid + 1> f{};
  int best = 0;
  for (int i = 0; i <= kGrid; ++i) {
    f[i] = objective(static_cast<double>(i) / kGrid);
    if (f[i] < f[best]) best = i;
  }
  double lo = std::max(0, best - 1) / static_cast<double>(kGrid);
  double hi = std::min(kGrid, best + 1) / static_cast<double>(kGrid);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = objective(c);
  double fd = objective(d);
  while (hi - lo > 1e-7) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = objective(d);
    }
  }
  const double refined = 0.5 * (lo + hi);

  const std::array<double, 4> candidates{0.5, refined, 0.0, 1.0};
  std::array<double, 4> values{};
  double fmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    values[i] = objective(candidates[i]);
    fmin = std::min(fmin, values[i]);
  }
  const double tie = 1e-12 * std::max(1.0, std::abs(fmin));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (values[i] <= fmin + tie) return candidates[i];
  }
  return refined;
}

}  // namespace qici
