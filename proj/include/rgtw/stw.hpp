#pragma once

// Standardized two-sided Weibull (STW) distribution with a common shape on
// both sides. X = Y / b_p where Y has Weibull(lambda1, k1) mass on the
// negative axis and Weibull(lambda2, k1) mass on the positive axis, with
// lambda1 / k1 + lambda2 / k1 = 1 so that Pr(X < 0) = lambda1 / k1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "rgtw/errors.hpp"
#include "rgtw/special.hpp"

namespace rgtw {

/// Log-density returned where the STW density is zero or undefined
/// (exactly at the origin for k1 != 1, positive side when lambda2 = 0).
inline const double kStwLogDensityFloor = std::log(1e-300);

/// True when (lambda1, k1) lies in the admissible region 0 < lambda1 <= k1.
inline bool stw_params_admissible(double lambda1, double k1) noexcept {
  return std::isfinite(lambda1) && std::isfinite(k1) && lambda1 > 0.0 && lambda1 <= k1;
}

/// Standard deviation b_p of the unstandardized two-sided Weibull Y.
inline double stw_bp(double lambda1, double k1) {
  if (!stw_params_admissible(lambda1, k1)) {
    throw DomainError("STW parameters require 0 < lambda1 <= k1 (got lambda1=" +
                      std::to_string(lambda1) + ", k1=" + std::to_string(k1) + ")");
  }
  const double lambda2 = k1 - lambda1;
  const double g1 = std::tgamma(1.0 + 1.0 / k1);
  const double g2 = std::tgamma(1.0 + 2.0 / k1);
  const double second = (lambda1 * lambda1 * lambda1 + lambda2 * lambda2 * lambda2) / k1 * g2;
  const double first = (lambda2 * lambda2 - lambda1 * lambda1) / k1 * g1;
  const double var = second - first * first;
  if (!(var > 0.0) || !std::isfinite(var)) {
    throw DomainError("STW variance is not positive for lambda1=" + std::to_string(lambda1) +
                      ", k1=" + std::to_string(k1));
  }
  return std::sqrt(var);
}

/// Validated STW parameters with the derived constants cached.
class StwParams {
public:
  StwParams(double lambda1, double k1)
      : lambda1_(lambda1), k1_(k1), lambda2_(k1 - lambda1), bp_(stw_bp(lambda1, k1)) {
    log_bp_ = std::log(bp_);
    mu_ = (lambda2_ * lambda2_ - lambda1_ * lambda1_) * std::tgamma(1.0 + 1.0 / k1_) / (bp_ * k1_);
  }

  double lambda1() const noexcept { return lambda1_; }
  double k1() const noexcept { return k1_; }
  double lambda2() const noexcept { return lambda2_; }
  double bp() const noexcept { return bp_; }
  double log_bp() const noexcept { return log_bp_; }
  /// Mean of X; Z = X - mu has mean 0 and variance 1.
  double mu() const noexcept { return mu_; }
  /// Pr(X < 0).
  double negative_mass() const noexcept { return lambda1_ / k1_; }

private:
  double lambda1_;
  double k1_;
  double lambda2_;
  double bp_;
  double log_bp_ = 0.0;
  double mu_ = 0.0;
};

inline double stw_mean(const StwParams& p) noexcept { return p.mu(); }

inline double stw_logpdf(double x, const StwParams& p) noexcept {
  const double k = p.k1();
  if (x < 0.0) {
    const double log_u = std::log(-p.bp() * x / p.lambda1());
    return p.log_bp() + (k - 1.0) * log_u - std::exp(k * log_u);
  }
  if (p.lambda2() <= 0.0) return kStwLogDensityFloor;
  if (x == 0.0) {
    // Left-branch limit for the exponential case; the density is 0 or
    // unbounded at the origin otherwise.
    return k == 1.0 ? p.log_bp() : kStwLogDensityFloor;
  }
  const double log_u = std::log(p.bp() * x / p.lambda2());
  return p.log_bp() + (k - 1.0) * log_u - std::exp(k * log_u);
}

inline double stw_pdf(double x, const StwParams& p) noexcept {
  const double lp = stw_logpdf(x, p);
  return lp <= kStwLogDensityFloor ? 0.0 : std::exp(lp);
}

inline double stw_cdf(double x, const StwParams& p) noexcept {
  const double k = p.k1();
  if (x < 0.0) {
    return p.lambda1() / k * std::exp(-std::pow(-p.bp() * x / p.lambda1(), k));
  }
  if (p.lambda2() <= 0.0) return 1.0;
  return 1.0 - p.lambda2() / k * std::exp(-std::pow(p.bp() * x / p.lambda2(), k));
}

inline double stw_quantile(double alpha, const StwParams& p) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("stw_quantile: alpha must lie in (0, 1)");
  }
  const double k = p.k1();
  if (alpha < p.negative_mass()) {
    return -(p.lambda1() / p.bp()) * std::pow(-std::log(k / p.lambda1() * alpha), 1.0 / k);
  }
  if (p.lambda2() <= 0.0) return 0.0;
  const double w = -std::log(k / p.lambda2() * (1.0 - alpha));
  // Rounding can push w a hair below zero right at the branch point.
  return (p.lambda2() / p.bp()) * std::pow(std::max(w, 0.0), 1.0 / k);
}

/// Expected value of X conditional on X < quantile(alpha). Lower tail only.
inline double stw_es(double alpha, const StwParams& p) {
  if (!(alpha > 0.0) || !(alpha < p.negative_mass())) {
    throw DomainError("ES formula valid only in lower tail: need 0 < alpha < lambda1/k1 = " +
                      std::to_string(p.negative_mass()));
  }
  const double k = p.k1();
  const double var = stw_quantile(alpha, p);
  const double w = std::pow(-p.bp() * var / p.lambda1(), k);
  return -p.lambda1() * p.lambda1() / (alpha * p.bp() * k) * upper_inc_gamma(1.0 + 1.0 / k, w);
}

/// Inverse-transform draw of X (unshifted). Subtract mu() for a mean-zero innovation.
template <class Rng>
double stw_sample(const StwParams& p, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0;
  do {
    u = unif(rng);
  } while (u <= 0.0);
  return stw_quantile(u, p);
}

}  // namespace rgtw
