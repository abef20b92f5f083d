#pragma once

// Realized-GARCH and GARCH(1,1) return models.
//
//   r_t = sqrt(h_t) z_t
//   h_t = omega + beta h_{t-1} + gamma x_{t-1}
//   x_t = xi + phi h_t + tau1 z_t + tau2 (z_t^2 - 1) + sigma_eps eps_t
//
// z_t is a mean-zero, unit-variance innovation (Gaussian, standardized
// Student-t or shifted STW) and eps_t is standard normal.

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rgtw/errors.hpp"
#include "rgtw/stw.hpp"

namespace rgtw {

/// Likelihood value signalling a parameter vector outside the admissible region.
inline constexpr double kRejectLogLik = -std::numeric_limits<double>::infinity();

inline constexpr double kMaxStudentNu = 100.0;

namespace detail {
inline constexpr double kInf = std::numeric_limits<double>::infinity();
}

enum class InnovationKind { Gaussian, StudentT, Stw };

/// Standardized return innovation: mean 0, variance 1.
class Innovation {
public:
  static Innovation gaussian() { return Innovation(InnovationKind::Gaussian); }

  static Innovation student_t(double nu) {
    if (!(nu > 2.0) || !std::isfinite(nu)) throw DomainError("Student-t innovation needs nu > 2");
    Innovation inn(InnovationKind::StudentT);
    inn.nu_ = nu;
    inn.t_scale_ = std::sqrt((nu - 2.0) / nu);
    inn.t_log_norm_ = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                      0.5 * std::log((nu - 2.0) * std::numbers::pi);
    return inn;
  }

  static Innovation stw(double lambda1, double k1) {
    Innovation inn(InnovationKind::Stw);
    inn.stw_.emplace(lambda1, k1);
    return inn;
  }

  InnovationKind kind() const noexcept { return kind_; }
  double nu() const noexcept { return nu_; }
  const StwParams& stw_params() const { return stw_.value(); }

  double logpdf(double z) const noexcept {
    switch (kind_) {
      case InnovationKind::Gaussian:
        return -0.5 * (kLog2Pi + z * z);
      case InnovationKind::StudentT:
        return t_log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(z * z / (nu_ - 2.0));
      case InnovationKind::Stw:
        return stw_logpdf(z + stw_->mu(), *stw_);
    }
    return kRejectLogLik;
  }

  double cdf(double z) const {
    switch (kind_) {
      case InnovationKind::Gaussian:
        return boost::math::cdf(boost::math::normal_distribution<double>(), z);
      case InnovationKind::StudentT:
        return boost::math::cdf(boost::math::students_t_distribution<double>(nu_), z / t_scale_);
      case InnovationKind::Stw:
        return stw_cdf(z + stw_->mu(), *stw_);
    }
    return 0.0;
  }

  double quantile(double alpha) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    switch (kind_) {
      case InnovationKind::Gaussian:
        return boost::math::quantile(boost::math::normal_distribution<double>(), alpha);
      case InnovationKind::StudentT:
        return t_scale_ *
               boost::math::quantile(boost::math::students_t_distribution<double>(nu_), alpha);
      case InnovationKind::Stw:
        return stw_quantile(alpha, *stw_) - stw_->mu();
    }
    return 0.0;
  }

  /// E[z | z < quantile(alpha)].
  double tail_mean(double alpha) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    switch (kind_) {
      case InnovationKind::Gaussian: {
        const boost::math::normal_distribution<double> n;
        return -boost::math::pdf(n, boost::math::quantile(n, alpha)) / alpha;
      }
      case InnovationKind::StudentT: {
        const boost::math::students_t_distribution<double> t(nu_);
        const double q = boost::math::quantile(t, alpha);
        return -t_scale_ * (nu_ + q * q) / (nu_ - 1.0) * boost::math::pdf(t, q) / alpha;
      }
      case InnovationKind::Stw:
        return stw_es(alpha, *stw_) - stw_->mu();
    }
    return 0.0;
  }

  template <class Rng>
  double sample(Rng& rng) const {
    switch (kind_) {
      case InnovationKind::Gaussian:
        return std::normal_distribution<double>()(rng);
      case InnovationKind::StudentT:
        return t_scale_ * std::student_t_distribution<double>(nu_)(rng);
      case InnovationKind::Stw:
        return stw_sample(*stw_, rng) - stw_->mu();
    }
    return 0.0;
  }

private:
  explicit Innovation(InnovationKind kind) : kind_(kind) {}

  static constexpr double kLog2Pi = 1.8378770664093454835606594728112;

  InnovationKind kind_;
  double nu_ = 0.0;
  double t_scale_ = 1.0;
  double t_log_norm_ = 0.0;
  std::optional<StwParams> stw_;
};

// ---------------------------------------------------------------------------
// Model registry

enum class ModelKind { RgGG, RgTG, RgTWG, GarchT, GarchTW };

inline std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::RgGG: return "RG-GG";
    case ModelKind::RgTG: return "RG-tG";
    case ModelKind::RgTWG: return "RG-TWG";
    case ModelKind::GarchT: return "G-t";
    case ModelKind::GarchTW: return "G-TW";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (ModelKind k : {ModelKind::RgGG, ModelKind::RgTG, ModelKind::RgTWG, ModelKind::GarchT,
                      ModelKind::GarchTW}) {
    std::string name(model_name(k));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == lower) return k;
  }
  throw InputError("unknown model '" + std::string(text) + "'");
}

inline bool is_realized(ModelKind kind) {
  return kind == ModelKind::RgGG || kind == ModelKind::RgTG || kind == ModelKind::RgTWG;
}

inline InnovationKind innovation_kind(ModelKind kind) {
  switch (kind) {
    case ModelKind::RgGG: return InnovationKind::Gaussian;
    case ModelKind::RgTG:
    case ModelKind::GarchT: return InnovationKind::StudentT;
    case ModelKind::RgTWG:
    case ModelKind::GarchTW: return InnovationKind::Stw;
  }
  return InnovationKind::Gaussian;
}

/// Parameter symbols in vector order.
inline std::vector<std::string> parameter_names(ModelKind kind) {
  switch (kind) {
    case ModelKind::RgGG:
      return {"omega", "beta", "gamma", "xi", "phi", "tau1", "tau2", "sigma_eps"};
    case ModelKind::RgTG:
      return {"omega", "beta", "gamma", "nu", "xi", "phi", "tau1", "tau2", "sigma_eps"};
    case ModelKind::RgTWG:
      return {"omega", "beta", "gamma", "lambda1", "k1", "xi", "phi", "tau1", "tau2", "sigma_eps"};
    case ModelKind::GarchT: return {"omega", "alpha", "beta", "nu"};
    case ModelKind::GarchTW: return {"omega", "alpha", "beta", "lambda1", "k1"};
  }
  return {};
}

/// Sampler blocks as index sets into the parameter vector: volatility
/// coefficients, measurement coefficients, then the innovation shape.
inline std::vector<std::vector<std::size_t>> parameter_blocks(ModelKind kind) {
  switch (kind) {
    case ModelKind::RgGG: return {{0, 1, 2, 4}, {3, 5, 6, 7}};
    case ModelKind::RgTG: return {{0, 1, 2, 5}, {4, 6, 7, 8}, {3}};
    case ModelKind::RgTWG: return {{0, 1, 2, 6}, {5, 7, 8, 9}, {3, 4}};
    case ModelKind::GarchT: return {{0, 1, 2}, {3}};
    case ModelKind::GarchTW: return {{0, 1, 2}, {3, 4}};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Realized-GARCH

struct RgParams {
  double omega = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double xi = 0.0;
  double phi = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  double sigma_eps = 0.0;
  InnovationKind dist = InnovationKind::Stw;
  double nu = 0.0;
  double lambda1 = 0.0;
  double k1 = 0.0;

  ModelKind model() const {
    switch (dist) {
      case InnovationKind::Gaussian: return ModelKind::RgGG;
      case InnovationKind::StudentT: return ModelKind::RgTG;
      case InnovationKind::Stw: return ModelKind::RgTWG;
    }
    return ModelKind::RgTWG;
  }

  Innovation innovation() const {
    switch (dist) {
      case InnovationKind::Gaussian: return Innovation::gaussian();
      case InnovationKind::StudentT: return Innovation::student_t(nu);
      case InnovationKind::Stw: return Innovation::stw(lambda1, k1);
    }
    return Innovation::gaussian();
  }

  std::vector<double> to_vector() const {
    switch (dist) {
      case InnovationKind::Gaussian: return {omega, beta, gamma, xi, phi, tau1, tau2, sigma_eps};
      case InnovationKind::StudentT:
        return {omega, beta, gamma, nu, xi, phi, tau1, tau2, sigma_eps};
      case InnovationKind::Stw:
        return {omega, beta, gamma, lambda1, k1, xi, phi, tau1, tau2, sigma_eps};
    }
    return {};
  }

  static RgParams from_vector(ModelKind kind, std::span<const double> v) {
    if (!is_realized(kind)) throw InputError("not a realized-GARCH model");
    if (v.size() != parameter_names(kind).size()) {
      throw InputError("wrong parameter count for " + std::string(model_name(kind)));
    }
    RgParams p;
    p.omega = v[0];
    p.beta = v[1];
    p.gamma = v[2];
    std::size_t i = 3;
    p.dist = innovation_kind(kind);
    if (kind == ModelKind::RgTG) p.nu = v[i++];
    if (kind == ModelKind::RgTWG) {
      p.lambda1 = v[i++];
      p.k1 = v[i++];
    }
    p.xi = v[i++];
    p.phi = v[i++];
    p.tau1 = v[i++];
    p.tau2 = v[i++];
    p.sigma_eps = v[i++];
    return p;
  }
};

/// Parameters used to generate the simulation study data.
inline RgParams model1_params() {
  RgParams p;
  p.omega = 0.02;
  p.beta = 0.75;
  p.gamma = 0.25;
  p.xi = 0.1;
  p.phi = 0.95;
  p.tau1 = -0.02;
  p.tau2 = 0.02;
  p.sigma_eps = 0.5;
  p.dist = InnovationKind::Stw;
  p.lambda1 = 0.6;
  p.k1 = 1.1;
  return p;
}

/// Stationarity, positivity and innovation constraints.
inline bool admissible(const RgParams& p, bool allow_zero_noise = false) noexcept {
  const double persistence = p.beta + p.gamma * p.phi;
  bool ok = p.omega > 0.0 && p.beta > 0.0 && p.gamma > 0.0 && p.omega + p.gamma * p.xi > 0.0 &&
            persistence > 0.0 && persistence < 1.0 && std::isfinite(p.xi) &&
            std::isfinite(p.tau1) && std::isfinite(p.tau2) &&
            (allow_zero_noise ? p.sigma_eps >= 0.0 : p.sigma_eps > 0.0) &&
            std::isfinite(p.sigma_eps);
  switch (p.dist) {
    case InnovationKind::Gaussian: break;
    case InnovationKind::StudentT: ok = ok && p.nu > 2.0 && p.nu <= kMaxStudentNu; break;
    case InnovationKind::Stw: ok = ok && stw_params_admissible(p.lambda1, p.k1); break;
  }
  return ok;
}

inline double stationary_variance(const RgParams& p) {
  return (p.omega + p.gamma * p.xi) / (1.0 - p.beta - p.gamma * p.phi);
}

/// Start value for the variance recursion: sample variance of the first 50
/// returns (all of them when fewer).
inline double initial_variance(std::span<const double> r) {
  const std::size_t n = std::min<std::size_t>(50, r.size());
  if (n < 2) throw InputError("need at least two returns to initialise the variance");
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) mean += r[t];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t t = 0; t < n; ++t) ss += (r[t] - mean) * (r[t] - mean);
  const double v = ss / static_cast<double>(n - 1);
  return v > 0.0 ? v : 1.0;
}

struct FilterState {
  std::vector<double> h;
  std::vector<double> z;
  std::vector<double> eps;
};

namespace detail {
inline void check_aligned(std::span<const double> r, std::span<const double> x) {
  if (r.size() != x.size()) throw InputError("returns and measure have different lengths");
  if (r.empty()) throw InputError("empty series");
}
}  // namespace detail

inline FilterState filter(const RgParams& p, std::span<const double> r,
                          std::span<const double> x, double h1) {
  detail::check_aligned(r, x);
  if (!(h1 > 0.0)) throw DomainError("initial variance must be positive");
  FilterState s;
  s.h.resize(r.size());
  s.z.resize(r.size());
  s.eps.resize(r.size());
  double h = h1;
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (t > 0) h = p.omega + p.beta * h + p.gamma * x[t - 1];
    if (!std::isfinite(h)) throw NumericalError("variance overflow at t=" + std::to_string(t));
    if (!(h > 0.0)) throw NumericalError("nonpositive variance at t=" + std::to_string(t));
    const double z = r[t] / std::sqrt(h);
    s.h[t] = h;
    s.z[t] = z;
    s.eps[t] = x[t] - p.xi - p.phi * h - p.tau1 * z - p.tau2 * (z * z - 1.0);
  }
  return s;
}

struct LogLikParts {
  double returns = kRejectLogLik;      // l(r; theta)
  double measurement = kRejectLogLik;  // l(x | r; theta)
  double total() const noexcept { return returns + measurement; }
};

/// Joint log-likelihood split into its return and measurement parts. Returns
/// the rejection sentinel in both parts for inadmissible parameters or a
/// nonpositive variance path.
inline LogLikParts loglik_parts(const RgParams& p, std::span<const double> r,
                                std::span<const double> x, double h1) {
  detail::check_aligned(r, x);
  if (!admissible(p) || !(h1 > 0.0)) return {};
  std::optional<Innovation> inn;
  try {
    inn.emplace(p.innovation());
  } catch (const DomainError&) {
    return {};
  }
  constexpr double half_log_2pi = 0.91893853320467274178032973640562;
  const double meas_const = -half_log_2pi - std::log(p.sigma_eps);
  const double inv_2s2 = 0.5 / (p.sigma_eps * p.sigma_eps);

  double lr = 0.0;
  double lm = 0.0;
  double h = h1;
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (t > 0) h = p.omega + p.beta * h + p.gamma * x[t - 1];
    if (!(h > 0.0)) {
      if (std::isnan(h) || std::isinf(h)) {
        throw NumericalError("non-finite variance at t=" + std::to_string(t));
      }
      return {};
    }
    const double log_h = std::log(h);
    const double z = r[t] / std::sqrt(h);
    lr += inn->logpdf(z) - 0.5 * log_h;
    const double e = x[t] - p.xi - p.phi * h - p.tau1 * z - p.tau2 * (z * z - 1.0);
    lm += meas_const - e * e * inv_2s2;
  }
  if (std::isnan(lr) || std::isnan(lm) || lr == detail::kInf || lm == detail::kInf) {
    throw NumericalError("non-finite log-likelihood");
  }
  // A density that underflows to zero is a legitimate (rejected) value.
  if (lr == kRejectLogLik || lm == kRejectLogLik) return {};
  return {lr, lm};
}

inline double loglik(const RgParams& p, std::span<const double> r, std::span<const double> x,
                     double h1) {
  return loglik_parts(p, r, x, h1).total();
}

// ---------------------------------------------------------------------------
// GARCH(1,1) baselines

struct GarchParams {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  InnovationKind dist = InnovationKind::StudentT;
  double nu = 0.0;
  double lambda1 = 0.0;
  double k1 = 0.0;

  ModelKind model() const {
    return dist == InnovationKind::Stw ? ModelKind::GarchTW : ModelKind::GarchT;
  }

  Innovation innovation() const {
    switch (dist) {
      case InnovationKind::Gaussian: return Innovation::gaussian();
      case InnovationKind::StudentT: return Innovation::student_t(nu);
      case InnovationKind::Stw: return Innovation::stw(lambda1, k1);
    }
    return Innovation::gaussian();
  }

  std::vector<double> to_vector() const {
    switch (dist) {
      case InnovationKind::Gaussian: return {omega, alpha, beta};
      case InnovationKind::StudentT: return {omega, alpha, beta, nu};
      case InnovationKind::Stw: return {omega, alpha, beta, lambda1, k1};
    }
    return {};
  }

  static GarchParams from_vector(ModelKind kind, std::span<const double> v) {
    if (is_realized(kind)) throw InputError("not a GARCH model");
    if (v.size() != parameter_names(kind).size()) {
      throw InputError("wrong parameter count for " + std::string(model_name(kind)));
    }
    GarchParams p;
    p.omega = v[0];
    p.alpha = v[1];
    p.beta = v[2];
    p.dist = innovation_kind(kind);
    if (kind == ModelKind::GarchT) p.nu = v[3];
    if (kind == ModelKind::GarchTW) {
      p.lambda1 = v[3];
      p.k1 = v[4];
    }
    return p;
  }
};

inline bool admissible(const GarchParams& p) noexcept {
  bool ok = p.omega > 0.0 && p.alpha >= 0.0 && p.beta >= 0.0 && p.alpha + p.beta < 1.0;
  switch (p.dist) {
    case InnovationKind::Gaussian: break;
    case InnovationKind::StudentT: ok = ok && p.nu > 2.0 && p.nu <= kMaxStudentNu; break;
    case InnovationKind::Stw: ok = ok && stw_params_admissible(p.lambda1, p.k1); break;
  }
  return ok;
}

/// Conditional variances h_1..h_n of h_t = omega + alpha r_{t-1}^2 + beta h_{t-1}.
inline std::vector<double> garch_variance(const GarchParams& p, std::span<const double> r,
                                          double h1) {
  if (r.empty()) throw InputError("empty series");
  std::vector<double> h(r.size());
  h[0] = h1;
  for (std::size_t t = 1; t < r.size(); ++t) {
    h[t] = p.omega + p.alpha * r[t - 1] * r[t - 1] + p.beta * h[t - 1];
    if (!std::isfinite(h[t])) throw NumericalError("variance overflow at t=" + std::to_string(t));
  }
  return h;
}

inline double garch_loglik(const GarchParams& p, std::span<const double> r, double h1) {
  if (r.empty()) throw InputError("empty series");
  if (!admissible(p) || !(h1 > 0.0)) return kRejectLogLik;
  std::optional<Innovation> inn;
  try {
    inn.emplace(p.innovation());
  } catch (const DomainError&) {
    return kRejectLogLik;
  }
  double ll = 0.0;
  double h = h1;
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (t > 0) h = p.omega + p.alpha * r[t - 1] * r[t - 1] + p.beta * h;
    ll += inn->logpdf(r[t] / std::sqrt(h)) - 0.5 * std::log(h);
  }
  if (std::isnan(ll) || ll == detail::kInf) throw NumericalError("non-finite log-likelihood");
  return ll;
}

// ---------------------------------------------------------------------------
// Generic dispatch over ModelKind, used by the estimators and forecasters.

/// Inputs of one likelihood evaluation; x is ignored by the GARCH baselines.
struct ModelData {
  std::span<const double> r;
  std::span<const double> x;
  double h1 = 1.0;
};

inline double model_loglik(ModelKind kind, std::span<const double> theta, const ModelData& d) {
  if (is_realized(kind)) return loglik(RgParams::from_vector(kind, theta), d.r, d.x, d.h1);
  return garch_loglik(GarchParams::from_vector(kind, theta), d.r, d.h1);
}

inline bool model_admissible(ModelKind kind, std::span<const double> theta) {
  if (is_realized(kind)) return admissible(RgParams::from_vector(kind, theta));
  return admissible(GarchParams::from_vector(kind, theta));
}

inline Innovation model_innovation(ModelKind kind, std::span<const double> theta) {
  if (is_realized(kind)) return RgParams::from_vector(kind, theta).innovation();
  return GarchParams::from_vector(kind, theta).innovation();
}

// ---------------------------------------------------------------------------
// Simulation

struct SimulatedPath {
  std::vector<double> r;
  std::vector<double> x;  // empty for GARCH paths
  std::vector<double> z;
  std::vector<double> h;  // n + 1 entries; the last is the one-step-ahead variance
};

/// Simulates n days, seeding the variance at its stationary mean. sigma_eps = 0 is allowed.
template <class Rng>
SimulatedPath simulate(const RgParams& p, std::size_t n, Rng& rng) {
  if (!admissible(p, /*allow_zero_noise=*/true)) {
    throw DomainError("simulation parameters violate the model constraints");
  }
  const Innovation inn = p.innovation();
  std::normal_distribution<double> noise;
  SimulatedPath path;
  path.r.resize(n);
  path.x.resize(n);
  path.z.resize(n);
  path.h.resize(n + 1);
  path.h[0] = stationary_variance(p);
  for (std::size_t t = 0; t < n; ++t) {
    const double h = path.h[t];
    const double z = inn.sample(rng);
    const double e = noise(rng);
    path.z[t] = z;
    path.r[t] = std::sqrt(h) * z;
    path.x[t] = p.xi + p.phi * h + p.tau1 * z + p.tau2 * (z * z - 1.0) + p.sigma_eps * e;
    path.h[t + 1] = p.omega + p.beta * h + p.gamma * path.x[t];
    if (!(path.h[t + 1] > 0.0)) {
      throw NumericalError("simulated variance nonpositive at t=" + std::to_string(t + 1));
    }
  }
  return path;
}

template <class Rng>
SimulatedPath simulate_garch(const GarchParams& p, std::size_t n, Rng& rng) {
  if (!admissible(p)) throw DomainError("simulation parameters violate the model constraints");
  const Innovation inn = p.innovation();
  SimulatedPath path;
  path.r.resize(n);
  path.z.resize(n);
  path.h.resize(n + 1);
  path.h[0] = p.omega / (1.0 - p.alpha - p.beta);
  for (std::size_t t = 0; t < n; ++t) {
    const double z = inn.sample(rng);
    path.z[t] = z;
    path.r[t] = std::sqrt(path.h[t]) * z;
    path.h[t + 1] = p.omega + p.alpha * path.r[t] * path.r[t] + p.beta * path.h[t];
  }
  return path;
}

}  // namespace rgtw
