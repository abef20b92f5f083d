#pragma once

// Violation-based backtests, the joint (VaR, ES) loss and the model confidence set.

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rgtw/errors.hpp"
#include "rgtw/estimate.hpp"
#include "rgtw/forecast.hpp"
#include "rgtw/special.hpp"

namespace rgtw {

struct ViolationSeries {
  std::vector<int> hits;  // 1 when r_t < VaR_t
  double alpha = 0.01;

  std::size_t size() const noexcept { return hits.size(); }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(hits.begin(), hits.end(), 1));
  }
};

inline ViolationSeries violations(const std::vector<ForecastRecord>& recs) {
  if (recs.empty()) throw InputError("no forecast records");
  ViolationSeries v;
  v.alpha = recs.front().alpha;
  for (const auto& r : recs) v.hits.push_back(r.violation() ? 1 : 0);
  return v;
}

inline double vrate(const std::vector<ForecastRecord>& recs) {
  if (recs.empty()) throw InputError("no forecast records");
  std::size_t x = 0;
  for (const auto& r : recs) x += r.violation();
  return static_cast<double>(x) / static_cast<double>(recs.size());
}

inline double esrate(const std::vector<ForecastRecord>& recs) {
  if (recs.empty()) throw InputError("no forecast records");
  std::size_t x = 0;
  for (const auto& r : recs) x += r.es_violation();
  return static_cast<double>(x) / static_cast<double>(recs.size());
}

enum class TestStatus { Ok, InsufficientViolations, Singular, NotConverged };

inline std::string_view to_string(TestStatus s) {
  switch (s) {
    case TestStatus::Ok: return "ok";
    case TestStatus::InsufficientViolations: return "insufficient violations";
    case TestStatus::Singular: return "singular design (pseudo-inverse used)";
    case TestStatus::NotConverged: return "not converged";
  }
  return "?";
}

struct TestResult {
  double stat = 0.0;
  double pvalue = 1.0;
  TestStatus status = TestStatus::Ok;

  /// Only tests that produced a statistic can reject.
  bool reject(double level = 0.05) const noexcept {
    return (status == TestStatus::Ok || status == TestStatus::Singular) && pvalue < level;
  }
};

namespace detail {
/// n * ln(p) with the 0 * ln 0 = 0 convention.
inline double xlogy(double n, double p) noexcept { return n == 0.0 ? 0.0 : n * std::log(p); }
}  // namespace detail

/// Kupiec unconditional coverage likelihood ratio.
inline TestResult uc_test(const ViolationSeries& v) {
  const double m = static_cast<double>(v.size());
  if (m < 1) throw InputError("UC test needs at least one observation");
  const double x = static_cast<double>(v.count());
  const double ph = x / m;
  const double l0 = detail::xlogy(m - x, 1.0 - v.alpha) + detail::xlogy(x, v.alpha);
  const double l1 = detail::xlogy(m - x, 1.0 - ph) + detail::xlogy(x, ph);
  const double stat = std::max(0.0, -2.0 * (l0 - l1));
  return {stat, chi2_sf(stat, 1.0)};
}

/// Christoffersen first-order Markov independence likelihood ratio.
inline TestResult ind_test(const ViolationSeries& v) {
  if (v.size() < 2) throw InputError("IND test needs at least two observations");
  double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
  for (std::size_t t = 1; t < v.size(); ++t) {
    const int a = v.hits[t - 1];
    const int b = v.hits[t];
    if (a == 0 && b == 0) ++n00;
    else if (a == 0 && b == 1) ++n01;
    else if (a == 1 && b == 0) ++n10;
    else ++n11;
  }
  const double p01 = n00 + n01 > 0 ? n01 / (n00 + n01) : 0.0;
  const double p11 = n10 + n11 > 0 ? n11 / (n10 + n11) : 0.0;
  const double p = (n01 + n11) / (n00 + n01 + n10 + n11);
  const double l0 = detail::xlogy(n00 + n10, 1.0 - p) + detail::xlogy(n01 + n11, p);
  const double l1 = detail::xlogy(n00, 1.0 - p01) + detail::xlogy(n01, p01) +
                    detail::xlogy(n10, 1.0 - p11) + detail::xlogy(n11, p11);
  const double stat = std::max(0.0, -2.0 * (l0 - l1));
  return {stat, chi2_sf(stat, 1.0)};
}

/// Conditional coverage: UC + IND, chi-squared with 2 degrees of freedom.
inline TestResult cc_test(const ViolationSeries& v) {
  const double stat = uc_test(v).stat + ind_test(v).stat;
  return {stat, chi2_sf(stat, 2.0)};
}

/// Design matrix of the DQ regression: constant, `lags` lagged hits (I - alpha)
/// and the contemporaneous VaR; rows start at t = lags.
inline Eigen::MatrixXd dq_design(const std::vector<ForecastRecord>& recs, std::size_t lags) {
  const std::size_t m = recs.size();
  const double a = recs.front().alpha;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(m - lags), static_cast<Eigen::Index>(lags + 2));
  for (std::size_t t = lags; t < m; ++t) {
    const auto row = static_cast<Eigen::Index>(t - lags);
    X(row, 0) = 1.0;
    for (std::size_t l = 1; l <= lags; ++l) {
      X(row, static_cast<Eigen::Index>(l)) = (recs[t - l].violation() ? 1.0 : 0.0) - a;
    }
    X(row, static_cast<Eigen::Index>(lags + 1)) = recs[t].var;
  }
  return X;
}

/// Engle-Manganelli dynamic quantile test.
inline TestResult dq_test(const std::vector<ForecastRecord>& recs, std::size_t lags) {
  const std::size_t m = recs.size();
  if (m <= lags + 2) throw InputError("DQ test needs more than lags + 2 observations");
  std::size_t x = 0;
  for (const auto& r : recs) x += r.violation();
  if (x < 2) return {0.0, 1.0, TestStatus::InsufficientViolations};
  const double a = recs.front().alpha;
  const Eigen::MatrixXd X = dq_design(recs, lags);
  Eigen::VectorXd hit(X.rows());
  for (std::size_t t = lags; t < m; ++t) {
    hit[static_cast<Eigen::Index>(t - lags)] = (recs[t].violation() ? 1.0 : 0.0) - a;
  }
  const Eigen::MatrixXd XtX = X.transpose() * X;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(XtX);
  TestStatus status = cod.rank() < XtX.rows() ? TestStatus::Singular : TestStatus::Ok;
  const Eigen::VectorXd b = cod.pseudoInverse() * (X.transpose() * hit);
  const double stat = std::max(0.0, b.dot(XtX * b) / (a * (1.0 - a)));
  return {stat, chi2_sf(stat, static_cast<double>(lags + 2)), status};
}

struct QuantileRegression {
  Eigen::VectorXd coef;
  Eigen::MatrixXd cov;
  bool converged = false;
};

/// Check-loss sum_i rho_tau(y_i - x_i' b).
inline double check_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                         double tau) {
  const Eigen::VectorXd u = y - X * b;
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) s += u[i] * (tau - (u[i] < 0.0 ? 1.0 : 0.0));
  return s;
}

/// Quantile regression by iteratively reweighted least squares with a
/// sandwich covariance (Gaussian kernel sparsity, Hall-Sheather bandwidth).
inline QuantileRegression quantile_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                              double tau, double smoothing = 1e-6,
                                              int max_iter = 2000) {
  const Eigen::Index m = X.rows();
  const Eigen::Index p = X.cols();
  QuantileRegression out;
  Eigen::VectorXd b = X.colPivHouseholderQr().solve(y);
  Eigen::VectorXd w(m);
  double prev = check_loss(y, X, b, tau);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd u = y - X * b;
    for (Eigen::Index i = 0; i < m; ++i) {
      w[i] = (u[i] < 0.0 ? 1.0 - tau : tau) / std::max(std::abs(u[i]), smoothing);
    }
    const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
    const Eigen::VectorXd nb = (XtW * X).ldlt().solve(XtW * y);
    const double cur = check_loss(y, X, nb, tau);
    b = nb;
    if (std::abs(prev - cur) <= 1e-12 * std::max(1.0, std::abs(prev))) {
      out.converged = true;
      break;
    }
    prev = cur;
  }
  out.coef = b;

  const boost::math::normal_distribution<double> n01;
  const double z_tau = boost::math::quantile(n01, tau);
  const double z_a = boost::math::quantile(n01, 0.975);
  const double f = boost::math::pdf(n01, z_tau);
  double h = std::pow(static_cast<double>(m), -1.0 / 3.0) * std::pow(z_a, 2.0 / 3.0) *
             std::pow(1.5 * f * f / (2.0 * z_tau * z_tau + 1.0), 1.0 / 3.0);
  h = std::min(h, 0.9 * std::min(tau, 1.0 - tau));
  const Eigen::VectorXd u = y - X * b;
  std::vector<double> sorted(u.data(), u.data() + m);
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double pr) {
    const double pos = pr * static_cast<double>(m - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min<std::size_t>(lo + 1, static_cast<std::size_t>(m - 1));
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double mean_u = u.mean();
  const double sd_u = std::sqrt((u.array() - mean_u).square().sum() / static_cast<double>(m - 1));
  const double spread = std::min(sd_u, (q(0.75) - q(0.25)) / 1.34);
  // Bandwidth h on the probability scale is h times the sparsity on the residual scale.
  const double hr = 0.5 * spread *
                    (boost::math::quantile(n01, tau + h) - boost::math::quantile(n01, tau - h));
  Eigen::MatrixXd D0 = X.transpose() * X / static_cast<double>(m);
  Eigen::MatrixXd D1 = Eigen::MatrixXd::Zero(p, p);
  if (hr > 0.0) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double k = boost::math::pdf(n01, u[i] / hr) / hr;
      D1 += k * X.row(i).transpose() * X.row(i);
    }
  }
  D1 /= static_cast<double>(m);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(D1);
  const Eigen::MatrixXd D1i = cod.pseudoInverse();
  out.cov = tau * (1.0 - tau) / static_cast<double>(m) * D1i * D0 * D1i;
  return out;
}

/// Gaglione et al. VaR quantile regression test of (intercept, slope) = (0, 1).
inline TestResult vqr_test(const std::vector<ForecastRecord>& recs) {
  const std::size_t m = recs.size();
  if (m < 50) throw InputError("VQR test needs at least 50 observations");
  std::size_t x = 0;
  for (const auto& r : recs) x += r.violation();
  if (x < 2) return {0.0, 1.0, TestStatus::InsufficientViolations};
  Eigen::VectorXd y(static_cast<Eigen::Index>(m));
  Eigen::MatrixXd X(static_cast<Eigen::Index>(m), 2);
  for (std::size_t t = 0; t < m; ++t) {
    y[static_cast<Eigen::Index>(t)] = recs[t].realized_return;
    X(static_cast<Eigen::Index>(t), 0) = 1.0;
    X(static_cast<Eigen::Index>(t), 1) = recs[t].var;
  }
  const auto qr = quantile_regression(y, X, recs.front().alpha);
  const Eigen::Vector2d d(qr.coef[0], qr.coef[1] - 1.0);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(qr.cov);
  const double stat = std::max(0.0, d.dot(cod.pseudoInverse() * d));
  TestResult res{stat, chi2_sf(stat, 2.0)};
  if (!qr.converged) res.status = TestStatus::NotConverged;
  else if (cod.rank() < 2) res.status = TestStatus::Singular;
  return res;
}

/// Largest ES accepted by the joint loss before exp(ES) is considered an overflow risk.
inline constexpr double kMaxJointLossEs = 50.0;

/// Fissler-Ziegel joint loss for one day.
inline double joint_loss_day(double y, double var, double es, double alpha) {
  if (!std::isfinite(var) || !std::isfinite(es)) throw DomainError("joint loss needs finite VaR and ES");
  if (es > kMaxJointLossEs) throw DomainError("joint loss overflow guard: ES above 50");
  const double hit = y < var ? 1.0 : 0.0;
  const double e = std::exp(es);
  return (hit - alpha) * var - hit * y + e * (es - var + hit / alpha * (var - y)) - e + 1.0 -
         std::log(1.0 - alpha);
}

struct JointLoss {
  std::vector<double> per_day;
  double total = 0.0;
};

inline JointLoss joint_loss(const std::vector<ForecastRecord>& recs) {
  JointLoss out;
  for (const auto& r : recs) {
    out.per_day.push_back(joint_loss_day(r.realized_return, r.var, r.es, r.alpha));
    out.total += out.per_day.back();
  }
  return out;
}

/// Implied quantile level of the ES forecasts in a record sequence.
inline double implied_es_level(const std::vector<ForecastRecord>& recs) {
  double s = 0.0;
  for (const auto& r : recs) s += r.es_level;
  return recs.empty() ? 0.0 : s / static_cast<double>(recs.size());
}

// ---------------------------------------------------------------------------
// Model confidence set

enum class McsMethod { R, SQ };

inline std::string_view to_string(McsMethod m) { return m == McsMethod::R ? "R" : "SQ"; }

inline McsMethod parse_mcs_method(std::string_view s) {
  if (s == "R" || s == "r") return McsMethod::R;
  if (s == "SQ" || s == "sq") return McsMethod::SQ;
  throw InputError("unknown MCS method '" + std::string(s) + "'");
}

struct BootstrapOptions {
  std::size_t block_len = 21;
  std::size_t n_boot = 5000;
  std::uint64_t seed = 12345;
};

struct McsResult {
  McsMethod method = McsMethod::R;
  double confidence = 0.9;
  std::vector<std::string> models;
  /// MCS p-value per model (same order as models).
  std::vector<double> pvalues;
  /// Elimination order, worst first; the last entry is never eliminated.
  std::vector<std::size_t> elimination_order;
  std::vector<bool> included;
};

/// Hansen-Lunde-Nason model confidence set on a T x M loss matrix.
inline McsResult mcs(const Eigen::MatrixXd& losses, const std::vector<std::string>& names,
                     McsMethod method, double confidence, const BootstrapOptions& boot = {}) {
  const Eigen::Index T = losses.rows();
  const Eigen::Index M = losses.cols();
  if (M < 2) throw InputError("MCS needs at least two models");
  if (static_cast<Eigen::Index>(names.size()) != M) throw InputError("MCS model names do not match the loss matrix");
  if (T < 2) throw InputError("MCS needs at least two loss observations");
  if (!losses.allFinite()) throw InputError("MCS loss matrix has non-finite entries");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InputError("MCS confidence must lie in (0, 1)");
  if (boot.block_len == 0 || boot.n_boot == 0) throw InputError("MCS bootstrap settings must be positive");

  // Moving-block bootstrap index sets, shared across elimination steps.
  std::mt19937_64 rng(boot.seed);
  const std::size_t L = std::min<std::size_t>(boot.block_len, static_cast<std::size_t>(T));
  std::uniform_int_distribution<std::size_t> start(0, static_cast<std::size_t>(T) - L);
  std::vector<std::vector<std::size_t>> idx(boot.n_boot, std::vector<std::size_t>(static_cast<std::size_t>(T)));
  for (auto& ix : idx) {
    std::size_t filled = 0;
    while (filled < ix.size()) {
      const std::size_t s = start(rng);
      for (std::size_t k = 0; k < L && filled < ix.size(); ++k) ix[filled++] = s + k;
    }
  }
  // Bootstrap column means of the losses.
  Eigen::MatrixXd boot_means(static_cast<Eigen::Index>(boot.n_boot), M);
  for (std::size_t b = 0; b < boot.n_boot; ++b) {
    Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(M);
    for (auto t : idx[b]) s += losses.row(static_cast<Eigen::Index>(t));
    boot_means.row(static_cast<Eigen::Index>(b)) = s / static_cast<double>(T);
  }
  const Eigen::RowVectorXd mean = losses.colwise().mean();

  McsResult res;
  res.method = method;
  res.confidence = confidence;
  res.models = names;
  res.pvalues.assign(static_cast<std::size_t>(M), 1.0);
  res.included.assign(static_cast<std::size_t>(M), true);

  std::vector<Eigen::Index> alive(static_cast<std::size_t>(M));
  std::iota(alive.begin(), alive.end(), 0);
  double running_p = 0.0;
  const double eps = 1e-12;
  while (alive.size() > 1) {
    const std::size_t k = alive.size();
    // Pairwise differentials d_ij = mean_i - mean_j with bootstrap variances.
    Eigen::MatrixXd t_stat = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const double d = mean[alive[i]] - mean[alive[j]];
        double v = 0.0;
        for (Eigen::Index b = 0; b < boot_means.rows(); ++b) {
          const double db = boot_means(b, alive[i]) - boot_means(b, alive[j]) - d;
          v += db * db;
        }
        v /= static_cast<double>(boot_means.rows());
        // Degenerate-variance guard: identical columns carry no evidence.
        const double t = v > eps ? d / std::sqrt(v) : 0.0;
        var(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        var(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        t_stat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t;
        t_stat(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -t;
      }
    }
    auto statistic = [&](const Eigen::MatrixXd& ts) {
      return method == McsMethod::R ? ts.cwiseAbs().maxCoeff() : 0.5 * ts.cwiseAbs2().sum();
    };
    const double observed = statistic(t_stat);
    std::size_t exceed = 0;
    for (Eigen::Index b = 0; b < boot_means.rows(); ++b) {
      Eigen::MatrixXd tb = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
          const double v = var(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (!(v > eps)) continue;
          const double d = mean[alive[i]] - mean[alive[j]];
          const double db = boot_means(b, alive[i]) - boot_means(b, alive[j]) - d;
          tb(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = db / std::sqrt(v);
          tb(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -db / std::sqrt(v);
        }
      }
      if (statistic(tb) >= observed) ++exceed;
    }
    const double p = observed > 0.0 ? static_cast<double>(exceed) / static_cast<double>(boot_means.rows()) : 1.0;
    running_p = std::max(running_p, p);

    // Worst model: largest max_j t_ij (R) or largest average t_i. (SQ).
    std::size_t worst = 0;
    double worst_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      double score = 0.0;
      if (method == McsMethod::R) {
        score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
          if (j != i) score = std::max(score, t_stat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
      } else {
        score = t_stat.row(static_cast<Eigen::Index>(i)).sum() / static_cast<double>(k - 1);
      }
      if (score > worst_score) {
        worst_score = score;
        worst = i;
      }
    }
    const auto w = alive[worst];
    res.pvalues[static_cast<std::size_t>(w)] = running_p;
    res.elimination_order.push_back(static_cast<std::size_t>(w));
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  res.elimination_order.push_back(static_cast<std::size_t>(alive.front()));
  res.pvalues[static_cast<std::size_t>(alive.front())] = 1.0;
  for (std::size_t i = 0; i < res.pvalues.size(); ++i) res.included[i] = res.pvalues[i] >= 1.0 - confidence;
  return res;
}

}  // namespace rgtw
