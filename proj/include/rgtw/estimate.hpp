#pragma once

// Adaptive epoch block MCMC and Nelder-Mead maximum likelihood.
//
// Burn-in epochs run random-walk Metropolis on each block with an
// equal-weight mixture of three Gaussian proposals (covariances C_i * Sigma).
// After each epoch Sigma is re-estimated from the post-discard draws. Once
// the per-parameter standard deviations settle, one independence
// Metropolis-Hastings epoch centred on the last burn-in epoch is run.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rgtw/errors.hpp"
#include "rgtw/model.hpp"

namespace rgtw {

using LogDensityFn = std::function<double(std::span<const double>)>;

/// splitmix64 mix of (seed, stream): independent RNG streams per task.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct McmcConfig {
  std::size_t epoch_len = 20000;
  std::size_t epoch_discard = 2000;
  std::size_t final_len = 10000;
  double stop_threshold = 0.10;
  std::size_t max_epochs = 8;
  std::array<double, 3> mixture_scales{1.0, 100.0, 0.01};
  /// Robbins-Monro gain for the log step size.
  double adapt_gain = 1.0;
  /// Short random-walk pilots from the start value; the first epoch begins at
  /// the pilot state with the highest log posterior. 1 disables the pilots.
  std::size_t pilot_chains = 5;
  std::size_t pilot_len = 1500;
  std::uint64_t seed = 20240101;

  /// Desk-scale settings used inside rolling windows and the simulation study.
  static McmcConfig shortened() {
    McmcConfig c;
    c.epoch_len = 5000;
    c.epoch_discard = 500;
    c.final_len = 2500;
    return c;
  }

  void validate() const {
    if (epoch_len == 0 || epoch_discard >= epoch_len) {
      throw InputError("MCMC config needs epoch_discard < epoch_len");
    }
    if (!(stop_threshold > 0.0)) throw InputError("MCMC stop threshold must be positive");
    if (max_epochs == 0 || final_len == 0) throw InputError("MCMC config needs epochs and final draws");
    if (pilot_chains == 0 || (pilot_chains > 1 && pilot_len == 0)) {
      throw InputError("MCMC config needs pilot_chains >= 1 and a positive pilot length");
    }
    for (double c : mixture_scales) {
      if (!(c > 0.0)) throw InputError("mixture scales must be positive");
    }
  }
};

/// Target acceptance rate for a block of dimension d.
inline double target_acceptance(std::size_t d) noexcept {
  if (d > 4) return 0.234;
  if (d >= 2) return 0.35;
  return 0.44;
}

struct EpochInfo {
  std::size_t begin = 0;  // first iteration (row of Chain::draws)
  std::size_t end = 0;    // one past the last
  bool independent = false;
  std::vector<double> acceptance;  // per block
  std::vector<double> sd;          // per parameter over post-discard draws
  double sd_change = 0.0;          // mean |delta sd| / sd against the previous epoch
};

struct Chain {
  /// One row per iteration: the state after the full sweep over blocks.
  Eigen::MatrixXd draws;
  /// Log posterior after each block update (iterations x blocks).
  Eigen::MatrixXd block_logpost;
  /// 0/1 acceptance per iteration and block.
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> accepted;
  std::vector<std::vector<std::size_t>> block_map;
  std::vector<EpochInfo> epochs;
  /// Proposal covariances used by the final independence epoch, per block.
  std::vector<Eigen::MatrixXd> final_cov;
  std::vector<Eigen::VectorXd> final_mean;
  /// Final log posterior of each pilot run and the index of the one continued.
  std::vector<double> pilot_logpost;
  std::size_t pilot_chosen = 0;
  bool converged = false;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(draws.cols()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(draws.rows()); }
  const EpochInfo& final_epoch() const { return epochs.back(); }

  /// acceptance_rates[e][b] for epoch e and block b.
  std::vector<std::vector<double>> acceptance_rates() const {
    std::vector<std::vector<double>> out;
    for (const auto& e : epochs) out.push_back(e.acceptance);
    return out;
  }

  /// State right after block b was updated in iteration i.
  Eigen::VectorXd state_after(std::size_t i, std::size_t b) const {
    Eigen::VectorXd s = i > 0 ? Eigen::VectorXd(draws.row(static_cast<Eigen::Index>(i - 1)))
                              : Eigen::VectorXd(draws.row(0));
    for (std::size_t k = 0; k <= b; ++k) {
      for (auto j : block_map[k]) s[j] = draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    return s;
  }
};

namespace detail {

struct BlockProposal {
  std::vector<std::size_t> idx;
  Eigen::MatrixXd chol;  // lower Cholesky factor of Sigma
  double log_step = 0.0;
  double target = 0.234;
};

inline Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  return (c.transpose() * c) / static_cast<double>(std::max<Eigen::Index>(x.rows() - 1, 1));
}

/// Cholesky factor, adding a ridge of 1e-8 * trace / d when needed.
inline bool robust_cholesky(Eigen::MatrixXd cov, Eigen::MatrixXd& out) {
  const auto d = cov.rows();
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      out = llt.matrixL();
      return true;
    }
    const double trace = cov.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) return false;
    cov.diagonal().array() += 1e-8 * std::pow(10.0, attempt) * trace / static_cast<double>(d);
  }
  return false;
}

// One random-walk mixture update of block p, with Robbins-Monro tuning of its
// log step at iteration `it` of the current epoch. Returns whether it moved.
template <class Eval, class Rng>
bool random_walk_update(BlockProposal& p, Eigen::VectorXd& theta, double& lp, const Eval& eval,
                        const std::array<double, 3>& scales, double gain, std::size_t it, Rng& rng) {
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 2);
  const auto db = static_cast<Eigen::Index>(p.idx.size());
  Eigen::VectorXd eps(db);
  for (Eigen::Index k = 0; k < db; ++k) eps[k] = norm(rng);
  const double scale = std::exp(p.log_step) * std::sqrt(scales[pick(rng)]);
  const Eigen::VectorXd step = scale * (p.chol * eps);
  Eigen::VectorXd cand = theta;
  for (Eigen::Index k = 0; k < db; ++k) cand[static_cast<Eigen::Index>(p.idx[k])] += step[k];
  const double lp_c = eval(cand);
  bool ok = false;
  if (lp_c != kRejectLogLik) ok = std::log(unif(rng)) < lp_c - lp;
  if (ok) {
    theta = cand;
    lp = lp_c;
  }
  p.log_step += gain * ((ok ? 1.0 : 0.0) - p.target) / std::pow(static_cast<double>(it), 0.6);
  return ok;
}

inline double log_mixture_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& chol, const std::array<double, 3>& scales) {
  const auto d = static_cast<double>(x.size());
  const Eigen::VectorXd u = chol.triangularView<Eigen::Lower>().solve(x - mean);
  const double q = u.squaredNorm();
  const double log_det = chol.diagonal().array().log().sum();
  std::array<double, 3> terms{};
  for (std::size_t i = 0; i < 3; ++i) {
    terms[i] = -0.5 * d * std::log(2.0 * std::numbers::pi * scales[i]) - log_det -
               0.5 * q / scales[i] - std::log(3.0);
  }
  const double m = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace detail

/// Runs the adaptive epoch sampler. `log_post` returns kRejectLogLik outside
/// the support; `blocks` partitions the parameter indices.
inline Chain mcmc_estimate(const LogDensityFn& log_post, std::span<const double> init,
                           const std::vector<std::vector<std::size_t>>& blocks,
                           const McmcConfig& cfg) {
  cfg.validate();
  const std::size_t d = init.size();
  {
    std::vector<int> seen(d, 0);
    for (const auto& b : blocks) {
      if (b.empty()) throw InputError("empty parameter block");
      for (auto j : b) {
        if (j >= d) throw InputError("parameter block index out of range");
        ++seen[j];
      }
    }
    for (int s : seen) {
      if (s != 1) throw InputError("parameter blocks must partition the parameter vector");
    }
  }
  Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(d));
  double lp = log_post(init);
  if (!std::isfinite(lp)) throw DomainError("MCMC initial value violates the parameter constraints");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 2);

  const std::size_t nb = blocks.size();
  auto initial_proposals = [&] {
    std::vector<detail::BlockProposal> props(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto db = blocks[b].size();
      props[b].idx = blocks[b];
      props[b].target = target_acceptance(db);
      // Sigma = 2.38 / sqrt(d) I.
      props[b].chol = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(db), static_cast<Eigen::Index>(db)) *
                      std::sqrt(2.38 / std::sqrt(static_cast<double>(db)));
    }
    return props;
  };
  std::vector<detail::BlockProposal> props = initial_proposals();

  const std::size_t total_cap = cfg.epoch_len * cfg.max_epochs + cfg.final_len;
  Chain chain;
  chain.block_map = blocks;
  chain.draws.resize(static_cast<Eigen::Index>(total_cap), static_cast<Eigen::Index>(d));
  chain.block_logpost.resize(static_cast<Eigen::Index>(total_cap), static_cast<Eigen::Index>(nb));
  chain.accepted.resize(static_cast<Eigen::Index>(total_cap), static_cast<Eigen::Index>(nb));

  std::vector<double> proposal(d);
  auto eval = [&](const Eigen::VectorXd& v) {
    for (std::size_t j = 0; j < d; ++j) proposal[j] = v[static_cast<Eigen::Index>(j)];
    const double val = log_post(proposal);
    return std::isnan(val) ? kRejectLogLik : val;
  };

  if (cfg.pilot_chains > 1) {
    // From an arbitrary start the first sweeps take large greedy steps and can
    // settle in a poor local mode; keep the best of several independent pilots.
    Eigen::VectorXd best = theta;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cfg.pilot_chains; ++k) {
      std::mt19937_64 prng(derive_seed(cfg.seed, 0x9000 + k));
      auto pprops = initial_proposals();
      Eigen::VectorXd th = theta;
      double plp = lp;
      for (std::size_t it = 1; it <= cfg.pilot_len; ++it) {
        for (auto& p : pprops) detail::random_walk_update(p, th, plp, eval, cfg.mixture_scales, cfg.adapt_gain, it, prng);
      }
      chain.pilot_logpost.push_back(plp);
      if (plp > best_lp) {
        best_lp = plp;
        best = th;
        chain.pilot_chosen = k;
      }
    }
    theta = best;
    lp = best_lp;
  }

  std::size_t iter = 0;
  std::vector<double> prev_sd;

  auto close_epoch = [&](std::size_t begin, bool independent, const std::vector<std::size_t>& acc) {
    EpochInfo info;
    info.begin = begin;
    info.end = iter;
    info.independent = independent;
    const double len = static_cast<double>(iter - begin);
    for (std::size_t b = 0; b < nb; ++b) info.acceptance.push_back(static_cast<double>(acc[b]) / len);
    const std::size_t keep_from = begin + std::min(cfg.epoch_discard, (iter - begin) / 2);
    const Eigen::MatrixXd kept = chain.draws.middleRows(static_cast<Eigen::Index>(keep_from),
                                                        static_cast<Eigen::Index>(iter - keep_from));
    const Eigen::MatrixXd cov = detail::sample_cov(kept);
    info.sd.resize(d);
    for (std::size_t j = 0; j < d; ++j) info.sd[j] = std::sqrt(std::max(0.0, cov(j, j)));
    return std::make_pair(info, kept);
  };

  // Burn-in epochs.
  Eigen::MatrixXd last_kept;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const std::size_t begin = iter;
    std::vector<std::size_t> acc(nb, 0);
    for (auto& p : props) p.log_step = 0.0;
    for (std::size_t it = 1; it <= cfg.epoch_len; ++it, ++iter) {
      for (std::size_t b = 0; b < nb; ++b) {
        const bool ok =
            detail::random_walk_update(props[b], theta, lp, eval, cfg.mixture_scales, cfg.adapt_gain, it, rng);
        if (ok) ++acc[b];
        chain.accepted(static_cast<Eigen::Index>(iter), static_cast<Eigen::Index>(b)) = ok ? 1 : 0;
        chain.block_logpost(static_cast<Eigen::Index>(iter), static_cast<Eigen::Index>(b)) = lp;
      }
      chain.draws.row(static_cast<Eigen::Index>(iter)) = theta.transpose();
    }
    auto [info, kept] = close_epoch(begin, false, acc);
    bool stop = false;
    if (!prev_sd.empty()) {
      double change = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        change += prev_sd[j] > 0.0 ? std::abs(info.sd[j] - prev_sd[j]) / prev_sd[j]
                                   : std::numeric_limits<double>::infinity();
      }
      info.sd_change = change / static_cast<double>(d);
      stop = info.sd_change < cfg.stop_threshold;
    } else {
      info.sd_change = std::numeric_limits<double>::quiet_NaN();
    }
    prev_sd = info.sd;
    chain.epochs.push_back(std::move(info));
    last_kept = std::move(kept);
    // Sigma for the next epoch: 2.38^2 / d_b times the block's sample covariance.
    const Eigen::MatrixXd cov = detail::sample_cov(last_kept);
    for (auto& p : props) {
      const auto db = static_cast<Eigen::Index>(p.idx.size());
      Eigen::MatrixXd sub(db, db);
      for (Eigen::Index a = 0; a < db; ++a) {
        for (Eigen::Index c = 0; c < db; ++c) sub(a, c) = cov(p.idx[a], p.idx[c]);
      }
      Eigen::MatrixXd chol;
      if (detail::robust_cholesky(sub * (2.38 * 2.38 / static_cast<double>(db)), chol)) p.chol = chol;
      else p.chol *= 0.1;  // the block never moved; shrink and keep going
    }
    if (stop) {
      chain.converged = true;
      break;
    }
  }

  // Final independence epoch: proposal frozen at the last epoch's moments.
  const Eigen::RowVectorXd mean = last_kept.colwise().mean();
  const Eigen::MatrixXd cov = detail::sample_cov(last_kept);
  std::vector<Eigen::VectorXd> means(nb);
  std::vector<Eigen::MatrixXd> chols(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& idx = props[b].idx;
    const auto db = static_cast<Eigen::Index>(idx.size());
    means[b].resize(db);
    Eigen::MatrixXd sub(db, db);
    for (Eigen::Index a = 0; a < db; ++a) {
      means[b][a] = mean[static_cast<Eigen::Index>(idx[a])];
      for (Eigen::Index c = 0; c < db; ++c) sub(a, c) = cov(idx[a], idx[c]);
    }
    if (!detail::robust_cholesky(sub, chols[b])) {
      chols[b] = props[b].chol / std::sqrt(2.38 * 2.38 / static_cast<double>(db));
    }
    chain.final_cov.push_back(chols[b] * chols[b].transpose());
  }
  chain.final_mean = means;

  const std::size_t begin = iter;
  std::vector<std::size_t> acc(nb, 0);
  for (std::size_t it = 0; it < cfg.final_len; ++it, ++iter) {
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& idx = props[b].idx;
      const auto db = static_cast<Eigen::Index>(idx.size());
      Eigen::VectorXd eps(db);
      for (Eigen::Index k = 0; k < db; ++k) eps[k] = norm(rng);
      const double scale = std::sqrt(cfg.mixture_scales[pick(rng)]);
      const Eigen::VectorXd x_new = means[b] + scale * (chols[b] * eps);
      Eigen::VectorXd x_old(db);
      Eigen::VectorXd cand = theta;
      for (Eigen::Index k = 0; k < db; ++k) {
        x_old[k] = theta[static_cast<Eigen::Index>(idx[k])];
        cand[static_cast<Eigen::Index>(idx[k])] = x_new[k];
      }
      const double lp_c = eval(cand);
      bool ok = false;
      if (lp_c != kRejectLogLik) {
        const double log_ratio =
            lp_c - lp + detail::log_mixture_density(x_old, means[b], chols[b], cfg.mixture_scales) -
            detail::log_mixture_density(x_new, means[b], chols[b], cfg.mixture_scales);
        ok = std::log(unif(rng)) < log_ratio;
      }
      if (ok) {
        theta = cand;
        lp = lp_c;
        ++acc[b];
      }
      chain.accepted(static_cast<Eigen::Index>(iter), static_cast<Eigen::Index>(b)) = ok ? 1 : 0;
      chain.block_logpost(static_cast<Eigen::Index>(iter), static_cast<Eigen::Index>(b)) = lp;
    }
    chain.draws.row(static_cast<Eigen::Index>(iter)) = theta.transpose();
  }
  {
    EpochInfo info;
    info.begin = begin;
    info.end = iter;
    info.independent = true;
    for (std::size_t b = 0; b < nb; ++b) {
      info.acceptance.push_back(static_cast<double>(acc[b]) / static_cast<double>(cfg.final_len));
    }
    const Eigen::MatrixXd fin = chain.draws.middleRows(static_cast<Eigen::Index>(begin),
                                                       static_cast<Eigen::Index>(cfg.final_len));
    const Eigen::MatrixXd c = detail::sample_cov(fin);
    for (std::size_t j = 0; j < d; ++j) info.sd.push_back(std::sqrt(std::max(0.0, c(j, j))));
    chain.epochs.push_back(std::move(info));
  }
  chain.draws.conservativeResize(static_cast<Eigen::Index>(iter), Eigen::NoChange);
  chain.block_logpost.conservativeResize(static_cast<Eigen::Index>(iter), Eigen::NoChange);
  chain.accepted.conservativeResize(static_cast<Eigen::Index>(iter), Eigen::NoChange);
  return chain;
}

struct PosteriorSummary {
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<double> q025;
  std::vector<double> q975;
  std::size_t draws = 0;
};

/// Summary of the final epoch after dropping its first `discard` draws.
inline PosteriorSummary posterior_point(const Chain& chain, std::size_t discard = 0) {
  if (chain.epochs.empty()) throw InputError("chain has no epochs");
  const auto& fin = chain.final_epoch();
  if (fin.end < fin.begin + discard + 100) {
    throw InputError("posterior summary needs at least 100 retained draws");
  }
  const std::size_t from = fin.begin + discard;
  const std::size_t n = fin.end - from;
  PosteriorSummary s;
  s.draws = n;
  const std::size_t d = chain.dim();
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = chain.draws(static_cast<Eigen::Index>(from + i), static_cast<Eigen::Index>(j));
    const double m = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : col) ss += (v - m) * (v - m);
    s.mean.push_back(m);
    s.sd.push_back(std::sqrt(ss / static_cast<double>(n - 1)));
    std::sort(col.begin(), col.end());
    // Linear interpolation between order statistics.
    auto quant = [&](double p) {
      const double pos = p * static_cast<double>(n - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, n - 1);
      return col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
    };
    s.q025.push_back(quant(0.025));
    s.q975.push_back(quant(0.975));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Maximum likelihood

/// Objective value used by the optimizer outside the admissible region.
inline constexpr double kPenaltyLogLik = -1e10;

struct NelderMeadOptions {
  std::size_t max_evals = 5000;
  /// Stop when the spread of objective values over the simplex falls below this.
  double f_tol = 1e-8;
  double initial_step = 0.05;  // relative; absolute 0.00025 for zero coordinates
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  std::size_t evals = 0;
  bool converged = false;
};

/// Minimizes f with the adaptive-coefficient Nelder-Mead simplex method.
inline NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                    std::span<const double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw InputError("nelder_mead: empty start vector");
  const double dn = static_cast<double>(n);
  const double alpha = 1.0;
  const double gamma = 1.0 + 2.0 / dn;
  const double rho = 0.75 - 1.0 / (2.0 * dn);
  const double sigma = 1.0 - 1.0 / dn;

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> pts(n + 1, std::vector<double>(x0.begin(), x0.end()));
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    double& c = pts[i + 1][i];
    c = c != 0.0 ? c * (1.0 + opt.initial_step) : 0.00025;
  }
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];
    if (std::abs(fv[worst] - fv[best]) < opt.f_tol) {
      res.converged = true;
      break;
    }
    if (res.evals >= opt.max_evals) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = order[k];
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / dn;
    }
    for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + alpha * (centroid[j] - pts[worst][j]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + gamma * (xr[j] - centroid[j]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    for (std::size_t j = 0; j < n; ++j) {
      xc[j] = outside ? centroid[j] + rho * (xr[j] - centroid[j])
                      : centroid[j] + rho * (pts[worst][j] - centroid[j]);
    }
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[worst])) {
      pts[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t k = 1; k <= n; ++k) {
      const auto i = order[k];
      for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[best][j] + sigma * (pts[i][j] - pts[best][j]);
      fv[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  res.x = pts[best];
  res.f = fv[best];
  return res;
}

struct MlResult {
  std::vector<double> theta;
  double loglik = 0.0;
  std::size_t evals = 0;
  bool converged = false;
  /// Set when the search never improved on the start value; theta is then the start.
  bool warning = false;
};

/// Maximizes `loglik_fn` over raw parameters; values outside the admissible
/// region score kPenaltyLogLik.
inline MlResult ml_estimate(const LogDensityFn& loglik_fn, std::span<const double> init,
                            const NelderMeadOptions& opt = {}) {
  auto objective = [&](std::span<const double> x) {
    const double ll = loglik_fn(x);
    return std::isfinite(ll) ? -ll : -kPenaltyLogLik;
  };
  const double f0 = objective(init);
  const auto nm = nelder_mead(objective, init, opt);
  MlResult out;
  out.evals = nm.evals + 1;
  out.converged = nm.converged;
  if (!(nm.f < f0) || !std::isfinite(loglik_fn(nm.x))) {
    out.theta.assign(init.begin(), init.end());
    out.loglik = -f0;
    out.warning = true;
    return out;
  }
  out.theta = nm.x;
  out.loglik = -nm.f;
  return out;
}

// ---------------------------------------------------------------------------
// Model-level convenience

enum class Estimator { Mcmc, Ml };

inline std::string_view estimator_name(Estimator e) { return e == Estimator::Mcmc ? "mcmc" : "ml"; }

inline Estimator parse_estimator(std::string_view s) {
  if (s == "mcmc") return Estimator::Mcmc;
  if (s == "ml") return Estimator::Ml;
  throw InputError("unknown estimator '" + std::string(s) + "'");
}

/// Start vector with every parameter at 0.25.
inline std::vector<double> default_start(ModelKind kind) {
  auto v = std::vector<double>(parameter_names(kind).size(), 0.25);
  // Student-t degrees of freedom must exceed 2.
  const auto names = parameter_names(kind);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "nu") v[i] = 8.0;
  }
  return v;
}

struct FitResult {
  std::vector<double> theta;
  std::vector<double> sd;  // posterior SD (MCMC only)
  double loglik = 0.0;
  bool warning = false;
  std::optional<Chain> chain;
};

inline FitResult fit_model(ModelKind kind, const ModelData& data, Estimator est,
                           std::span<const double> init, const McmcConfig& cfg = McmcConfig::shortened(),
                           bool keep_chain = false) {
  const LogDensityFn ll = [&](std::span<const double> th) {
    try {
      return model_loglik(kind, th, data);
    } catch (const NumericalError&) {
      return kRejectLogLik;
    }
  };
  FitResult out;
  if (est == Estimator::Ml) {
    const auto r = ml_estimate(ll, init);
    out.theta = r.theta;
    out.loglik = r.loglik;
    out.warning = r.warning;
    return out;
  }
  auto chain = mcmc_estimate(ll, init, parameter_blocks(kind), cfg);
  const auto post = posterior_point(chain);
  out.theta = post.mean;
  out.sd = post.sd;
  out.warning = !chain.converged;
  out.loglik = ll(out.theta);
  if (!std::isfinite(out.loglik)) {
    // The posterior mean can sit outside a non-convex region; fall back to the last draw.
    const Eigen::VectorXd last = chain.draws.bottomRows(1).transpose();
    out.theta.assign(last.data(), last.data() + last.size());
    out.loglik = ll(out.theta);
    out.warning = true;
  }
  if (keep_chain) out.chain = std::move(chain);
  return out;
}

}  // namespace rgtw
