#pragma once

// One-step-ahead variance, VaR and ES forecasts.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rgtw/calendar.hpp"
#include "rgtw/estimate.hpp"
#include "rgtw/measures.hpp"
#include "rgtw/model.hpp"

namespace rgtw {

struct ForecastRecord {
  Date day;
  std::string model_id;
  double alpha = 0.01;
  double h_next = 0.0;
  double var = 0.0;
  double es = 0.0;
  double realized_return = 0.0;
  /// Level at which the ES forecast sits as a quantile of the forecast distribution.
  double es_level = 0.0;
  /// Estimation failed on this window and earlier parameters were reused.
  bool flagged = false;

  bool violation() const noexcept { return realized_return < var; }
  bool es_violation() const noexcept { return realized_return < es; }
};

/// h_{n+1} = omega + beta h_n + gamma x_n.
inline double h_forecast(const RgParams& p, const FilterState& state, double x_n) {
  if (state.h.empty()) throw InputError("h_forecast needs a filtered state");
  return p.omega + p.beta * state.h.back() + p.gamma * x_n;
}

inline double h_forecast(const RgParams& p, double h_n, double x_n) noexcept {
  return p.omega + p.beta * h_n + p.gamma * x_n;
}

/// h_{n+1} = omega + alpha r_n^2 + beta h_n.
inline double h_forecast(const GarchParams& p, double h_n, double r_n) noexcept {
  return p.omega + p.alpha * r_n * r_n + p.beta * h_n;
}

struct VarEs {
  double var = 0.0;
  double es = 0.0;
};

inline VarEs var_es(const Innovation& inn, double h_next, double alpha) {
  if (!(h_next > 0.0)) throw DomainError("forecast variance must be positive");
  const double s = std::sqrt(h_next);
  return {s * inn.quantile(alpha), s * inn.tail_mean(alpha)};
}

/// Conditional variance for day n+1 given the model, parameters and the first n days.
inline double one_step_variance(ModelKind kind, std::span<const double> theta, const ModelData& d) {
  const std::size_t n = d.r.size();
  if (is_realized(kind)) {
    const auto p = RgParams::from_vector(kind, theta);
    const auto s = filter(p, d.r, d.x, d.h1);
    return h_forecast(p, s.h[n - 1], d.x[n - 1]);
  }
  const auto p = GarchParams::from_vector(kind, theta);
  const auto h = garch_variance(p, d.r, d.h1);
  return h_forecast(p, h[n - 1], d.r[n - 1]);
}

/// Record label such as "RG-SubRV-TWG" or "G-t".
inline std::string model_label(ModelKind kind, MeasureKind measure) {
  if (!is_realized(kind)) return std::string(model_name(kind));
  const std::string dist = kind == ModelKind::RgGG ? "GG" : kind == ModelKind::RgTG ? "tG" : "TWG";
  return "RG-" + std::string(to_string(measure)) + "-" + dist;
}

enum class FitMode { Mcmc, Ml, Fixed };

struct RollingOptions {
  ModelKind model = ModelKind::RgTWG;
  std::size_t window = 1000;
  std::vector<double> alphas{0.01};
  FitMode mode = FitMode::Mcmc;
  /// Refit every this many forecast days; 0 fits only on the first window.
  std::size_t refit_every = 1;
  McmcConfig mcmc = McmcConfig::shortened();
  /// Parameters for FitMode::Fixed, and the start for the first fit otherwise.
  std::optional<std::vector<double>> theta;
  std::uint64_t seed = 1;
};

struct RollingResult {
  std::vector<ForecastRecord> records;  // ordered by day, then alpha
  /// Parameters used for each forecast day.
  std::vector<std::vector<double>> params;
  std::size_t failures = 0;
};

inline RollingResult rolling_forecast(const RealizedSeries& series, const RollingOptions& opt) {
  series.validate();
  const std::size_t T = series.size();
  const std::size_t n = opt.window;
  if (n < 2 || T <= n) throw InputError("series length must exceed the rolling window");
  for (double a : opt.alphas) {
    if (!(a > 0.0 && a < 0.5)) throw InputError("alpha must lie in (0, 0.5)");
  }
  if (opt.mode == FitMode::Fixed && !opt.theta) throw InputError("fixed forecasting needs parameters");
  const auto names = parameter_names(opt.model);
  if (opt.theta && opt.theta->size() != names.size()) throw InputError("wrong parameter count");

  const std::string label = model_label(opt.model, series.kind);
  RollingResult out;
  std::vector<double> theta = opt.theta ? *opt.theta : default_start(opt.model);
  bool have_fit = opt.mode == FitMode::Fixed;

  for (std::size_t t = n; t < T; ++t) {
    const std::size_t k = t - n;
    const std::span<const double> r(series.returns.data() + k, n);
    const std::span<const double> x(series.measure.data() + k, n);
    const ModelData data{r, x, initial_variance(r)};
    bool flagged = false;
    const bool refit = opt.mode != FitMode::Fixed &&
                       (!have_fit || (opt.refit_every > 0 && k % opt.refit_every == 0));
    if (refit) {
      try {
        McmcConfig cfg = opt.mcmc;
        cfg.seed = derive_seed(opt.seed, k);
        // Start from the previous parameters when they are still admissible on this window.
        std::vector<double> start = theta;
        if (!std::isfinite(model_loglik(opt.model, start, data))) start = default_start(opt.model);
        const auto fit = fit_model(opt.model, data, opt.mode == FitMode::Mcmc ? Estimator::Mcmc : Estimator::Ml,
                                   start, cfg);
        if (std::isfinite(fit.loglik)) {
          theta = fit.theta;
          have_fit = true;
        } else {
          flagged = true;
        }
      } catch (const std::exception&) {
        flagged = true;
      }
      if (flagged) ++out.failures;
    }
    double h_next = 0.0;
    try {
      h_next = one_step_variance(opt.model, theta, data);
    } catch (const NumericalError&) {
      flagged = true;
      h_next = std::numeric_limits<double>::quiet_NaN();
    }
    const Innovation inn = model_innovation(opt.model, theta);
    for (double a : opt.alphas) {
      ForecastRecord rec;
      rec.day = series.days[t];
      rec.model_id = label;
      rec.alpha = a;
      rec.h_next = h_next;
      rec.realized_return = series.returns[t];
      rec.flagged = flagged;
      if (h_next > 0.0) {
        const auto ve = var_es(inn, h_next, a);
        rec.var = ve.var;
        rec.es = ve.es;
        rec.es_level = inn.cdf(inn.tail_mean(a));
      } else {
        rec.var = rec.es = std::numeric_limits<double>::quiet_NaN();
      }
      out.records.push_back(rec);
    }
    out.params.push_back(theta);
  }
  return out;
}

enum class CombineMethod { Mean, Median, Min, Max };

inline std::string combine_label(CombineMethod m) {
  switch (m) {
    case CombineMethod::Mean: return "FC-Mean";
    case CombineMethod::Median: return "FC-Med";
    case CombineMethod::Min: return "FC-Min";
    case CombineMethod::Max: return "FC-Max";
  }
  return "FC";
}

inline CombineMethod parse_combine_method(std::string_view s) {
  if (s == "mean" || s == "FC-Mean") return CombineMethod::Mean;
  if (s == "median" || s == "med" || s == "FC-Med") return CombineMethod::Median;
  if (s == "min" || s == "FC-Min") return CombineMethod::Min;
  if (s == "max" || s == "FC-Max") return CombineMethod::Max;
  throw InputError("unknown combination method '" + std::string(s) + "'");
}

namespace detail {
inline double combine_values(std::vector<double> v, CombineMethod m) {
  switch (m) {
    case CombineMethod::Mean: {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    }
    case CombineMethod::Median: {
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
    case CombineMethod::Min: return *std::min_element(v.begin(), v.end());
    case CombineMethod::Max: return *std::max_element(v.begin(), v.end());
  }
  return v.front();
}
}  // namespace detail

/// Per-day combination of aligned forecast sequences, applied separately to
/// h_next, VaR and ES.
inline std::vector<ForecastRecord> combine(const std::vector<std::vector<ForecastRecord>>& models,
                                           CombineMethod method) {
  if (models.empty()) throw InputError("combine needs at least one model");
  const std::size_t m = models.front().size();
  for (const auto& recs : models) {
    if (recs.size() != m) throw InputError("forecast alignment error: sequences differ in length");
  }
  std::vector<ForecastRecord> out;
  out.reserve(m);
  std::vector<double> h(models.size()), var(models.size()), es(models.size()), lvl(models.size());
  for (std::size_t t = 0; t < m; ++t) {
    const auto& ref = models.front()[t];
    for (std::size_t j = 0; j < models.size(); ++j) {
      const auto& r = models[j][t];
      if (r.day != ref.day || r.alpha != ref.alpha) {
        throw InputError("forecast alignment error at " + format_date(ref.day));
      }
      h[j] = r.h_next;
      var[j] = r.var;
      es[j] = r.es;
      lvl[j] = r.es_level;
    }
    ForecastRecord c = ref;
    c.model_id = combine_label(method);
    c.h_next = detail::combine_values(h, method);
    c.var = detail::combine_values(var, method);
    c.es = detail::combine_values(es, method);
    c.es_level = detail::combine_values(lvl, CombineMethod::Mean);
    c.flagged = false;
    for (std::size_t j = 0; j < models.size(); ++j) c.flagged = c.flagged || models[j][t].flagged;
    out.push_back(c);
  }
  return out;
}

/// Splits records into per-model sequences, preserving order.
inline std::vector<std::pair<std::string, std::vector<ForecastRecord>>> group_by_model(
    const std::vector<ForecastRecord>& recs, std::optional<double> alpha = std::nullopt) {
  std::vector<std::pair<std::string, std::vector<ForecastRecord>>> out;
  for (const auto& r : recs) {
    if (alpha && r.alpha != *alpha) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == r.model_id; });
    if (it == out.end()) {
      out.emplace_back(r.model_id, std::vector<ForecastRecord>{});
      it = out.end() - 1;
    }
    it->second.push_back(r);
  }
  return out;
}

}  // namespace rgtw
