#pragma once

// Daily returns and realized volatility measures from intraday OHLC bars.
//
// Within a day the log-price grid is c[0] = ln(open of bar 1) and
// c[i] = ln(close of bar i) for i = 1..N, so the overnight move is excluded.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rgtw/calendar.hpp"
#include "rgtw/errors.hpp"

namespace rgtw {

struct IntradayBar {
  Date day;
  int interval = 0;  // 1-based bar index within the day
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
};

struct DailyBar {
  Date day;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
};

enum class MeasureKind { RV, RR, ScRV, ScRR, SubRV, SubRR, SqReturn, SqRange };

inline constexpr std::array<MeasureKind, 8> kAllMeasureKinds = {
    MeasureKind::RV,    MeasureKind::RR,    MeasureKind::ScRV,     MeasureKind::ScRR,
    MeasureKind::SubRV, MeasureKind::SubRR, MeasureKind::SqReturn, MeasureKind::SqRange};

inline std::string_view to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::RV: return "RV";
    case MeasureKind::RR: return "RR";
    case MeasureKind::ScRV: return "ScRV";
    case MeasureKind::ScRR: return "ScRR";
    case MeasureKind::SubRV: return "SubRV";
    case MeasureKind::SubRR: return "SubRR";
    case MeasureKind::SqReturn: return "SqReturn";
    case MeasureKind::SqRange: return "SqRange";
  }
  return "?";
}

/// Case-insensitive lookup ("rv", "SubRR", ...).
inline MeasureKind parse_measure_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (MeasureKind k : kAllMeasureKinds) {
    std::string name(to_string(k));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == lower) return k;
  }
  throw InputError("unknown measure kind '" + std::string(text) + "'");
}

/// Aligned daily returns (percent) and one realized measure.
struct RealizedSeries {
  std::vector<Date> days;
  std::vector<double> returns;
  std::vector<double> measure;
  MeasureKind kind = MeasureKind::RV;

  std::size_t size() const noexcept { return returns.size(); }

  void validate() const {
    if (days.size() != returns.size() || returns.size() != measure.size()) {
      throw InputError("realized series vectors have different lengths");
    }
    for (std::size_t t = 0; t < size(); ++t) {
      if (!std::isfinite(returns[t]) || !std::isfinite(measure[t])) {
        throw InputError("realized series has a missing value at " + format_date(days[t]));
      }
      if (measure[t] < 0.0) {
        throw InputError("realized measure is negative at " + format_date(days[t]));
      }
      if (t > 0 && !(days[t - 1] < days[t])) {
        throw InputError("realized series days are not strictly increasing at " +
                         format_date(days[t]));
      }
    }
  }
};

namespace detail {

inline void check_bar_prices(double open, double high, double low, double close,
                             const Date& day) {
  if (!(open > 0.0 && high > 0.0 && low > 0.0 && close > 0.0)) {
    throw InputError("nonpositive price on " + format_date(day));
  }
  if (high < low) throw InputError("high < low on " + format_date(day));
  if (open < low || open > high || close < low || close > high) {
    throw InputError("open/close outside [low, high] on " + format_date(day));
  }
}

// Copy of one day's bars sorted by interval, after validation.
inline std::vector<IntradayBar> normalized_day(std::span<const IntradayBar> bars) {
  if (bars.size() < 2) throw InputError("insufficient intraday data");
  std::vector<IntradayBar> day(bars.begin(), bars.end());
  std::stable_sort(day.begin(), day.end(),
                   [](const IntradayBar& a, const IntradayBar& b) { return a.interval < b.interval; });
  for (std::size_t i = 0; i < day.size(); ++i) {
    const auto& b = day[i];
    if (b.day != day.front().day) throw InputError("bars from more than one day");
    if (b.interval < 1) throw InputError("interval index must be >= 1");
    if (i > 0 && b.interval == day[i - 1].interval) {
      throw InputError("duplicate interval " + std::to_string(b.interval) + " on " +
                       format_date(b.day));
    }
    check_bar_prices(b.open, b.high, b.low, b.close, b.day);
  }
  return day;
}

inline void require_contiguous(const std::vector<IntradayBar>& day) {
  for (std::size_t i = 1; i < day.size(); ++i) {
    if (day[i].interval != day[i - 1].interval + 1) {
      throw InputError("incompatible sub-sampling grid: missing interval on " +
                       format_date(day[i].day));
    }
  }
}

// Log range over the price-grid interval (lo, hi], i.e. 0-based bars lo..hi-1.
inline double log_range(const std::vector<IntradayBar>& day, std::size_t lo, std::size_t hi) {
  double h = day[lo].high;
  double l = day[lo].low;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    h = std::max(h, day[i].high);
    l = std::min(l, day[i].low);
  }
  return std::log(h) - std::log(l);
}

inline std::size_t sub_sampling_factor(std::size_t fine_bars, std::size_t coarse_len) {
  if (coarse_len == 0 || fine_bars % coarse_len != 0) {
    throw InputError("incompatible sub-sampling grid: " + std::to_string(fine_bars) +
                     " fine bars with coarse length " + std::to_string(coarse_len));
  }
  return fine_bars / coarse_len;
}

}  // namespace detail

/// Percentage log-returns 100 * (ln C[t+1] - ln C[t]).
inline std::vector<double> daily_returns(std::span<const double> closes) {
  if (closes.size() < 2) throw InputError("daily_returns needs at least two closes");
  for (double c : closes) {
    if (!(c > 0.0)) throw InputError("nonpositive closing price");
  }
  std::vector<double> out(closes.size() - 1);
  for (std::size_t t = 0; t + 1 < closes.size(); ++t) {
    out[t] = 100.0 * (std::log(closes[t + 1]) - std::log(closes[t]));
  }
  return out;
}

inline std::vector<double> daily_returns(std::span<const DailyBar> daily) {
  std::vector<double> closes;
  closes.reserve(daily.size());
  for (const auto& d : daily) closes.push_back(d.close);
  return daily_returns(closes);
}

/// Sum of squared intraday log increments, anchored at the first bar's open.
inline double realized_variance(std::span<const IntradayBar> bars) {
  const auto day = detail::normalized_day(bars);
  double prev = std::log(day.front().open);
  double rv = 0.0;
  for (const auto& b : day) {
    const double c = std::log(b.close);
    rv += (c - prev) * (c - prev);
    prev = c;
  }
  return rv;
}

/// Sum of squared intraday log ranges divided by 4 ln 2.
inline double realized_range(std::span<const IntradayBar> bars) {
  const auto day = detail::normalized_day(bars);
  double sum = 0.0;
  for (const auto& b : day) {
    const double r = std::log(b.high) - std::log(b.low);
    sum += r * r;
  }
  return sum / (4.0 * std::log(2.0));
}

/// Trailing-window ratio scaling. Entry t >= q is
/// (sum_{l=1..q} proxy[t-l] / sum_{l=1..q} highfreq[t-l]) * highfreq[t];
/// entries t < q are warm-up and hold NaN.
inline std::vector<double> scale_measure(std::span<const double> highfreq,
                                         std::span<const double> daily_proxy, std::size_t q) {
  if (highfreq.size() != daily_proxy.size()) {
    throw InputError("scale_measure: series lengths differ");
  }
  if (q == 0 || highfreq.size() < q + 1) {
    throw InputError("scale_measure: need at least q + 1 observations");
  }
  std::vector<double> out(highfreq.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = q; t < highfreq.size(); ++t) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t l = 1; l <= q; ++l) {
      num += daily_proxy[t - l];
      den += highfreq[t - l];
    }
    if (den == 0.0) {
      // A window with no movement in either series carries no rescaling information.
      if (num != 0.0) throw DomainError("degenerate scaling window ending at index " + std::to_string(t));
      out[t] = highfreq[t];
      continue;
    }
    out[t] = num / den * highfreq[t];
  }
  return out;
}

/// RV on a coarse grid of `coarse_len` intervals averaged over every fine-grid
/// offset. Offset grid j (j = 1..n_k) has points {0, j, j + n_k, ..., j + n_k (M-1)}:
/// its first interval is shortened to [0, j] instead of reaching into the
/// previous day, and offset n_k is the standard coarse grid.
inline double subsampled_rv(std::span<const IntradayBar> bars, std::size_t coarse_len) {
  const auto day = detail::normalized_day(bars);
  detail::require_contiguous(day);
  const std::size_t nk = detail::sub_sampling_factor(day.size(), coarse_len);
  std::vector<double> c(day.size() + 1);
  c[0] = std::log(day.front().open);
  for (std::size_t i = 0; i < day.size(); ++i) c[i + 1] = std::log(day[i].close);

  double total = 0.0;
  for (std::size_t j = 1; j <= nk; ++j) {
    double rv = (c[j] - c[0]) * (c[j] - c[0]);
    for (std::size_t m = 1; m < coarse_len; ++m) {
      const double d = c[j + nk * m] - c[j + nk * (m - 1)];
      rv += d * d;
    }
    total += rv;
  }
  return total / static_cast<double>(nk);
}

/// Sub-sampled realized range on the same offset grids as subsampled_rv; each
/// coarse interval's range is the max fine high over the min fine low.
inline double subsampled_rr(std::span<const IntradayBar> bars, std::size_t coarse_len) {
  const auto day = detail::normalized_day(bars);
  detail::require_contiguous(day);
  const std::size_t nk = detail::sub_sampling_factor(day.size(), coarse_len);

  double total = 0.0;
  for (std::size_t j = 1; j <= nk; ++j) {
    const double first = detail::log_range(day, 0, j);
    double rr = first * first;
    for (std::size_t m = 1; m < coarse_len; ++m) {
      const double r = detail::log_range(day, j + nk * (m - 1), j + nk * m);
      rr += r * r;
    }
    total += rr;
  }
  return total / (4.0 * std::log(2.0) * static_cast<double>(nk));
}

// ---------------------------------------------------------------------------
// Daily pipeline

struct MeasureOptions {
  std::size_t scaling_window = 66;
  /// Coarse intervals per day for sub-sampling; 0 uses the modal bar count of the coarse file.
  std::size_t coarse_len = 0;
  double min_bar_fraction = 0.8;
  /// Expected bars per day; 0 uses the modal count.
  std::size_t expected_bars = 0;
  std::size_t expected_fine_bars = 0;
  /// Multiplier applied to every measure; 1e4 puts them in percent-squared units like r_t^2.
  double unit_scale = 1e4;
};

/// Aligned days with returns and all eight measures, warm-up trimmed.
struct MeasureTable {
  std::vector<Date> days;
  std::vector<double> returns;
  std::array<std::vector<double>, kAllMeasureKinds.size()> values;
  std::vector<std::string> warnings;

  const std::vector<double>& measure(MeasureKind kind) const {
    return values[static_cast<std::size_t>(kind)];
  }

  RealizedSeries series(MeasureKind kind) const {
    return RealizedSeries{days, returns, measure(kind), kind};
  }
};

namespace detail {

inline std::map<Date, std::vector<IntradayBar>> group_by_day(std::span<const IntradayBar> bars) {
  std::map<Date, std::vector<IntradayBar>> days;
  for (const auto& b : bars) days[b.day].push_back(b);
  return days;
}

inline std::size_t modal_count(const std::map<Date, std::vector<IntradayBar>>& days) {
  std::map<std::size_t, std::size_t> freq;
  for (const auto& [d, bars] : days) ++freq[bars.size()];
  std::size_t best = 0;
  std::size_t best_n = 0;
  for (const auto& [count, n] : freq) {
    if (n > best_n || (n == best_n && count > best)) {
      best = count;
      best_n = n;
    }
  }
  return best;
}

// Days that pass the bar-count check, with warnings for the rest.
inline std::map<Date, std::vector<IntradayBar>> usable_days(
    std::span<const IntradayBar> bars, std::size_t expected, double min_fraction,
    const char* label, std::vector<std::string>& warnings) {
  auto days = group_by_day(bars);
  if (expected == 0) expected = modal_count(days);
  for (auto it = days.begin(); it != days.end();) {
    const std::size_t n = it->second.size();
    if (n < 2) {
      warnings.push_back(format_date(it->first) + ": " + label +
                         " day skipped, insufficient intraday data");
      it = days.erase(it);
    } else if (static_cast<double>(n) < min_fraction * static_cast<double>(expected)) {
      warnings.push_back(format_date(it->first) + ": " + label + " day skipped, " +
                         std::to_string(n) + " of " + std::to_string(expected) + " bars");
      it = days.erase(it);
    } else {
      ++it;
    }
  }
  return days;
}

}  // namespace detail

inline MeasureTable compute_measures(std::span<const IntradayBar> coarse,
                                     std::span<const IntradayBar> fine,
                                     std::span<const DailyBar> daily,
                                     const MeasureOptions& opts = {}) {
  MeasureTable table;
  std::vector<DailyBar> sorted_daily(daily.begin(), daily.end());
  std::sort(sorted_daily.begin(), sorted_daily.end(),
            [](const DailyBar& a, const DailyBar& b) { return a.day < b.day; });
  for (std::size_t i = 0; i < sorted_daily.size(); ++i) {
    const auto& d = sorted_daily[i];
    detail::check_bar_prices(d.open, d.high, d.low, d.close, d.day);
    if (i > 0 && !(sorted_daily[i - 1].day < d.day)) {
      throw InputError("duplicate daily bar on " + format_date(d.day));
    }
  }
  const auto rets = daily_returns(std::span<const DailyBar>(sorted_daily));

  const auto coarse_days =
      detail::usable_days(coarse, opts.expected_bars, opts.min_bar_fraction, "coarse", table.warnings);
  const auto fine_days = detail::usable_days(fine, opts.expected_fine_bars, opts.min_bar_fraction,
                                             "fine", table.warnings);
  std::size_t coarse_len = opts.coarse_len;
  if (coarse_len == 0) coarse_len = detail::modal_count(coarse_days);

  const double log_range_norm = 4.0 * std::log(2.0);
  const double u = opts.unit_scale;
  std::vector<double> rv, rr, sub_rv, sub_rr, sq_ret, sq_range;
  for (std::size_t i = 1; i < sorted_daily.size(); ++i) {
    const auto& d = sorted_daily[i];
    const auto c_it = coarse_days.find(d.day);
    const auto f_it = fine_days.find(d.day);
    if (c_it == coarse_days.end() || f_it == fine_days.end()) {
      table.warnings.push_back(format_date(d.day) + ": no usable intraday data, day dropped");
      continue;
    }
    double s_rv = 0.0;
    double s_rr = 0.0;
    try {
      s_rv = subsampled_rv(f_it->second, coarse_len);
      s_rr = subsampled_rr(f_it->second, coarse_len);
    } catch (const InputError& e) {
      table.warnings.push_back(format_date(d.day) + ": " + e.what() + ", day dropped");
      continue;
    }
    const double range = std::log(d.high) - std::log(d.low);
    table.days.push_back(d.day);
    table.returns.push_back(rets[i - 1]);
    rv.push_back(u * realized_variance(c_it->second));
    rr.push_back(u * realized_range(c_it->second));
    sub_rv.push_back(u * s_rv);
    sub_rr.push_back(u * s_rr);
    sq_ret.push_back(rets[i - 1] * rets[i - 1]);
    sq_range.push_back(u * range * range / log_range_norm);
  }

  const std::size_t q = opts.scaling_window;
  if (table.days.size() < q + 1) {
    throw InputError("only " + std::to_string(table.days.size()) +
                     " usable days; scaling needs at least " + std::to_string(q + 1));
  }
  const auto sc_rv = scale_measure(rv, sq_ret, q);
  const auto sc_rr = scale_measure(rr, sq_range, q);

  auto trim = [q](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(q), v.end());
  };
  table.days.erase(table.days.begin(), table.days.begin() + static_cast<std::ptrdiff_t>(q));
  table.returns = trim(table.returns);
  auto set = [&](MeasureKind k, const std::vector<double>& v) {
    table.values[static_cast<std::size_t>(k)] = trim(v);
  };
  set(MeasureKind::RV, rv);
  set(MeasureKind::RR, rr);
  set(MeasureKind::ScRV, sc_rv);
  set(MeasureKind::ScRR, sc_rr);
  set(MeasureKind::SubRV, sub_rv);
  set(MeasureKind::SubRR, sub_rr);
  set(MeasureKind::SqReturn, sq_ret);
  set(MeasureKind::SqRange, sq_range);
  return table;
}

}  // namespace rgtw
