#pragma once

// CSV and JSON readers and writers for bars, measures, forecasts, parameters
// and run manifests.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgtw/calendar.hpp"
#include "rgtw/errors.hpp"
#include "rgtw/forecast.hpp"
#include "rgtw/measures.hpp"
#include "rgtw/model.hpp"

namespace rgtw::io {

using json = nlohmann::ordered_json;

/// Shortest round-trip decimal form of a double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write output file '" + path.string() + "'");
  out << content;
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

/// 64-bit FNV-1a digest, hex encoded.
inline std::string fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    throw InputError(source + ":" + std::to_string(line) + ": " + msg);
  }

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    fail(1, "missing column '" + std::string(name) + "'");
  }

  bool has_column(std::string_view name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }

  double number(const CsvRow& row, std::size_t col) const {
    const std::string& s = row.cells[col];
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail(row.line, "column '" + header[col] + "': invalid number '" + s + "'");
    }
    return v;
  }

  long integer(const CsvRow& row, std::size_t col) const {
    const std::string& s = row.cells[col];
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail(row.line, "column '" + header[col] + "': invalid integer '" + s + "'");
    }
    return v;
  }

  Date date(const CsvRow& row, std::size_t col) const {
    try {
      return parse_date(row.cells[col]);
    } catch (const InputError& e) {
      fail(row.line, e.what());
    }
  }
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    std::string_view cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    out.emplace_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline CsvTable parse_csv(std::string_view text, std::string source) {
  CsvTable t;
  t.source = std::move(source);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      t.fail(line_no, "expected " + std::to_string(t.header.size()) + " fields, found " +
                          std::to_string(cells.size()));
    }
    t.rows.push_back({line_no, std::move(cells)});
  }
  if (t.header.empty()) throw InputError(t.source + ": empty CSV file");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

inline void require_header(const CsvTable& t, std::initializer_list<std::string_view> cols) {
  for (auto c : cols) t.column(c);
}

// ---------------------------------------------------------------------------
// Bars

inline std::vector<IntradayBar> read_intraday_bars(const CsvTable& t) {
  require_header(t, {"date", "interval", "open", "high", "low", "close"});
  const auto cd = t.column("date"), ci = t.column("interval"), co = t.column("open"),
             ch = t.column("high"), cl = t.column("low"), cc = t.column("close");
  std::vector<IntradayBar> bars;
  bars.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    IntradayBar b;
    b.day = t.date(row, cd);
    const long iv = t.integer(row, ci);
    if (iv < 1) t.fail(row.line, "interval must be a 1-based index");
    b.interval = static_cast<int>(iv);
    b.open = t.number(row, co);
    b.high = t.number(row, ch);
    b.low = t.number(row, cl);
    b.close = t.number(row, cc);
    if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0)) t.fail(row.line, "prices must be positive");
    if (b.high < b.low || b.open < b.low || b.open > b.high || b.close < b.low || b.close > b.high) {
      t.fail(row.line, "bar violates low <= open, close <= high");
    }
    bars.push_back(b);
  }
  return bars;
}

inline std::vector<DailyBar> read_daily_bars(const CsvTable& t) {
  require_header(t, {"date", "open", "high", "low", "close"});
  const auto cd = t.column("date"), co = t.column("open"), ch = t.column("high"), cl = t.column("low"),
             cc = t.column("close");
  std::vector<DailyBar> bars;
  for (const auto& row : t.rows) {
    DailyBar b;
    b.day = t.date(row, cd);
    b.open = t.number(row, co);
    b.high = t.number(row, ch);
    b.low = t.number(row, cl);
    b.close = t.number(row, cc);
    if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0)) t.fail(row.line, "prices must be positive");
    if (b.high < b.low || b.open < b.low || b.open > b.high || b.close < b.low || b.close > b.high) {
      t.fail(row.line, "bar violates low <= open, close <= high");
    }
    if (!bars.empty() && !(bars.back().day < b.day)) t.fail(row.line, "daily dates must be strictly increasing");
    bars.push_back(b);
  }
  return bars;
}

inline std::string intraday_csv(const std::vector<IntradayBar>& bars) {
  std::string s = "date,interval,open,high,low,close\n";
  for (const auto& b : bars) {
    s += format_date(b.day) + ',' + std::to_string(b.interval) + ',' + fmt(b.open) + ',' + fmt(b.high) + ',' +
         fmt(b.low) + ',' + fmt(b.close) + '\n';
  }
  return s;
}

inline std::string daily_csv(const std::vector<DailyBar>& bars) {
  std::string s = "date,open,high,low,close\n";
  for (const auto& b : bars) {
    s += format_date(b.day) + ',' + fmt(b.open) + ',' + fmt(b.high) + ',' + fmt(b.low) + ',' + fmt(b.close) + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Measures and realized series

/// Row kind carrying the daily percentage return in the long measures format.
inline constexpr std::string_view kReturnKind = "return";

/// Long format `date,measure_kind,value`: the return row of each day first,
/// then the eight measures in registry order.
inline std::string measures_csv(const MeasureTable& t) {
  std::string s = "date,measure_kind,value\n";
  for (std::size_t i = 0; i < t.days.size(); ++i) {
    const std::string d = format_date(t.days[i]);
    s += d + ',' + std::string(kReturnKind) + ',' + fmt(t.returns[i]) + '\n';
    for (auto k : kAllMeasureKinds) s += d + ',' + std::string(to_string(k)) + ',' + fmt(t.measure(k)[i]) + '\n';
  }
  return s;
}

/// Reads either the long measures format (selecting `kind`) or a wide file
/// with `date,return,measure` columns.
inline RealizedSeries read_realized_series(const CsvTable& t, MeasureKind kind) {
  RealizedSeries s;
  s.kind = kind;
  if (t.has_column("measure_kind")) {
    require_header(t, {"date", "measure_kind", "value"});
    const auto cd = t.column("date"), ck = t.column("measure_kind"), cv = t.column("value");
    std::map<Date, std::pair<std::optional<double>, std::optional<double>>> by_day;
    const std::string want(to_string(kind));
    for (const auto& row : t.rows) {
      const auto& k = row.cells[ck];
      if (k != kReturnKind) {
        try {
          parse_measure_kind(k);
        } catch (const InputError& e) {
          t.fail(row.line, e.what());
        }
      }
      auto& slot = by_day[t.date(row, cd)];
      if (k == kReturnKind) {
        if (slot.first) t.fail(row.line, "duplicate return row");
        slot.first = t.number(row, cv);
      } else if (k == want) {
        if (slot.second) t.fail(row.line, "duplicate " + want + " row");
        slot.second = t.number(row, cv);
      }
    }
    for (const auto& [d, v] : by_day) {
      if (!v.first || !v.second) {
        throw InputError(t.source + ": day " + format_date(d) + " lacks a return or " + want + " value");
      }
      s.days.push_back(d);
      s.returns.push_back(*v.first);
      s.measure.push_back(*v.second);
    }
  } else {
    require_header(t, {"date", "return", "measure"});
    const auto cd = t.column("date"), cr = t.column("return"), cm = t.column("measure");
    for (const auto& row : t.rows) {
      s.days.push_back(t.date(row, cd));
      s.returns.push_back(t.number(row, cr));
      s.measure.push_back(t.number(row, cm));
    }
  }
  if (s.days.empty()) throw InputError(t.source + ": no data rows");
  s.validate();
  return s;
}

inline std::string series_csv(const std::vector<Date>& days, const std::vector<double>& r,
                              const std::vector<double>& x, const std::vector<double>& h) {
  std::string s = "date,return,measure,h\n";
  for (std::size_t i = 0; i < days.size(); ++i) {
    s += format_date(days[i]) + ',' + fmt(r[i]) + ',' + fmt(x[i]) + ',' + fmt(h[i]) + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Forecast records

/// `date,model,alpha,h_next,var,es,return,violation` followed by the implied
/// ES level and the estimation-failure flag.
inline std::string forecast_csv(const std::vector<ForecastRecord>& recs) {
  std::string s = "date,model,alpha,h_next,var,es,return,violation,es_level,flagged\n";
  for (const auto& r : recs) {
    s += format_date(r.day) + ',' + r.model_id + ',' + fmt(r.alpha) + ',' + fmt(r.h_next) + ',' + fmt(r.var) + ',' +
         fmt(r.es) + ',' + fmt(r.realized_return) + ',' + (r.violation() ? "1" : "0") + ',' + fmt(r.es_level) +
         ',' + (r.flagged ? "1" : "0") + '\n';
  }
  return s;
}

inline std::vector<ForecastRecord> read_forecasts(const CsvTable& t) {
  require_header(t, {"date", "model", "alpha", "h_next", "var", "es", "return"});
  const auto cd = t.column("date"), cm = t.column("model"), ca = t.column("alpha"), ch = t.column("h_next"),
             cv = t.column("var"), ce = t.column("es"), cr = t.column("return");
  const bool has_level = t.has_column("es_level");
  const bool has_flag = t.has_column("flagged");
  std::vector<ForecastRecord> out;
  for (const auto& row : t.rows) {
    ForecastRecord r;
    r.day = t.date(row, cd);
    r.model_id = row.cells[cm];
    if (r.model_id.empty()) t.fail(row.line, "empty model id");
    r.alpha = t.number(row, ca);
    if (!(r.alpha > 0.0 && r.alpha < 0.5)) t.fail(row.line, "alpha must lie in (0, 0.5)");
    r.h_next = t.number(row, ch);
    r.var = t.number(row, cv);
    r.es = t.number(row, ce);
    r.realized_return = t.number(row, cr);
    if (!std::isfinite(r.var) || !std::isfinite(r.es) || !std::isfinite(r.realized_return)) {
      t.fail(row.line, "non-finite forecast value");
    }
    if (has_level) r.es_level = t.number(row, t.column("es_level"));
    if (has_flag) r.flagged = t.integer(row, t.column("flagged")) != 0;
    out.push_back(std::move(r));
  }
  return out;
}

/// Tidy overlay data: one row per (day, model, alpha, series).
inline std::string plot_data_csv(const std::vector<ForecastRecord>& recs) {
  std::string s = "date,model,alpha,series,value\n";
  for (const auto& r : recs) {
    const std::string head = format_date(r.day) + ',' + r.model_id + ',' + fmt(r.alpha) + ',';
    s += head + "return," + fmt(r.realized_return) + '\n';
    s += head + "var," + fmt(r.var) + '\n';
    s += head + "es," + fmt(r.es) + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Parameters

inline json params_json(ModelKind kind, std::span<const double> theta) {
  const auto names = parameter_names(kind);
  if (theta.size() != names.size()) throw InputError("wrong parameter count");
  json j;
  j["model"] = std::string(model_name(kind));
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = theta[i];
  return j;
}

struct ParamFile {
  ModelKind model = ModelKind::RgTWG;
  std::vector<double> theta;
};

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": invalid JSON: " + e.what());
  }
}

/// Reads a flat parameter object keyed by symbol name; "model" is optional
/// when `kind` is given.
inline ParamFile read_params(const std::filesystem::path& path, std::optional<ModelKind> kind = std::nullopt) {
  const json j = parse_json(read_file(path), path.string());
  if (!j.is_object()) throw InputError(path.string() + ": parameter file must be a JSON object");
  ParamFile p;
  if (j.contains("model")) {
    p.model = parse_model_kind(j.at("model").get<std::string>());
    if (kind && *kind != p.model) {
      throw InputError(path.string() + ": parameters are for " + std::string(model_name(p.model)) + ", not " +
                       std::string(model_name(*kind)));
    }
  } else if (kind) {
    p.model = *kind;
  } else {
    throw InputError(path.string() + ": parameter file lacks a model");
  }
  const json& src = j.contains("params") ? j.at("params") : j;
  for (const auto& name : parameter_names(p.model)) {
    if (!src.contains(name) || !src.at(name).is_number()) {
      throw InputError(path.string() + ": missing numeric parameter '" + name + "'");
    }
    p.theta.push_back(src.at(name).get<double>());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Manifest

struct Manifest {
  std::string command;
  json config = json::object();
  json inputs = json::array();
  json outputs = json::array();
  json seeds = json::object();
  json timings = json::object();

  void add_input(const std::filesystem::path& path) {
    inputs.push_back({{"path", path.string()}, {"fnv1a64", fnv1a64(read_file(path))}});
  }
  void add_output(const std::filesystem::path& path) {
    outputs.push_back({{"path", path.string()}, {"fnv1a64", fnv1a64(read_file(path))}});
  }

  json to_json() const {
    json j;
    j["tool"] = "rgtw";
#ifdef RGTW_VERSION
    j["version"] = RGTW_VERSION;
#endif
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seeds"] = seeds;
    j["timings_seconds"] = timings;
    return j;
  }
};

}  // namespace rgtw::io
