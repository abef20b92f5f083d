#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "rgtw/errors.hpp"

namespace rgtw {

using Date = std::chrono::year_month_day;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD).
inline Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const std::string s(text);
  if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw InputError("invalid ISO date '" + s + "'");
  }
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw InputError("invalid calendar date '" + s + "'");
  return date;
}

inline std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

/// Next Monday-to-Friday date strictly after `date`.
inline Date next_business_day(const Date& date) {
  std::chrono::sys_days d{date};
  do {
    d += std::chrono::days{1};
  } while (std::chrono::weekday{d} == std::chrono::Saturday ||
           std::chrono::weekday{d} == std::chrono::Sunday);
  return Date{d};
}

}  // namespace rgtw
