#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace spillover {

using Date = std::chrono::sys_days;
using Timestamp = std::chrono::sys_seconds;

// Inclusive calendar range.
struct DateWindow {
  Date first;
  Date last;

  bool contains(Date d) const { return first <= d && d <= last; }
  int days() const { return static_cast<int>((last - first).count()) + 1; }
  bool operator==(const DateWindow&) const = default;
};

// "YYYY-MM-DD".
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);

// "YYYY-MM-DDTHH:MM[:SS][Z|+HH:MM|-HH:MM]", also with a space separator. Converted to UTC.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

// 0 = Sunday ... 6 = Saturday.
inline unsigned weekday_index(Date d) { return std::chrono::weekday(d).c_encoding(); }

}  // namespace spillover
