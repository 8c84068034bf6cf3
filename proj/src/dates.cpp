#include "dwrpm/dates.hpp"

#include <charconv>
#include <cstdio>

namespace dwrpm {

using namespace std::chrono;

std::optional<Date> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto digits = [&](std::size_t pos, std::size_t n, auto& out) {
    for (std::size_t i = pos; i < pos + n; ++i)
      if (text[i] < '0' || text[i] > '9') return false;
    return std::from_chars(text.data() + pos, text.data() + pos + n, out).ec == std::errc();
  };
  if (!digits(0, 4, y) || !digits(5, 2, m) || !digits(8, 2, d)) return std::nullopt;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

std::string format_iso_date(Date date) {
  const year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int year_of(Date date) { return static_cast<int>(year_month_day{date}.year()); }

unsigned month_of(Date date) { return static_cast<unsigned>(year_month_day{date}.month()); }

unsigned day_of_year(Date date) {
  const year_month_day ymd{date};
  const Date jan1 = sys_days{ymd.year() / January / 1};
  return static_cast<unsigned>((date - jan1).count()) + 1;
}

Date make_date(int y, unsigned m, unsigned d) { return sys_days{year{y} / month{m} / day{d}}; }

bool is_leap_year(int y) { return year{y}.is_leap(); }

}  // namespace dwrpm
