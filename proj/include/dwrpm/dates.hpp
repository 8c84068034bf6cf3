#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace dwrpm {

using Date = std::chrono::sys_days;

/// Strict YYYY-MM-DD; nullopt for anything else, including impossible dates.
std::optional<Date> parse_iso_date(std::string_view text);
std::string format_iso_date(Date date);

int year_of(Date date);
unsigned month_of(Date date);
/// 1-based day of the year (1..366).
unsigned day_of_year(Date date);
Date make_date(int year, unsigned month, unsigned day);
bool is_leap_year(int year);

}  // namespace dwrpm
