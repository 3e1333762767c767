#pragma once

#include <cstdint>
#include <string>

namespace prefail {

// Calendar days are carried around as days since 1970-01-01 so histories
// sort and diff with integer arithmetic.

// Parses "YYYY-MM-DD". Returns false on anything else.
bool parse_date(const std::string& text, std::int32_t& day_number);

std::int32_t days_from_civil(int year, unsigned month, unsigned day);
void civil_from_days(std::int32_t day_number, int& year, unsigned& month, unsigned& day);

std::string format_date(std::int32_t day_number);

}  // namespace prefail
