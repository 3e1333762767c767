#include "prefail/date.hpp"

#include <cstdio>

namespace prefail {

// Civil-date conversions after Howard Hinnant's chrono algorithms.
std::int32_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
}

void civil_from_days(std::int32_t z, int& year, unsigned& month, unsigned& day) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = doy - (153 * mp + 2) / 5 + 1;
    month = mp + (mp < 10 ? 3 : -9);
    year = y + (month <= 2);
}

bool parse_date(const std::string& text, std::int32_t& day_number) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (text[i] < '0' || text[i] > '9') return false;
    }
    const int year = (text[0] - '0') * 1000 + (text[1] - '0') * 100 + (text[2] - '0') * 10 + (text[3] - '0');
    const unsigned month = static_cast<unsigned>((text[5] - '0') * 10 + (text[6] - '0'));
    const unsigned day = static_cast<unsigned>((text[8] - '0') * 10 + (text[9] - '0'));
    if (month < 1 || month > 12 || day < 1 || day > 31) return false;
    day_number = days_from_civil(year, month, day);
    // Reject impossible dates like 2017-02-30 by round-tripping.
    int y2;
    unsigned m2, d2;
    civil_from_days(day_number, y2, m2, d2);
    return y2 == year && m2 == month && d2 == day;
}

std::string format_date(std::int32_t day_number) {
    int y;
    unsigned m, d;
    civil_from_days(day_number, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
    return buf;
}

}  // namespace prefail
