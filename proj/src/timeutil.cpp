#include "plantcast/timeutil.hpp"

#include <charconv>
#include <cstdio>

#include "plantcast/error.hpp"

namespace plantcast {

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) {
    throw Error(ErrorCode::ParseError, "bad timestamp '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

Timestamp parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
    throw Error(ErrorCode::ParseError,
                "timestamp '" + std::string(text) + "' is not YYYY-MM-DDTHH:MM:SSZ");
  }
  const year_month_day ymd{year{parse_field(text, 0, 4)},
                           month{static_cast<unsigned>(parse_field(text, 5, 2))},
                           day{static_cast<unsigned>(parse_field(text, 8, 2))}};
  const int hh = parse_field(text, 11, 2);
  const int mm = parse_field(text, 14, 2);
  const int ss = parse_field(text, 17, 2);
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) {
    throw Error(ErrorCode::ParseError, "timestamp '" + std::string(text) + "' out of range");
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const sys_days day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

}  // namespace plantcast
