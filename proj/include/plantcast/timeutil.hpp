#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace plantcast {

using Timestamp = std::chrono::sys_seconds;

// Parses `YYYY-MM-DDTHH:MM:SSZ` (UTC only). Throws Error(ParseError).
Timestamp parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp t);

inline std::int64_t seconds_since_epoch(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_seconds(std::int64_t s) { return Timestamp{std::chrono::seconds{s}}; }

}  // namespace plantcast
