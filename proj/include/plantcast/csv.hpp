#pragma once
// Small strict CSV reader/writer shared by the pheno, env, fused, forecast and
// report formats. No quoting: none of the schemas carry commas in fields.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace plantcast::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

std::vector<std::string> split(std::string_view line);
Table read(const std::filesystem::path& path);

// Throws Error(ParseError) naming file, line and column on failure.
double parse_double(const std::string& field, const std::filesystem::path& path, std::size_t line,
                    std::string_view column);
long long parse_int(const std::string& field, const std::filesystem::path& path, std::size_t line,
                    std::string_view column);

std::string format_fixed(double v, int decimals);
// Shortest representation that round-trips exactly.
std::string format_exact(double v);
std::string join(const std::vector<std::string>& fields);

// Writes `contents` to a sibling temp file and renames it into place, so a
// failed run never leaves a partial file at `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
void write_atomic_binary(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

}  // namespace plantcast::csv
