#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace resilience::io {

// Line-oriented reader for the plain comma-separated schemas used here
// (no quoting). Tracks 1-based line numbers for rejection reports.
class CsvReader {
 public:
  // Opens the file and checks the header line matches exactly; throws InputError otherwise.
  CsvReader(const std::filesystem::path& path, std::string_view expected_header);

  // Next data row split on commas; std::nullopt at end of file. Blank lines are skipped.
  std::optional<std::vector<std::string_view>> next();
  std::size_t line_number() const { return line_no_; }

 private:
  std::string contents_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 1;
  std::string path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);
std::optional<int64_t> parse_int(std::string_view s);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace resilience::io
