#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qsched {

/// Shortest decimal string that parses back to exactly the same double
/// (std::to_chars round-trip form).
std::string format_double(double x);

/// Writes `text` to `path` atomically: the bytes land in a sibling temporary
/// file which is then renamed over the target, so readers never observe a
/// partially written file.
void atomic_write_text(const std::filesystem::path& path,
                       std::string_view text);

/// Renders a CSV table (comma separation, LF line endings, mandatory header)
/// and writes it atomically. Every row must have exactly header.size() cells;
/// cells must not contain commas, quotes, or newlines — callers join list
/// values with semicolons.
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// The CSV text produced by write_csv, for tests and in-memory use.
std::string render_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);

}  // namespace qsched
