#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctxsched {

/// Shortest decimal text that reads back as the same double.
std::string format_double(double v);

using CsvRow = std::vector<std::string>;

/// Writes a header and rows, quoting fields that need it. Throws Error on
/// IO failure.
void write_csv(const std::filesystem::path& path, const CsvRow& header,
               const std::vector<CsvRow>& rows);

/// Parses simple CSV text (quoted fields allowed) into rows, header included.
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

}  // namespace ctxsched
