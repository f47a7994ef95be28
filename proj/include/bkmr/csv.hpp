#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace bkmr {

/// A CSV file with a header row; all cells kept as text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Position of a header column; throws a schema error naming it when absent.
    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;
    /// Parses a whole column as finite doubles.
    std::vector<double> numeric_column(const std::string& name) const;
};

/// RFC 4180: comma separated, double-quoted fields may hold commas, quotes ("")
/// and line breaks; CRLF and LF line endings are both accepted.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form; identical bytes on every platform run.
std::string format_double(double value);
std::string csv_escape(std::string_view field);

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);
    void row(const std::vector<std::string>& fields);
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

}  // namespace bkmr
