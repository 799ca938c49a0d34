#pragma once

// File emission helpers shared by the CLI and scenarios: atomic writes,
// 17-significant-digit formatting and a minimal CSV reader/writer.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace npm::io {

/// Writes to "<path>.tmp" and renames over `path`, so readers never observe
/// a partially written file.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

/// %.17g
std::string format_double(double v);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    CsvWriter& add(double v);
    CsvWriter& add(long long v);
    CsvWriter& add(std::string_view v);
    void end_row();

    const std::string& str() const noexcept { return text_; }
    std::size_t columns() const noexcept { return columns_; }
    void save(const std::filesystem::path& path) const { atomic_write(path, text_); }

private:
    std::size_t columns_;
    std::size_t pending_ = 0;
    std::string text_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; throws std::out_of_range if absent.
    std::size_t column(std::string_view name) const;
    double number(std::size_t row, std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace npm::io
