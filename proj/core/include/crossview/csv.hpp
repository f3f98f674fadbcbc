#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossview::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
    const std::string& cell(std::size_t row, const std::string& name) const;
};

/// Minimal CSV reader: comma-separated, optional double-quote quoting,
/// first line is the header.
Table read_file(const std::string& path);

void write_file(const std::string& path, const Table& table);

std::vector<std::string> split_line(const std::string& line);
std::string join_row(const std::vector<std::string>& fields);

}  // namespace crossview::csv
