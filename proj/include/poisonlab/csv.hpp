#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace poisonlab::csv {

/// 17 significant digits: doubles survive a text round trip bit-exactly.
std::string num(double v);

std::vector<std::string> split(std::string_view line);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;
};

/// Throws DataError when the file is missing or rows are ragged.
Table read(const std::string& path);

double to_double(const std::string& s);
long long to_int(const std::string& s);

} // namespace poisonlab::csv
