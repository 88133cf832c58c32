#include "poisonlab/csv.hpp"

#include "poisonlab/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

namespace poisonlab::csv {

std::string num(double v) {
    char buf[32];
    int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw DataError("missing CSV column '" + std::string(name) + "'");
}

Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto row = split(line);
        if (row.size() != t.header.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields");
        t.rows.push_back(std::move(row));
    }
    return t;
}

double to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw DataError("trailing characters in '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw DataError("not a number: '" + s + "'");
    }
}

long long to_int(const std::string& s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw DataError("not an integer: '" + s + "'");
    return v;
}

} // namespace poisonlab::csv
