#pragma once

// Minimal CSV helpers for the plain numeric/identifier files used here.
// No quoting support: fields never contain commas.

#include "pode/error.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace pode::csv {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Non-empty, non-comment rows of a CSV file.
inline std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open file: " + file.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        rows.push_back(split(t));
    }
    return rows;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

inline double to_double(const std::string& s, const std::string& context) {
    double v = 0.0;
    if (!parse_double(s, v)) throw InputError(context + ": not a number: '" + s + "'");
    return v;
}

} // namespace pode::csv
