#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "mitoref/errors.hpp"

namespace mitoref::csv {

/// Split one line on commas. No quoting: the file formats here never embed
/// commas in fields.
inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

/// Parse a whole stream into rows, skipping blank lines and trailing CR.
inline std::vector<std::vector<std::string>> parse(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

inline std::vector<std::vector<std::string>> read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return parse(f);
}

/// Fixed-point formatting used for all numeric CSV output, so that repeated
/// runs are byte-identical.
inline std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("expected a number, got '" + s + "' in " + context);
    }
}

inline long long parse_int(const std::string& s, const std::string& context) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("expected an integer, got '" + s + "' in " + context);
    }
}

}  // namespace mitoref::csv
