#pragma once

#include "shapmine/error.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

namespace shapmine::csv {

/// Round-trip exact double formatting (shortest %.17g is not needed; 17
/// significant digits always reparse to the same bits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string join(const std::vector<std::string>& fields, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(sep);
        out += fields[i];
    }
    return out;
}

/// Splits one CSV line. Fields must not contain the separator; quoting is
/// not part of the supported subset.
inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

/// Splits text into lines, dropping a trailing empty line.
inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

inline double parse_double(const std::string& s) {
    if (s.empty()) throw ParseError("empty numeric field");
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw ParseError("bad numeric field: '" + s + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& s) {
    if (s.empty()) throw ParseError("empty integer field");
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) throw ParseError("bad integer field: '" + s + "'");
    return v;
}

} // namespace shapmine::csv
