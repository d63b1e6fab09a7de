#include "relsearch/value.hpp"

#include <cstdio>
#include <sstream>

namespace relsearch {

bool cell_is_null(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

bool cell_is_numeric(const Cell& c) {
    return std::holds_alternative<int64_t>(c) || std::holds_alternative<double>(c);
}

double cell_as_double(const Cell& c) {
    if (const auto* i = std::get_if<int64_t>(&c)) return static_cast<double>(*i);
    return std::get<double>(c);
}

std::string cell_to_text(const Cell& c) {
    if (cell_is_null(c)) return "NULL";
    if (const auto* i = std::get_if<int64_t>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", *d);
        return buf;
    }
    return std::get<std::string>(c);
}

std::string RowSet::to_text(size_t max_rows) const {
    std::ostringstream out;
    for (size_t i = 0; i < columns.size(); ++i) {
        if (i) out << '\t';
        out << columns[i];
    }
    out << '\n';
    size_t shown = 0;
    for (const auto& row : rows) {
        if (max_rows && shown >= max_rows) break;
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out << '\t';
            out << cell_to_text(row[i]);
        }
        out << '\n';
        ++shown;
    }
    if (truncated) out << "(result truncated)\n";
    return out.str();
}

}  // namespace relsearch
