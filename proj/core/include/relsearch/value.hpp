#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace relsearch {

/// One SQL result cell. Booleans and timestamps ride as integer/text, matching
/// the storage engine's dynamic typing.
using Cell = std::variant<std::monostate, int64_t, double, std::string>;

bool cell_is_null(const Cell& c);
bool cell_is_numeric(const Cell& c);
double cell_as_double(const Cell& c);  // numeric cells only
std::string cell_to_text(const Cell& c);

struct RowSet {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    bool truncated = false;

    /// Tab-separated rendering with a header line, used for tool observations.
    std::string to_text(size_t max_rows = 0) const;
};

}  // namespace relsearch
