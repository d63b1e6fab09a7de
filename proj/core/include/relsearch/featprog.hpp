#pragma once

// SQL feature programs: parse, statically check, hash, and materialize into
// row-aligned feature matrices.

#include <chrono>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "relsearch/relstore.hpp"

namespace relsearch {

struct FeatureQuery {
    std::string name;
    std::string sql;
};

struct FeatureProgram {
    std::vector<FeatureQuery> queries;

    std::vector<std::string> query_names() const;
};

/// Parse the wire format: a JSON array of {"name": ..., "sql": ...} objects.
FeatureProgram parse_program(const std::string& json_text);
std::string program_to_json(const FeatureProgram& program);

enum class AnchorVerdict { ok, missing_row_id, not_anchored_on_eval_table, parse_error };

struct AnchorFinding {
    std::string query_name;
    AnchorVerdict verdict = AnchorVerdict::ok;
    std::string message;
};

struct AnchorReport {
    std::vector<AnchorFinding> findings;
    bool passes() const;
    std::string to_text() const;
};

/// Lexical anchoring check: every query must reference eval_table and list
/// row_id in its outermost SELECT.
AnchorReport check_anchoring(const FeatureProgram& program);

struct FeatureColumn {
    std::string name;                 // "<query_name>__<col>"
    bool text = false;                // categorical-text column
    std::vector<double> numeric;      // NaN where null (numeric columns)
    std::vector<std::string> values;  // text columns
    std::vector<uint8_t> null_mask;   // 1 where null

    size_t size() const { return null_mask.size(); }
    double missing_rate() const;
    bool is_constant() const;
};

struct FeatureMatrix {
    std::vector<int64_t> row_ids;
    std::vector<FeatureColumn> columns;
    std::set<std::string> declared_categoricals;

    // rows each query returned before the left join, for diagnostics
    std::vector<std::pair<std::string, size_t>> query_row_counts;

    size_t rows() const { return row_ids.size(); }
    size_t cols() const { return columns.size(); }
    const FeatureColumn* find(const std::string& name) const;
};

inline constexpr std::chrono::milliseconds kFeatureQueryTimeout{300'000};

/// Execute every query of `program` against the bound `split` and left-join
/// the results onto the split's canonical row_id sequence. Binds the split.
FeatureMatrix materialize(ContextHandle& ctx, const FeatureProgram& program, Split split,
                          const std::set<std::string>& categoricals = {},
                          std::chrono::milliseconds per_query_timeout = kFeatureQueryTimeout);

/// Stable content hash over the ordered (name, sql) pairs, hex-encoded.
std::string program_hash(const FeatureProgram& program);

}  // namespace relsearch
