#include "relsearch/featprog.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "relsearch/error.hpp"
#include "sql_lex.hpp"

using nlohmann::json;

namespace relsearch {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

const char* verdict_text(AnchorVerdict v) {
    switch (v) {
        case AnchorVerdict::ok: return "ok";
        case AnchorVerdict::missing_row_id: return "missing_row_id";
        case AnchorVerdict::not_anchored_on_eval_table: return "not_anchored_on_eval_table";
        case AnchorVerdict::parse_error: return "parse_error";
    }
    return "?";
}

}  // namespace

std::vector<std::string> FeatureProgram::query_names() const {
    std::vector<std::string> names;
    names.reserve(queries.size());
    for (const auto& q : queries) names.push_back(q.name);
    return names;
}

FeatureProgram parse_program(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        raise(ErrorKind::JsonError, std::string("feature_queries_json: ") + e.what());
    }
    if (!j.is_array())
        raise(ErrorKind::JsonError, "feature_queries_json must be a JSON array");
    if (j.empty()) raise(ErrorKind::EmptyProgram, "feature program has no queries");

    FeatureProgram program;
    std::set<std::string> seen;
    for (const auto& entry : j) {
        if (!entry.is_object() || !entry.contains("name") || !entry.contains("sql") ||
            !entry["name"].is_string() || !entry["sql"].is_string())
            raise(ErrorKind::JsonError,
                  "each feature query must be an object with string fields 'name' and 'sql'");
        FeatureQuery q{entry["name"].get<std::string>(), entry["sql"].get<std::string>()};
        if (q.name.empty()) raise(ErrorKind::JsonError, "feature query name must be nonempty");
        if (!seen.insert(q.name).second)
            raise(ErrorKind::DuplicateName, "duplicate feature query name '" + q.name + "'");
        program.queries.push_back(std::move(q));
    }
    return program;
}

std::string program_to_json(const FeatureProgram& program) {
    json j = json::array();
    for (const auto& q : program.queries) j.push_back({{"name", q.name}, {"sql", q.sql}});
    return j.dump(2);
}

bool AnchorReport::passes() const {
    for (const auto& f : findings)
        if (f.verdict != AnchorVerdict::ok) return false;
    return true;
}

std::string AnchorReport::to_text() const {
    std::ostringstream out;
    for (const auto& f : findings) {
        out << f.query_name << ": " << verdict_text(f.verdict);
        if (!f.message.empty()) out << " (" << f.message << ")";
        out << "\n";
    }
    return out.str();
}

AnchorReport check_anchoring(const FeatureProgram& program) {
    AnchorReport report;
    for (const auto& q : program.queries) {
        AnchorFinding f;
        f.query_name = q.name;
        std::string kw = sqlx::first_keyword(q.sql);
        if (kw != "select" && kw != "with") {
            f.verdict = AnchorVerdict::parse_error;
            f.message = "feature queries must be a single SELECT statement";
        } else if (!sqlx::contains_word(q.sql, "eval_table")) {
            f.verdict = AnchorVerdict::not_anchored_on_eval_table;
            f.message = "query must read target rows from eval_table";
        } else {
            auto select_list = sqlx::outer_select_list(q.sql);
            bool has_row_id =
                std::find(select_list.begin(), select_list.end(), "row_id") != select_list.end();
            if (!has_row_id) {
                f.verdict = AnchorVerdict::missing_row_id;
                f.message = "outermost SELECT must return row_id";
            }
        }
        report.findings.push_back(std::move(f));
    }
    return report;
}

double FeatureColumn::missing_rate() const {
    if (null_mask.empty()) return 0.0;
    size_t nulls = 0;
    for (uint8_t m : null_mask) nulls += m;
    return static_cast<double>(nulls) / static_cast<double>(null_mask.size());
}

bool FeatureColumn::is_constant() const {
    if (null_mask.empty()) return true;
    bool first = true;
    double num0 = 0;
    std::string txt0;
    bool null0 = false;
    for (size_t i = 0; i < null_mask.size(); ++i) {
        if (first) {
            null0 = null_mask[i];
            if (!null0) {
                if (text)
                    txt0 = values[i];
                else
                    num0 = numeric[i];
            }
            first = false;
            continue;
        }
        if (static_cast<bool>(null_mask[i]) != null0) return false;
        if (null_mask[i]) continue;
        if (text) {
            if (values[i] != txt0) return false;
        } else if (numeric[i] != num0) {
            return false;
        }
    }
    return true;
}

const FeatureColumn* FeatureMatrix::find(const std::string& name) const {
    for (const auto& c : columns)
        if (c.name == name) return &c;
    return nullptr;
}

FeatureMatrix materialize(ContextHandle& ctx, const FeatureProgram& program, Split split,
                          const std::set<std::string>& categoricals,
                          std::chrono::milliseconds per_query_timeout) {
    if (program.queries.empty()) raise(ErrorKind::EmptyProgram, "feature program has no queries");
    ctx.bind_split(split);
    const size_t m = ctx.split_size(split);

    FeatureMatrix matrix;
    matrix.declared_categoricals = categoricals;
    matrix.row_ids.resize(m);
    for (size_t i = 0; i < m; ++i) matrix.row_ids[i] = static_cast<int64_t>(i);

    constexpr double kNull = std::numeric_limits<double>::quiet_NaN();

    for (const auto& q : program.queries) {
        RowSet rs;
        try {
            rs = ctx.run_feature_query(q.sql, per_query_timeout);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Timeout)
                raise(ErrorKind::Timeout, "feature query '" + q.name + "' timed out");
            raise(ErrorKind::SqlError, "feature query '" + q.name + "': " + e.what());
        }

        // Locate row_id in the result; the anchoring check is lexical, so a
        // query can still fail to produce the column at runtime.
        size_t rid_col = rs.columns.size();
        for (size_t c = 0; c < rs.columns.size(); ++c)
            if (lower(rs.columns[c]) == "row_id") {
                rid_col = c;
                break;
            }
        if (rid_col == rs.columns.size())
            raise(ErrorKind::SqlError,
                  "feature query '" + q.name + "' result has no row_id column");

        matrix.query_row_counts.emplace_back(q.name, rs.rows.size());

        // One output column per non-row_id result column.
        std::vector<size_t> feat_cols;
        std::vector<FeatureColumn> cols;
        for (size_t c = 0; c < rs.columns.size(); ++c) {
            if (c == rid_col) continue;
            feat_cols.push_back(c);
            FeatureColumn col;
            col.name = q.name + "__" + rs.columns[c];
            col.null_mask.assign(m, 1);
            cols.push_back(std::move(col));
        }

        // A column is text when any non-null cell is text, or when declared
        // categorical.
        std::vector<bool> is_text(feat_cols.size(), false);
        for (size_t k = 0; k < feat_cols.size(); ++k) {
            if (categoricals.count(cols[k].name)) {
                is_text[k] = true;
                continue;
            }
            for (const auto& row : rs.rows) {
                const Cell& cell = row[feat_cols[k]];
                if (!cell_is_null(cell) && !cell_is_numeric(cell)) {
                    is_text[k] = true;
                    break;
                }
            }
        }
        for (size_t k = 0; k < feat_cols.size(); ++k) {
            cols[k].text = is_text[k];
            if (is_text[k])
                cols[k].values.assign(m, std::string());
            else
                cols[k].numeric.assign(m, kNull);
        }

        std::vector<uint8_t> seen(m, 0);
        for (const auto& row : rs.rows) {
            const Cell& rid_cell = row[rid_col];
            if (cell_is_null(rid_cell)) continue;
            if (!cell_is_numeric(rid_cell))
                raise(ErrorKind::SqlError,
                      "feature query '" + q.name + "' returned a non-integer row_id");
            double rid_raw = cell_as_double(rid_cell);
            int64_t rid = static_cast<int64_t>(rid_raw);
            if (rid < 0 || static_cast<size_t>(rid) >= m) continue;  // outside the split
            if (seen[static_cast<size_t>(rid)]++)
                raise(ErrorKind::DuplicateRowId,
                      "feature query '" + q.name + "' returned row_id " + std::to_string(rid) +
                          " more than once");
            for (size_t k = 0; k < feat_cols.size(); ++k) {
                const Cell& cell = row[feat_cols[k]];
                if (cell_is_null(cell)) continue;
                cols[k].null_mask[static_cast<size_t>(rid)] = 0;
                if (cols[k].text)
                    cols[k].values[static_cast<size_t>(rid)] = cell_to_text(cell);
                else
                    cols[k].numeric[static_cast<size_t>(rid)] = cell_as_double(cell);
            }
        }
        for (auto& col : cols) matrix.columns.push_back(std::move(col));
    }
    return matrix;
}

std::string program_hash(const FeatureProgram& program) {
    std::string buffer;
    for (const auto& q : program.queries) {
        buffer += q.name;
        buffer += '\x1f';
        buffer += q.sql;
        buffer += '\x1e';
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(buffer.data(), buffer.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

}  // namespace relsearch
