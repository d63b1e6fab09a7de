#include "relsearch/relstore.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>

#include "relsearch/error.hpp"
#include "sql_lex.hpp"
#include "sqlite_db.hpp"

namespace relsearch {

using db::Connection;
using db::quote_ident;
using db::quote_literal;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

const char* rows_table(Split s) {
    switch (s) {
        case Split::train: return "__eval_rows_train";
        case Split::val: return "__eval_rows_val";
        case Split::test: return "__eval_rows_test";
        default: raise(ErrorKind::ConfigError, "split must be train, val, or test");
    }
}

// Orders two timestamp cells; numeric when both are numeric, lexicographic
// otherwise (ISO-8601 text compares correctly).
int compare_cells(const Cell& a, const Cell& b) {
    if (cell_is_numeric(a) && cell_is_numeric(b)) {
        double x = cell_as_double(a), y = cell_as_double(b);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    std::string x = cell_to_text(a), y = cell_to_text(b);
    return x < y ? -1 : (x > y ? 1 : 0);
}

}  // namespace

struct ContextHandle::Impl {
    Connection conn;
    TaskManifest manifest;
    Split bound = Split::none;
    std::chrono::milliseconds exploration_timeout{60'000};

    bool renamed = false;
    RenamingMap renaming;

    bool table_exists(const std::string& name) const {
        auto n = conn.query_int(
            "SELECT COUNT(*) FROM sqlite_master WHERE type IN ('table','view') AND lower(name) = " +
            quote_literal(lower(name)));
        return n.value_or(0) > 0;
    }

    std::vector<ColumnInfo> table_columns(const std::string& name) const {
        RowSet rs = conn.query("PRAGMA table_info(" + quote_ident(name) + ")");
        std::vector<ColumnInfo> cols;
        for (const auto& row : rs.rows) {
            ColumnInfo c;
            c.name = cell_to_text(row[1]);
            c.type = cell_to_text(row[2]);
            c.primary_key = !cell_is_null(row[5]) && cell_as_double(row[5]) > 0;
            cols.push_back(std::move(c));
        }
        return cols;
    }

    bool column_exists(const std::string& table, const std::string& col) const {
        for (const auto& c : table_columns(table))
            if (lower(c.name) == lower(col)) return true;
        return false;
    }

    /// Tables the agent may see in SHOW TABLES / get_table_info, in render order.
    std::vector<std::string> visible_tables() const {
        std::vector<std::string> names;
        if (renamed) {
            for (const auto& [orig, synth] : renaming.tables) names.push_back(synth);
        } else {
            names = manifest.context_tables;
        }
        std::sort(names.begin(), names.end());
        names.push_back("train_table");
        if (bound != Split::none) names.push_back("eval_table");
        return names;
    }

    void create_eval_view() {
        conn.exec("DROP VIEW IF EXISTS temp.eval_table");
        const TargetSpec& spec = manifest.target(bound);
        std::string entity_out = renamed ? renaming.entity_col : spec.entity_col;
        std::string ts_out = renamed ? renaming.timestamp_col : spec.timestamp_col;
        conn.exec("CREATE TEMP VIEW eval_table AS SELECT row_id, " +
                  quote_ident(spec.entity_col) + " AS " + quote_ident(entity_out) + ", " +
                  quote_ident(spec.timestamp_col) + " AS " + quote_ident(ts_out) + " FROM " +
                  quote_ident(rows_table(bound)));
    }

    void create_train_view() {
        conn.exec("DROP VIEW IF EXISTS temp.train_table");
        if (renamed) {
            conn.exec("CREATE TEMP VIEW train_table AS SELECT " +
                      quote_ident(manifest.train.entity_col) + " AS " +
                      quote_ident(renaming.entity_col) + ", " +
                      quote_ident(manifest.train.timestamp_col) + " AS " +
                      quote_ident(renaming.timestamp_col) + ", " +
                      quote_ident(manifest.train.target_col) + " AS " +
                      quote_ident(renaming.target_col) + " FROM " +
                      quote_ident(manifest.train.table));
        } else {
            conn.exec("CREATE TEMP VIEW train_table AS SELECT * FROM " +
                      quote_ident(manifest.train.table));
        }
    }
};

ContextHandle::ContextHandle() : impl_(std::make_unique<Impl>()) {}
ContextHandle::~ContextHandle() = default;
ContextHandle::ContextHandle(ContextHandle&&) noexcept = default;
ContextHandle& ContextHandle::operator=(ContextHandle&&) noexcept = default;

ContextHandle ContextHandle::open(const TaskManifest& manifest) {
    manifest.check_consistency();

    ContextHandle handle;
    Impl& im = *handle.impl_;
    im.manifest = manifest;
    im.conn = Connection::open(manifest.database_path, /*read_only=*/true);

    for (const auto& t : manifest.context_tables)
        if (!im.table_exists(t)) raise(ErrorKind::MissingTable, "context table '" + t + "'");
    for (Split s : {Split::train, Split::val, Split::test}) {
        const TargetSpec& spec = manifest.target(s);
        if (!im.table_exists(spec.table))
            raise(ErrorKind::MissingTable, "target table '" + spec.table + "'");
        for (const std::string* col : {&spec.entity_col, &spec.timestamp_col, &spec.target_col})
            if (!im.column_exists(spec.table, *col))
                raise(ErrorKind::MissingColumn, "column '" + *col + "' in '" + spec.table + "'");
    }

    // Chronological cutoffs: max(train) < min(val) and max(val) < min(test).
    auto boundary = [&](const TargetSpec& spec, bool max) -> std::optional<Cell> {
        auto cell = im.conn.query_cell(std::string("SELECT ") + (max ? "MAX" : "MIN") + "(" +
                                       quote_ident(spec.timestamp_col) + ") FROM " +
                                       quote_ident(spec.table));
        if (!cell || cell_is_null(*cell)) return std::nullopt;
        return cell;
    };
    auto check_cutoff = [&](const TargetSpec& lo, const TargetSpec& hi, const char* what) {
        auto a = boundary(lo, true), b = boundary(hi, false);
        if (a && b && compare_cells(*a, *b) >= 0)
            raise(ErrorKind::CutoffViolation,
                  std::string(what) + " timestamps overlap: max " + cell_to_text(*a) +
                      " >= min " + cell_to_text(*b));
    };
    check_cutoff(manifest.train, manifest.val, "train/val");
    check_cutoff(manifest.val, manifest.test, "val/test");

    // row_id assignment: 0-based file order per split, fixed at load.
    for (Split s : {Split::train, Split::val, Split::test}) {
        const TargetSpec& spec = manifest.target(s);
        im.conn.exec("CREATE TEMP TABLE " + quote_ident(rows_table(s)) +
                     " AS SELECT row_number() OVER (ORDER BY rowid) - 1 AS row_id, " +
                     quote_ident(spec.entity_col) + ", " + quote_ident(spec.timestamp_col) +
                     " FROM " + quote_ident(spec.table));
    }

    im.create_train_view();
    im.conn.deny_reads({manifest.val.table, manifest.test.table});
    return handle;
}

const TaskManifest& ContextHandle::manifest() const { return impl_->manifest; }
Split ContextHandle::bound_split() const { return impl_->bound; }

void ContextHandle::bind_split(Split split) {
    if (split == Split::none) raise(ErrorKind::ConfigError, "cannot bind split 'none'");
    impl_->bound = split;
    impl_->create_eval_view();
}

SchemaReport ContextHandle::get_table_info(const std::optional<std::string>& table) const {
    const Impl& im = *impl_;
    std::vector<std::string> names;
    if (table) {
        auto visible = im.visible_tables();
        auto hit = std::find_if(visible.begin(), visible.end(), [&](const std::string& v) {
            return lower(v) == lower(*table);
        });
        if (hit == visible.end()) raise(ErrorKind::MissingTable, "no such table '" + *table + "'");
        names.push_back(*hit);
    } else {
        names = im.visible_tables();
    }

    SchemaReport report;
    for (const auto& name : names) {
        TableReport t;
        t.name = name;
        t.columns = im.table_columns(name);
        RowSet fks = im.conn.query("PRAGMA foreign_key_list(" + quote_ident(name) + ")");
        for (const auto& row : fks.rows) {
            ForeignKeyInfo fk;
            fk.ref_table = cell_to_text(row[2]);
            fk.from_column = cell_to_text(row[3]);
            fk.ref_column = cell_is_null(row[4]) ? "" : cell_to_text(row[4]);
            t.foreign_keys.push_back(std::move(fk));
        }
        t.row_count =
            im.conn.query_int("SELECT COUNT(*) FROM " + quote_ident(name)).value_or(0);
        report.tables.push_back(std::move(t));
    }
    return report;
}

RowSet ContextHandle::execute_exploration(const std::string& sql) const {
    const Impl& im = *impl_;
    std::string kw = sqlx::first_keyword(sql);
    if (kw.empty()) raise(ErrorKind::SqlError, "empty statement");

    if (kw == "show") {
        auto toks = sqlx::tokens(sql);
        if (toks.size() >= 2 && toks[1] == "tables") {
            RowSet rs;
            rs.columns = {"name"};
            for (const auto& name : im.visible_tables()) rs.rows.push_back({Cell{name}});
            return rs;
        }
        raise(ErrorKind::SqlError, "unsupported SHOW form; use SHOW TABLES");
    }
    if (kw == "describe" || kw == "desc") {
        auto toks = sqlx::tokens(sql);
        if (toks.size() < 2) raise(ErrorKind::SqlError, "DESCRIBE requires a table name");
        return im.conn.guarded_query("PRAGMA table_info(" + quote_ident(toks[1]) + ")",
                                     kExplorationRowCap, im.exploration_timeout);
    }

    static const std::set<std::string> kReadOnly = {"select", "with", "values", "pragma",
                                                    "explain"};
    if (!kReadOnly.count(kw))
        raise(ErrorKind::ReadOnlyViolation, "statement class '" + kw + "' is not read-only");

    size_t cap = sqlx::has_limit(sql) ? 0 : kExplorationRowCap;
    return im.conn.guarded_query(sql, cap, im.exploration_timeout);
}

RowSet ContextHandle::run_feature_query(const std::string& sql,
                                        std::chrono::milliseconds timeout) const {
    std::string kw = sqlx::first_keyword(sql);
    if (kw != "select" && kw != "with")
        raise(ErrorKind::ReadOnlyViolation, "feature queries must be a single SELECT");
    return impl_->conn.guarded_query(sql, 0, timeout);
}

size_t ContextHandle::split_size(Split split) const {
    return static_cast<size_t>(
        impl_->conn.query_int(std::string("SELECT COUNT(*) FROM ") + rows_table(split))
            .value_or(0));
}

std::vector<EvalRow> ContextHandle::eval_rows(Split split) const {
    RowSet rs = impl_->conn.query(std::string("SELECT * FROM ") + rows_table(split) +
                                  " ORDER BY row_id");
    std::vector<EvalRow> rows;
    rows.reserve(rs.rows.size());
    for (const auto& r : rs.rows) {
        EvalRow er;
        er.row_id = static_cast<int64_t>(cell_as_double(r[0]));
        er.entity = cell_to_text(r[1]);
        er.timestamp = cell_is_null(r[2]) ? "" : cell_to_text(r[2]);
        rows.push_back(std::move(er));
    }
    return rows;
}

std::vector<double> ContextHandle::labels(Split split) const {
    const TargetSpec& spec = impl_->manifest.target(split);
    RowSet rs = impl_->conn.query("SELECT " + quote_ident(spec.target_col) + " FROM " +
                                  quote_ident(spec.table) + " ORDER BY rowid");
    std::vector<double> y;
    y.reserve(rs.rows.size());
    const bool classification = impl_->manifest.task_type == TaskType::binary_classification;
    for (const auto& row : rs.rows) {
        const Cell& c = row[0];
        double v;
        if (cell_is_numeric(c)) {
            v = cell_as_double(c);
        } else if (cell_is_null(c)) {
            raise(ErrorKind::TrainingError, "null label in split " + std::string(to_string(split)));
        } else {
            const std::string text = std::get<std::string>(c);
            char* end = nullptr;
            v = std::strtod(text.c_str(), &end);
            if (end == text.c_str() || (end && *end != '\0'))
                raise(ErrorKind::TrainingError, "non-numeric label '" + text + "'");
        }
        if (classification && v != 0.0 && v != 1.0)
            raise(ErrorKind::TrainingError, "classification label must be 0 or 1, got " +
                                                cell_to_text(c));
        y.push_back(v);
    }
    return y;
}

void ContextHandle::apply_renaming(const RenamingMap& map) {
    Impl& im = *impl_;
    im.renaming = map;
    im.renamed = true;
    for (const auto& [orig, synth] : map.tables) {
        auto cols_it = map.columns.find(orig);
        if (cols_it == map.columns.end()) continue;
        std::string select;
        for (const auto& col : im.table_columns(orig)) {
            auto it = cols_it->second.find(col.name);
            if (it == cols_it->second.end()) continue;
            if (!select.empty()) select += ", ";
            select += quote_ident(col.name) + " AS " + quote_ident(it->second);
        }
        im.conn.exec("DROP VIEW IF EXISTS temp." + quote_ident(synth));
        im.conn.exec("CREATE TEMP VIEW " + quote_ident(synth) + " AS SELECT " + select +
                     " FROM " + quote_ident(orig));
    }
    im.create_train_view();
    if (im.bound != Split::none) im.create_eval_view();
}

bool ContextHandle::renamed() const { return impl_->renamed; }

std::string ContextHandle::visible_entity_col() const {
    return impl_->renamed ? impl_->renaming.entity_col : impl_->manifest.train.entity_col;
}

std::string ContextHandle::visible_timestamp_col() const {
    return impl_->renamed ? impl_->renaming.timestamp_col : impl_->manifest.train.timestamp_col;
}

std::string ContextHandle::visible_target_col() const {
    return impl_->renamed ? impl_->renaming.target_col : impl_->manifest.train.target_col;
}

void ContextHandle::set_exploration_timeout(std::chrono::milliseconds t) {
    impl_->exploration_timeout = t;
}

std::chrono::milliseconds ContextHandle::exploration_timeout() const {
    return impl_->exploration_timeout;
}

std::string SchemaReport::to_text() const {
    std::ostringstream out;
    for (const auto& t : tables) {
        out << "TABLE " << t.name << " (" << t.row_count << " rows)\n";
        for (const auto& c : t.columns) {
            out << "  " << c.name << " " << (c.type.empty() ? "ANY" : c.type);
            if (c.primary_key) out << " PRIMARY KEY";
            out << "\n";
        }
        for (const auto& fk : t.foreign_keys)
            out << "  FOREIGN KEY " << fk.from_column << " -> " << fk.ref_table
                << (fk.ref_column.empty() ? "" : "." + fk.ref_column) << "\n";
    }
    return out.str();
}

}  // namespace relsearch
