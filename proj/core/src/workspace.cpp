#include "relsearch/workspace.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

#include "relsearch/error.hpp"
#include "sql_lex.hpp"
#include "sqlite_db.hpp"

namespace relsearch {

using db::Connection;
using db::quote_ident;
using db::quote_literal;

struct Workspace::Impl {
    Connection conn;
    std::string path;
};

Workspace::Workspace() : impl_(std::make_unique<Impl>()) {}
Workspace::~Workspace() = default;
Workspace::Workspace(Workspace&&) noexcept = default;
Workspace& Workspace::operator=(Workspace&&) noexcept = default;

Workspace Workspace::open(const std::string& workspace_path, const TaskManifest& manifest) {
    Workspace ws;
    Impl& im = *ws.impl_;
    im.path = workspace_path;
    im.conn = Connection::open(workspace_path, /*read_only=*/false);
    im.conn.exec(
        "CREATE TABLE IF NOT EXISTS trials ("
        " trial_id TEXT PRIMARY KEY,"
        " trial_name TEXT,"
        " parent_trial_id TEXT,"
        " created_at TEXT,"
        " split TEXT,"
        " model_choice TEXT,"
        " resolved_model_config TEXT,"
        " feature_query_hash TEXT,"
        " feature_block_names TEXT,"
        " primary_metric TEXT,"
        " primary_score DOUBLE,"
        " metrics_json TEXT,"
        " notes TEXT)");
    im.conn.exec(
        "CREATE TABLE IF NOT EXISTS eval_predictions ("
        " trial_id TEXT,"
        " row_id INTEGER,"
        " entity_id TEXT,"
        " label TEXT,"
        " score DOUBLE,"
        " predicted_class TEXT,"
        " split TEXT,"
        " eval_cutoff TEXT,"
        " UNIQUE (trial_id, row_id))");

    // Expose the augmented context for evaluation queries; the target tables
    // with validation/test labels stay read-denied.
    im.conn.attach_read_only(manifest.database_path, "ctx");
    for (const auto& table : manifest.context_tables) {
        im.conn.exec("DROP VIEW IF EXISTS temp." + quote_ident(table));
        im.conn.exec("CREATE TEMP VIEW " + quote_ident(table) + " AS SELECT * FROM ctx." +
                     quote_ident(table));
    }
    im.conn.exec("DROP VIEW IF EXISTS temp.train_table");
    im.conn.exec("CREATE TEMP VIEW train_table AS SELECT * FROM ctx." +
                 quote_ident(manifest.train.table));
    im.conn.deny_reads({manifest.val.table, manifest.test.table});
    return ws;
}

void Workspace::append_trial(const TrialRecord& trial,
                             const std::vector<PredictionRecord>& preds) {
    Impl& im = *impl_;
    auto existing = im.conn.query_int("SELECT COUNT(*) FROM trials WHERE trial_id = " +
                                      quote_literal(trial.trial_id));
    if (existing.value_or(0) > 0)
        raise(ErrorKind::DuplicateTrialId, "trial '" + trial.trial_id + "' already recorded");
    for (const auto& p : preds)
        if (p.trial_id != trial.trial_id)
            raise(ErrorKind::ConfigError, "prediction rows must reference the appended trial");

    im.conn.exec("BEGIN IMMEDIATE");
    try {
        std::ostringstream ins;
        ins << "INSERT INTO trials VALUES (" << quote_literal(trial.trial_id) << ","
            << quote_literal(trial.trial_name) << "," << quote_literal(trial.parent_trial_id)
            << "," << quote_literal(trial.created_at) << "," << quote_literal(trial.split) << ","
            << quote_literal(trial.model_choice) << ","
            << quote_literal(trial.resolved_model_config) << ","
            << quote_literal(trial.feature_query_hash) << ","
            << quote_literal(trial.feature_block_names) << ","
            << quote_literal(trial.primary_metric) << ",";
        if (trial.primary_score) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", *trial.primary_score);
            ins << buf;
        } else {
            ins << "NULL";
        }
        ins << "," << quote_literal(trial.metrics_json) << "," << quote_literal(trial.notes)
            << ")";
        im.conn.exec(ins.str());

        sqlite3_stmt* stmt = nullptr;
        const char* sql =
            "INSERT INTO eval_predictions VALUES (?,?,?,?,?,?,?,?)";
        if (sqlite3_prepare_v2(im.conn.raw(), sql, -1, &stmt, nullptr) != SQLITE_OK)
            raise(ErrorKind::SqlError, sqlite3_errmsg(im.conn.raw()));
        for (const auto& p : preds) {
            sqlite3_reset(stmt);
            sqlite3_bind_text(stmt, 1, p.trial_id.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_int64(stmt, 2, p.row_id);
            sqlite3_bind_text(stmt, 3, p.entity_id.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_text(stmt, 4, p.label.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_double(stmt, 5, p.score);
            if (p.predicted_class)
                sqlite3_bind_text(stmt, 6, p.predicted_class->c_str(), -1, SQLITE_TRANSIENT);
            else
                sqlite3_bind_null(stmt, 6);
            sqlite3_bind_text(stmt, 7, p.split.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_text(stmt, 8, p.eval_cutoff.c_str(), -1, SQLITE_TRANSIENT);
            if (sqlite3_step(stmt) != SQLITE_DONE) {
                std::string msg = sqlite3_errmsg(im.conn.raw());
                sqlite3_finalize(stmt);
                raise(ErrorKind::SqlError, msg);
            }
        }
        sqlite3_finalize(stmt);
        im.conn.exec("COMMIT");
    } catch (...) {
        try {
            im.conn.exec("ROLLBACK");
        } catch (...) {
        }
        throw;
    }
}

RowSet Workspace::query_workspace(const std::string& sql) const {
    std::string kw = sqlx::first_keyword(sql);
    if (kw.empty()) raise(ErrorKind::SqlError, "empty statement");
    if (kw != "select" && kw != "with" && kw != "values" && kw != "pragma")
        raise(ErrorKind::ReadOnlyViolation,
              "workspace tables are analysis-only; statement class '" + kw + "' is rejected");
    size_t cap = sqlx::has_limit(sql) ? 0 : kWorkspaceRowCap;
    return impl_->conn.guarded_query(sql, cap, std::chrono::milliseconds(60'000));
}

size_t Workspace::trial_count() const {
    return static_cast<size_t>(impl_->conn.query_int("SELECT COUNT(*) FROM trials").value_or(0));
}

std::vector<TrialRecord> Workspace::trials() const {
    RowSet rs = impl_->conn.query(
        "SELECT trial_id, trial_name, parent_trial_id, created_at, split, model_choice,"
        " resolved_model_config, feature_query_hash, feature_block_names, primary_metric,"
        " primary_score, metrics_json, notes FROM trials ORDER BY created_at, trial_id");
    std::vector<TrialRecord> out;
    for (const auto& row : rs.rows) {
        TrialRecord t;
        t.trial_id = cell_to_text(row[0]);
        t.trial_name = cell_to_text(row[1]);
        t.parent_trial_id = cell_to_text(row[2]);
        t.created_at = cell_to_text(row[3]);
        t.split = cell_to_text(row[4]);
        t.model_choice = cell_to_text(row[5]);
        t.resolved_model_config = cell_to_text(row[6]);
        t.feature_query_hash = cell_to_text(row[7]);
        t.feature_block_names = cell_to_text(row[8]);
        t.primary_metric = cell_to_text(row[9]);
        if (!cell_is_null(row[10])) t.primary_score = cell_as_double(row[10]);
        t.metrics_json = cell_to_text(row[11]);
        t.notes = cell_to_text(row[12]);
        out.push_back(std::move(t));
    }
    return out;
}

std::string Workspace::trial_history() const {
    auto all = trials();
    std::ostringstream out;
    out << "TRIAL HISTORY (" << all.size() << " trials)\n";
    if (all.empty()) {
        out << "  no trials yet\n";
        return out.str();
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& t : all)
        if (t.primary_score && *t.primary_score > best) best = *t.primary_score;
    for (const auto& t : all) {
        out << "  " << t.trial_id;
        if (!t.trial_name.empty()) out << " [" << t.trial_name << "]";
        out << " model=" << t.model_choice;
        if (t.primary_score) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6f", *t.primary_score);
            out << " " << t.primary_metric << "=" << buf;
            if (*t.primary_score == best) out << " *";
        } else {
            std::string kind = t.notes.substr(0, t.notes.find(':'));
            out << " FAILED(" << (kind.empty() ? "error" : kind) << ")";
        }
        if (!t.feature_block_names.empty()) out << " features=" << t.feature_block_names;
        out << "\n";
    }
    return out.str();
}

const std::string& Workspace::path() const { return impl_->path; }

}  // namespace relsearch
