#include "sqlite_db.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <cstring>

namespace relsearch::db {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Read-only pragmas the exploration surface may run.
const char* kAllowedPragmas[] = {"table_info",        "table_xinfo", "table_list",
                                 "index_list",        "index_info",  "foreign_key_list",
                                 "database_list"};

bool pragma_allowed(const char* name) {
    if (!name) return false;
    std::string n = lower(name);
    for (const char* p : kAllowedPragmas)
        if (n == p) return true;
    return false;
}

int authorizer(void* ud, int action, const char* a1, const char* a2, const char* /*db_name*/,
               const char* /*trigger*/) {
    auto* guard = static_cast<GuardState*>(ud);
    if (!guard->active) return SQLITE_OK;
    switch (action) {
        case SQLITE_SELECT:
        case SQLITE_FUNCTION:
        case SQLITE_RECURSIVE:
            return SQLITE_OK;
        case SQLITE_READ: {
            if (a1 && guard->denied_tables.count(lower(a1))) {
                guard->last_denial = std::string("access to table '") + a1 + "' is not permitted";
                return SQLITE_DENY;
            }
            return SQLITE_OK;
        }
        case SQLITE_PRAGMA: {
            if (pragma_allowed(a1)) return SQLITE_OK;
            guard->last_denial = std::string("pragma '") + (a1 ? a1 : "?") + "' is not permitted";
            return SQLITE_DENY;
        }
        default:
            guard->last_denial = "statement is not read-only";
            return SQLITE_DENY;
    }
}

struct Deadline {
    std::chrono::steady_clock::time_point at;
};

int progress_check(void* ud) {
    auto* d = static_cast<Deadline*>(ud);
    return std::chrono::steady_clock::now() >= d->at ? 1 : 0;
}

Cell column_cell(sqlite3_stmt* stmt, int col) {
    switch (sqlite3_column_type(stmt, col)) {
        case SQLITE_NULL:
            return Cell{};
        case SQLITE_INTEGER:
            return Cell{static_cast<int64_t>(sqlite3_column_int64(stmt, col))};
        case SQLITE_FLOAT:
            return Cell{sqlite3_column_double(stmt, col)};
        default: {
            const unsigned char* t = sqlite3_column_text(stmt, col);
            int n = sqlite3_column_bytes(stmt, col);
            return Cell{std::string(reinterpret_cast<const char*>(t), static_cast<size_t>(n))};
        }
    }
}

}  // namespace

Connection::~Connection() {
    if (db_) sqlite3_close_v2(db_);
}

Connection::Connection(Connection&& other) noexcept
    : db_(other.db_), guard_(std::move(other.guard_)) {
    other.db_ = nullptr;
    if (db_) sqlite3_set_authorizer(db_, authorizer, guard_.get());
}

Connection& Connection::operator=(Connection&& other) noexcept {
    if (this != &other) {
        if (db_) sqlite3_close_v2(db_);
        db_ = other.db_;
        guard_ = std::move(other.guard_);
        other.db_ = nullptr;
        if (db_) sqlite3_set_authorizer(db_, authorizer, guard_.get());
    }
    return *this;
}

Connection Connection::open(const std::string& path, bool read_only) {
    Connection c;
    int flags = read_only ? SQLITE_OPEN_READONLY : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    int rc = sqlite3_open_v2(path.c_str(), &c.db_, flags | SQLITE_OPEN_URI, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = c.db_ ? sqlite3_errmsg(c.db_) : "cannot open database";
        raise(ErrorKind::IoError, "open '" + path + "': " + msg);
    }
    sqlite3_busy_timeout(c.db_, 5000);
    sqlite3_set_authorizer(c.db_, authorizer, c.guard_.get());
    return c;
}

Connection Connection::open_memory() {
    Connection c;
    if (sqlite3_open(":memory:", &c.db_) != SQLITE_OK)
        raise(ErrorKind::IoError, "cannot open in-memory database");
    sqlite3_set_authorizer(c.db_, authorizer, c.guard_.get());
    return c;
}

void Connection::exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : sqlite3_errmsg(db_);
        sqlite3_free(err);
        raise(ErrorKind::SqlError, msg);
    }
}

RowSet Connection::run_statement(const std::string& sql, size_t cap, bool single_statement,
                                 std::chrono::milliseconds timeout) const {
    Deadline deadline{std::chrono::steady_clock::now() + timeout};
    if (timeout.count() > 0) sqlite3_progress_handler(db_, 2000, progress_check, &deadline);

    sqlite3_stmt* stmt = nullptr;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, &tail);
    if (rc != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(db_);
        if (timeout.count() > 0) sqlite3_progress_handler(db_, 0, nullptr, nullptr);
        if (rc == SQLITE_AUTH || msg.find("not authorized") != std::string::npos) {
            std::string why = guard_->last_denial.empty() ? msg : guard_->last_denial;
            raise(ErrorKind::ReadOnlyViolation, why);
        }
        raise(ErrorKind::SqlError, msg);
    }
    if (single_statement && tail) {
        for (const char* p = tail; *p; ++p) {
            if (!std::isspace(static_cast<unsigned char>(*p)) && *p != ';') {
                sqlite3_finalize(stmt);
                if (timeout.count() > 0) sqlite3_progress_handler(db_, 0, nullptr, nullptr);
                raise(ErrorKind::ReadOnlyViolation, "only a single statement is allowed");
            }
        }
    }
    if (!stmt) {
        // Empty statement (comments / whitespace only).
        if (timeout.count() > 0) sqlite3_progress_handler(db_, 0, nullptr, nullptr);
        raise(ErrorKind::SqlError, "empty statement");
    }

    RowSet rs;
    int ncol = sqlite3_column_count(stmt);
    for (int i = 0; i < ncol; ++i) {
        const char* name = sqlite3_column_name(stmt, i);
        rs.columns.push_back(name ? name : ("col" + std::to_string(i)));
    }
    while (true) {
        rc = sqlite3_step(stmt);
        if (rc == SQLITE_ROW) {
            if (cap && rs.rows.size() >= cap) {
                rs.truncated = true;
                break;
            }
            std::vector<Cell> row;
            row.reserve(static_cast<size_t>(ncol));
            for (int i = 0; i < ncol; ++i) row.push_back(column_cell(stmt, i));
            rs.rows.push_back(std::move(row));
        } else if (rc == SQLITE_DONE) {
            break;
        } else {
            std::string msg = sqlite3_errmsg(db_);
            sqlite3_finalize(stmt);
            if (timeout.count() > 0) sqlite3_progress_handler(db_, 0, nullptr, nullptr);
            if (rc == SQLITE_INTERRUPT) raise(ErrorKind::Timeout, "statement exceeded its time budget");
            raise(ErrorKind::SqlError, msg);
        }
    }
    sqlite3_finalize(stmt);
    if (timeout.count() > 0) sqlite3_progress_handler(db_, 0, nullptr, nullptr);
    return rs;
}

RowSet Connection::query(const std::string& sql) const {
    return run_statement(sql, 0, false, std::chrono::milliseconds(0));
}

std::optional<int64_t> Connection::query_int(const std::string& sql) const {
    auto cell = query_cell(sql);
    if (!cell || cell_is_null(*cell)) return std::nullopt;
    if (const auto* i = std::get_if<int64_t>(&*cell)) return *i;
    if (const auto* d = std::get_if<double>(&*cell)) return static_cast<int64_t>(*d);
    return std::nullopt;
}

std::optional<Cell> Connection::query_cell(const std::string& sql) const {
    RowSet rs = query(sql);
    if (rs.rows.empty() || rs.rows[0].empty()) return std::nullopt;
    return rs.rows[0][0];
}

RowSet Connection::guarded_query(const std::string& sql, size_t cap,
                                 std::chrono::milliseconds timeout) const {
    guard_->active = true;
    guard_->last_denial.clear();
    try {
        RowSet rs = run_statement(sql, cap, true, timeout);
        guard_->active = false;
        return rs;
    } catch (...) {
        guard_->active = false;
        throw;
    }
}

void Connection::deny_reads(const std::vector<std::string>& tables) {
    for (const auto& t : tables) guard_->denied_tables.insert(lower(t));
}

void Connection::attach_read_only(const std::string& path, const std::string& alias) {
    exec("ATTACH DATABASE " + quote_literal("file:" + path + "?mode=ro") + " AS " +
         quote_ident(alias));
}

std::string quote_literal(const std::string& text) {
    std::string out = "'";
    for (char c : text) {
        out += c;
        if (c == '\'') out += '\'';
    }
    out += "'";
    return out;
}

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    out += "\"";
    return out;
}

}  // namespace relsearch::db
