#pragma once

// Thin RAII layer over sqlite3 shared by relstore and workspace. Not part of
// the public API.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "relsearch/error.hpp"
#include "relsearch/value.hpp"

struct sqlite3;

namespace relsearch::db {

struct GuardState {
    bool active = false;                  // agent-visible query in flight
    std::set<std::string> denied_tables;  // lowercase table names with read denial
    std::string last_denial;              // human-readable reason for the last DENY
};

class Connection {
  public:
    Connection() = default;
    ~Connection();
    Connection(Connection&& other) noexcept;
    Connection& operator=(Connection&& other) noexcept;
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    static Connection open(const std::string& path, bool read_only);
    static Connection open_memory();

    bool valid() const { return db_ != nullptr; }

    /// Privileged execution of one or more statements (DDL, inserts, ...).
    void exec(const std::string& sql);

    /// Privileged query of a single statement.
    RowSet query(const std::string& sql) const;

    /// Scalar helpers (privileged). Empty optional when the result is NULL or empty.
    std::optional<int64_t> query_int(const std::string& sql) const;
    std::optional<Cell> query_cell(const std::string& sql) const;

    /// Agent-facing execution: authorizer guard active, read denial on masked
    /// tables, optional row cap and wall-clock deadline. Exactly one statement
    /// allowed. `cap` of 0 means uncapped.
    RowSet guarded_query(const std::string& sql, size_t cap,
                         std::chrono::milliseconds timeout) const;

    void deny_reads(const std::vector<std::string>& tables);

    /// Attach another database file read-only under `alias`.
    void attach_read_only(const std::string& path, const std::string& alias);

    sqlite3* raw() const { return db_; }

  private:
    RowSet run_statement(const std::string& sql, size_t cap, bool single_statement,
                         std::chrono::milliseconds timeout) const;

    sqlite3* db_ = nullptr;
    std::unique_ptr<GuardState> guard_ = std::make_unique<GuardState>();
};

/// Escape a string literal for embedding in SQL ('' doubling).
std::string quote_literal(const std::string& text);

/// Quote an identifier ("" doubling).
std::string quote_ident(const std::string& name);

}  // namespace relsearch::db
