#pragma once

// Embedded relational context: schema introspection, split binding, and the
// read-only exploration surface the agent queries.

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relsearch/task.hpp"
#include "relsearch/value.hpp"

namespace relsearch {

struct ColumnInfo {
    std::string name;
    std::string type;
    bool primary_key = false;
};

struct ForeignKeyInfo {
    std::string from_column;
    std::string ref_table;
    std::string ref_column;
};

struct TableReport {
    std::string name;
    std::vector<ColumnInfo> columns;
    std::vector<ForeignKeyInfo> foreign_keys;
    int64_t row_count = 0;
};

struct SchemaReport {
    std::vector<TableReport> tables;
    std::string to_text() const;
};

struct EvalRow {
    int64_t row_id = 0;
    std::string entity;
    std::string timestamp;
};

/// Deterministic table/column renaming used by the anonymized-schema mode.
struct RenamingMap {
    std::map<std::string, std::string> tables;                             // original -> synthetic
    std::map<std::string, std::map<std::string, std::string>> columns;    // table -> col -> synthetic
    std::string entity_col;     // synthetic names for the three role columns
    std::string timestamp_col;
    std::string target_col;
    std::string dataset_name;
};

/// Open connection to one task's context database. Exposes the training
/// labels through `train_table` and the bound split's rows through
/// `eval_table`; validation and test labels are unreachable from any query
/// that goes through this handle's agent-facing surface.
class ContextHandle {
  public:
    ~ContextHandle();
    ContextHandle(ContextHandle&&) noexcept;
    ContextHandle& operator=(ContextHandle&&) noexcept;
    ContextHandle(const ContextHandle&) = delete;
    ContextHandle& operator=(const ContextHandle&) = delete;

    static ContextHandle open(const TaskManifest& manifest);

    const TaskManifest& manifest() const;
    Split bound_split() const;

    void bind_split(Split split);

    SchemaReport get_table_info(const std::optional<std::string>& table = std::nullopt) const;

    /// Read-only exploration. SELECT statements without LIMIT are capped at
    /// 200 rows. SHOW TABLES and DESCRIBE are answered by the gate itself.
    RowSet execute_exploration(const std::string& sql) const;

    /// Agent-authored feature query: same read-only guard, no row cap,
    /// per-query timeout.
    RowSet run_feature_query(const std::string& sql, std::chrono::milliseconds timeout) const;

    // Privileged surfaces for the harness and deployment; never reachable
    // through agent SQL.
    size_t split_size(Split split) const;
    std::vector<EvalRow> eval_rows(Split split) const;
    std::vector<double> labels(Split split) const;

    void apply_renaming(const RenamingMap& map);
    bool renamed() const;
    /// Agent-visible names for the three role columns (synthetic when renamed).
    std::string visible_entity_col() const;
    std::string visible_timestamp_col() const;
    std::string visible_target_col() const;

    void set_exploration_timeout(std::chrono::milliseconds t);
    std::chrono::milliseconds exploration_timeout() const;

  private:
    ContextHandle();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

inline constexpr size_t kExplorationRowCap = 200;

}  // namespace relsearch
