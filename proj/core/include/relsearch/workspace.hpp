#pragma once

// Persistent evaluation workspace: trial records, per-row validation
// predictions, and the agent's read-only query surface over both plus the
// attached context tables.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relsearch/task.hpp"
#include "relsearch/value.hpp"

namespace relsearch {

struct TrialRecord {
    std::string trial_id;
    std::string trial_name;
    std::string parent_trial_id;
    std::string created_at;  // deterministic logical timestamp
    std::string split = "val";
    std::string model_choice;
    std::string resolved_model_config;  // JSON
    std::string feature_query_hash;
    std::string feature_block_names;  // comma-joined
    std::string primary_metric;
    std::optional<double> primary_score;  // oriented; empty for failed trials
    std::string metrics_json;
    std::string notes;
};

struct PredictionRecord {
    std::string trial_id;
    int64_t row_id = 0;
    std::string entity_id;
    std::string label;
    double score = 0.0;
    std::optional<std::string> predicted_class;
    std::string split = "val";
    std::string eval_cutoff;
};

class Workspace {
  public:
    ~Workspace();
    Workspace(Workspace&&) noexcept;
    Workspace& operator=(Workspace&&) noexcept;
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    /// Create or reopen the workspace file and attach the task's context
    /// database read-only so evaluation queries can join back to it.
    static Workspace open(const std::string& workspace_path, const TaskManifest& manifest);

    /// Atomic insert of one trial and its prediction rows.
    void append_trial(const TrialRecord& trial, const std::vector<PredictionRecord>& preds);

    /// Agent evaluation query: single read-only SELECT, capped at 500 rows
    /// when it carries no LIMIT clause.
    RowSet query_workspace(const std::string& sql) const;

    std::string trial_history() const;
    size_t trial_count() const;

    std::vector<TrialRecord> trials() const;  // ordered by creation

    const std::string& path() const;

  private:
    Workspace();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

inline constexpr size_t kWorkspaceRowCap = 500;

}  // namespace relsearch
