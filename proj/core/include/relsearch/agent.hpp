#pragma once

// The search-phase loop: prompts in, tool dispatch out, one workspace per
// rollout.

#include <optional>
#include <string>
#include <vector>

#include "relsearch/policy.hpp"
#include "relsearch/relstore.hpp"
#include "relsearch/task.hpp"

namespace relsearch {

struct RolloutConfig {
    int max_turns = 60;
    std::optional<int> max_validations;  // falls back to the manifest's hint
    int per_turn_timeout_s = 900;
    bool no_feedback = false;
    bool no_workspace = false;
    bool anonymize_schema = false;
    std::optional<std::vector<std::string>> allowed_models;
    uint64_t seed = 0;
    int learner_threads = 1;
};

struct TurnLog {
    int turn = 0;
    std::vector<std::string> actions;  // tool names in dispatch order
    int tool_calls = 0;
    std::optional<double> running_best;
};

struct TrialSummary {
    std::string trial_id;
    std::string trial_name;
    std::string model_choice;
    std::optional<double> score;  // oriented; empty for failed trials
    std::string failure;          // failure kind when failed
    std::string feature_queries_json;
    std::string resolved_config_json;
    std::string program_hash;
};

struct RolloutResult {
    int rollout_index = 0;
    std::string workspace_path;
    std::vector<TrialSummary> trials;
    std::optional<std::string> best_trial_id;
    std::optional<double> best_score;
    std::vector<TurnLog> turns;
    std::string abort_reason;  // nonempty when the rollout died on an I/O error

    std::string to_json() const;
    static RolloutResult from_json(const std::string& text);
    static RolloutResult load(const std::string& path);
};

/// Deterministic synthetic renaming of every context table and column; role
/// columns receive synthetic names while keeping their bindings.
RenamingMap make_schema_renaming(const ContextHandle& ctx, uint64_t seed);

/// One policy rollout: fresh workspace under `out_dir`, turn loop, artifact
/// files (workspace.db, rollout.json, transcript.txt, eval_queries.log).
RolloutResult run_rollout(const TaskManifest& manifest, Policy& policy, const RolloutConfig& cfg,
                          const std::string& out_dir, int rollout_index = 0);

}  // namespace relsearch
