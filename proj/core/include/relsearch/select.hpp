#pragma once

// Inference phase: best-trial selection, cross-rollout champion, final refit
// on train+val, test scoring, and the row-identifier audit.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relsearch/agent.hpp"
#include "relsearch/featprog.hpp"
#include "relsearch/learner.hpp"
#include "relsearch/metrics.hpp"
#include "relsearch/relstore.hpp"
#include "relsearch/workspace.hpp"

namespace relsearch {

struct Champion {
    int rollout_index = 0;
    std::string trial_id;
    FeatureProgram program;
    std::string model_choice;
    std::string resolved_config_json;
    double validation_score = 0.0;  // oriented
    std::string program_hash;

    std::string to_json() const;
    static Champion from_json(const std::string& text);
    static Champion load(const std::string& path);
    void save(const std::string& path) const;
};

struct AuditFinding {
    std::string query_name;
    std::vector<std::string> rowid_columns;  // referenced identifier columns
};

struct AuditReport {
    std::vector<AuditFinding> findings;  // one per query
    bool clean = true;
    std::string to_text() const;
};

/// Lexical scan for configured row-identifier column names; the mandatory
/// row_id of eval_table never counts.
AuditReport invariance_audit(const FeatureProgram& program,
                             const std::vector<std::string>& rowid_columns);

struct TestReport {
    MetricBundle metrics;
    std::vector<PredictionRecord> predictions;  // split = "test"
    std::map<std::string, double> importances;
    FeatureProgram program;
    AuditReport audit;
    size_t refit_rows = 0;  // |train| + |val|
    std::string generated_at;  // wall clock; excluded from determinism checks

    std::string to_json() const;
    std::string to_text() const;
};

/// Successful trial with the maximal oriented score; ties break to the
/// earliest created_at then trial_id. Empty when nothing succeeded.
std::optional<std::string> best_trial(const Workspace& ws);

/// Champion across rollouts: highest score, ties to the lowest rollout index
/// then the earliest trial.
Champion cross_rollout_select(const std::vector<RolloutResult>& rollouts);

/// Refit on train+val under the champion's config and score the test split.
/// `fitted_out`, when given, receives the deployed model.
TestReport deploy_champion(ContextHandle& ctx, const Champion& champion, int learner_threads = 1,
                           FittedModel* fitted_out = nullptr);

/// Rebuild a ResolvedConfig from its stored JSON echo.
ResolvedConfig resolved_config_from_json(const std::string& text);

}  // namespace relsearch
