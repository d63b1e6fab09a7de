#pragma once

// validate_program: materialize -> fit -> score -> diagnose -> persist ->
// report. Policy-caused failures become failed trial records, never
// exceptions.

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "relsearch/featprog.hpp"
#include "relsearch/learner.hpp"
#include "relsearch/metrics.hpp"
#include "relsearch/relstore.hpp"
#include "relsearch/workspace.hpp"

namespace relsearch {

struct ValidationRequest {
    std::string feature_queries_json;
    std::string model_choice;
    std::string model_config_json;
    Split split = Split::val;
    std::string trial_name;
    std::string parent_trial_id;
};

struct DiagnosticExample {
    int64_t row_id = 0;
    std::string entity;
    std::string label;
    double score = 0.0;
};

struct Diagnostics {
    std::vector<std::pair<std::string, size_t>> query_row_counts;  // val-side merges
    std::vector<std::pair<std::string, double>> missingness;
    std::vector<std::string> constant_columns;
    std::vector<std::string> warnings;
    std::vector<DiagnosticExample> best_examples;
    std::vector<DiagnosticExample> worst_examples;

    std::string to_text() const;
};

inline constexpr int kDiagnosticExamplesPerSide = 5;

Diagnostics compute_diagnostics(const FeatureMatrix& X_val, const std::vector<double>& scores,
                                const std::vector<double>& labels,
                                const std::vector<EvalRow>& rows);

enum class FailureKind { none, sql_error, timeout, training_error };
const char* to_string(FailureKind k);

struct ValidationReport {
    std::string trial_id;
    bool ok = false;
    FailureKind failure = FailureKind::none;
    std::string failure_message;
    MetricBundle metrics;
    Diagnostics diagnostics;
    std::string resolved_config_json;
    std::vector<std::string> config_warnings;
    double primary_score = 0.0;  // oriented; equals metrics.oriented_score when ok
    std::string formatted;       // full text block returned to the agent
};

class Harness {
  public:
    Harness(ContextHandle& ctx, Workspace& ws);
    ~Harness();
    Harness(const Harness&) = delete;
    Harness& operator=(const Harness&) = delete;

    ValidationReport validate_program(const ValidationRequest& request);

    void set_validation_budget(std::chrono::milliseconds budget);
    void set_feature_query_timeout(std::chrono::milliseconds timeout);
    void set_learner_threads(int n);
    int learner_threads() const;

    size_t trials_run() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace relsearch
