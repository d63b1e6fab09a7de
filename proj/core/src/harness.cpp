#include "relsearch/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "relsearch/error.hpp"

namespace relsearch {

namespace {

std::string format_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string format_label(double v, bool classification) {
    if (classification) return v > 0.5 ? "1" : "0";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Logical creation timestamps keep reruns byte-identical.
std::string logical_timestamp(size_t seq) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "2000-01-01 %02zu:%02zu:%02zu", (seq / 3600) % 24,
                  (seq / 60) % 60, seq % 60);
    return buf;
}

}  // namespace

const char* to_string(FailureKind k) {
    switch (k) {
        case FailureKind::none: return "none";
        case FailureKind::sql_error: return "sql_error";
        case FailureKind::timeout: return "timeout";
        case FailureKind::training_error: return "training_error";
    }
    return "none";
}

Diagnostics compute_diagnostics(const FeatureMatrix& X_val, const std::vector<double>& scores,
                                const std::vector<double>& labels,
                                const std::vector<EvalRow>& rows) {
    Diagnostics d;
    d.query_row_counts = X_val.query_row_counts;
    for (const auto& col : X_val.columns) {
        d.missingness.emplace_back(col.name, col.missing_rate());
        if (col.is_constant()) {
            d.constant_columns.push_back(col.name);
            d.warnings.push_back("column '" + col.name + "' is constant on this split");
        }
    }

    const size_t m = std::min(scores.size(), labels.size());
    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        double ea = std::fabs(scores[a] - labels[a]);
        double eb = std::fabs(scores[b] - labels[b]);
        if (ea != eb) return ea < eb;
        return a < b;
    });
    auto example_at = [&](size_t idx) {
        DiagnosticExample e;
        e.row_id = idx < rows.size() ? rows[idx].row_id : static_cast<int64_t>(idx);
        e.entity = idx < rows.size() ? rows[idx].entity : "";
        e.label = format_label(labels[idx], true);
        // regression labels render through the same path with full precision
        if (labels[idx] != 0.0 && labels[idx] != 1.0) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", labels[idx]);
            e.label = buf;
        }
        e.score = scores[idx];
        return e;
    };
    const size_t k = std::min<size_t>(kDiagnosticExamplesPerSide, m);
    for (size_t i = 0; i < k; ++i) d.best_examples.push_back(example_at(order[i]));
    for (size_t i = 0; i < k; ++i) d.worst_examples.push_back(example_at(order[m - 1 - i]));
    return d;
}

std::string Diagnostics::to_text() const {
    std::ostringstream out;
    out << "row counts after merges:";
    for (const auto& [name, n] : query_row_counts) out << " " << name << "=" << n;
    out << "\nmissingness:";
    for (const auto& [name, rate] : missingness) out << " " << name << "=" << format_score(rate);
    out << "\n";
    if (!constant_columns.empty()) {
        out << "constant columns:";
        for (const auto& c : constant_columns) out << " " << c;
        out << "\n";
    }
    for (const auto& w : warnings) out << "warning: " << w << "\n";
    auto render = [&](const char* title, const std::vector<DiagnosticExample>& v) {
        out << title << " (row_id, entity, label, score):\n";
        for (const auto& e : v)
            out << "  " << e.row_id << ", " << e.entity << ", " << e.label << ", "
                << format_score(e.score) << "\n";
    };
    render("best examples", best_examples);
    render("worst examples", worst_examples);
    return out.str();
}

struct Harness::Impl {
    ContextHandle& ctx;
    Workspace& ws;
    size_t trial_seq = 0;
    std::chrono::milliseconds budget{600'000};
    std::chrono::milliseconds per_query_timeout{300'000};
    int learner_threads = 1;
    // Materializations cached per (program hash, categoricals, split).
    std::map<std::string, FeatureMatrix> cache;

    Impl(ContextHandle& c, Workspace& w) : ctx(c), ws(w) { trial_seq = ws.trial_count(); }

    FeatureMatrix& materialized(const FeatureProgram& program, Split split,
                                const std::set<std::string>& cats,
                                std::chrono::milliseconds timeout) {
        std::string key = program_hash(program) + "|" + to_string(split);
        for (const auto& c : cats) key += "," + c;
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        FeatureMatrix m = materialize(ctx, program, split, cats, timeout);
        return cache.emplace(key, std::move(m)).first->second;
    }
};

Harness::Harness(ContextHandle& ctx, Workspace& ws) : impl_(std::make_unique<Impl>(ctx, ws)) {}
Harness::~Harness() = default;

void Harness::set_validation_budget(std::chrono::milliseconds budget) { impl_->budget = budget; }
void Harness::set_feature_query_timeout(std::chrono::milliseconds timeout) {
    impl_->per_query_timeout = timeout;
}
void Harness::set_learner_threads(int n) { impl_->learner_threads = std::max(1, n); }
int Harness::learner_threads() const { return impl_->learner_threads; }
size_t Harness::trials_run() const { return impl_->trial_seq; }

ValidationReport Harness::validate_program(const ValidationRequest& request) {
    Impl& im = *impl_;
    if (request.split != Split::val)
        raise(ErrorKind::ConfigError, "validation runs on the val split only");

    const auto start = std::chrono::steady_clock::now();
    const auto deadline = start + im.budget;
    auto remaining = [&]() {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) raise(ErrorKind::Timeout, "validation budget exceeded");
        return std::min(left, im.per_query_timeout);
    };

    ValidationReport report;
    ++im.trial_seq;
    char trial_id[16];
    std::snprintf(trial_id, sizeof(trial_id), "val_%04zu", im.trial_seq);
    report.trial_id = trial_id;

    const TaskManifest& manifest = im.ctx.manifest();
    const bool classification = manifest.task_type == TaskType::binary_classification;

    FeatureProgram program;
    bool program_parsed = false;
    ResolvedConfig cfg;
    std::string stage = "parse";

    try {
        program = parse_program(request.feature_queries_json);
        program_parsed = true;

        stage = "anchoring";
        AnchorReport anchor = check_anchoring(program);
        if (!anchor.passes())
            raise(ErrorKind::SqlError, "feature program rejected:\n" + anchor.to_text());

        stage = "config";
        ModelChoice choice = model_choice_from_string(request.model_choice);
        cfg = resolve_config(choice, request.model_config_json, manifest.task_type);
        if (cfg.seed == 0) cfg.seed = manifest.rng_seed;
        report.resolved_config_json = cfg.to_json();
        report.config_warnings = cfg.warnings;

        stage = "materialize_train";
        FeatureMatrix& X_train = im.materialized(program, Split::train,
                                                 cfg.categorical_features, remaining());
        std::vector<double> y_train = im.ctx.labels(Split::train);

        stage = "materialize_val";
        FeatureMatrix& X_val =
            im.materialized(program, Split::val, cfg.categorical_features, remaining());

        stage = "fit";
        remaining();  // enforce the budget before training starts
        FittedModel model = fit(X_train, y_train, cfg, im.learner_threads);

        stage = "predict";
        std::vector<std::string> predict_warnings;
        std::vector<double> scores = model.predict(X_val, &predict_warnings);

        stage = "metrics";
        std::vector<double> y_val = im.ctx.labels(Split::val);
        report.metrics = classification ? binary_bundle(scores, y_val)
                                        : regression_bundle(scores, y_val);
        report.primary_score = report.metrics.oriented_score;

        auto rows = im.ctx.eval_rows(Split::val);
        report.diagnostics = compute_diagnostics(X_val, scores, y_val, rows);
        for (auto& w : predict_warnings) report.diagnostics.warnings.push_back(std::move(w));

        // Persist: one trial row plus one prediction row per evaluated example.
        TrialRecord trial;
        trial.trial_id = report.trial_id;
        trial.trial_name = request.trial_name;
        trial.parent_trial_id = request.parent_trial_id;
        trial.created_at = logical_timestamp(im.trial_seq);
        trial.split = "val";
        trial.model_choice = request.model_choice;
        trial.resolved_model_config = report.resolved_config_json;
        trial.feature_query_hash = program_hash(program);
        std::string blocks;
        for (const auto& q : program.queries) {
            if (!blocks.empty()) blocks += ",";
            blocks += q.name;
        }
        trial.feature_block_names = blocks;
        trial.primary_metric = to_string(manifest.primary_metric);
        trial.primary_score = report.primary_score;
        trial.metrics_json = report.metrics.metrics_json();

        std::vector<PredictionRecord> preds;
        preds.reserve(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            PredictionRecord p;
            p.trial_id = trial.trial_id;
            p.row_id = rows[i].row_id;
            p.entity_id = rows[i].entity;
            p.label = format_label(y_val[i], classification);
            p.score = scores[i];
            if (classification) p.predicted_class = scores[i] >= 0.5 ? "1" : "0";
            p.split = "val";
            p.eval_cutoff = rows[i].timestamp;
            preds.push_back(std::move(p));
        }
        im.ws.append_trial(trial, preds);
        report.ok = true;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DuplicateTrialId) throw;  // workspace corruption, not policy
        report.ok = false;
        if (e.kind() == ErrorKind::Timeout)
            report.failure = FailureKind::timeout;
        else if (stage == "parse" || stage == "anchoring" || stage == "materialize_train" ||
                 stage == "materialize_val")
            report.failure = FailureKind::sql_error;
        else
            report.failure = FailureKind::training_error;
        report.failure_message = e.what();

        TrialRecord trial;
        trial.trial_id = report.trial_id;
        trial.trial_name = request.trial_name;
        trial.parent_trial_id = request.parent_trial_id;
        trial.created_at = logical_timestamp(im.trial_seq);
        trial.split = "val";
        trial.model_choice = request.model_choice;
        trial.resolved_model_config = report.resolved_config_json;
        if (program_parsed) {
            trial.feature_query_hash = program_hash(program);
            std::string blocks;
            for (const auto& q : program.queries) {
                if (!blocks.empty()) blocks += ",";
                blocks += q.name;
            }
            trial.feature_block_names = blocks;
        }
        trial.primary_metric = to_string(manifest.primary_metric);
        trial.metrics_json = "{}";
        trial.notes = std::string(to_string(report.failure)) + ": " + report.failure_message;
        im.ws.append_trial(trial, {});
    }

    std::ostringstream out;
    out << "=== VALIDATION " << report.trial_id << " (" << (report.ok ? "ok" : "failed")
        << ") ===\n";
    if (report.ok) {
        out << "METRICS\n";
        if (classification) {
            out << "  auroc=" << format_score(report.metrics.auroc)
                << " f1_at_half=" << format_score(report.metrics.f1_at_half)
                << " accuracy_at_half=" << format_score(report.metrics.accuracy_at_half) << "\n";
        } else {
            out << "  mae=" << format_score(report.metrics.mae) << "\n";
        }
        out << "  primary_score (oriented, higher is better) = "
            << format_score(report.primary_score) << "\n";
    } else {
        out << "ERROR\n  kind: " << to_string(report.failure) << "\n  message: "
            << report.failure_message << "\n";
    }
    out << "RESOLVED CONFIG\n  "
        << (report.resolved_config_json.empty() ? "(not resolved)" : report.resolved_config_json)
        << "\n";
    for (const auto& w : report.config_warnings) out << "  warning: " << w << "\n";
    if (report.ok) out << "DIAGNOSTICS\n" << report.diagnostics.to_text();
    out << im.ws.trial_history();
    report.formatted = out.str();
    return report;
}

}  // namespace relsearch
