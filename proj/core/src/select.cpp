#include "relsearch/select.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "relsearch/error.hpp"
#include "sql_lex.hpp"

using nlohmann::json;

namespace relsearch {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string now_iso() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%d %H:%M:%S", std::gmtime(&t));
    return buf;
}

}  // namespace

std::string Champion::to_json() const {
    json j;
    j["rollout_index"] = rollout_index;
    j["trial_id"] = trial_id;
    j["validation_score"] = validation_score;
    j["model_choice"] = model_choice;
    j["resolved_config"] = json::parse(resolved_config_json.empty() ? "{}" : resolved_config_json);
    j["program_hash"] = program_hash;
    j["program"] = json::array();
    for (const auto& q : program.queries)
        j["program"].push_back({{"name", q.name}, {"sql", q.sql}});
    return j.dump(2);
}

Champion Champion::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::ConfigError, std::string("champion document: ") + e.what());
    }
    Champion c;
    c.rollout_index = j.value("rollout_index", 0);
    c.trial_id = j.value("trial_id", "");
    c.validation_score = j.value("validation_score", 0.0);
    c.model_choice = j.value("model_choice", "gbdt");
    c.resolved_config_json = j.value("resolved_config", json::object()).dump();
    c.program_hash = j.value("program_hash", "");
    for (const auto& q : j.value("program", json::array()))
        c.program.queries.push_back(
            FeatureQuery{q.value("name", ""), q.value("sql", "")});
    if (c.program.queries.empty())
        raise(ErrorKind::ConfigError, "champion document carries no feature program");
    return c;
}

Champion Champion::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::IoError, "cannot read champion '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

void Champion::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) raise(ErrorKind::IoError, "cannot write champion '" + path + "'");
    out << to_json() << "\n";
}

AuditReport invariance_audit(const FeatureProgram& program,
                             const std::vector<std::string>& rowid_columns) {
    std::vector<std::string> targets;
    for (const auto& c : rowid_columns) {
        std::string l = lower(c);
        if (l != "row_id") targets.push_back(l);
    }
    AuditReport report;
    for (const auto& q : program.queries) {
        AuditFinding f;
        f.query_name = q.name;
        auto toks = sqlx::tokens(q.sql);
        for (const auto& t : targets)
            if (std::find(toks.begin(), toks.end(), t) != toks.end())
                f.rowid_columns.push_back(t);
        if (!f.rowid_columns.empty()) report.clean = false;
        report.findings.push_back(std::move(f));
    }
    return report;
}

std::string AuditReport::to_text() const {
    std::ostringstream out;
    out << "row-identifier audit: " << (clean ? "clean" : "NOT clean") << "\n";
    for (const auto& f : findings) {
        if (f.rowid_columns.empty()) continue;
        out << "  " << f.query_name << " references:";
        for (const auto& c : f.rowid_columns) out << " " << c;
        out << "\n";
    }
    return out.str();
}

std::optional<std::string> best_trial(const Workspace& ws) {
    std::optional<std::string> best_id;
    double best_score = 0.0;
    std::string best_created;
    for (const auto& t : ws.trials()) {  // ordered by (created_at, trial_id)
        if (!t.primary_score) continue;
        if (!best_id || *t.primary_score > best_score) {
            best_id = t.trial_id;
            best_score = *t.primary_score;
            best_created = t.created_at;
        }
    }
    return best_id;
}

Champion cross_rollout_select(const std::vector<RolloutResult>& rollouts) {
    const TrialSummary* best = nullptr;
    int best_rollout = -1;
    for (const auto& r : rollouts) {
        for (const auto& t : r.trials) {
            if (!t.score) continue;
            if (!best || *t.score > *best->score) {
                best = &t;
                best_rollout = r.rollout_index;
            }
        }
    }
    if (!best) raise(ErrorKind::NoSuccessfulTrial, "no rollout produced a successful trial");

    Champion c;
    c.rollout_index = best_rollout;
    c.trial_id = best->trial_id;
    c.program = parse_program(best->feature_queries_json);
    c.model_choice = best->model_choice;
    c.resolved_config_json = best->resolved_config_json;
    c.validation_score = *best->score;
    c.program_hash = best->program_hash.empty() ? program_hash(c.program) : best->program_hash;
    return c;
}

ResolvedConfig resolved_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text.empty() ? "{}" : text);
    } catch (const json::exception& e) {
        raise(ErrorKind::ConfigError, std::string("resolved config: ") + e.what());
    }
    ResolvedConfig cfg;
    cfg.choice = model_choice_from_string(j.value("model_choice", "gbdt"));
    cfg.n_estimators = j.value("n_estimators", 200);
    cfg.learning_rate = j.value("learning_rate", 0.05);
    cfg.max_depth = j.value("max_depth", 6);
    cfg.min_child_samples = j.value("min_child_samples", 20);
    cfg.subsample = j.value("subsample", 1.0);
    cfg.colsample_bytree = j.value("colsample_bytree", 1.0);
    cfg.lambda_l1 = j.value("lambda_l1", 0.0);
    cfg.lambda_l2 = j.value("lambda_l2", 0.0);
    std::string obj = j.value("objective", "binary_logistic");
    for (Objective o :
         {Objective::binary_logistic, Objective::regression_l1, Objective::regression_l2})
        if (obj == to_string(o)) cfg.objective = o;
    cfg.log_transform_target = j.value("log_transform_target", false);
    cfg.rf_bagging = j.value("rf_bagging", false);
    cfg.dart_dropout_rate = j.value("dart_dropout_rate", 0.0);
    cfg.goss_top_fraction = j.value("goss_top_fraction", 0.0);
    cfg.goss_other_fraction = j.value("goss_other_fraction", 0.0);
    cfg.seed = j.value("seed", uint64_t{0});
    for (const auto& c : j.value("categorical_features", json::array()))
        if (c.is_string()) cfg.categorical_features.insert(c.get<std::string>());
    return cfg;
}

TestReport deploy_champion(ContextHandle& ctx, const Champion& champion, int learner_threads,
                           FittedModel* fitted_out) {
    AnchorReport anchor = check_anchoring(champion.program);
    if (!anchor.passes())
        raise(ErrorKind::SqlError, "champion program no longer anchors:\n" + anchor.to_text());

    ResolvedConfig cfg = resolved_config_from_json(champion.resolved_config_json);
    const TaskManifest& manifest = ctx.manifest();
    const bool classification = manifest.task_type == TaskType::binary_classification;

    FeatureMatrix X_train = materialize(ctx, champion.program, Split::train,
                                        cfg.categorical_features);
    FeatureMatrix X_val = materialize(ctx, champion.program, Split::val, cfg.categorical_features);
    FeatureMatrix X_test =
        materialize(ctx, champion.program, Split::test, cfg.categorical_features);

    std::vector<double> y_train = ctx.labels(Split::train);
    std::vector<double> y_val = ctx.labels(Split::val);
    std::vector<double> y_test = ctx.labels(Split::test);

    // Refit on the concatenation of train and val rows.
    FeatureMatrix X_fit;
    X_fit.declared_categoricals = X_train.declared_categoricals;
    const size_t n_fit = X_train.rows() + X_val.rows();
    X_fit.row_ids.resize(n_fit);
    for (size_t i = 0; i < n_fit; ++i) X_fit.row_ids[i] = static_cast<int64_t>(i);
    for (size_t c = 0; c < X_train.columns.size(); ++c) {
        const FeatureColumn& a = X_train.columns[c];
        const FeatureColumn* b = X_val.find(a.name);
        if (!b) raise(ErrorKind::SchemaMismatch, "column '" + a.name + "' missing on val split");
        FeatureColumn merged;
        merged.name = a.name;
        merged.text = a.text || b->text;
        merged.null_mask = a.null_mask;
        merged.null_mask.insert(merged.null_mask.end(), b->null_mask.begin(),
                                b->null_mask.end());
        if (merged.text) {
            auto render = [](const FeatureColumn& col, size_t i) {
                if (col.text) return col.values[i];
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.17g", col.numeric[i]);
                return std::string(buf);
            };
            merged.values.resize(n_fit);
            for (size_t i = 0; i < a.size(); ++i)
                if (!a.null_mask[i]) merged.values[i] = render(a, i);
            for (size_t i = 0; i < b->size(); ++i)
                if (!b->null_mask[i]) merged.values[a.size() + i] = render(*b, i);
        } else {
            merged.numeric = a.numeric;
            merged.numeric.insert(merged.numeric.end(), b->numeric.begin(), b->numeric.end());
        }
        X_fit.columns.push_back(std::move(merged));
    }
    std::vector<double> y_fit = y_train;
    y_fit.insert(y_fit.end(), y_val.begin(), y_val.end());

    FittedModel model = fit(X_fit, y_fit, cfg, learner_threads);
    std::vector<double> scores = model.predict(X_test);

    TestReport report;
    report.refit_rows = n_fit;
    report.metrics =
        classification ? binary_bundle(scores, y_test) : regression_bundle(scores, y_test);
    report.importances = model.feature_importance();
    report.program = champion.program;
    report.audit = invariance_audit(champion.program, manifest.rowid_columns);
    report.generated_at = now_iso();

    auto rows = ctx.eval_rows(Split::test);
    for (size_t i = 0; i < rows.size(); ++i) {
        PredictionRecord p;
        p.trial_id = champion.trial_id;
        p.row_id = rows[i].row_id;
        p.entity_id = rows[i].entity;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", y_test[i]);
        p.label = classification ? (y_test[i] > 0.5 ? "1" : "0") : buf;
        p.score = scores[i];
        if (classification) p.predicted_class = scores[i] >= 0.5 ? "1" : "0";
        p.split = "test";
        p.eval_cutoff = rows[i].timestamp;
        report.predictions.push_back(std::move(p));
    }
    if (fitted_out) *fitted_out = std::move(model);
    return report;
}

std::string TestReport::to_json() const {
    json j;
    j["generated_at"] = generated_at;
    j["refit_rows"] = refit_rows;
    j["metrics"] = json::parse(metrics.metrics_json());
    j["importances"] = importances;
    j["audit"] = {{"clean", audit.clean}};
    j["audit"]["findings"] = json::array();
    for (const auto& f : audit.findings)
        j["audit"]["findings"].push_back(
            {{"query", f.query_name}, {"rowid_columns", f.rowid_columns}});
    j["program"] = json::array();
    for (const auto& q : program.queries)
        j["program"].push_back({{"name", q.name}, {"sql", q.sql}});
    j["predictions"] = json::array();
    for (const auto& p : predictions)
        j["predictions"].push_back({{"row_id", p.row_id},
                                    {"entity_id", p.entity_id},
                                    {"label", p.label},
                                    {"score", p.score},
                                    {"predicted_class",
                                     p.predicted_class ? json(*p.predicted_class) : json(nullptr)}});
    return j.dump(2);
}

std::string TestReport::to_text() const {
    std::ostringstream out;
    out << "TEST REPORT\n";
    if (metrics.classification) {
        out << "  auroc=" << metrics.auroc << " f1_at_half=" << metrics.f1_at_half
            << " accuracy_at_half=" << metrics.accuracy_at_half << "\n";
    } else {
        out << "  mae=" << metrics.mae << "\n";
    }
    out << "  refit rows: " << refit_rows << ", test rows: " << predictions.size() << "\n";
    out << "PROGRAM\n";
    for (const auto& q : program.queries) out << "  " << q.name << ":\n    " << q.sql << "\n";
    out << "FEATURE IMPORTANCE (split gain, normalized)\n";
    std::vector<std::pair<std::string, double>> sorted(importances.begin(), importances.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [name, value] : sorted) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", value);
        out << "  " << buf << "  " << name << "\n";
    }
    out << audit.to_text();
    return out.str();
}

}  // namespace relsearch
