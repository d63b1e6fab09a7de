#include "doctest.h"
#include "helpers.hpp"
#include "relsearch/error.hpp"
#include "relsearch/harness.hpp"

using namespace relsearch;
using testutil::TempDir;
using testutil::make_events_task;

namespace {

ValidationRequest request_with(const std::string& program, const std::string& model = "gbdt",
                               const std::string& config = "{}") {
    ValidationRequest r;
    r.feature_queries_json = program;
    r.model_choice = model;
    r.model_config_json = config;
    return r;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("successful validation runs the full pipeline") {
    TempDir dir("harness_ok");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);
    Workspace ws = Workspace::open(dir.file("workspace.db"), m);
    Harness harness(ctx, ws);

    ValidationReport rep = harness.validate_program(request_with(testutil::past_event_program()));
    CHECK(rep.ok);
    CHECK(rep.trial_id == "val_0001");
    CHECK(rep.primary_score == doctest::Approx(rep.metrics.oriented_score));
    CHECK(ws.trial_count() == 1);

    // One prediction row per validation example.
    RowSet n = ws.query_workspace("SELECT COUNT(*) FROM eval_predictions");
    CHECK(cell_as_double(n.rows[0][0]) == doctest::Approx(5));

    // The report score equals the value read back from the workspace.
    RowSet score = ws.query_workspace("SELECT primary_score FROM trials WHERE trial_id='val_0001'");
    CHECK(cell_as_double(score.rows[0][0]) == doctest::Approx(rep.primary_score));

    // Formatted sections present.
    for (const char* section : {"METRICS", "RESOLVED CONFIG", "DIAGNOSTICS", "TRIAL HISTORY"})
        CHECK(rep.formatted.find(section) != std::string::npos);
}

TEST_CASE("every failure still appends exactly one trial") {
    TempDir dir("harness_fail");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);
    Workspace ws = Workspace::open(dir.file("workspace.db"), m);
    Harness harness(ctx, ws);

    SUBCASE("sql syntax error") {
        ValidationReport rep = harness.validate_program(
            request_with(R"([{"name":"bad","sql":"SELECT row_id, FROM eval_table"}])"));
        CHECK_FALSE(rep.ok);
        CHECK(rep.failure == FailureKind::sql_error);
        CHECK(ws.trial_count() == 1);
        RowSet row = ws.query_workspace("SELECT primary_score, notes FROM trials");
        CHECK(cell_is_null(row.rows[0][0]));
        CHECK(cell_to_text(row.rows[0][1]).find("sql_error") == 0);
    }
    SUBCASE("anchoring rejection happens before execution") {
        ValidationReport rep = harness.validate_program(
            request_with(R"([{"name":"q","sql":"SELECT row_id, 1 FROM train_table"}])"));
        CHECK_FALSE(rep.ok);
        CHECK(rep.failure == FailureKind::sql_error);
        CHECK(rep.failure_message.find("not_anchored_on_eval_table") != std::string::npos);
    }
    SUBCASE("unknown model name") {
        ValidationReport rep =
            harness.validate_program(request_with(testutil::past_event_program(), "lightgbm"));
        CHECK_FALSE(rep.ok);
        CHECK(rep.failure == FailureKind::training_error);
        CHECK(ws.trial_count() == 1);
    }
    SUBCASE("objective mismatch") {
        ValidationReport rep = harness.validate_program(request_with(
            testutil::past_event_program(), "gbdt", R"({"objective": "regression_l1"})"));
        CHECK_FALSE(rep.ok);
        CHECK(rep.failure == FailureKind::training_error);
    }
    SUBCASE("timeout budget") {
        harness.set_validation_budget(std::chrono::milliseconds(0));
        ValidationReport rep =
            harness.validate_program(request_with(testutil::past_event_program()));
        CHECK_FALSE(rep.ok);
        CHECK(rep.failure == FailureKind::timeout);
        CHECK(ws.trial_count() == 1);
    }
}

TEST_CASE("trial ids are sequential across outcomes") {
    TempDir dir("harness_seq");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);
    Workspace ws = Workspace::open(dir.file("workspace.db"), m);
    Harness harness(ctx, ws);

    harness.validate_program(request_with(testutil::past_event_program()));
    harness.validate_program(request_with("not json"));
    ValidationReport third = harness.validate_program(request_with(testutil::past_event_program()));
    CHECK(third.trial_id == "val_0003");
    CHECK(ws.trial_count() == 3);
}

TEST_CASE("clamped config is echoed in the report") {
    TempDir dir("harness_clamp");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);
    Workspace ws = Workspace::open(dir.file("workspace.db"), m);
    Harness harness(ctx, ws);

    ValidationReport rep = harness.validate_program(
        request_with(testutil::past_event_program(), "gbdt", R"({"learning_rate": 9})"));
    CHECK(rep.ok);
    CHECK(rep.resolved_config_json.find("\"learning_rate\":0.3") != std::string::npos);
}

TEST_CASE("diagnostics cover missingness, constants, and examples") {
    TempDir dir("harness_diag");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);
    Workspace ws = Workspace::open(dir.file("workspace.db"), m);
    Harness harness(ctx, ws);

    // Second block: constant column plus partial coverage.
    std::string program = std::string(R"([{"name":"hist","sql":")") +
                          testutil::past_event_count_sql() +
                          R"("},{"name":"extra","sql":"SELECT row_id, 7 AS konst FROM eval_table WHERE row_id < 2"}])";
    ValidationReport rep = harness.validate_program(request_with(program));
    REQUIRE(rep.ok);

    bool has_const = false;
    for (const auto& c : rep.diagnostics.constant_columns)
        has_const |= c == "extra__konst";
    CHECK(has_const);
    double missing = -1;
    for (const auto& [name, rate] : rep.diagnostics.missingness)
        if (name == "extra__konst") missing = rate;
    CHECK(missing == doctest::Approx(0.6));
    CHECK(rep.diagnostics.best_examples.size() == 5);
    CHECK(rep.diagnostics.worst_examples.size() == 5);
    CHECK(rep.diagnostics.query_row_counts.size() == 2);
    CHECK(rep.diagnostics.query_row_counts[1].second == 2);
}

TEST_CASE("compute_diagnostics arithmetic") {
    FeatureMatrix X = testutil::make_matrix(
        {{"a", {1, std::nan(""), std::nan(""), 4, 5}}});
    std::vector<double> scores{0.9, 0.8, 0.2, 0.1, 0.5};
    std::vector<double> labels{1, 1, 0, 0, 1};
    std::vector<EvalRow> rows;
    for (int i = 0; i < 5; ++i) rows.push_back({i, "e" + std::to_string(i), "2000-01-01"});
    Diagnostics d = compute_diagnostics(X, scores, labels, rows);
    CHECK(d.missingness[0].second == doctest::Approx(0.4));
    // Perfectly predicted rows surface as best examples.
    CHECK(d.best_examples[0].row_id == 3);  // |0.1 - 0| = 0.1 smallest
}

TEST_CASE("regression task reports oriented negative mae") {
    TempDir dir("harness_reg");
    TaskManifest m = make_events_task(dir, /*regression=*/true);
    ContextHandle ctx = ContextHandle::open(m);
    Workspace ws = Workspace::open(dir.file("workspace.db"), m);
    Harness harness(ctx, ws);

    ValidationReport rep = harness.validate_program(
        request_with(testutil::past_event_program(), "gbdt", R"({"objective":"regression_l1"})"));
    REQUIRE(rep.ok);
    CHECK(rep.metrics.mae >= 0);
    CHECK(rep.primary_score == doctest::Approx(-rep.metrics.mae));
}

}  // TEST_SUITE
