#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "relsearch/error.hpp"
#include "relsearch/featprog.hpp"

using namespace relsearch;
using testutil::TempDir;
using testutil::make_events_task;

namespace {

bool matrices_identical(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.row_ids != b.row_ids || a.columns.size() != b.columns.size()) return false;
    for (size_t c = 0; c < a.columns.size(); ++c) {
        const auto& x = a.columns[c];
        const auto& y = b.columns[c];
        if (x.name != y.name || x.text != y.text || x.null_mask != y.null_mask) return false;
        if (x.text) {
            if (x.values != y.values) return false;
        } else {
            for (size_t i = 0; i < x.numeric.size(); ++i) {
                if (x.null_mask[i]) continue;
                if (x.numeric[i] != y.numeric[i]) return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("featprog") {

TEST_CASE("parse_program") {
    FeatureProgram p = parse_program(
        R"([{"name":"a","sql":"SELECT row_id, 1 AS one FROM eval_table"}])");
    CHECK(p.queries.size() == 1);
    CHECK(p.queries[0].name == "a");

    try {
        parse_program(R"([{"name":"a","sql":"x"},{"name":"a","sql":"y"}])");
        FAIL("expected DuplicateName");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DuplicateName);
    }
    try {
        parse_program("[]");
        FAIL("expected EmptyProgram");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyProgram);
    }
    try {
        parse_program("not json");
        FAIL("expected JsonError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::JsonError);
    }
    try {
        parse_program(R"([{"name":"a"}])");
        FAIL("expected JsonError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::JsonError);
    }
}

TEST_CASE("check_anchoring verdicts") {
    auto verdict_of = [](const std::string& sql) {
        FeatureProgram p;
        p.queries.push_back({"q", sql});
        return check_anchoring(p).findings[0].verdict;
    };
    CHECK(verdict_of("SELECT row_id, COUNT(*) c FROM eval_table e LEFT JOIN events ev ON "
                     "ev.user_id = e.user_id GROUP BY row_id") == AnchorVerdict::ok);
    CHECK(verdict_of("SELECT entity_id, 1 FROM eval_table") == AnchorVerdict::missing_row_id);
    CHECK(verdict_of("SELECT row_id, 1 FROM train_table") ==
          AnchorVerdict::not_anchored_on_eval_table);
    CHECK(verdict_of("DELETE FROM eval_table") == AnchorVerdict::parse_error);
    // CTE body mentioning row_id does not satisfy the outer-select check.
    CHECK(verdict_of("WITH c AS (SELECT row_id FROM eval_table) SELECT x FROM c") ==
          AnchorVerdict::missing_row_id);
    // row_id inside a string literal does not count.
    CHECK(verdict_of("SELECT 'row_id' FROM eval_table") == AnchorVerdict::missing_row_id);
    // Qualified and CTE-based forms pass.
    CHECK(verdict_of("WITH agg AS (SELECT 1 AS x) SELECT e.row_id, agg.x FROM eval_table e, agg") ==
          AnchorVerdict::ok);
}

TEST_CASE("program_hash is order- and byte-sensitive") {
    FeatureProgram p1 = parse_program(R"([{"name":"a","sql":"SELECT 1"},{"name":"b","sql":"SELECT 2"}])");
    FeatureProgram p2 = parse_program(R"([{"name":"b","sql":"SELECT 2"},{"name":"a","sql":"SELECT 1"}])");
    FeatureProgram p3 = parse_program(R"([{"name":"a","sql":"SELECT  1"},{"name":"b","sql":"SELECT 2"}])");
    CHECK(program_hash(p1) == program_hash(p1));
    CHECK(program_hash(p1) != program_hash(p2));
    CHECK(program_hash(p1) != program_hash(p3));
    CHECK(program_hash(p1).size() == 64);
}

TEST_CASE("materialize aligns rows, renames columns, and fills nulls") {
    TempDir dir("featprog_mat");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);

    SUBCASE("constant feature for all rows") {
        FeatureProgram p = parse_program(
            R"([{"name":"a","sql":"SELECT row_id, 1 AS one FROM eval_table"}])");
        FeatureMatrix X = materialize(ctx, p, Split::val);
        CHECK(X.rows() == 5);
        REQUIRE(X.cols() == 1);
        CHECK(X.columns[0].name == "a__one");
        for (size_t i = 0; i < 5; ++i) CHECK(X.columns[0].numeric[i] == doctest::Approx(1.0));
    }
    SUBCASE("absent rows become nulls via the left join") {
        FeatureProgram p = parse_program(
            R"([{"name":"some","sql":"SELECT row_id, 1 AS flag FROM eval_table WHERE row_id < 3"}])");
        FeatureMatrix X = materialize(ctx, p, Split::val);
        CHECK(X.rows() == 5);
        CHECK(X.columns[0].null_mask[0] == 0);
        CHECK(X.columns[0].null_mask[3] == 1);
        CHECK(X.columns[0].null_mask[4] == 1);
        CHECK(X.columns[0].missing_rate() == doctest::Approx(0.4));
    }
    SUBCASE("duplicate row_id is rejected with the query name") {
        FeatureProgram p = parse_program(
            R"([{"name":"dup","sql":"SELECT e.row_id, ev.amount FROM eval_table e JOIN events ev ON ev.user_id = e.user_id"}])");
        try {
            materialize(ctx, p, Split::train);
            FAIL("expected DuplicateRowId");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DuplicateRowId);
            CHECK(std::string(e.what()).find("dup") != std::string::npos);
        }
    }
    SUBCASE("sql errors carry the query name") {
        FeatureProgram p = parse_program(R"([{"name":"bad","sql":"SELECT row_id, nope FROM eval_table"}])");
        try {
            materialize(ctx, p, Split::val);
            FAIL("expected SqlError");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::SqlError);
            CHECK(std::string(e.what()).find("bad") != std::string::npos);
        }
    }
    SUBCASE("arity bookkeeping sums per-query output columns") {
        FeatureProgram p = parse_program(
            R"([{"name":"a","sql":"SELECT row_id, 1 AS x, 2 AS y FROM eval_table"},
                {"name":"b","sql":"SELECT row_id, 3 AS z FROM eval_table"}])");
        FeatureMatrix X = materialize(ctx, p, Split::val);
        CHECK(X.cols() == 3);
        CHECK(X.columns[0].name == "a__x");
        CHECK(X.columns[2].name == "b__z");
    }
    SUBCASE("text columns and declared categoricals") {
        FeatureProgram p = parse_program(
            R"([{"name":"t","sql":"SELECT row_id, CASE WHEN row_id < 2 THEN 'lo' ELSE 'hi' END AS bucket, row_id + 0.5 AS num FROM eval_table"}])");
        FeatureMatrix X = materialize(ctx, p, Split::val, {"t__num"});
        CHECK(X.columns[0].text);        // engine type is textual
        CHECK(X.columns[1].text);        // declared categorical forces text
        CHECK(X.columns[0].values[0] == "lo");
    }
}

TEST_CASE("materialize twice is cell-identical") {
    TempDir dir("featprog_det");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);
    FeatureProgram p = parse_program(testutil::past_event_program());
    FeatureMatrix a = materialize(ctx, p, Split::val);
    FeatureMatrix b = materialize(ctx, p, Split::val);
    CHECK(matrices_identical(a, b));
}

TEST_CASE("point-in-time: future rows do not change the matrix") {
    TempDir dir("featprog_pit");
    TaskManifest m = make_events_task(dir);
    FeatureProgram p = parse_program(testutil::past_event_program());

    FeatureMatrix before;
    {
        ContextHandle ctx = ContextHandle::open(m);
        before = materialize(ctx, p, Split::val);
    }
    {
        // Append events strictly after every validation timestamp.
        auto conn = relsearch::db::Connection::open(m.database_path, false);
        conn.exec("INSERT INTO events VALUES (1,'2099-01-01',99.0),(4,'2099-06-01',77.0)");
    }
    ContextHandle ctx = ContextHandle::open(m);
    FeatureMatrix after = materialize(ctx, p, Split::val);
    CHECK(matrices_identical(before, after));

    // A query without the temporal predicate does see the future rows.
    FeatureProgram leaky = parse_program(
        R"([{"name":"leaky","sql":"SELECT e.row_id, COUNT(ev.user_id) AS cnt FROM eval_table e LEFT JOIN events ev ON ev.user_id = e.user_id GROUP BY e.row_id"}])");
    FeatureMatrix l1 = materialize(ctx, leaky, Split::val);
    CHECK(l1.columns[0].numeric[0] > before.columns[0].numeric[0]);
}

TEST_CASE("feature query timeout") {
    TempDir dir("featprog_timeout");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);
    FeatureProgram p = parse_program(
        R"([{"name":"slow","sql":"WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x+1 FROM c) SELECT row_id, (SELECT COUNT(*) FROM c) AS n FROM eval_table"}])");
    try {
        materialize(ctx, p, Split::val, {}, std::chrono::milliseconds(50));
        FAIL("expected Timeout");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Timeout);
        CHECK(std::string(e.what()).find("slow") != std::string::npos);
    }
}

}  // TEST_SUITE
