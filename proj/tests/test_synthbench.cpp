#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "relsearch/error.hpp"
#include "relsearch/featprog.hpp"
#include "relsearch/synthbench.hpp"

using namespace relsearch;
using testutil::TempDir;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_SUITE("synthbench") {

TEST_CASE("proper-cycle oracle") {
    using E = std::pair<int64_t, int64_t>;
    SUBCASE("a 3-cycle labels its members") {
        std::vector<E> edges{{0, 1}, {1, 2}, {2, 0}};
        auto labels = label_proper_cycle(edges, {0, 1, 2, 3});
        CHECK(labels[0] == 1);
        CHECK(labels[1] == 1);
        CHECK(labels[2] == 1);
        CHECK(labels[3] == 0);
    }
    SUBCASE("a node with only a self-loop stays negative") {
        std::vector<E> edges{{5, 5}};
        auto labels = label_proper_cycle(edges, {5});
        CHECK(labels[0] == 0);
        // ...while the unfiltered walk count fires on the degenerate walk.
        auto walks = count_three_walks(edges, {5});
        CHECK(walks[0] == 1);
    }
    SUBCASE("empty edge set labels everything 0") {
        auto labels = label_proper_cycle({}, {1, 2, 3});
        for (auto v : labels) CHECK(v == 0);
    }
    SUBCASE("a 2-cycle is not a triangle") {
        std::vector<E> edges{{0, 1}, {1, 0}};
        auto labels = label_proper_cycle(edges, {0, 1});
        CHECK(labels[0] == 0);
        CHECK(labels[1] == 0);
    }
}

TEST_CASE("triangle task generation") {
    TempDir dir("synth_tri");
    TriangleSpec spec;
    spec.nodes_per_graph = 60;  // small for test speed
    spec.edge_prob = 0.05;
    spec.seed = 3;
    TaskManifest m = gen_triangle_task(spec, dir.file("task"));

    ContextHandle ctx = ContextHandle::open(m);
    CHECK(ctx.split_size(Split::train) == 5 * 60);
    CHECK(ctx.split_size(Split::val) == 2 * 60);
    CHECK(ctx.split_size(Split::test) == 2 * 60);
    CHECK(m.max_validations == 30);

    // Node ids are globally unique across graphs: max id < graphs * n.
    RowSet ids = ctx.execute_exploration("SELECT MIN(src), MAX(dst) FROM R");
    CHECK(cell_as_double(ids.rows[0][1]) < 9 * 60);

    // SQL-side labels match the brute-force oracle through the filtered fixture.
    FeatureProgram filtered = parse_program(triangle_filtered_fixture());
    FeatureMatrix X = materialize(ctx, filtered, Split::val);
    auto y = ctx.labels(Split::val);
    REQUIRE(X.rows() == y.size());
    for (size_t i = 0; i < y.size(); ++i) {
        bool feature_positive = X.columns[0].numeric[i] > 0;
        CHECK(feature_positive == (y[i] > 0.5));
    }
}

TEST_CASE("full self-loops make the unfiltered walk fire everywhere") {
    TempDir dir("synth_sl");
    TriangleSpec spec;
    spec.nodes_per_graph = 40;
    spec.edge_prob = 0.05;
    spec.self_loop_prob = 1.0;
    spec.seed = 5;
    TaskManifest m = gen_triangle_task(spec, dir.file("task"));
    ContextHandle ctx = ContextHandle::open(m);

    RowSet loops = ctx.execute_exploration(
        "SELECT COUNT(*) FROM R WHERE src = dst");
    CHECK(cell_as_double(loops.rows[0][0]) == doctest::Approx(9 * 40));

    FeatureProgram raw = parse_program(triangle_raw_fixture());
    FeatureMatrix X = materialize(ctx, raw, Split::val);
    for (size_t i = 0; i < X.rows(); ++i) CHECK(X.columns[0].numeric[i] >= 1.0);
}

TEST_CASE("loop-free graphs: walk positivity equals the proper-cycle label") {
    TempDir dir("synth_equiv");
    TriangleSpec spec;
    spec.nodes_per_graph = 50;
    spec.edge_prob = 0.06;
    spec.self_loop_prob = 0.0;
    spec.seed = 9;
    TaskManifest m = gen_triangle_task(spec, dir.file("task"));
    ContextHandle ctx = ContextHandle::open(m);

    FeatureProgram raw = parse_program(triangle_raw_fixture());
    for (Split s : {Split::train, Split::val, Split::test}) {
        FeatureMatrix X = materialize(ctx, raw, s);
        auto y = ctx.labels(s);
        for (size_t i = 0; i < y.size(); ++i)
            CHECK((X.columns[0].numeric[i] > 0) == (y[i] > 0.5));
    }
}

TEST_CASE("same seed gives byte-identical databases") {
    TempDir dir("synth_det");
    TriangleSpec spec;
    spec.nodes_per_graph = 30;
    spec.seed = 21;
    gen_triangle_task(spec, dir.file("a"));
    gen_triangle_task(spec, dir.file("b"));
    CHECK(slurp(dir.file("a") + "/context.db") == slurp(dir.file("b") + "/context.db"));

    CooccurrenceSpec cs;
    cs.seed = 21;
    gen_cooccurrence_task(cs, dir.file("ca"));
    gen_cooccurrence_task(cs, dir.file("cb"));
    CHECK(slurp(dir.file("ca") + "/context.db") == slurp(dir.file("cb") + "/context.db"));
}

TEST_CASE("co-occurrence construction") {
    TempDir dir("synth_cooc");
    CooccurrenceSpec spec;
    spec.n_train_entities = 40;
    spec.n_val_entities = 20;
    spec.n_test_entities = 20;
    spec.seed = 13;
    TaskManifest m = gen_cooccurrence_task(spec, dir.file("task"));
    ContextHandle ctx = ContextHandle::open(m);

    SUBCASE("per-entity aggregates are class-independent by construction") {
        RowSet agg = ctx.execute_exploration(
            "SELECT entity, COUNT(*) c, SUM(A) sa, SUM(B) sb, MIN(A) mna, MAX(A) mxa "
            "FROM T2 GROUP BY entity");
        REQUIRE(agg.rows.size() == 80);
        for (const auto& row : agg.rows) {
            CHECK(cell_as_double(row[1]) == doctest::Approx(2));
            CHECK(cell_as_double(row[2]) == doctest::Approx(1));
            CHECK(cell_as_double(row[3]) == doctest::Approx(1));
            CHECK(cell_as_double(row[4]) == doctest::Approx(0));
            CHECK(cell_as_double(row[5]) == doctest::Approx(1));
        }
    }
    SUBCASE("the cross-row feature equals the label everywhere") {
        FeatureProgram cooc = parse_program(cooccurrence_cross_row_fixture());
        for (Split s : {Split::train, Split::val, Split::test}) {
            FeatureMatrix X = materialize(ctx, cooc, s);
            auto y = ctx.labels(s);
            for (size_t i = 0; i < y.size(); ++i)
                CHECK(X.columns[0].numeric[i] == doctest::Approx(y[i]));
        }
    }
    SUBCASE("classes are balanced") {
        auto y = ctx.labels(Split::train);
        double sum = 0;
        for (double v : y) sum += v;
        CHECK(sum == doctest::Approx(20));
    }
}

TEST_CASE("invalid specs are rejected") {
    TempDir dir("synth_invalid");
    TriangleSpec bad;
    bad.self_loop_prob = 2.0;
    CHECK_THROWS_AS(gen_triangle_task(bad, dir.file("x")), Error);
}

}  // TEST_SUITE
