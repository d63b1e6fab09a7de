#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "relsearch/error.hpp"
#include "relsearch/metrics.hpp"

using namespace relsearch;

namespace {

/// O(n^2) pairwise oracle: fraction of (pos, neg) pairs with score_pos >
/// score_neg, ties half. The reference every fast-path check runs against.
double auroc_pairwise(const std::vector<double>& scores, const std::vector<double>& labels) {
    double wins = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] <= 0.5) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] > 0.5) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("auroc on separated scores is 1") {
    CHECK(auroc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("auroc matches the pairwise oracle on a known instance") {
    // labels [1,0,1,0], scores [0.9,0.8,0.7,0.1]: 3 of 4 pairs correct.
    std::vector<double> scores{0.9, 0.8, 0.7, 0.1};
    std::vector<double> labels{1, 0, 1, 0};
    CHECK(auroc_pairwise(scores, labels) == doctest::Approx(0.75));
    CHECK(auroc(scores, labels) == doctest::Approx(0.75));
}

TEST_CASE("auroc requires both classes") {
    CHECK_THROWS_AS(auroc({0.5, 0.6}, {1, 1}), Error);
    try {
        auroc({0.5, 0.6}, {1, 1});
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SingleClass);
    }
}

TEST_CASE("auroc fast path equals the pairwise oracle with ties") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = 2 + rng() % 199;
        std::vector<double> scores(n), labels(n);
        bool has_pos = false, has_neg = false;
        for (size_t i = 0; i < n; ++i) {
            // Coarse score grid forces plenty of ties.
            scores[i] = static_cast<double>(rng() % 10) / 10.0;
            labels[i] = rng() % 2 ? 1.0 : 0.0;
            (labels[i] > 0.5 ? has_pos : has_neg) = true;
        }
        if (!has_pos) labels[0] = 1.0;
        if (!has_neg) labels[n > 1 ? 1 : 0] = 0.0;
        if (n == 1) continue;
        double fast = auroc(scores, labels);
        double slow = auroc_pairwise(scores, labels);
        CHECK(std::fabs(fast - slow) < 1e-12);
    }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    std::mt19937_64 rng(7);
    std::vector<double> scores(60), labels(60);
    for (size_t i = 0; i < scores.size(); ++i) {
        scores[i] = static_cast<double>(rng() % 1000) / 100.0;
        labels[i] = rng() % 2 ? 1.0 : 0.0;
    }
    labels[0] = 1.0;
    labels[1] = 0.0;
    double base = auroc(scores, labels);
    std::vector<double> transformed = scores;
    for (auto& s : transformed) s = std::exp(0.3 * s) + 5.0;
    CHECK(auroc(transformed, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mae basics") {
    CHECK(mae({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
    CHECK(mae({1, 2, 3}, {1, 2, 5}) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(mae({}, {}), Error);
}

TEST_CASE("mae is symmetric and nonnegative") {
    std::mt19937_64 rng(3);
    std::vector<double> a(40), b(40);
    for (size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<double>(rng() % 100) - 50;
        b[i] = static_cast<double>(rng() % 100) - 50;
    }
    CHECK(mae(a, b) == doctest::Approx(mae(b, a)));
    CHECK(mae(a, b) >= 0.0);
    CHECK(mae(a, a) == doctest::Approx(0.0));
}

TEST_CASE("binary bundle") {
    // Perfectly separated: everything 1.
    MetricBundle b = binary_bundle({0.9, 0.9, 0.1, 0.1}, {1, 1, 0, 0});
    CHECK(b.auroc == doctest::Approx(1.0));
    CHECK(b.f1_at_half == doctest::Approx(1.0));
    CHECK(b.accuracy_at_half == doctest::Approx(1.0));
    CHECK(b.oriented_score == doctest::Approx(1.0));

    // Constant scores on balanced labels: ties give 0.5.
    MetricBundle c = binary_bundle({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0});
    CHECK(c.auroc == doctest::Approx(0.5));

    // labels [1,1,0], scores [0.9,0.4,0.6]: one of two pairs correct.
    MetricBundle d = binary_bundle({0.9, 0.4, 0.6}, {1, 1, 0});
    CHECK(d.auroc == doctest::Approx(0.5));
}

TEST_CASE("regression bundle orients mae") {
    MetricBundle b = regression_bundle({1, 2}, {2, 4});
    CHECK(b.mae == doctest::Approx(1.5));
    CHECK(b.oriented_score == doctest::Approx(-1.5));
}

TEST_CASE("normalized average") {
    CHECK(normalized_average({{"a", 2.0}, {"b", 3.0}}, {{"a", 2.0}, {"b", 3.0}}) ==
          doctest::Approx(1.0));
    // One task at half the baseline contributes 0.5.
    CHECK(normalized_average({{"a", 1.0}, {"b", 3.0}}, {{"a", 2.0}, {"b", 3.0}}) ==
          doctest::Approx(0.75));
    CHECK_THROWS_AS(normalized_average({{"a", 1.0}}, {{"b", 1.0}}), Error);
    CHECK_THROWS_AS(normalized_average({{"a", 1.0}}, {{"a", 0.0}}), Error);
}

TEST_CASE("metrics_json carries every computed metric") {
    MetricBundle b = binary_bundle({0.9, 0.1}, {1, 0});
    std::string j = b.metrics_json();
    CHECK(j.find("auroc") != std::string::npos);
    CHECK(j.find("f1_at_half") != std::string::npos);
    CHECK(j.find("oriented_score") != std::string::npos);
}

}  // TEST_SUITE
