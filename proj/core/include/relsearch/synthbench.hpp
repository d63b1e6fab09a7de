#pragma once

// Deterministic generators for the directed-triangle tasks and the
// co-occurrence counterexample, plus the brute-force cycle oracle and shipped
// fixture programs.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relsearch/task.hpp"

namespace relsearch {

struct TriangleSpec {
    int nodes_per_graph = 300;
    double edge_prob = 0.02;
    double self_loop_prob = 0.0;  // 0.0, 0.4, or 1.0 in the shipped setups
    int n_train_graphs = 5;
    int n_val_graphs = 2;
    int n_test_graphs = 2;
    uint64_t seed = 7;
};

struct CooccurrenceSpec {
    int n_train_entities = 200;
    int n_val_entities = 100;
    int n_test_entities = 100;
    uint64_t seed = 7;
};

/// label(x) = 1 iff distinct y, z exist with x->y, y->z, z->x. Brute force
/// over adjacency sets; the independent oracle for every triangle check.
std::vector<uint8_t> label_proper_cycle(const std::vector<std::pair<int64_t, int64_t>>& edges,
                                        const std::vector<int64_t>& nodes);

/// Unfiltered three-edge walk count (self-loops included), the inflated
/// signal the raw fixture computes.
std::vector<int64_t> count_three_walks(const std::vector<std::pair<int64_t, int64_t>>& edges,
                                       const std::vector<int64_t>& nodes);

/// Write context database + manifest + fixture programs into `out_dir` and
/// return the manifest. Resamples with an incremented seed when a split
/// degenerates to a single class.
TaskManifest gen_triangle_task(const TriangleSpec& spec, const std::string& out_dir);
TaskManifest gen_cooccurrence_task(const CooccurrenceSpec& spec, const std::string& out_dir);

// Shipped fixture programs, as feature-program JSON.
std::string triangle_raw_fixture();
std::string triangle_filtered_fixture();
std::string cooccurrence_aggregate_fixture();
std::string cooccurrence_cross_row_fixture();

}  // namespace relsearch
