#include "relsearch/synthbench.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <unordered_set>

#include "relsearch/error.hpp"
#include "sqlite_db.hpp"

namespace fs = std::filesystem;

namespace relsearch {

using db::Connection;

namespace {

double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

const char* kTrainEpoch = "2000-01-01 00:00:00";
const char* kValEpoch = "2000-01-02 00:00:00";
const char* kTestEpoch = "2000-01-03 00:00:00";

struct SplitRows {
    std::vector<int64_t> entities;
    std::vector<uint8_t> labels;
};

bool single_class(const std::vector<uint8_t>& labels) {
    if (labels.empty()) return true;
    for (uint8_t v : labels)
        if (v != labels[0]) return false;
    return true;
}

void write_fixture(const fs::path& dir, const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    out << body << "\n";
}

void insert_target_rows(Connection& conn, const std::string& table, const SplitRows& rows,
                        const char* epoch) {
    conn.exec("CREATE TABLE " + table + " (node_id INTEGER, ts TEXT, label INTEGER)");
    std::string sql;
    for (size_t i = 0; i < rows.entities.size(); ++i) {
        if (sql.empty()) sql = "INSERT INTO " + table + " VALUES ";
        else sql += ",";
        sql += "(" + std::to_string(rows.entities[i]) + ",'" + epoch + "'," +
               std::to_string(static_cast<int>(rows.labels[i])) + ")";
        if (sql.size() > 60000) {
            conn.exec(sql);
            sql.clear();
        }
    }
    if (!sql.empty()) conn.exec(sql);
}

}  // namespace

std::vector<uint8_t> label_proper_cycle(const std::vector<std::pair<int64_t, int64_t>>& edges,
                                        const std::vector<int64_t>& nodes) {
    std::unordered_map<int64_t, std::vector<int64_t>> adj;
    std::unordered_map<int64_t, std::unordered_set<int64_t>> has_edge;
    for (const auto& [src, dst] : edges) {
        adj[src].push_back(dst);
        has_edge[src].insert(dst);
    }
    std::vector<uint8_t> labels(nodes.size(), 0);
    for (size_t i = 0; i < nodes.size(); ++i) {
        int64_t x = nodes[i];
        auto xit = adj.find(x);
        if (xit == adj.end()) continue;
        bool found = false;
        for (int64_t y : xit->second) {
            if (y == x) continue;
            auto yit = adj.find(y);
            if (yit == adj.end()) continue;
            for (int64_t z : yit->second) {
                if (z == y || z == x) continue;
                auto zit = has_edge.find(z);
                if (zit != has_edge.end() && zit->second.count(x)) {
                    found = true;
                    break;
                }
            }
            if (found) break;
        }
        labels[i] = found ? 1 : 0;
    }
    return labels;
}

std::vector<int64_t> count_three_walks(const std::vector<std::pair<int64_t, int64_t>>& edges,
                                       const std::vector<int64_t>& nodes) {
    std::unordered_map<int64_t, std::vector<int64_t>> adj;
    std::unordered_map<int64_t, std::unordered_set<int64_t>> has_edge;
    for (const auto& [src, dst] : edges) {
        adj[src].push_back(dst);
        has_edge[src].insert(dst);
    }
    std::vector<int64_t> counts(nodes.size(), 0);
    for (size_t i = 0; i < nodes.size(); ++i) {
        int64_t x = nodes[i];
        auto xit = adj.find(x);
        if (xit == adj.end()) continue;
        int64_t c = 0;
        for (int64_t y : xit->second) {
            auto yit = adj.find(y);
            if (yit == adj.end()) continue;
            for (int64_t z : yit->second) {
                auto zit = has_edge.find(z);
                if (zit != has_edge.end() && zit->second.count(x)) ++c;
            }
        }
        counts[i] = c;
    }
    return counts;
}

std::string triangle_raw_fixture() {
    return R"([{"name": "cycle3",
  "sql": "WITH cycle3 AS (SELECT e1.src AS node_id, COUNT(*) AS cycle3_cnt FROM R e1 JOIN R e2 ON e2.src = e1.dst JOIN R e3 ON e3.src = e2.dst AND e3.dst = e1.src GROUP BY e1.src) SELECT e.row_id, COALESCE(c.cycle3_cnt, 0) AS cycle3_cnt FROM eval_table e LEFT JOIN cycle3 c ON c.node_id = e.node_id"}])";
}

std::string triangle_filtered_fixture() {
    return R"([{"name": "cycle3_filtered",
  "sql": "WITH edges AS (SELECT src, dst FROM R WHERE src != dst), cycle3 AS (SELECT e1.src AS node_id, COUNT(*) AS cycle3_cnt FROM edges e1 JOIN edges e2 ON e2.src = e1.dst JOIN edges e3 ON e3.src = e2.dst AND e3.dst = e1.src GROUP BY e1.src) SELECT e.row_id, COALESCE(c.cycle3_cnt, 0) AS cycle3_cnt FROM eval_table e LEFT JOIN cycle3 c ON c.node_id = e.node_id"}])";
}

std::string cooccurrence_aggregate_fixture() {
    return R"([{"name": "agg",
  "sql": "SELECT e.row_id, COUNT(t.entity) AS cnt, SUM(t.A) AS sum_a, AVG(t.A) AS avg_a, MIN(t.A) AS min_a, MAX(t.A) AS max_a, SUM(t.B) AS sum_b, AVG(t.B) AS avg_b, MIN(t.B) AS min_b, MAX(t.B) AS max_b FROM eval_table e LEFT JOIN T2 t ON t.entity = e.entity GROUP BY e.row_id"}])";
}

std::string cooccurrence_cross_row_fixture() {
    return R"([{"name": "cooc",
  "sql": "SELECT e.row_id, COALESCE(SUM(CASE WHEN t.A = 1 AND t.B = 1 THEN 1 ELSE 0 END), 0) > 0 AS cooc FROM eval_table e LEFT JOIN T2 t ON t.entity = e.entity GROUP BY e.row_id"}])";
}

TaskManifest gen_triangle_task(const TriangleSpec& spec, const std::string& out_dir) {
    if (spec.nodes_per_graph < 3 || spec.edge_prob < 0 || spec.edge_prob > 1 ||
        spec.self_loop_prob < 0 || spec.self_loop_prob > 1)
        raise(ErrorKind::ConfigError, "invalid triangle spec");

    fs::create_directories(out_dir);
    const int n_graphs = spec.n_train_graphs + spec.n_val_graphs + spec.n_test_graphs;
    const int n = spec.nodes_per_graph;

    uint64_t seed = spec.seed;
    for (int attempt = 0; attempt < 16; ++attempt, ++seed) {
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 1);
        std::vector<std::pair<int64_t, int64_t>> edges;
        for (int g = 0; g < n_graphs; ++g) {
            int64_t base = static_cast<int64_t>(g) * n;
            for (int u = 0; u < n; ++u)
                for (int v = 0; v < n; ++v) {
                    if (u == v) continue;
                    if (next_unit(rng) < spec.edge_prob) edges.emplace_back(base + u, base + v);
                }
            for (int u = 0; u < n; ++u)
                if (next_unit(rng) < spec.self_loop_prob) edges.emplace_back(base + u, base + u);
        }

        auto split_rows = [&](int first_graph, int count) {
            SplitRows rows;
            for (int g = first_graph; g < first_graph + count; ++g)
                for (int u = 0; u < n; ++u)
                    rows.entities.push_back(static_cast<int64_t>(g) * n + u);
            rows.labels = label_proper_cycle(edges, rows.entities);
            return rows;
        };
        SplitRows train = split_rows(0, spec.n_train_graphs);
        SplitRows val = split_rows(spec.n_train_graphs, spec.n_val_graphs);
        SplitRows test = split_rows(spec.n_train_graphs + spec.n_val_graphs, spec.n_test_graphs);

        if (single_class(train.labels) || single_class(val.labels) || single_class(test.labels))
            continue;  // degenerate split; bump the seed and resample

        fs::path db_path = fs::path(out_dir) / "context.db";
        fs::remove(db_path);
        Connection conn = Connection::open(db_path.string(), /*read_only=*/false);
        conn.exec("CREATE TABLE R (src INTEGER, dst INTEGER)");
        std::string sql;
        for (const auto& [src, dst] : edges) {
            if (sql.empty()) sql = "INSERT INTO R VALUES ";
            else sql += ",";
            sql += "(" + std::to_string(src) + "," + std::to_string(dst) + ")";
            if (sql.size() > 60000) {
                conn.exec(sql);
                sql.clear();
            }
        }
        if (!sql.empty()) conn.exec(sql);
        insert_target_rows(conn, "__target_train", train, kTrainEpoch);
        insert_target_rows(conn, "__target_val", val, kValEpoch);
        insert_target_rows(conn, "__target_test", test, kTestEpoch);

        TaskManifest m;
        m.database_path = db_path.string();
        m.context_tables = {"R"};
        for (auto* t : {&m.train, &m.val, &m.test}) {
            t->entity_col = "node_id";
            t->timestamp_col = "ts";
            t->target_col = "label";
        }
        m.train.table = "__target_train";
        m.val.table = "__target_val";
        m.test.table = "__target_test";
        m.task_type = TaskType::binary_classification;
        m.primary_metric = Metric::auroc;
        m.rng_seed = spec.seed;
        char name[64];
        std::snprintf(name, sizeof(name), "triangle_psl%g", spec.self_loop_prob);
        m.dataset_name = name;
        m.task_description =
            "Predict the binary label of each node of a directed graph given the edge "
            "relation R(src, dst).";
        m.max_validations = 30;
        m.save((fs::path(out_dir) / "manifest.json").string());

        fs::path fixtures = fs::path(out_dir) / "fixtures";
        fs::create_directories(fixtures);
        write_fixture(fixtures, "raw_cycle3.json", triangle_raw_fixture());
        write_fixture(fixtures, "filtered_cycle3.json", triangle_filtered_fixture());
        return m;
    }
    raise(ErrorKind::DegenerateLabels,
          "triangle generator produced single-class splits for 16 consecutive seeds");
}

TaskManifest gen_cooccurrence_task(const CooccurrenceSpec& spec, const std::string& out_dir) {
    if (spec.n_train_entities < 2 || spec.n_val_entities < 2 || spec.n_test_entities < 2)
        raise(ErrorKind::ConfigError, "invalid co-occurrence spec");
    fs::create_directories(out_dir);

    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + 2);
    auto make_split = [&](int64_t first, int count) {
        SplitRows rows;
        for (int i = 0; i < count; ++i) {
            rows.entities.push_back(first + i);
            rows.labels.push_back(i < count / 2 ? 1 : 0);  // balanced by construction
        }
        // Seeded label shuffle keeps classes balanced but unordered.
        for (size_t i = 0; i + 1 < rows.labels.size(); ++i) {
            size_t j = i + rng() % (rows.labels.size() - i);
            std::swap(rows.labels[i], rows.labels[j]);
        }
        return rows;
    };
    SplitRows train = make_split(0, spec.n_train_entities);
    SplitRows val = make_split(spec.n_train_entities, spec.n_val_entities);
    SplitRows test = make_split(spec.n_train_entities + spec.n_val_entities, spec.n_test_entities);

    fs::path db_path = fs::path(out_dir) / "context.db";
    fs::remove(db_path);
    Connection conn = Connection::open(db_path.string(), /*read_only=*/false);
    conn.exec("CREATE TABLE T1 (entity INTEGER)");
    conn.exec("CREATE TABLE T2 (entity INTEGER, A INTEGER, B INTEGER)");
    std::string t1, t2;
    auto emit = [&](const SplitRows& rows) {
        for (size_t i = 0; i < rows.entities.size(); ++i) {
            int64_t e = rows.entities[i];
            if (t1.empty()) t1 = "INSERT INTO T1 VALUES ";
            else t1 += ",";
            t1 += "(" + std::to_string(e) + ")";
            // Positives hold {(1,1),(0,0)}, negatives {(1,0),(0,1)}: identical
            // per-column marginals, differing only across rows.
            std::string rows_sql = rows.labels[i]
                                       ? "(" + std::to_string(e) + ",1,1),(" + std::to_string(e) +
                                             ",0,0)"
                                       : "(" + std::to_string(e) + ",1,0),(" + std::to_string(e) +
                                             ",0,1)";
            if (t2.empty()) t2 = "INSERT INTO T2 VALUES ";
            else t2 += ",";
            t2 += rows_sql;
        }
    };
    emit(train);
    emit(val);
    emit(test);
    conn.exec(t1);
    conn.exec(t2);

    auto write_targets = [&](const std::string& table, const SplitRows& rows, const char* epoch) {
        conn.exec("CREATE TABLE " + table + " (entity INTEGER, ts TEXT, label INTEGER)");
        std::string sql = "INSERT INTO " + table + " VALUES ";
        for (size_t i = 0; i < rows.entities.size(); ++i) {
            if (i) sql += ",";
            sql += "(" + std::to_string(rows.entities[i]) + ",'" + epoch + "'," +
                   std::to_string(static_cast<int>(rows.labels[i])) + ")";
        }
        conn.exec(sql);
    };
    write_targets("__target_train", train, kTrainEpoch);
    write_targets("__target_val", val, kValEpoch);
    write_targets("__target_test", test, kTestEpoch);

    TaskManifest m;
    m.database_path = db_path.string();
    m.context_tables = {"T1", "T2"};
    for (auto* t : {&m.train, &m.val, &m.test}) {
        t->entity_col = "entity";
        t->timestamp_col = "ts";
        t->target_col = "label";
    }
    m.train.table = "__target_train";
    m.val.table = "__target_val";
    m.test.table = "__target_test";
    m.task_type = TaskType::binary_classification;
    m.primary_metric = Metric::auroc;
    m.rng_seed = spec.seed;
    m.dataset_name = "cooccurrence";
    m.task_description =
        "Predict the binary label of each parent entity from its related rows in T2.";
    m.save((fs::path(out_dir) / "manifest.json").string());

    fs::path fixtures = fs::path(out_dir) / "fixtures";
    fs::create_directories(fixtures);
    write_fixture(fixtures, "aggregate_only.json", cooccurrence_aggregate_fixture());
    write_fixture(fixtures, "cooccurrence.json", cooccurrence_cross_row_fixture());
    return m;
}

}  // namespace relsearch
