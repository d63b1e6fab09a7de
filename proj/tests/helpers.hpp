#pragma once

// Shared fixtures: scratch directories and a small temporal task database.

#include <filesystem>
#include <string>

#include "relsearch/featprog.hpp"
#include "relsearch/relstore.hpp"
#include "relsearch/task.hpp"
#include "sqlite_db.hpp"

namespace testutil {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("relsearch_test_" + name + "_" +
                                            std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

/// A small temporal task: one `events` table plus three target tables.
/// Training labels flag users with at least two past events.
inline relsearch::TaskManifest make_events_task(const TempDir& dir,
                                                bool regression = false) {
    using relsearch::db::Connection;
    std::string db_path = dir.file("context.db");
    fs::remove(db_path);
    Connection conn = Connection::open(db_path, /*read_only=*/false);
    conn.exec("CREATE TABLE events (user_id INTEGER, event_time TEXT, amount REAL)");
    conn.exec(
        "INSERT INTO events VALUES"
        " (1,'2000-01-05',10.0),(1,'2000-01-20',5.0),(2,'2000-01-07',2.5),"
        " (3,'2000-01-09',8.0),(3,'2000-01-15',1.0),(3,'2000-01-25',4.0),"
        " (4,'2000-02-03',7.0),(5,'2000-02-10',3.0),(1,'2000-02-11',2.0),"
        " (2,'2000-02-14',9.0),(6,'2000-02-16',6.0),(7,'2000-02-18',1.5)");
    const char* label_type = regression ? "REAL" : "INTEGER";
    auto target = [&](const std::string& name, const std::string& rows) {
        conn.exec("CREATE TABLE " + name + " (user_id INTEGER, ts TEXT, label " + label_type +
                  ")");
        conn.exec("INSERT INTO " + name + " VALUES " + rows);
    };
    if (regression) {
        target("__target_train",
               "(1,'2000-02-01',15.0),(2,'2000-02-01',2.5),(3,'2000-02-01',13.0),"
               "(4,'2000-02-01',0.0),(5,'2000-02-01',0.0),(6,'2000-02-01',0.0)");
        target("__target_val",
               "(1,'2000-03-01',17.0),(2,'2000-03-01',11.5),(3,'2000-03-01',13.0),"
               "(4,'2000-03-01',7.0),(5,'2000-03-01',3.0)");
        target("__target_test",
               "(6,'2000-04-01',6.0),(7,'2000-04-01',1.5),(1,'2000-04-01',17.0),"
               "(2,'2000-04-01',11.5)");
    } else {
        target("__target_train",
               "(1,'2000-02-01',1),(2,'2000-02-01',0),(3,'2000-02-01',1),"
               "(4,'2000-02-01',0),(5,'2000-02-01',0),(6,'2000-02-01',0)");
        target("__target_val",
               "(1,'2000-03-01',1),(2,'2000-03-01',1),(3,'2000-03-01',1),"
               "(4,'2000-03-01',0),(5,'2000-03-01',0)");
        target("__target_test",
               "(6,'2000-04-01',0),(7,'2000-04-01',0),(1,'2000-04-01',1),(2,'2000-04-01',1)");
    }

    relsearch::TaskManifest m;
    m.database_path = db_path;
    m.context_tables = {"events"};
    for (auto* t : {&m.train, &m.val, &m.test}) {
        t->entity_col = "user_id";
        t->timestamp_col = "ts";
        t->target_col = "label";
    }
    m.train.table = "__target_train";
    m.val.table = "__target_val";
    m.test.table = "__target_test";
    m.task_type =
        regression ? relsearch::TaskType::regression : relsearch::TaskType::binary_classification;
    m.primary_metric = regression ? relsearch::Metric::mae : relsearch::Metric::auroc;
    m.dataset_name = "events";
    m.task_description = "Predict the label for each user at its prediction timestamp.";
    m.rng_seed = 11;
    return m;
}

/// Feature query counting events strictly before the prediction timestamp.
inline std::string past_event_count_sql() {
    return "SELECT e.row_id, COUNT(ev.user_id) AS past_events "
           "FROM eval_table e LEFT JOIN events ev "
           "ON ev.user_id = e.user_id AND ev.event_time < e.ts "
           "GROUP BY e.row_id";
}

inline std::string past_event_program() {
    return std::string(R"([{"name":"hist","sql":")") + past_event_count_sql() + R"("}])";
}

inline relsearch::FeatureMatrix make_matrix(
    std::vector<std::pair<std::string, std::vector<double>>> numeric_cols) {
    relsearch::FeatureMatrix m;
    size_t rows = numeric_cols.empty() ? 0 : numeric_cols[0].second.size();
    m.row_ids.resize(rows);
    for (size_t i = 0; i < rows; ++i) m.row_ids[i] = static_cast<int64_t>(i);
    for (auto& [name, values] : numeric_cols) {
        relsearch::FeatureColumn col;
        col.name = name;
        col.numeric = values;
        col.null_mask.assign(values.size(), 0);
        for (size_t i = 0; i < values.size(); ++i)
            if (std::isnan(values[i])) col.null_mask[i] = 1;
        m.columns.push_back(std::move(col));
    }
    return m;
}

}  // namespace testutil
