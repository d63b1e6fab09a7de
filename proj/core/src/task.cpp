#include "relsearch/task.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "relsearch/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace relsearch {

const char* to_string(TaskType t) {
    return t == TaskType::binary_classification ? "binary_classification" : "regression";
}

const char* to_string(Metric m) { return m == Metric::auroc ? "auroc" : "mae"; }

const char* to_string(Split s) {
    switch (s) {
        case Split::none: return "none";
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "none";
}

const TargetSpec& TaskManifest::target(Split s) const {
    switch (s) {
        case Split::train: return train;
        case Split::val: return val;
        case Split::test: return test;
        default: raise(ErrorKind::ConfigError, "no target table for split 'none'");
    }
}

namespace {

TargetSpec parse_target(const json& j, const std::string& which) {
    for (const char* key : {"table", "entity_col", "timestamp_col", "target_col"})
        if (!j.contains(key))
            raise(ErrorKind::ConfigError, which + " target spec is missing '" + key + "'");
    return TargetSpec{j["table"].get<std::string>(), j["entity_col"].get<std::string>(),
                      j["timestamp_col"].get<std::string>(), j["target_col"].get<std::string>()};
}

json target_json(const TargetSpec& t) {
    return json{{"table", t.table},
                {"entity_col", t.entity_col},
                {"timestamp_col", t.timestamp_col},
                {"target_col", t.target_col}};
}

}  // namespace

TaskManifest TaskManifest::load(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) raise(ErrorKind::IoError, "cannot read manifest '" + manifest_path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(ErrorKind::ConfigError, std::string("manifest is not valid JSON: ") + e.what());
    }

    TaskManifest m;
    if (!j.contains("database_uri"))
        raise(ErrorKind::ConfigError, "manifest is missing 'database_uri'");
    fs::path db = j["database_uri"].get<std::string>();
    if (db.is_relative()) db = fs::path(manifest_path).parent_path() / db;
    m.database_path = db.string();

    for (const auto& t : j.value("context_tables", json::array()))
        m.context_tables.push_back(t.get<std::string>());

    if (!j.contains("train") || !j.contains("val") || !j.contains("test"))
        raise(ErrorKind::ConfigError, "manifest must define train/val/test target specs");
    m.train = parse_target(j["train"], "train");
    m.val = parse_target(j["val"], "val");
    m.test = parse_target(j["test"], "test");

    std::string tt = j.value("task_type", "binary_classification");
    if (tt == "binary_classification")
        m.task_type = TaskType::binary_classification;
    else if (tt == "regression")
        m.task_type = TaskType::regression;
    else
        raise(ErrorKind::ConfigError, "unknown task_type '" + tt + "'");

    std::string pm = j.value("primary_metric", m.task_type == TaskType::regression ? "mae" : "auroc");
    if (pm == "auroc")
        m.primary_metric = Metric::auroc;
    else if (pm == "mae")
        m.primary_metric = Metric::mae;
    else
        raise(ErrorKind::ConfigError, "unknown primary_metric '" + pm + "'");

    for (const auto& c : j.value("rowid_columns", json::array()))
        m.rowid_columns.push_back(c.get<std::string>());
    m.rng_seed = j.value("rng_seed", uint64_t{0});

    m.dataset_name = j.value("dataset_name", fs::path(m.database_path).stem().string());
    m.task_description = j.value("task_description", std::string("Predict " +
                                                                 m.train.target_col +
                                                                 " for each target entity."));
    if (j.contains("max_validations") && !j["max_validations"].is_null())
        m.max_validations = j["max_validations"].get<int>();

    m.check_consistency();
    return m;
}

void TaskManifest::save(const std::string& manifest_path) const {
    fs::path dir = fs::path(manifest_path).parent_path();
    fs::path db(database_path);
    std::string uri = db.string();
    // Store the database relative to the manifest when it lives beside it.
    if (!dir.empty() && db.parent_path() == dir) uri = db.filename().string();

    json j{{"database_uri", uri},
           {"context_tables", context_tables},
           {"train", target_json(train)},
           {"val", target_json(val)},
           {"test", target_json(test)},
           {"task_type", std::string(to_string(task_type))},
           {"primary_metric", std::string(to_string(primary_metric))},
           {"rowid_columns", rowid_columns},
           {"rng_seed", rng_seed},
           {"dataset_name", dataset_name},
           {"task_description", task_description}};
    if (max_validations) j["max_validations"] = *max_validations;

    std::ofstream out(manifest_path);
    if (!out) raise(ErrorKind::IoError, "cannot write manifest '" + manifest_path + "'");
    out << j.dump(2) << "\n";
}

void TaskManifest::check_consistency() const {
    if (task_type == TaskType::regression && primary_metric != Metric::mae)
        raise(ErrorKind::ConfigError, "regression tasks use the mae primary metric");
    if (task_type == TaskType::binary_classification && primary_metric != Metric::auroc)
        raise(ErrorKind::ConfigError, "classification tasks use the auroc primary metric");
    if (context_tables.empty())
        raise(ErrorKind::ConfigError, "manifest lists no context tables");
}

}  // namespace relsearch
