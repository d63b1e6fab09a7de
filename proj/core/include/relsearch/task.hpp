#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace relsearch {

enum class TaskType { binary_classification, regression };
enum class Metric { auroc, mae };
enum class Split { none, train, val, test };

const char* to_string(TaskType t);
const char* to_string(Metric m);
const char* to_string(Split s);

struct TargetSpec {
    std::string table;
    std::string entity_col;
    std::string timestamp_col;
    std::string target_col;
};

/// The task description: context database, target bindings, and metadata.
/// Loaded from a JSON manifest file; `database_path` is resolved relative to
/// the manifest's directory.
struct TaskManifest {
    std::string database_path;
    std::vector<std::string> context_tables;
    TargetSpec train;
    TargetSpec val;
    TargetSpec test;
    TaskType task_type = TaskType::binary_classification;
    Metric primary_metric = Metric::auroc;
    std::vector<std::string> rowid_columns;
    uint64_t rng_seed = 0;

    // Optional prompt metadata; defaults derived from the database path.
    std::string dataset_name;
    std::string task_description;
    std::optional<int> max_validations;

    const TargetSpec& target(Split s) const;

    static TaskManifest load(const std::string& manifest_path);
    void save(const std::string& manifest_path) const;

    /// Pure consistency checks that need no database (metric/task pairing).
    void check_consistency() const;
};

}  // namespace relsearch
