#pragma once

// Gradient-boosted decision trees: one native histogram engine behind the
// seven-entry model menu, with config clamping, alias translation, DART/GOSS
// variants, bagging, and a log1p target transform.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "relsearch/featprog.hpp"
#include "relsearch/task.hpp"

namespace relsearch {

enum class ModelChoice { gbdt, rf, dart, goss, xgboost, xgb_dart, catboost };

const char* to_string(ModelChoice m);
ModelChoice model_choice_from_string(const std::string& name);

enum class Objective { binary_logistic, regression_l1, regression_l2 };

const char* to_string(Objective o);

struct ResolvedConfig {
    ModelChoice choice = ModelChoice::gbdt;
    int n_estimators = 200;
    double learning_rate = 0.05;
    int max_depth = 6;
    int min_child_samples = 20;
    double subsample = 1.0;
    double colsample_bytree = 1.0;
    double lambda_l1 = 0.0;
    double lambda_l2 = 0.0;
    Objective objective = Objective::binary_logistic;
    bool log_transform_target = false;

    // variant flags
    bool rf_bagging = false;
    double dart_dropout_rate = 0.0;
    double goss_top_fraction = 0.0;
    double goss_other_fraction = 0.0;

    uint64_t seed = 0;
    std::set<std::string> categorical_features;
    std::vector<std::string> warnings;  // unknown keys, clamps, alias notes

    std::string to_json() const;  // echo without warnings
};

/// Clamp, translate aliases, apply variant flags and defaults. Raw values out
/// of bounds are clamped to the nearest bound of the submitted key; unknown
/// keys are dropped with a warning.
ResolvedConfig resolve_config(ModelChoice choice, const std::string& raw_config_json,
                              TaskType task_type);

struct GradientPair {
    std::vector<double> grad;
    std::vector<double> hess;
};

/// Second-order gradients. Logistic takes probabilities in (0,1):
/// g = p - y, h = p(1-p). L2: g = pred - y, h = 1. L1: g = sign(pred - y), h = 1.
GradientPair compute_gradients(Objective objective, const std::vector<double>& predictions,
                               const std::vector<double>& labels);

struct TreeNode {
    int feature = -1;  // canonical column index; -1 marks a leaf
    double threshold = 0.0;
    bool default_left = true;  // null routing
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double weight = 1.0;
};

struct ColumnSchema {
    std::string name;
    bool categorical = false;
    std::vector<std::string> categories;  // code -> level, first-appearance order
};

class FittedModel {
  public:
    Objective objective = Objective::regression_l2;
    double base_score = 0.0;
    bool log_transform = false;
    std::vector<ColumnSchema> schema;  // canonical name order
    std::vector<Tree> trees;
    std::vector<double> column_gain;  // aligned with schema
    std::vector<double> train_loss;   // objective value per boosting iteration
    std::vector<double> train_predictions;
    ResolvedConfig config;

    std::vector<double> predict(const FeatureMatrix& X,
                                std::vector<std::string>* warnings = nullptr) const;

    /// Per-column split gain, normalized to sum to 1 when any gain exists.
    std::map<std::string, double> feature_importance() const;

    std::string to_json() const;
    static FittedModel from_json(const std::string& text);
};

/// Train on (X, y) under `cfg`. Deterministic for fixed inputs and seed,
/// independent of `n_threads`.
FittedModel fit(const FeatureMatrix& X, const std::vector<double>& y, const ResolvedConfig& cfg,
                int n_threads = 1);

}  // namespace relsearch
