#include "relsearch/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "relsearch/error.hpp"

using nlohmann::json;

namespace relsearch {

namespace {

constexpr uint16_t kMissingBin = 0xFFFF;
constexpr int kMaxBins = 256;
constexpr double kMinDenominator = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double soft_threshold(double g, double l1) {
    double mag = std::fabs(g) - l1;
    if (mag <= 0) return 0.0;
    return g > 0 ? mag : -mag;
}

double split_score(double g, double h, double l1, double l2) {
    double denom = h + l2;
    if (denom <= kMinDenominator) return 0.0;
    double t = soft_threshold(g, l1);
    return t * t / denom;
}

double leaf_value(double g, double h, double l1, double l2) {
    double denom = h + l2;
    if (denom <= kMinDenominator) return 0.0;
    return -soft_threshold(g, l1) / denom;
}

std::string render_numeric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Deterministic uniform double in [0,1) from a raw engine draw.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

size_t next_index(std::mt19937_64& rng, size_t bound) { return rng() % bound; }

// One encoded training column: categorical codes or raw numerics, quantile
// bin boundaries, and the per-row bin index.
struct EncodedColumn {
    std::string name;
    bool categorical = false;
    std::vector<std::string> categories;
    std::vector<double> boundaries;  // inclusive upper bin edges
    std::vector<uint16_t> bins;      // kMissingBin where null
};

uint16_t bin_of(const std::vector<double>& bounds, double v) {
    auto it = std::lower_bound(bounds.begin(), bounds.end(), v);
    return static_cast<uint16_t>(it - bounds.begin());
}

EncodedColumn encode_column(const FeatureColumn& col, bool force_categorical, size_t m) {
    EncodedColumn enc;
    enc.name = col.name;
    enc.categorical = col.text || force_categorical;
    enc.bins.assign(m, kMissingBin);

    std::vector<double> values(m, std::numeric_limits<double>::quiet_NaN());
    if (enc.categorical) {
        std::unordered_map<std::string, int> codes;
        for (size_t i = 0; i < m; ++i) {
            if (col.null_mask[i]) continue;
            std::string level = col.text ? col.values[i] : render_numeric(col.numeric[i]);
            auto [it, inserted] = codes.emplace(level, static_cast<int>(enc.categories.size()));
            if (inserted) enc.categories.push_back(level);
            values[i] = static_cast<double>(it->second);
        }
    } else {
        for (size_t i = 0; i < m; ++i) {
            if (col.null_mask[i]) continue;
            double v = col.numeric[i];
            if (std::isinf(v))
                raise(ErrorKind::TrainingError, "non-finite value in column '" + col.name + "'");
            values[i] = v;
        }
    }

    std::vector<double> sorted;
    sorted.reserve(m);
    for (double v : values)
        if (!std::isnan(v)) sorted.push_back(v);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    if (sorted.size() <= static_cast<size_t>(kMaxBins - 1)) {
        enc.boundaries = sorted;
    } else {
        // Quantile cut points; the max value is always the last boundary so
        // every training row lands in a real bin.
        size_t n = sorted.size();
        for (int k = 1; k < kMaxBins; ++k) {
            size_t pos = (n * static_cast<size_t>(k)) / kMaxBins;
            if (pos >= n) pos = n - 1;
            double v = sorted[pos];
            if (enc.boundaries.empty() || v > enc.boundaries.back()) enc.boundaries.push_back(v);
        }
        if (enc.boundaries.empty() || enc.boundaries.back() < sorted.back())
            enc.boundaries.push_back(sorted.back());
    }

    for (size_t i = 0; i < m; ++i)
        if (!std::isnan(values[i])) enc.bins[i] = bin_of(enc.boundaries, values[i]);
    return enc;
}

struct SplitDecision {
    bool valid = false;
    int column = -1;
    int bin = -1;
    bool default_left = true;
    double gain = 0.0;
    double left_g = 0, left_h = 0, right_g = 0, right_h = 0;
    long left_count = 0, right_count = 0;
};

struct NodeWork {
    int node = 0;
    std::vector<int> rows;  // indices into the sampled row set
    double sum_g = 0, sum_h = 0;
    long count = 0;
};

// Best split for one column within one node; rows index the sampled set.
SplitDecision column_best_split(const EncodedColumn& col, const NodeWork& node,
                                const std::vector<int>& row_index,
                                const std::vector<double>& grad, const std::vector<double>& hess,
                                const std::vector<double>& weight,
                                const std::vector<long>& count, const ResolvedConfig& cfg) {
    const size_t nb = col.boundaries.size();
    SplitDecision best;
    if (nb < 2) {
        // At most one value bin: a split can only separate missing values,
        // which threshold routing cannot express.
        return best;
    }
    std::vector<double> hg(nb, 0.0), hh(nb, 0.0);
    std::vector<long> hc(nb, 0);
    double mg = 0, mh = 0;
    long mc = 0;
    for (int r : node.rows) {
        int row = row_index[r];
        uint16_t b = col.bins[row];
        double g = grad[r] * weight[r];
        double h = hess[r] * weight[r];
        if (b == kMissingBin) {
            mg += g;
            mh += h;
            mc += count[r];
        } else {
            hg[b] += g;
            hh[b] += h;
            hc[b] += count[r];
        }
    }

    const double parent = split_score(node.sum_g, node.sum_h, cfg.lambda_l1, cfg.lambda_l2);
    double gl = 0, hl = 0;
    long cl = 0;
    for (size_t t = 0; t + 1 < nb; ++t) {
        gl += hg[t];
        hl += hh[t];
        cl += hc[t];
        // Missing values go left or right, whichever scores higher.
        for (int miss_left = 1; miss_left >= 0; --miss_left) {
            double lg = gl + (miss_left ? mg : 0.0);
            double lh = hl + (miss_left ? mh : 0.0);
            long lc = cl + (miss_left ? mc : 0);
            double rg = node.sum_g - lg;
            double rh = node.sum_h - lh;
            long rc = node.count - lc;
            if (lc < cfg.min_child_samples || rc < cfg.min_child_samples) continue;
            double gain = 0.5 * (split_score(lg, lh, cfg.lambda_l1, cfg.lambda_l2) +
                                 split_score(rg, rh, cfg.lambda_l1, cfg.lambda_l2) - parent);
            if (gain > best.gain) {
                best.valid = true;
                best.column = -1;  // filled by caller
                best.bin = static_cast<int>(t);
                best.default_left = miss_left != 0;
                best.gain = gain;
                best.left_g = lg;
                best.left_h = lh;
                best.left_count = lc;
                best.right_g = rg;
                best.right_h = rh;
                best.right_count = rc;
            }
        }
    }
    return best;
}

struct TreeOutput {
    Tree tree;
    std::vector<double> row_values;  // lr-scaled output per training row
};

// Depth-wise histogram tree over the sampled rows. Column iteration follows
// canonical schema order, so the result is independent of thread count.
TreeOutput build_tree(const std::vector<EncodedColumn>& columns,
                      const std::vector<int>& col_subset, const std::vector<int>& row_index,
                      const std::vector<double>& grad, const std::vector<double>& hess,
                      const std::vector<double>& weight, const std::vector<long>& count,
                      const ResolvedConfig& cfg, double shrinkage, size_t n_rows_total,
                      std::vector<double>& column_gain, int n_threads) {
    TreeOutput out;
    Tree& tree = out.tree;
    tree.nodes.push_back(TreeNode{});

    NodeWork root;
    root.node = 0;
    root.rows.resize(row_index.size());
    std::iota(root.rows.begin(), root.rows.end(), 0);
    for (size_t r = 0; r < row_index.size(); ++r) {
        root.sum_g += grad[r] * weight[r];
        root.sum_h += hess[r] * weight[r];
        root.count += count[r];
    }

    std::vector<NodeWork> frontier;
    frontier.push_back(std::move(root));
    std::vector<std::pair<int, double>> leaf_values;  // node -> value

    for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
        std::vector<NodeWork> next;
        for (auto& node : frontier) {
            // Per-column best splits, evaluated in parallel into fixed slots.
            std::vector<SplitDecision> slots(col_subset.size());
            auto worker = [&](size_t begin, size_t end) {
                for (size_t k = begin; k < end; ++k)
                    slots[k] = column_best_split(columns[col_subset[k]], node, row_index, grad,
                                                 hess, weight, count, cfg);
            };
            int threads = std::max(1, n_threads);
            if (threads == 1 || col_subset.size() < 2) {
                worker(0, col_subset.size());
            } else {
                std::vector<std::thread> pool;
                size_t chunk = (col_subset.size() + threads - 1) / threads;
                for (int t = 0; t < threads; ++t) {
                    size_t begin = t * chunk;
                    size_t end = std::min(col_subset.size(), begin + chunk);
                    if (begin >= end) break;
                    pool.emplace_back(worker, begin, end);
                }
                for (auto& th : pool) th.join();
            }

            SplitDecision best;
            for (size_t k = 0; k < slots.size(); ++k) {
                if (slots[k].valid && slots[k].gain > best.gain) {
                    best = slots[k];
                    best.column = col_subset[k];
                }
            }

            if (!best.valid || best.gain <= 0.0) {
                leaf_values.emplace_back(
                    node.node,
                    shrinkage * leaf_value(node.sum_g, node.sum_h, cfg.lambda_l1, cfg.lambda_l2));
                continue;
            }

            column_gain[best.column] += best.gain;
            const EncodedColumn& col = columns[best.column];

            TreeNode& parent = tree.nodes[node.node];
            parent.feature = best.column;
            parent.threshold = col.boundaries[best.bin];
            parent.default_left = best.default_left;
            parent.left = static_cast<int>(tree.nodes.size());
            parent.right = parent.left + 1;
            tree.nodes.push_back(TreeNode{});
            tree.nodes.push_back(TreeNode{});

            NodeWork left, right;
            left.node = parent.left;
            right.node = parent.right;
            for (int r : node.rows) {
                uint16_t b = col.bins[row_index[r]];
                bool go_left =
                    b == kMissingBin ? best.default_left : (b <= static_cast<uint16_t>(best.bin));
                (go_left ? left.rows : right.rows).push_back(r);
            }
            left.sum_g = best.left_g;
            left.sum_h = best.left_h;
            left.count = best.left_count;
            right.sum_g = best.right_g;
            right.sum_h = best.right_h;
            right.count = best.right_count;
            next.push_back(std::move(left));
            next.push_back(std::move(right));
        }
        frontier = std::move(next);
        if (depth + 1 == cfg.max_depth) {
            for (auto& node : frontier)
                leaf_values.emplace_back(
                    node.node,
                    shrinkage * leaf_value(node.sum_g, node.sum_h, cfg.lambda_l1, cfg.lambda_l2));
            frontier.clear();
        }
    }

    for (auto& [idx, value] : leaf_values) tree.nodes[idx].leaf_value = value;

    // Evaluate the finished tree on every training row (not just sampled).
    // Training bins index into boundaries, and thresholds are boundary values,
    // so boundaries[b] <= threshold reproduces v <= threshold exactly.
    out.row_values.assign(n_rows_total, 0.0);
    for (size_t i = 0; i < n_rows_total; ++i) {
        int node = 0;
        while (tree.nodes[node].feature >= 0) {
            const TreeNode& nd = tree.nodes[node];
            const EncodedColumn& col = columns[nd.feature];
            uint16_t b = col.bins[i];
            bool go_left = b == kMissingBin ? nd.default_left
                                            : col.boundaries[b] <= nd.threshold;
            node = go_left ? nd.left : nd.right;
        }
        out.row_values[i] = tree.nodes[node].leaf_value;
    }
    return out;
}

double objective_loss(Objective obj, const std::vector<double>& raw,
                      const std::vector<double>& y) {
    double total = 0.0;
    for (size_t i = 0; i < raw.size(); ++i) {
        switch (obj) {
            case Objective::binary_logistic: {
                double p = sigmoid(raw[i]);
                p = std::min(1.0 - 1e-15, std::max(1e-15, p));
                total += -(y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
                break;
            }
            case Objective::regression_l2: {
                double d = raw[i] - y[i];
                total += 0.5 * d * d;
                break;
            }
            case Objective::regression_l1:
                total += std::fabs(raw[i] - y[i]);
                break;
        }
    }
    return total / static_cast<double>(raw.size());
}

}  // namespace

const char* to_string(ModelChoice m) {
    switch (m) {
        case ModelChoice::gbdt: return "gbdt";
        case ModelChoice::rf: return "rf";
        case ModelChoice::dart: return "dart";
        case ModelChoice::goss: return "goss";
        case ModelChoice::xgboost: return "xgboost";
        case ModelChoice::xgb_dart: return "xgb_dart";
        case ModelChoice::catboost: return "catboost";
    }
    return "gbdt";
}

ModelChoice model_choice_from_string(const std::string& name) {
    for (ModelChoice m : {ModelChoice::gbdt, ModelChoice::rf, ModelChoice::dart, ModelChoice::goss,
                          ModelChoice::xgboost, ModelChoice::xgb_dart, ModelChoice::catboost})
        if (name == to_string(m)) return m;
    raise(ErrorKind::ConfigError, "unknown model_choice '" + name +
                                      "'; expected one of gbdt, rf, dart, goss, xgboost, "
                                      "xgb_dart, catboost");
}

const char* to_string(Objective o) {
    switch (o) {
        case Objective::binary_logistic: return "binary_logistic";
        case Objective::regression_l1: return "regression_l1";
        case Objective::regression_l2: return "regression_l2";
    }
    return "binary_logistic";
}

namespace {

struct BoundedKey {
    const char* key;
    double lo;
    double hi;
    bool integral;
};

// Documented bounds; aliases clamp within their own range before mapping.
const BoundedKey kBounds[] = {
    {"n_estimators", 50, 500, true},       {"learning_rate", 0.01, 0.3, false},
    {"max_depth", 2, 10, true},            {"min_child_samples", 1, 100, true},
    {"min_child_weight", 1, 100, true},    {"subsample", 0.5, 1.0, false},
    {"colsample_bytree", 0.5, 1.0, false}, {"lambda_l1", 0.0, 10.0, false},
    {"lambda_l2", 0.0, 10.0, false},       {"reg_alpha", 0.0, 10.0, false},
    {"reg_lambda", 0.0, 10.0, false},      {"l2_leaf_reg", 0.1, 10.0, false},
};

const BoundedKey* find_bound(const std::string& key) {
    for (const auto& b : kBounds)
        if (key == b.key) return &b;
    return nullptr;
}

}  // namespace

ResolvedConfig resolve_config(ModelChoice choice, const std::string& raw_config_json,
                              TaskType task_type) {
    json raw;
    std::string text = raw_config_json.empty() ? "{}" : raw_config_json;
    try {
        raw = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::JsonError, std::string("model_config_json: ") + e.what());
    }
    if (!raw.is_object()) raise(ErrorKind::JsonError, "model_config_json must be a JSON object");

    ResolvedConfig cfg;
    cfg.choice = choice;
    cfg.objective = task_type == TaskType::binary_classification ? Objective::binary_logistic
                                                                 : Objective::regression_l1;

    switch (choice) {
        case ModelChoice::rf: cfg.rf_bagging = true; break;
        case ModelChoice::dart:
        case ModelChoice::xgb_dart: cfg.dart_dropout_rate = 0.1; break;
        case ModelChoice::goss:
            cfg.goss_top_fraction = 0.2;
            cfg.goss_other_fraction = 0.1;
            break;
        default: break;  // xgboost/catboost run the same native engine
    }

    auto clamp_number = [&](const std::string& key, double value) -> double {
        const BoundedKey* b = find_bound(key);
        double v = value;
        if (b) {
            if (v < b->lo) {
                cfg.warnings.push_back(key + " clamped to " + render_numeric(b->lo));
                v = b->lo;
            } else if (v > b->hi) {
                cfg.warnings.push_back(key + " clamped to " + render_numeric(b->hi));
                v = b->hi;
            }
            if (b->integral) v = static_cast<double>(std::llround(v));
        }
        return v;
    };

    for (const auto& [key, value] : raw.items()) {
        if (key == "objective") {
            if (!value.is_string()) {
                cfg.warnings.push_back("objective must be a string; ignored");
                continue;
            }
            std::string obj = value.get<std::string>();
            bool classification = task_type == TaskType::binary_classification;
            if (obj == "binary" || obj == "binary_logistic" || obj == "binary:logistic") {
                if (!classification)
                    raise(ErrorKind::ObjectiveMismatch,
                          "classification objective '" + obj + "' on a regression task");
                cfg.objective = Objective::binary_logistic;
            } else if (obj == "regression_l1" || obj == "reg:absoluteerror" || obj == "l1" ||
                       obj == "mae") {
                if (classification)
                    raise(ErrorKind::ObjectiveMismatch,
                          "regression objective '" + obj + "' on a classification task");
                cfg.objective = Objective::regression_l1;
            } else if (obj == "regression_l2" || obj == "reg:squarederror" || obj == "l2" ||
                       obj == "mse") {
                if (classification)
                    raise(ErrorKind::ObjectiveMismatch,
                          "regression objective '" + obj + "' on a classification task");
                cfg.objective = Objective::regression_l2;
            } else if (obj == "huber" || obj == "reg:pseudohubererror") {
                if (classification)
                    raise(ErrorKind::ObjectiveMismatch,
                          "regression objective '" + obj + "' on a classification task");
                cfg.objective = Objective::regression_l1;
                cfg.warnings.push_back("objective '" + obj + "' mapped to regression_l1");
            } else {
                cfg.warnings.push_back("unknown objective '" + obj + "' ignored; using " +
                                       to_string(cfg.objective));
            }
            continue;
        }
        if (key == "log_transform_target") {
            bool on = value.is_boolean() ? value.get<bool>()
                                         : (value.is_number() && value.get<double>() != 0);
            if (on && task_type == TaskType::binary_classification) {
                cfg.warnings.push_back("log_transform_target ignored for classification");
            } else {
                cfg.log_transform_target = on;
            }
            continue;
        }
        if (key == "categorical_features") {
            if (value.is_array()) {
                for (const auto& c : value)
                    if (c.is_string()) cfg.categorical_features.insert(c.get<std::string>());
            } else {
                cfg.warnings.push_back("categorical_features must be a list; ignored");
            }
            continue;
        }
        if (key == "seed") {
            if (value.is_number()) cfg.seed = static_cast<uint64_t>(value.get<double>());
            continue;
        }
        if (!value.is_number()) {
            cfg.warnings.push_back("unknown key '" + key + "' ignored");
            continue;
        }

        double v = clamp_number(key, value.get<double>());
        if (key == "n_estimators") cfg.n_estimators = static_cast<int>(v);
        else if (key == "learning_rate") cfg.learning_rate = v;
        else if (key == "max_depth") cfg.max_depth = static_cast<int>(v);
        else if (key == "min_child_samples") cfg.min_child_samples = static_cast<int>(v);
        else if (key == "min_child_weight") cfg.min_child_samples = static_cast<int>(v);
        else if (key == "subsample") cfg.subsample = v;
        else if (key == "colsample_bytree") cfg.colsample_bytree = v;
        else if (key == "lambda_l1") cfg.lambda_l1 = v;
        else if (key == "lambda_l2") cfg.lambda_l2 = v;
        else if (key == "reg_alpha") cfg.lambda_l1 = v;
        else if (key == "reg_lambda") cfg.lambda_l2 = v;
        else if (key == "l2_leaf_reg") cfg.lambda_l2 = v;
        else cfg.warnings.push_back("unknown key '" + key + "' ignored");
    }
    return cfg;
}

std::string ResolvedConfig::to_json() const {
    json j{{"model_choice", std::string(relsearch::to_string(choice))},
           {"n_estimators", n_estimators},
           {"learning_rate", learning_rate},
           {"max_depth", max_depth},
           {"min_child_samples", min_child_samples},
           {"subsample", subsample},
           {"colsample_bytree", colsample_bytree},
           {"lambda_l1", lambda_l1},
           {"lambda_l2", lambda_l2},
           {"objective", std::string(relsearch::to_string(objective))},
           {"log_transform_target", log_transform_target},
           {"rf_bagging", rf_bagging},
           {"dart_dropout_rate", dart_dropout_rate},
           {"goss_top_fraction", goss_top_fraction},
           {"goss_other_fraction", goss_other_fraction},
           {"seed", seed}};
    j["categorical_features"] = json::array();
    for (const auto& c : categorical_features) j["categorical_features"].push_back(c);
    return j.dump();
}

GradientPair compute_gradients(Objective objective, const std::vector<double>& predictions,
                               const std::vector<double>& labels) {
    if (predictions.size() != labels.size())
        raise(ErrorKind::DegenerateInput, "prediction/label length mismatch");
    GradientPair gp;
    gp.grad.resize(predictions.size());
    gp.hess.resize(predictions.size());
    for (size_t i = 0; i < predictions.size(); ++i) {
        switch (objective) {
            case Objective::binary_logistic: {
                double p = predictions[i];
                gp.grad[i] = p - labels[i];
                gp.hess[i] = p * (1.0 - p);
                break;
            }
            case Objective::regression_l2:
                gp.grad[i] = predictions[i] - labels[i];
                gp.hess[i] = 1.0;
                break;
            case Objective::regression_l1: {
                double d = predictions[i] - labels[i];
                gp.grad[i] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
                gp.hess[i] = 1.0;
                break;
            }
        }
    }
    return gp;
}

FittedModel fit(const FeatureMatrix& X, const std::vector<double>& y, const ResolvedConfig& cfg,
                int n_threads) {
    const size_t m = X.rows();
    if (m == 0 || X.cols() == 0)
        raise(ErrorKind::DegenerateInput, "feature matrix has zero rows or zero columns");
    if (y.size() != m) raise(ErrorKind::DegenerateInput, "label length does not match matrix");
    for (double v : y)
        if (!std::isfinite(v)) raise(ErrorKind::TrainingError, "non-finite label value");

    std::vector<double> target = y;
    if (cfg.log_transform_target) {
        for (double v : y)
            if (v <= -1.0)
                raise(ErrorKind::TransformDomain,
                      "log_transform_target requires every label > -1, got " + render_numeric(v));
        for (auto& v : target) v = std::log1p(v);
    }
    if (cfg.objective == Objective::binary_logistic)
        for (double v : y)
            if (v != 0.0 && v != 1.0)
                raise(ErrorKind::TrainingError, "binary objective requires 0/1 labels");

    FittedModel model;
    model.objective = cfg.objective;
    model.log_transform = cfg.log_transform_target;
    model.config = cfg;

    // Canonical column order: sorted by name.
    std::vector<const FeatureColumn*> ordered;
    for (const auto& c : X.columns) ordered.push_back(&c);
    std::sort(ordered.begin(), ordered.end(),
              [](const FeatureColumn* a, const FeatureColumn* b) { return a->name < b->name; });
    for (size_t i = 0; i + 1 < ordered.size(); ++i)
        if (ordered[i]->name == ordered[i + 1]->name)
            raise(ErrorKind::TrainingError,
                  "duplicate feature column name '" + ordered[i]->name + "'");

    std::vector<EncodedColumn> columns;
    columns.reserve(ordered.size());
    for (const auto* c : ordered) {
        bool declared = cfg.categorical_features.count(c->name) ||
                        X.declared_categoricals.count(c->name);
        columns.push_back(encode_column(*c, declared, m));
    }
    for (const auto& c : columns) {
        ColumnSchema s;
        s.name = c.name;
        s.categorical = c.categorical;
        s.categories = c.categories;
        model.schema.push_back(std::move(s));
    }
    model.column_gain.assign(columns.size(), 0.0);

    // Base score: log-odds of the positive rate, or the target mean.
    double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(m);
    if (cfg.objective == Objective::binary_logistic) {
        double p = std::min(1.0 - 1e-12, std::max(1e-12, mean));
        model.base_score = std::log(p / (1.0 - p));
    } else {
        model.base_score = mean;
    }

    std::vector<double> ensemble_raw(m, model.base_score);
    const bool is_dart = cfg.dart_dropout_rate > 0;
    const bool is_goss = cfg.goss_top_fraction > 0;
    std::vector<std::vector<double>> contributions;  // per tree, dart only

    for (int t = 0; t < cfg.n_estimators; ++t) {
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL +
                            static_cast<uint64_t>(t));

        // Gradient basis: bagging uses the constant base, DART drops trees.
        std::vector<double> basis;
        std::vector<int> dropped;
        if (cfg.rf_bagging) {
            basis.assign(m, model.base_score);
        } else if (is_dart && !model.trees.empty()) {
            for (size_t i = 0; i < model.trees.size(); ++i)
                if (next_unit(rng) < cfg.dart_dropout_rate) dropped.push_back(static_cast<int>(i));
            basis = ensemble_raw;
            for (int d : dropped)
                for (size_t i = 0; i < m; ++i)
                    basis[i] -= model.trees[d].weight * contributions[d][i];
        } else {
            basis = ensemble_raw;
        }

        std::vector<double> grad(m), hess(m);
        for (size_t i = 0; i < m; ++i) {
            switch (cfg.objective) {
                case Objective::binary_logistic: {
                    double p = sigmoid(basis[i]);
                    grad[i] = p - target[i];
                    hess[i] = p * (1.0 - p);
                    break;
                }
                case Objective::regression_l2:
                    grad[i] = basis[i] - target[i];
                    hess[i] = 1.0;
                    break;
                case Objective::regression_l1: {
                    double d = basis[i] - target[i];
                    grad[i] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
                    hess[i] = 1.0;
                    break;
                }
            }
        }

        // Row selection.
        std::vector<int> row_index;
        std::vector<double> row_weight;
        std::vector<long> row_count;
        if (cfg.rf_bagging) {
            std::vector<long> multiplicity(m, 0);
            for (size_t i = 0; i < m; ++i) ++multiplicity[next_index(rng, m)];
            for (size_t i = 0; i < m; ++i) {
                if (!multiplicity[i]) continue;
                row_index.push_back(static_cast<int>(i));
                row_weight.push_back(static_cast<double>(multiplicity[i]));
                row_count.push_back(multiplicity[i]);
            }
        } else if (is_goss) {
            size_t keep_top =
                std::min(m, static_cast<size_t>(std::ceil(cfg.goss_top_fraction * m)));
            size_t keep_rest =
                std::min(m - keep_top,
                         static_cast<size_t>(std::ceil(cfg.goss_other_fraction * m)));
            std::vector<int> order(m);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return std::fabs(grad[a]) > std::fabs(grad[b]);
            });
            std::vector<int> rest(order.begin() + keep_top, order.end());
            for (size_t i = 0; i < keep_rest && !rest.empty(); ++i) {
                size_t j = i + next_index(rng, rest.size() - i);
                std::swap(rest[i], rest[j]);
            }
            double amplify = cfg.goss_other_fraction > 0
                                 ? (1.0 - cfg.goss_top_fraction) / cfg.goss_other_fraction
                                 : 1.0;
            std::vector<std::pair<int, double>> chosen;
            for (size_t i = 0; i < keep_top; ++i) chosen.emplace_back(order[i], 1.0);
            for (size_t i = 0; i < keep_rest; ++i) chosen.emplace_back(rest[i], amplify);
            std::sort(chosen.begin(), chosen.end());
            for (auto& [idx, w] : chosen) {
                row_index.push_back(idx);
                row_weight.push_back(w);
                row_count.push_back(1);
            }
        } else if (cfg.subsample < 1.0) {
            size_t keep = std::max<size_t>(
                1, static_cast<size_t>(std::llround(cfg.subsample * static_cast<double>(m))));
            std::vector<int> pool(m);
            std::iota(pool.begin(), pool.end(), 0);
            for (size_t i = 0; i < keep; ++i) {
                size_t j = i + next_index(rng, pool.size() - i);
                std::swap(pool[i], pool[j]);
            }
            pool.resize(keep);
            std::sort(pool.begin(), pool.end());
            for (int idx : pool) {
                row_index.push_back(idx);
                row_weight.push_back(1.0);
                row_count.push_back(1);
            }
        } else {
            row_index.resize(m);
            std::iota(row_index.begin(), row_index.end(), 0);
            row_weight.assign(m, 1.0);
            row_count.assign(m, 1);
        }

        // Gradients aligned with the sampled rows.
        std::vector<double> gsel(row_index.size()), hsel(row_index.size());
        for (size_t r = 0; r < row_index.size(); ++r) {
            gsel[r] = grad[row_index[r]];
            hsel[r] = hess[row_index[r]];
        }

        // Column sampling (canonical order preserved).
        std::vector<int> col_subset;
        if (cfg.colsample_bytree < 1.0 && columns.size() > 1) {
            size_t keep = std::max<size_t>(
                1, static_cast<size_t>(
                       std::ceil(cfg.colsample_bytree * static_cast<double>(columns.size()) -
                                 1e-9)));
            std::vector<int> pool(columns.size());
            std::iota(pool.begin(), pool.end(), 0);
            for (size_t i = 0; i < keep; ++i) {
                size_t j = i + next_index(rng, pool.size() - i);
                std::swap(pool[i], pool[j]);
            }
            pool.resize(keep);
            std::sort(pool.begin(), pool.end());
            col_subset = pool;
        } else {
            col_subset.resize(columns.size());
            std::iota(col_subset.begin(), col_subset.end(), 0);
        }

        double shrinkage = cfg.rf_bagging ? 1.0 : cfg.learning_rate;
        TreeOutput to = build_tree(columns, col_subset, row_index, gsel, hsel, row_weight,
                                   row_count, cfg, shrinkage, m, model.column_gain, n_threads);

        if (cfg.rf_bagging) {
            to.tree.weight = 1.0 / static_cast<double>(cfg.n_estimators);
            model.trees.push_back(std::move(to.tree));
            for (size_t i = 0; i < m; ++i)
                ensemble_raw[i] += model.trees.back().weight * to.row_values[i];
        } else if (is_dart) {
            size_t k = dropped.size();
            double new_weight = k == 0 ? 1.0 : 1.0 / static_cast<double>(k + 1);
            double scale_dropped = k == 0 ? 1.0 : static_cast<double>(k) / static_cast<double>(k + 1);
            for (int d : dropped) model.trees[d].weight *= scale_dropped;
            to.tree.weight = new_weight;
            model.trees.push_back(std::move(to.tree));
            contributions.push_back(std::move(to.row_values));
            // Weights changed; rebuild the ensemble view.
            ensemble_raw.assign(m, model.base_score);
            for (size_t ti = 0; ti < model.trees.size(); ++ti)
                for (size_t i = 0; i < m; ++i)
                    ensemble_raw[i] += model.trees[ti].weight * contributions[ti][i];
        } else {
            to.tree.weight = 1.0;
            model.trees.push_back(std::move(to.tree));
            for (size_t i = 0; i < m; ++i) ensemble_raw[i] += to.row_values[i];
        }

        model.train_loss.push_back(objective_loss(cfg.objective, ensemble_raw, target));
    }

    model.train_predictions = model.predict(X);
    return model;
}

std::vector<double> FittedModel::predict(const FeatureMatrix& X,
                                         std::vector<std::string>* warnings) const {
    const size_t m = X.rows();

    // Assemble per-schema-column values; missing training columns become
    // all-null, unknown matrix columns are ignored.
    std::vector<std::vector<double>> values(schema.size());
    std::vector<bool> matched(X.columns.size(), false);
    for (size_t s = 0; s < schema.size(); ++s) {
        values[s].assign(m, std::numeric_limits<double>::quiet_NaN());
        const FeatureColumn* col = nullptr;
        for (size_t c = 0; c < X.columns.size(); ++c)
            if (X.columns[c].name == schema[s].name) {
                col = &X.columns[c];
                matched[c] = true;
                break;
            }
        if (!col) {
            if (warnings)
                warnings->push_back("column '" + schema[s].name + "' absent; treated as null");
            continue;
        }
        if (schema[s].categorical) {
            std::unordered_map<std::string, int> codes;
            for (size_t k = 0; k < schema[s].categories.size(); ++k)
                codes.emplace(schema[s].categories[k], static_cast<int>(k));
            for (size_t i = 0; i < m; ++i) {
                if (col->null_mask[i]) continue;
                std::string level = col->text ? col->values[i] : render_numeric(col->numeric[i]);
                auto it = codes.find(level);
                if (it != codes.end()) values[s][i] = static_cast<double>(it->second);
                // unseen level stays null and follows the default direction
            }
        } else {
            if (col->text)
                raise(ErrorKind::SchemaMismatch,
                      "column '" + schema[s].name + "' was numeric in training but is text");
            for (size_t i = 0; i < m; ++i)
                if (!col->null_mask[i]) values[s][i] = col->numeric[i];
        }
    }
    if (warnings)
        for (size_t c = 0; c < X.columns.size(); ++c)
            if (!matched[c])
                warnings->push_back("unknown column '" + X.columns[c].name + "' ignored");

    std::vector<double> out(m, 0.0);
    for (size_t i = 0; i < m; ++i) {
        double raw = base_score;
        for (const auto& tree : trees) {
            int node = 0;
            while (tree.nodes[node].feature >= 0) {
                const TreeNode& nd = tree.nodes[node];
                double v = values[static_cast<size_t>(nd.feature)][i];
                bool go_left = std::isnan(v) ? nd.default_left : v <= nd.threshold;
                node = go_left ? nd.left : nd.right;
            }
            raw += tree.weight * tree.nodes[node].leaf_value;
        }
        if (objective == Objective::binary_logistic)
            out[i] = sigmoid(raw);
        else
            out[i] = log_transform ? std::expm1(raw) : raw;
    }
    return out;
}

std::map<std::string, double> FittedModel::feature_importance() const {
    std::map<std::string, double> imp;
    double total = 0.0;
    for (double g : column_gain) total += g;
    for (size_t i = 0; i < schema.size(); ++i)
        imp[schema[i].name] = total > 0 ? column_gain[i] / total : 0.0;
    return imp;
}

std::string FittedModel::to_json() const {
    json j;
    j["objective"] = std::string(relsearch::to_string(objective));
    j["base_score"] = base_score;
    j["log_transform"] = log_transform;
    j["schema"] = json::array();
    for (const auto& s : schema)
        j["schema"].push_back(
            {{"name", s.name}, {"categorical", s.categorical}, {"categories", s.categories}});
    j["trees"] = json::array();
    for (const auto& t : trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes)
            nodes.push_back(json::array(
                {n.feature, n.threshold, n.default_left, n.left, n.right, n.leaf_value}));
        j["trees"].push_back({{"weight", t.weight}, {"nodes", nodes}});
    }
    j["column_gain"] = column_gain;
    j["config"] = json::parse(config.to_json());
    return j.dump();
}

FittedModel FittedModel::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::JsonError, std::string("model document: ") + e.what());
    }
    FittedModel model;
    std::string obj = j.value("objective", "regression_l2");
    for (Objective o :
         {Objective::binary_logistic, Objective::regression_l1, Objective::regression_l2})
        if (obj == relsearch::to_string(o)) model.objective = o;
    model.base_score = j.value("base_score", 0.0);
    model.log_transform = j.value("log_transform", false);
    for (const auto& s : j.value("schema", json::array())) {
        ColumnSchema cs;
        cs.name = s.value("name", "");
        cs.categorical = s.value("categorical", false);
        for (const auto& c : s.value("categories", json::array()))
            cs.categories.push_back(c.get<std::string>());
        model.schema.push_back(std::move(cs));
    }
    for (const auto& t : j.value("trees", json::array())) {
        Tree tree;
        tree.weight = t.value("weight", 1.0);
        for (const auto& n : t.value("nodes", json::array())) {
            TreeNode node;
            node.feature = n[0].get<int>();
            node.threshold = n[1].get<double>();
            node.default_left = n[2].get<bool>();
            node.left = n[3].get<int>();
            node.right = n[4].get<int>();
            node.leaf_value = n[5].get<double>();
            tree.nodes.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    for (const auto& g : j.value("column_gain", json::array()))
        model.column_gain.push_back(g.get<double>());
    if (model.column_gain.size() != model.schema.size())
        model.column_gain.assign(model.schema.size(), 0.0);
    return model;
}

}  // namespace relsearch
