#pragma once

#include <map>
#include <string>
#include <vector>

namespace relsearch {

struct MetricBundle {
    bool classification = true;
    double auroc = 0.0;
    double f1_at_half = 0.0;
    double accuracy_at_half = 0.0;
    double mae = 0.0;
    double oriented_score = 0.0;  // higher is better: auroc, or -mae

    std::string metrics_json() const;
};

/// Mann-Whitney AUROC: fraction of (positive, negative) pairs ranked
/// correctly, ties counted as half. Rank-sum implementation, O(n log n).
double auroc(const std::vector<double>& scores, const std::vector<double>& labels);

double mae(const std::vector<double>& predictions, const std::vector<double>& labels);

MetricBundle binary_bundle(const std::vector<double>& scores, const std::vector<double>& labels);
MetricBundle regression_bundle(const std::vector<double>& predictions,
                               const std::vector<double>& labels);

/// Mean over tasks of score/baseline (normalized average).
double normalized_average(const std::map<std::string, double>& task_scores,
                          const std::map<std::string, double>& baseline_scores);

}  // namespace relsearch
