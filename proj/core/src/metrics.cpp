#include "relsearch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "relsearch/error.hpp"

namespace relsearch {

double auroc(const std::vector<double>& scores, const std::vector<double>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        raise(ErrorKind::EmptyInput, "auroc needs equal nonzero score/label lengths");

    const size_t n = scores.size();
    size_t n_pos = 0;
    for (double y : labels) n_pos += y > 0.5 ? 1 : 0;
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        raise(ErrorKind::SingleClass, "auroc requires both classes present");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Average ranks within tied score groups, then sum positive ranks.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]] > 0.5) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double mae(const std::vector<double>& predictions, const std::vector<double>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        raise(ErrorKind::EmptyInput, "mae needs equal nonzero prediction/label lengths");
    double total = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) total += std::fabs(predictions[i] - labels[i]);
    return total / static_cast<double>(predictions.size());
}

MetricBundle binary_bundle(const std::vector<double>& scores, const std::vector<double>& labels) {
    MetricBundle b;
    b.classification = true;
    b.auroc = auroc(scores, labels);
    size_t tp = 0, fp = 0, fn = 0, correct = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= 0.5;
        bool pos = labels[i] > 0.5;
        if (pred && pos) ++tp;
        if (pred && !pos) ++fp;
        if (!pred && pos) ++fn;
        if (pred == pos) ++correct;
    }
    b.f1_at_half = (2 * tp + fp + fn) == 0
                       ? 0.0
                       : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    b.accuracy_at_half = static_cast<double>(correct) / static_cast<double>(scores.size());
    b.oriented_score = b.auroc;
    return b;
}

MetricBundle regression_bundle(const std::vector<double>& predictions,
                               const std::vector<double>& labels) {
    MetricBundle b;
    b.classification = false;
    b.mae = mae(predictions, labels);
    b.oriented_score = -b.mae;
    return b;
}

std::string MetricBundle::metrics_json() const {
    nlohmann::json j;
    if (classification) {
        j["auroc"] = auroc;
        j["f1_at_half"] = f1_at_half;
        j["accuracy_at_half"] = accuracy_at_half;
    } else {
        j["mae"] = mae;
    }
    j["oriented_score"] = oriented_score;
    return j.dump();
}

double normalized_average(const std::map<std::string, double>& task_scores,
                          const std::map<std::string, double>& baseline_scores) {
    if (task_scores.size() != baseline_scores.size())
        raise(ErrorKind::KeyMismatch, "task and baseline key sets differ");
    double total = 0.0;
    for (const auto& [task, score] : task_scores) {
        auto it = baseline_scores.find(task);
        if (it == baseline_scores.end())
            raise(ErrorKind::KeyMismatch, "baseline missing task '" + task + "'");
        if (it->second <= 0)
            raise(ErrorKind::NonpositiveBaseline, "baseline for '" + task + "' must be > 0");
        total += score / it->second;
    }
    if (task_scores.empty()) raise(ErrorKind::EmptyInput, "no tasks to average");
    return total / static_cast<double>(task_scores.size());
}

}  // namespace relsearch
