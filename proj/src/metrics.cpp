#include "cilf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cilf {

std::vector<int> hungarian_max_assignment(const DenseMatrix& weights) {
    const std::size_t n = std::max(weights.rows, weights.cols);
    if (n == 0) return {};
    double top = 0.0;
    for (double w : weights.data) top = std::max(top, w);
    // Pad to square and minimize top - w.
    auto cost = [&](std::size_t r, std::size_t c) {
        if (r < weights.rows && c < weights.cols) return top - weights(r, c);
        return top;
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0);  // column -> row (1-based)
    std::vector<std::size_t> way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            std::size_t j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(weights.rows, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t i = match[j];
        if (i >= 1 && i <= weights.rows && j <= weights.cols) {
            row_to_col[i - 1] = static_cast<int>(j - 1);
        }
    }
    return row_to_col;
}

std::map<int, int> optimal_cluster_mapping(const std::vector<int>& predictions,
                                           const std::vector<int>& truth,
                                           const std::set<int>& known) {
    if (predictions.size() != truth.size()) {
        throw ShapeError("optimal_cluster_mapping: length mismatch");
    }
    std::vector<int> clusters;
    std::vector<int> novel_classes;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!known.count(predictions[i]) &&
            std::find(clusters.begin(), clusters.end(), predictions[i]) == clusters.end()) {
            clusters.push_back(predictions[i]);
        }
        if (!known.count(truth[i]) &&
            std::find(novel_classes.begin(), novel_classes.end(), truth[i]) ==
                novel_classes.end()) {
            novel_classes.push_back(truth[i]);
        }
    }
    std::sort(clusters.begin(), clusters.end());
    std::sort(novel_classes.begin(), novel_classes.end());
    if (clusters.empty() || novel_classes.empty()) return {};

    DenseMatrix agreement(clusters.size(), novel_classes.size(), 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto r = std::find(clusters.begin(), clusters.end(), predictions[i]);
        const auto c = std::find(novel_classes.begin(), novel_classes.end(), truth[i]);
        if (r != clusters.end() && c != novel_classes.end()) {
            agreement(static_cast<std::size_t>(r - clusters.begin()),
                      static_cast<std::size_t>(c - novel_classes.begin())) += 1.0;
        }
    }
    const std::vector<int> row_to_col = hungarian_max_assignment(agreement);
    std::map<int, int> mapping;
    for (std::size_t r = 0; r < clusters.size(); ++r) {
        if (row_to_col[r] >= 0) {
            mapping[clusters[r]] = novel_classes[static_cast<std::size_t>(row_to_col[r])];
        }
    }
    return mapping;
}

std::vector<int> apply_mapping(const std::vector<int>& predictions,
                               const std::map<int, int>& mapping) {
    std::vector<int> out = predictions;
    for (int& p : out) {
        const auto it = mapping.find(p);
        if (it != mapping.end()) p = it->second;
    }
    return out;
}

double normalized_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth,
                           const std::set<int>& known, double lambda_r) {
    if (predictions.size() != truth.size()) {
        throw ShapeError("normalized_accuracy: length mismatch");
    }
    if (predictions.empty()) throw UsageError("normalized_accuracy: empty input");
    if (lambda_r < 0.0 || lambda_r > 1.0) {
        throw ConfigError("normalized_accuracy: lambda_r must be in [0,1]");
    }
    const std::map<int, int> mapping = optimal_cluster_mapping(predictions, truth, known);

    std::size_t known_n = 0;
    std::size_t known_hit = 0;
    std::size_t novel_n = 0;
    std::size_t novel_hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (known.count(truth[i])) {
            ++known_n;
            if (predictions[i] == truth[i]) ++known_hit;
        } else {
            ++novel_n;
            const auto it = mapping.find(predictions[i]);
            if (it != mapping.end() && it->second == truth[i]) ++novel_hit;
        }
    }
    const double aks = known_n ? static_cast<double>(known_hit) / static_cast<double>(known_n)
                               : 0.0;
    const double aus = novel_n ? static_cast<double>(novel_hit) / static_cast<double>(novel_n)
                               : 0.0;
    if (known_n == 0) return aus;
    if (novel_n == 0) return aks;
    return lambda_r * aks + (1.0 - lambda_r) * aus;
}

namespace {

struct F1Counts {
    std::map<int, std::size_t> tp;
    std::map<int, std::size_t> fp;
    std::map<int, std::size_t> fn;
    std::set<int> classes;
};

F1Counts count_f1(const std::vector<int>& predictions, const std::vector<int>& truth) {
    if (predictions.size() != truth.size()) throw ShapeError("f-measure: length mismatch");
    if (predictions.empty()) throw UsageError("f-measure: empty input");
    F1Counts counts;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        counts.classes.insert(truth[i]);
        counts.classes.insert(predictions[i]);
        if (predictions[i] == truth[i]) {
            ++counts.tp[truth[i]];
        } else {
            ++counts.fp[predictions[i]];
            ++counts.fn[truth[i]];
        }
    }
    return counts;
}

}  // namespace

double macro_f(const std::vector<int>& predictions, const std::vector<int>& truth) {
    const F1Counts counts = count_f1(predictions, truth);
    double sum = 0.0;
    for (int c : counts.classes) {
        const double tp = counts.tp.count(c) ? static_cast<double>(counts.tp.at(c)) : 0.0;
        const double fp = counts.fp.count(c) ? static_cast<double>(counts.fp.at(c)) : 0.0;
        const double fn = counts.fn.count(c) ? static_cast<double>(counts.fn.at(c)) : 0.0;
        const double denom = 2.0 * tp + fp + fn;
        sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
    }
    return sum / static_cast<double>(counts.classes.size());
}

double micro_f(const std::vector<int>& predictions, const std::vector<int>& truth) {
    const F1Counts counts = count_f1(predictions, truth);
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    for (int c : counts.classes) {
        tp += counts.tp.count(c) ? static_cast<double>(counts.tp.at(c)) : 0.0;
        fp += counts.fp.count(c) ? static_cast<double>(counts.fp.at(c)) : 0.0;
        fn += counts.fn.count(c) ? static_cast<double>(counts.fn.at(c)) : 0.0;
    }
    const double denom = 2.0 * tp + fp + fn;
    return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

double auroc(const std::vector<double>& novelty_scores, const std::vector<bool>& is_novel) {
    if (novelty_scores.size() != is_novel.size()) throw ShapeError("auroc: length mismatch");
    std::size_t n_novel = 0;
    for (bool f : is_novel) n_novel += f ? 1 : 0;
    const std::size_t n_known = is_novel.size() - n_novel;
    if (n_novel == 0 || n_known == 0) {
        throw UsageError("auroc: undefined, both classes must be present");
    }

    // Rank-sum with average ranks on ties.
    std::vector<std::size_t> order(novelty_scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return novelty_scores[a] < novelty_scores[b];
    });
    double novel_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() &&
               novelty_scores[order[j + 1]] == novelty_scores[order[i]]) {
            ++j;
        }
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (std::size_t k = i; k <= j; ++k) {
            if (is_novel[order[k]]) novel_rank_sum += avg_rank;
        }
        i = j + 1;
    }
    const double n1 = static_cast<double>(n_novel);
    return (novel_rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * static_cast<double>(n_known));
}

ForgettingResult forgetting(const std::vector<std::vector<double>>& acc_rows, double a_star) {
    if (!(a_star > 0.0) || a_star > 1.0) {
        throw UsageError("forgetting: A* must be in (0,1]");
    }
    if (acc_rows.empty()) throw UsageError("forgetting: empty accuracy ledger");
    ForgettingResult result;
    for (const auto& row : acc_rows) {
        if (row.empty()) throw UsageError("forgetting: empty ledger row");
        double sum = 0.0;
        for (double a : row) {
            if (a < 0.0 || a > 1.0) throw UsageError("forgetting: accuracy outside [0,1]");
            sum += a;
        }
        result.average_accuracy.push_back(sum / static_cast<double>(row.size()));
    }
    const double mean_a =
        std::accumulate(result.average_accuracy.begin(), result.average_accuracy.end(), 0.0) /
        static_cast<double>(result.average_accuracy.size());
    result.forgetting = (a_star - mean_a) / a_star;
    return result;
}

}  // namespace cilf
