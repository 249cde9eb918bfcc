#pragma once

#include <map>
#include <set>
#include <vector>

#include "cilf/matrix.hpp"

namespace cilf {

// Max-weight one-to-one assignment (Hungarian); returns the column matched to
// each row, -1 when the row stays unmatched (more rows than columns).
std::vector<int> hungarian_max_assignment(const DenseMatrix& weights);

// Optimal one-to-one mapping of provisional cluster ids (predictions outside
// the known set) onto the truly-novel class ids, maximizing agreement.
std::map<int, int> optimal_cluster_mapping(const std::vector<int>& predictions,
                                           const std::vector<int>& truth,
                                           const std::set<int>& known);

std::vector<int> apply_mapping(const std::vector<int>& predictions,
                               const std::map<int, int>& mapping);

// NA = lambda_r * accuracy-on-known + (1 - lambda_r) * accuracy-on-novel,
// where a novel instance counts as correct when its predicted cluster maps to
// its true class under the optimal assignment. A side with no instances drops
// out and the other is reweighted to 1.
double normalized_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth,
                           const std::set<int>& known, double lambda_r = 0.5);

// Standard per-class F1 over the union of classes seen in truth or
// predictions; cluster ids must be mapped to truth ids beforehand.
double macro_f(const std::vector<int>& predictions, const std::vector<int>& truth);
double micro_f(const std::vector<int>& predictions, const std::vector<int>& truth);

// Mann-Whitney AUROC of novelty scores; ties count one half.
double auroc(const std::vector<double>& novelty_scores, const std::vector<bool>& is_novel);

struct ForgettingResult {
    std::vector<double> average_accuracy;  // A_m per measurement point
    double forgetting = 0.0;               // (A* - mean(A)) / A*
};

// acc_rows[m] holds the holdout accuracies of every class group introduced at
// or before measurement point m.
ForgettingResult forgetting(const std::vector<std::vector<double>>& acc_rows, double a_star);

}  // namespace cilf
