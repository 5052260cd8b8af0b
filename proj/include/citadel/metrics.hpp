#pragma once

#include "citadel/types.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace citadel {

/// Average precision: descending score, ties by ascending index, no interpolation.
template <typename DerivedS, typename DerivedL>
double pr_auc(const Eigen::MatrixBase<DerivedS>& scores, const Eigen::MatrixBase<DerivedL>& labels) {
    const Index n = scores.size();
    if (labels.size() != n) throw std::invalid_argument("pr_auc: score and label counts differ");
    Index positives = 0;
    for (Index i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("pr_auc: labels must be 0 or 1");
        positives += labels[i] == 1;
    }
    if (positives == 0 || positives == n) throw std::invalid_argument("pr_auc: need both positive and negative labels");

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
    double ap = 0.0;
    Index hits = 0;
    for (Index k = 0; k < n; ++k) {
        if (labels[order[static_cast<std::size_t>(k)]] != 1) continue;
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    return ap / static_cast<double>(positives);
}

/// c x c grid of PR-AUC; R(i,j) scores task j after training through task i. NaN marks an empty cell.
using ResultMatrix = MatrixXd;

ResultMatrix empty_result_matrix(Index tasks);

/// Mean of the lower triangle including the diagonal.
double ll_pr_auc(const ResultMatrix& r);
/// Mean over i > j of R(i,j) - R(j,j).
double bwt(const ResultMatrix& r);
/// Mean of the strict upper triangle.
double fwt(const ResultMatrix& r);

struct LifelongMetrics {
    double ll_pr_auc = 0.0;
    double bwt = 0.0;
    double fwt = 0.0;
    Index tasks = 0;
};

LifelongMetrics lifelong_metrics(const ResultMatrix& r);

void write_result_matrix(const std::filesystem::path& path, const ResultMatrix& r);
ResultMatrix read_result_matrix(const std::filesystem::path& path);
void write_metrics_json(const std::filesystem::path& path, const LifelongMetrics& m);

}  // namespace citadel
