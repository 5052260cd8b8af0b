#pragma once

#include "citadel/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace citadel {

/// Novelty-mode Local Outlier Factor: queries are scored against a fixed
/// benign reference set and never join its neighbourhood graph.
struct LofModel {
    RowMatrixXd reference;
    Index n_neighbors = 20;
    double threshold = 1.5;
    VectorXd k_distance;  ///< distance from each reference point to its k-th neighbour
    VectorXd lrd;         ///< local reachability density of each reference point

    /// Distances below this are treated as this value so duplicates keep densities finite.
    static constexpr double kDistanceFloor = 1e-12;
};

/// k nearest reference rows of `query` by Euclidean distance, ties by ascending
/// index. `exclude` drops one reference row (used when the query is that row).
std::vector<std::pair<double, Index>> nearest_neighbors(const RowMatrixXd& reference, const VectorXd& query,
                                                        Index k, Index exclude = -1);

LofModel fit_lof(const RowMatrixXd& latents, Index n_neighbors = 20, double threshold = 1.5);

/// LOF(x) = mean lrd of x's k nearest reference points / lrd(x). Higher is more anomalous.
double score(const LofModel& model, const VectorXd& x);
VectorXd score_all(const LofModel& model, const RowMatrixXd& xs);

int classify(const LofModel& model, const VectorXd& x);

/// CSV with columns index,score,label.
void write_scores_csv(const std::filesystem::path& path, const VectorXd& scores, const VectorXi& labels);

}  // namespace citadel
