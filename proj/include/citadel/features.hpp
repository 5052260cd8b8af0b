#pragma once

#include "citadel/data.hpp"

#include <filesystem>
#include <vector>

namespace citadel {

/// Principal components of the sample covariance, one loading row per component.
struct PcaModel {
    MatrixXd components;                ///< M x d, rows orthonormal
    VectorXd explained_variance_ratio;  ///< M entries, non-increasing
    VectorXd mean;                      ///< d
    VectorXd all_eigenvalues;           ///< d eigenvalues, descending
};

struct FeatureRanking {
    VectorXd scores;           ///< sum of |loading| over the retained components
    std::vector<Index> order;  ///< feature indices, descending score, ties by index
};

/// Full covariance eigendecomposition (divisor n-1). Components are sign-canonical:
/// the largest-magnitude entry of each row is positive.
PcaModel fit_pca(const RowMatrixXd& samples);

/// Keep the fewest components whose cumulative explained variance reaches
/// `variance_threshold` and score every feature by its summed absolute loadings.
std::pair<PcaModel, FeatureRanking> rank_features(const TabularDataset& train_normals,
                                                  double variance_threshold = 0.95);

TabularDataset select_top_k(const TabularDataset& ds, const FeatureRanking& ranking, Index k);

std::vector<Index> top_k_indices(const FeatureRanking& ranking, Index k);

/// CSV with columns feature_name,score,rank (rank is 1-based).
void write_ranking_csv(const std::filesystem::path& path, const FeatureRanking& ranking,
                       const std::vector<std::string>& feature_names);

}  // namespace citadel
