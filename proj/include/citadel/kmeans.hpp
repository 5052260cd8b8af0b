#pragma once

#include "citadel/types.hpp"

#include <vector>

namespace citadel {

struct KMeansParams {
    int restarts = 10;
    int max_iterations = 300;
    double relative_tolerance = 1e-6;
};

struct KMeansResult {
    RowMatrixXd centroids;       ///< c x d
    std::vector<Index> assignment;
    double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding. The best restart by (inertia,
/// restart index) wins. Empty clusters are refilled with the point of the
/// largest cluster farthest from its centroid. Clusters are relabelled by
/// descending size, ties by lexicographic centroid order.
KMeansResult kmeans(const RowMatrixXd& x, Index clusters, Seed seed, const KMeansParams& params = {});

}  // namespace citadel
