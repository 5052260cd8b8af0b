#pragma once

#include "citadel/data.hpp"
#include "citadel/kmeans.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace citadel {

/// Disjoint concept clusters of the normal and anomaly populations.
/// Cluster members are row indices into the source datasets.
struct ConceptSet {
    std::vector<std::vector<Index>> normal_clusters;
    std::vector<std::vector<Index>> anomaly_clusters;
    RowMatrixXd normal_centroids;
    RowMatrixXd anomaly_centroids;

    Index size() const { return static_cast<Index>(normal_clusters.size()); }
};

struct MatchedPair {
    Index normal_cluster = 0;
    Index anomaly_cluster = 0;
    friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

/// Row indices of the four partitions of one task, relative to the source sets.
struct Task {
    Index index = 0;
    std::vector<Index> normal_train;
    std::vector<Index> normal_test;
    std::vector<Index> anomaly_train;
    std::vector<Index> anomaly_test;
};

ConceptSet cluster_concepts(const TabularDataset& normals, const TabularDataset& anomalies, Index concepts, Seed seed,
                            const KMeansParams& params = {});

/// Greedy matching: normal concept i (in order) takes the nearest remaining
/// anomaly centroid; ties go to the lower anomaly index.
std::vector<MatchedPair> match_centroids(const RowMatrixXd& normal_centroids, const RowMatrixXd& anomaly_centroids);
std::vector<MatchedPair> match_concepts(const ConceptSet& cs);

/// Shuffle each side, send ceil(fraction * n) to training, and keep at least one test row.
void split_rows(std::span<const Index> rows, double train_fraction, Seed seed, std::vector<Index>& train,
                std::vector<Index>& test);

Task split_task(const ConceptSet& cs, const MatchedPair& pair, double train_fraction, Seed seed, Index task_index);

/// JSON manifest: per task the row indices of its four partitions.
void write_task_manifest(const std::filesystem::path& path, std::span<const Task> tasks);

}  // namespace citadel
