#include "citadel/concepts.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

namespace citadel {

namespace {

void cluster_side(const TabularDataset& ds, Index c, Seed seed, const KMeansParams& params,
                  std::vector<std::vector<Index>>& clusters, RowMatrixXd& centroids) {
    const auto km = kmeans(ds.samples, c, seed, params);
    clusters.assign(static_cast<std::size_t>(c), {});
    for (std::size_t i = 0; i < km.assignment.size(); ++i)
        clusters[static_cast<std::size_t>(km.assignment[i])].push_back(static_cast<Index>(i));
    centroids = km.centroids;
}

}  // namespace

ConceptSet cluster_concepts(const TabularDataset& normals, const TabularDataset& anomalies, Index concepts, Seed seed,
                            const KMeansParams& params) {
    if (concepts < 1) throw std::invalid_argument("cluster_concepts: need at least one concept");
    if (normals.rows() < concepts || anomalies.rows() < concepts)
        throw std::invalid_argument("cluster_concepts: each population needs at least " + std::to_string(concepts) +
                                    " samples");
    ConceptSet cs;
    cluster_side(normals, concepts, derive_seed(seed, "concepts/normal"), params, cs.normal_clusters,
                 cs.normal_centroids);
    cluster_side(anomalies, concepts, derive_seed(seed, "concepts/anomaly"), params, cs.anomaly_clusters,
                 cs.anomaly_centroids);
    return cs;
}

std::vector<MatchedPair> match_centroids(const RowMatrixXd& normal_centroids, const RowMatrixXd& anomaly_centroids) {
    const Index c = normal_centroids.rows();
    if (anomaly_centroids.rows() != c)
        throw std::invalid_argument("match_concepts: " + std::to_string(c) + " normal vs " +
                                    std::to_string(anomaly_centroids.rows()) + " anomaly concepts");
    std::vector<bool> taken(static_cast<std::size_t>(c), false);
    std::vector<MatchedPair> out;
    for (Index i = 0; i < c; ++i) {
        double best = std::numeric_limits<double>::infinity();
        Index arg = -1;
        for (Index j = 0; j < c; ++j) {
            if (taken[static_cast<std::size_t>(j)]) continue;
            const double d = (normal_centroids.row(i) - anomaly_centroids.row(j)).norm();
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        taken[static_cast<std::size_t>(arg)] = true;
        out.push_back(MatchedPair{i, arg});
    }
    return out;
}

std::vector<MatchedPair> match_concepts(const ConceptSet& cs) {
    if (cs.normal_clusters.size() != cs.anomaly_clusters.size())
        throw std::invalid_argument("match_concepts: concept counts differ");
    return match_centroids(cs.normal_centroids, cs.anomaly_centroids);
}

void split_rows(std::span<const Index> rows, double train_fraction, Seed seed, std::vector<Index>& train,
                std::vector<Index>& test) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_task: train fraction must be in (0,1)");
    if (rows.size() < 2) throw std::invalid_argument("split_task: a partition side has fewer than 2 samples");
    std::vector<Index> shuffled(rows.begin(), rows.end());
    std::mt19937_64 rng(seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto n = shuffled.size();
    auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
    if (n_train >= n) n_train = n - 1;
    train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
}

Task split_task(const ConceptSet& cs, const MatchedPair& pair, double train_fraction, Seed seed, Index task_index) {
    Task t;
    t.index = task_index;
    split_rows(cs.normal_clusters.at(static_cast<std::size_t>(pair.normal_cluster)), train_fraction,
               derive_seed(seed, "split/normal"), t.normal_train, t.normal_test);
    split_rows(cs.anomaly_clusters.at(static_cast<std::size_t>(pair.anomaly_cluster)), train_fraction,
               derive_seed(seed, "split/anomaly"), t.anomaly_train, t.anomaly_test);
    return t;
}

void write_task_manifest(const std::filesystem::path& path, std::span<const Task> tasks) {
    nlohmann::json j;
    j["version"] = 1;
    auto& arr = j["tasks"] = nlohmann::json::array();
    for (const auto& t : tasks)
        arr.push_back({{"task", t.index + 1},
                       {"normal_train", t.normal_train},
                       {"normal_test", t.normal_test},
                       {"anomaly_train", t.anomaly_train},
                       {"anomaly_test", t.anomaly_test}});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_task_manifest: cannot open " + path.string());
    out << j.dump(1) << '\n';
}

}  // namespace citadel
