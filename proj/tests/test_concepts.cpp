#include "citadel/concepts.hpp"

#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

using namespace citadel;

namespace {

TabularDataset blobs(std::mt19937_64& rng, const std::vector<Eigen::RowVector2d>& centres, Index per_blob, int label,
                     std::vector<Index>* truth = nullptr) {
    std::normal_distribution<double> g(0.0, 1.0);
    TabularDataset ds;
    ds.samples.resize(static_cast<Index>(centres.size()) * per_blob, 2);
    for (std::size_t b = 0; b < centres.size(); ++b)
        for (Index i = 0; i < per_blob; ++i) {
            const Index row = static_cast<Index>(b) * per_blob + i;
            ds.samples.row(row) << centres[b](0) + g(rng), centres[b](1) + g(rng);
            if (truth) truth->push_back(static_cast<Index>(b));
        }
    ds.labels = VectorXi::Constant(ds.samples.rows(), label);
    ds.feature_names = {"x", "y"};
    return ds;
}

}  // namespace

TEST_CASE("well separated blobs are recovered exactly") {
    std::mt19937_64 rng(1);
    std::vector<Index> truth;
    const auto normals = blobs(rng, {{0, 0}, {20, 0}}, 60, 0, &truth);
    const auto anomalies = blobs(rng, {{0, 30}, {20, 30}}, 20, 1);
    const auto cs = cluster_concepts(normals, anomalies, 2, 9);
    REQUIRE(cs.size() == 2);
    for (const auto& cluster : cs.normal_clusters) {
        std::set<Index> labels;
        for (Index r : cluster) labels.insert(truth[static_cast<std::size_t>(r)]);
        CHECK(labels.size() == 1);
        CHECK(cluster.size() == 60);
    }
    const auto again = cluster_concepts(normals, anomalies, 2, 9);
    CHECK(again.normal_clusters == cs.normal_clusters);
    CHECK(again.anomaly_clusters == cs.anomaly_clusters);
}

TEST_CASE("one concept is the whole set with the sample mean") {
    std::mt19937_64 rng(2);
    const auto normals = blobs(rng, {{1, 2}}, 30, 0);
    const auto anomalies = blobs(rng, {{5, 5}}, 10, 1);
    const auto cs = cluster_concepts(normals, anomalies, 1, 3);
    CHECK(cs.normal_clusters.front().size() == 30);
    CHECK((cs.normal_centroids.row(0) - normals.samples.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(match_concepts(cs) == std::vector<MatchedPair>{{0, 0}});
    CHECK_THROWS(cluster_concepts(normals, anomalies, 11, 3));
}

TEST_CASE("match fixture") {
    const RowMatrixXd normal{{0, 0}, {10, 10}};
    const RowMatrixXd anomaly{{9, 9}, {1, 1}};
    CHECK(match_centroids(normal, anomaly) == std::vector<MatchedPair>{{0, 1}, {1, 0}});
    CHECK_THROWS(match_centroids(normal, RowMatrixXd::Zero(3, 2)));
}

TEST_CASE("greedy matching replays as a bijection") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        RowMatrixXd n(5, 3), a(5, 3);
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 3; ++j) n(i, j) = u(rng), a(i, j) = u(rng);
        const auto pairs = match_centroids(n, a);
        REQUIRE(pairs.size() == 5);
        std::set<Index> taken;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            CHECK(pairs[i].normal_cluster == static_cast<Index>(i));
            double best = std::numeric_limits<double>::infinity();
            Index arg = -1;
            for (Index j = 0; j < 5; ++j) {
                if (taken.count(j)) continue;
                const double d = (n.row(static_cast<Index>(i)) - a.row(j)).norm();
                if (d < best) best = d, arg = j;
            }
            CHECK(pairs[i].anomaly_cluster == arg);
            taken.insert(arg);
        }
        CHECK(taken.size() == 5);
    }
}

TEST_CASE("split sizes and partition") {
    std::vector<Index> rows(10), train, test;
    std::iota(rows.begin(), rows.end(), Index{100});
    split_rows(rows, 0.7, 5, train, test);
    CHECK(train.size() == 7);
    CHECK(test.size() == 3);
    std::set<Index> all(train.begin(), train.end());
    all.insert(test.begin(), test.end());
    CHECK(all == std::set<Index>(rows.begin(), rows.end()));

    std::vector<Index> t2, s2;
    split_rows(rows, 0.7, 5, t2, s2);
    CHECK(t2 == train);
    CHECK(s2 == test);

    const std::vector<Index> three{0, 1, 2};
    split_rows(three, 0.7, 1, train, test);
    CHECK(train.size() == 2);
    CHECK(test.size() == 1);
    CHECK_THROWS(split_rows(std::vector<Index>{4}, 0.7, 1, train, test));
    CHECK_THROWS(split_rows(three, 1.0, 1, train, test));
}

TEST_CASE("split_task covers both sides of the matched pair") {
    std::mt19937_64 rng(4);
    const auto normals = blobs(rng, {{0, 0}, {20, 0}}, 40, 0);
    const auto anomalies = blobs(rng, {{0, 30}, {20, 30}}, 12, 1);
    const auto cs = cluster_concepts(normals, anomalies, 2, 1);
    const auto pairs = match_concepts(cs);
    const auto task = split_task(cs, pairs[1], 0.7, 8, 1);
    CHECK(task.index == 1);
    const auto& nc = cs.normal_clusters[static_cast<std::size_t>(pairs[1].normal_cluster)];
    const auto& ac = cs.anomaly_clusters[static_cast<std::size_t>(pairs[1].anomaly_cluster)];
    CHECK(task.normal_train.size() + task.normal_test.size() == nc.size());
    CHECK(task.anomaly_train.size() + task.anomaly_test.size() == ac.size());
    CHECK(task.normal_train.size() == static_cast<std::size_t>(std::ceil(0.7 * static_cast<double>(nc.size()))));
    std::set<Index> merged(task.anomaly_train.begin(), task.anomaly_train.end());
    merged.insert(task.anomaly_test.begin(), task.anomaly_test.end());
    CHECK(merged == std::set<Index>(ac.begin(), ac.end()));
}
