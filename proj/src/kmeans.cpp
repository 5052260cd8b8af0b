#include "citadel/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace citadel {

namespace {

RowMatrixXd seed_plus_plus(const RowMatrixXd& x, Index c, std::mt19937_64& rng) {
    const Index n = x.rows();
    RowMatrixXd centroids(c, x.cols());
    std::uniform_int_distribution<Index> first(0, n - 1);
    centroids.row(0) = x.row(first(rng));
    VectorXd d2 = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Index j = 1; j < c; ++j) {
        const double total = d2.sum();
        Index pick = 0;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        centroids.row(j) = x.row(pick);
        d2 = d2.cwiseMin((x.rowwise() - centroids.row(j)).rowwise().squaredNorm());
    }
    return centroids;
}

double assign(const RowMatrixXd& x, const RowMatrixXd& centroids, std::vector<Index>& labels) {
    double inertia = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        Index arg = 0;
        for (Index j = 0; j < centroids.rows(); ++j) {
            const double d = (x.row(i) - centroids.row(j)).squaredNorm();
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        labels[static_cast<std::size_t>(i)] = arg;
        inertia += best;
    }
    return inertia;
}

// Recompute centroids; an empty cluster takes the farthest point of the largest one.
void update(const RowMatrixXd& x, RowMatrixXd& centroids, std::vector<Index>& labels) {
    const Index c = centroids.rows();
    for (;;) {
        std::vector<Index> counts(static_cast<std::size_t>(c), 0);
        for (Index l : labels) ++counts[static_cast<std::size_t>(l)];
        auto empty = std::find(counts.begin(), counts.end(), Index{0});
        if (empty == counts.end()) break;
        const auto largest = static_cast<Index>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        if (counts[static_cast<std::size_t>(largest)] < 2) break;
        Index far = -1;
        double far_d = -1.0;
        for (Index i = 0; i < x.rows(); ++i) {
            if (labels[static_cast<std::size_t>(i)] != largest) continue;
            const double d = (x.row(i) - centroids.row(largest)).squaredNorm();
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        labels[static_cast<std::size_t>(far)] = static_cast<Index>(empty - counts.begin());
    }
    centroids.setZero();
    VectorXd counts = VectorXd::Zero(c);
    for (Index i = 0; i < x.rows(); ++i) {
        centroids.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
        counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Index j = 0; j < c; ++j)
        if (counts[j] > 0) centroids.row(j) /= counts[j];
}

double inertia_of(const RowMatrixXd& x, const RowMatrixXd& centroids, const std::vector<Index>& labels) {
    double s = 0.0;
    for (Index i = 0; i < x.rows(); ++i) s += (x.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    return s;
}

}  // namespace

KMeansResult kmeans(const RowMatrixXd& x, Index clusters, Seed seed, const KMeansParams& params) {
    const Index n = x.rows();
    if (clusters < 1) throw std::invalid_argument("kmeans: need at least one cluster");
    if (n < clusters)
        throw std::invalid_argument("kmeans: " + std::to_string(n) + " samples for " + std::to_string(clusters) +
                                    " clusters");

    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, params.restarts); ++r) {
        RowMatrixXd centroids = seed_plus_plus(x, clusters, rng);
        std::vector<Index> labels(static_cast<std::size_t>(n), 0);
        double previous = assign(x, centroids, labels);
        for (int it = 0; it < params.max_iterations; ++it) {
            update(x, centroids, labels);
            const double current = assign(x, centroids, labels);
            const bool converged = previous - current <= params.relative_tolerance * std::max(previous, 1e-300);
            previous = current;
            if (converged) break;
        }
        update(x, centroids, labels);
        const double inertia = inertia_of(x, centroids, labels);
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.centroids = centroids;
            best.assignment = labels;
        }
    }

    // Canonical cluster order: descending size, then lexicographic centroid.
    std::vector<Index> sizes(static_cast<std::size_t>(clusters), 0);
    for (Index l : best.assignment) ++sizes[static_cast<std::size_t>(l)];
    std::vector<Index> order(static_cast<std::size_t>(clusters));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (sizes[static_cast<std::size_t>(a)] != sizes[static_cast<std::size_t>(b)])
            return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)];
        const auto ra = best.centroids.row(a);
        const auto rb = best.centroids.row(b);
        if (std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end())) return true;
        if (std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end())) return false;
        return a < b;
    });
    std::vector<Index> relabel(static_cast<std::size_t>(clusters));
    RowMatrixXd sorted(clusters, x.cols());
    for (Index j = 0; j < clusters; ++j) {
        relabel[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = j;
        sorted.row(j) = best.centroids.row(order[static_cast<std::size_t>(j)]);
    }
    for (auto& l : best.assignment) l = relabel[static_cast<std::size_t>(l)];
    best.centroids = std::move(sorted);
    return best;
}

}  // namespace citadel
