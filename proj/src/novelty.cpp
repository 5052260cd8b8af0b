#include "citadel/novelty.hpp"

#include "citadel/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace citadel {

std::vector<std::pair<double, Index>> nearest_neighbors(const RowMatrixXd& reference, const VectorXd& query,
                                                        Index k, Index exclude) {
    std::vector<std::pair<double, Index>> all;
    all.reserve(static_cast<std::size_t>(reference.rows()));
    for (Index i = 0; i < reference.rows(); ++i) {
        if (i == exclude) continue;
        const double d = (reference.row(i).transpose() - query).norm();
        all.emplace_back(std::max(d, LofModel::kDistanceFloor), i);
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kk), all.end());
    all.resize(kk);
    return all;
}

LofModel fit_lof(const RowMatrixXd& latents, Index n_neighbors, double threshold) {
    if (n_neighbors < 1) throw std::invalid_argument("fit_lof: n_neighbors must be >= 1");
    if (latents.rows() <= n_neighbors)
        throw std::invalid_argument("fit_lof: need more than " + std::to_string(n_neighbors) + " reference samples, got " +
                                    std::to_string(latents.rows()));
    if (!latents.allFinite()) throw std::invalid_argument("fit_lof: non-finite latent");

    LofModel model;
    model.reference = latents;
    model.n_neighbors = n_neighbors;
    model.threshold = threshold;
    const Index n = latents.rows();

    std::vector<std::vector<std::pair<double, Index>>> neighbors(static_cast<std::size_t>(n));
    model.k_distance.resize(n);
    for (Index i = 0; i < n; ++i) {
        neighbors[static_cast<std::size_t>(i)] = nearest_neighbors(latents, latents.row(i).transpose(), n_neighbors, i);
        model.k_distance[i] = neighbors[static_cast<std::size_t>(i)].back().first;
    }
    model.lrd.resize(n);
    for (Index i = 0; i < n; ++i) {
        double reach = 0.0;
        for (const auto& [d, o] : neighbors[static_cast<std::size_t>(i)]) reach += std::max(model.k_distance[o], d);
        model.lrd[i] = static_cast<double>(n_neighbors) / reach;
    }
    return model;
}

double score(const LofModel& model, const VectorXd& x) {
    if (x.size() != model.reference.cols())
        throw std::invalid_argument("lof score: query dimension " + std::to_string(x.size()) + " != " +
                                    std::to_string(model.reference.cols()));
    const auto nn = nearest_neighbors(model.reference, x, model.n_neighbors);
    double reach = 0.0;
    double neighbor_lrd = 0.0;
    for (const auto& [d, o] : nn) {
        reach += std::max(model.k_distance[o], d);
        neighbor_lrd += model.lrd[o];
    }
    const auto k = static_cast<double>(nn.size());
    const double lrd_x = k / reach;
    return (neighbor_lrd / k) / lrd_x;
}

VectorXd score_all(const LofModel& model, const RowMatrixXd& xs) {
    VectorXd out(xs.rows());
    for (Index i = 0; i < xs.rows(); ++i) out[i] = score(model, xs.row(i).transpose());
    return out;
}

int classify(const LofModel& model, const VectorXd& x) { return score(model, x) > model.threshold ? 1 : 0; }

void write_scores_csv(const std::filesystem::path& path, const VectorXd& scores, const VectorXi& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_scores_csv: cannot open " + path.string());
    out << "index,score,label\n";
    for (Index i = 0; i < scores.size(); ++i) out << i << ',' << format_double(scores[i]) << ',' << labels[i] << '\n';
}

}  // namespace citadel
