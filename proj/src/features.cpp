#include "citadel/features.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace citadel {

PcaModel fit_pca(const RowMatrixXd& samples) {
    const Index n = samples.rows();
    const Index d = samples.cols();
    if (n < 2) throw std::invalid_argument("pca: need at least 2 samples");

    PcaModel model;
    model.mean = samples.colwise().mean().transpose();
    const MatrixXd centered = samples.rowwise() - model.mean.transpose();
    const MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");

    // Eigen returns ascending eigenvalues; flip to descending.
    model.all_eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
    const double total = model.all_eigenvalues.sum();
    if (!(total > 0.0)) throw std::invalid_argument("pca: zero-variance dataset");

    model.components = eig.eigenvectors().rowwise().reverse().transpose();
    for (Index r = 0; r < d; ++r) {
        Index arg = 0;
        model.components.row(r).cwiseAbs().maxCoeff(&arg);
        if (model.components(r, arg) < 0.0) model.components.row(r) *= -1.0;
    }
    model.explained_variance_ratio = model.all_eigenvalues / total;
    return model;
}

std::pair<PcaModel, FeatureRanking> rank_features(const TabularDataset& train_normals, double variance_threshold) {
    if (!(variance_threshold > 0.0 && variance_threshold <= 1.0))
        throw std::invalid_argument("rank_features: variance threshold must be in (0,1]");
    for (Index i = 0; i < train_normals.labels.size(); ++i)
        if (train_normals.labels[i] != 0) throw std::invalid_argument("rank_features: training rows must be normal");

    PcaModel full = fit_pca(train_normals.samples);
    const Index d = full.components.cols();

    Index m = 0;
    double cumulative = 0.0;
    while (m < d) {
        cumulative += full.explained_variance_ratio[m++];
        // Tolerate round-off so a threshold of 1.0 does not spill past the rank.
        if (cumulative >= variance_threshold - 1e-12) break;
    }

    PcaModel model;
    model.components = full.components.topRows(m);
    model.explained_variance_ratio = full.explained_variance_ratio.head(m);
    model.mean = full.mean;
    model.all_eigenvalues = full.all_eigenvalues;

    FeatureRanking ranking;
    ranking.scores = model.components.cwiseAbs().colwise().sum().transpose();
    ranking.order.resize(static_cast<std::size_t>(d));
    std::iota(ranking.order.begin(), ranking.order.end(), Index{0});
    // Scores of symmetric features can differ in the last bits; compare on a
    // 1e-10 lattice so those count as ties and fall back to index order.
    const VectorXd keys = (ranking.scores * 1e10).array().round();
    std::stable_sort(ranking.order.begin(), ranking.order.end(),
                     [&](Index a, Index b) { return keys[a] > keys[b]; });
    return {std::move(model), std::move(ranking)};
}

std::vector<Index> top_k_indices(const FeatureRanking& ranking, Index k) {
    const auto d = static_cast<Index>(ranking.order.size());
    if (k < 1 || k > d)
        throw std::invalid_argument("select_top_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");
    return {ranking.order.begin(), ranking.order.begin() + k};
}

TabularDataset select_top_k(const TabularDataset& ds, const FeatureRanking& ranking, Index k) {
    if (static_cast<Index>(ranking.order.size()) != ds.cols())
        throw std::invalid_argument("select_top_k: ranking dimension does not match dataset");
    return ds.columns(top_k_indices(ranking, k));
}

void write_ranking_csv(const std::filesystem::path& path, const FeatureRanking& ranking,
                       const std::vector<std::string>& feature_names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ranking_csv: cannot open " + path.string());
    out << "feature_name,score,rank\n";
    for (std::size_t r = 0; r < ranking.order.size(); ++r) {
        const Index f = ranking.order[r];
        out << feature_names[static_cast<std::size_t>(f)] << ',' << format_double(ranking.scores[f]) << ','
            << (r + 1) << '\n';
    }
}

}  // namespace citadel
