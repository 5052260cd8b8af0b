#include "citadel/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace citadel {

TsneParams TsneParams::for_points(Index k) {
    TsneParams p;
    p.perplexity = std::max(1.0, std::min(10.0, std::floor(static_cast<double>(k - 1) / 3.0)));
    return p;
}

RowMatrixXd conditional_affinities(const RowMatrixXd& sq_distances, double perplexity) {
    const Index n = sq_distances.rows();
    const double target_entropy = std::log(perplexity);
    constexpr double tol = 1e-5;
    constexpr int max_steps = 200;

    RowMatrixXd p = RowMatrixXd::Zero(n, n);
    VectorXd row(n);
    for (Index i = 0; i < n; ++i) {
        double beta = 1.0;
        double lo = -std::numeric_limits<double>::max();
        double hi = std::numeric_limits<double>::max();
        for (int step = 0; step < max_steps; ++step) {
            double sum = 0.0;
            for (Index j = 0; j < n; ++j) {
                row[j] = (j == i) ? 0.0 : std::exp(-beta * sq_distances(i, j));
                sum += row[j];
            }
            if (sum <= std::numeric_limits<double>::min()) sum = std::numeric_limits<double>::min();
            double weighted = 0.0;
            for (Index j = 0; j < n; ++j) weighted += beta * sq_distances(i, j) * row[j];
            const double entropy = weighted / sum + std::log(sum);
            row /= sum;

            const double diff = entropy - target_entropy;
            if (std::abs(diff) < tol) break;
            if (diff > 0) {
                lo = beta;
                beta = (hi == std::numeric_limits<double>::max()) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = (lo == -std::numeric_limits<double>::max()) ? beta / 2.0 : (beta + lo) / 2.0;
            }
        }
        p.row(i) = row.transpose();
    }
    return p;
}

RowMatrixXd tsne_embed(const RowMatrixXd& points, const TsneParams& params, Seed seed) {
    const Index n = points.rows();
    if (n < 1) throw std::invalid_argument("tsne: no points");
    if (!(params.perplexity > 0.0)) throw std::invalid_argument("tsne: perplexity must be positive");
    if (n > 1 && params.perplexity >= static_cast<double>(n))
        throw std::invalid_argument("tsne: perplexity must be smaller than the point count");

    RowMatrixXd y = RowMatrixXd::Zero(n, 2);
    if (n == 1) return y;

    // Squared distances scaled by their maximum keeps the bisection well conditioned.
    const VectorXd sq_norms = points.rowwise().squaredNorm();
    RowMatrixXd d2 = (-2.0 * points * points.transpose()).colwise() + sq_norms;
    d2.rowwise() += sq_norms.transpose();
    d2 = d2.cwiseMax(0.0);
    d2.diagonal().setZero();
    const double max_d2 = d2.maxCoeff();
    if (max_d2 > 0.0) d2 /= max_d2;

    RowMatrixXd p = conditional_affinities(d2, params.perplexity);
    p = (p + p.transpose()).eval();
    p /= p.sum();
    p = p.cwiseMax(1e-12);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1e-4);
    for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < 2; ++c) y(i, c) = gauss(rng);

    RowMatrixXd update = RowMatrixXd::Zero(n, 2);
    RowMatrixXd gains = RowMatrixXd::Ones(n, 2);
    RowMatrixXd grad(n, 2);
    RowMatrixXd num(n, n);

    for (int iter = 0; iter < params.iterations; ++iter) {
        const double exaggeration = iter < params.exaggeration_iterations ? params.early_exaggeration : 1.0;
        const double momentum =
            iter < params.momentum_switch_iteration ? params.initial_momentum : params.final_momentum;

        double num_sum = 0.0;
        for (Index i = 0; i < n; ++i) {
            num(i, i) = 0.0;
            for (Index j = i + 1; j < n; ++j) {
                const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
                num(i, j) = num(j, i) = v;
                num_sum += 2.0 * v;
            }
        }

        grad.setZero();
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = std::max(num(i, j) / num_sum, 1e-12);
                const double mult = (exaggeration * p(i, j) - q) * num(i, j);
                grad.row(i) += 4.0 * mult * (y.row(i) - y.row(j));
            }
        }

        for (Index i = 0; i < n; ++i) {
            for (Index c = 0; c < 2; ++c) {
                const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
                gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
                update(i, c) = momentum * update(i, c) - params.learning_rate * gains(i, c) * grad(i, c);
                y(i, c) += update(i, c);
            }
        }
        y.rowwise() -= y.colwise().mean();
    }
    return y;
}

}  // namespace citadel
