#pragma once

#include "citadel/types.hpp"

namespace citadel {

/// Exact-gradient t-SNE settings. The defaults are the ones used for feature layouts.
struct TsneParams {
    double perplexity = 10.0;
    int iterations = 500;
    double learning_rate = 100.0;
    double early_exaggeration = 4.0;
    int exaggeration_iterations = 100;
    int momentum_switch_iteration = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;

    /// perplexity = min(10, floor((k-1)/3)), floored at 1 for very small k.
    static TsneParams for_points(Index k);
};

/// Embed each row of `points` into 2-D. Deterministic for a given seed.
RowMatrixXd tsne_embed(const RowMatrixXd& points, const TsneParams& params, Seed seed);

/// Row-stochastic conditional affinities matched to the requested perplexity
/// by bisection on the Gaussian precision. Exposed for testing.
RowMatrixXd conditional_affinities(const RowMatrixXd& sq_distances, double perplexity);

}  // namespace citadel
