#pragma once

#include "citadel/types.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace citadel {

// ---------------------------------------------------------------------------
// Distribution kernels
// ---------------------------------------------------------------------------

/// Normalize to unit mass (zero vectors stay zero), add eps to every bin, renormalize.
template <typename Derived>
VectorX<typename Derived::Scalar> smooth_distribution(const Eigen::MatrixBase<Derived>& v,
                                                      typename Derived::Scalar eps) {
    using Scalar = typename Derived::Scalar;
    const Scalar total = v.sum();
    VectorX<Scalar> p = total > Scalar(0) ? VectorX<Scalar>(v / total) : VectorX<Scalar>::Zero(v.size());
    p.array() += eps;
    return p / p.sum();
}

/// KL(P || Q) after smoothing both arguments with `eps`.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q,
                                        typename DerivedP::Scalar eps = 1e-8) {
    using Scalar = typename DerivedP::Scalar;
    if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
    if (!(eps > Scalar(0))) throw std::invalid_argument("kl_divergence: eps must be positive");
    if ((p.array() < Scalar(0)).any() || (q.array() < Scalar(0)).any())
        throw std::invalid_argument("kl_divergence: negative mass");
    const VectorX<Scalar> ps = smooth_distribution(p, eps);
    const VectorX<Scalar> qs = smooth_distribution(q, eps);
    Scalar kl(0);
    for (Index t = 0; t < ps.size(); ++t) kl += ps[t] * std::log(ps[t] / qs[t]);
    return std::max(kl, Scalar(0));
}

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
template <typename Scalar>
Scalar ks_statistic(std::span<const Scalar> a, std::span<const Scalar> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::vector<Scalar> x(a.begin(), a.end());
    std::vector<Scalar> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const auto n = static_cast<Scalar>(x.size());
    const auto m = static_cast<Scalar>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    Scalar d(0);
    while (i < x.size() && j < y.size()) {
        const Scalar v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= v) ++i;
        while (j < y.size() && y[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<Scalar>(i) / n - static_cast<Scalar>(j) / m));
    }
    return d;
}

/// c(alpha) * sqrt((n+m)/(n*m)) with c(alpha) = sqrt(-ln(alpha/2)/2).
double ks_critical_value(double alpha, Index n, Index m);

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

/// Per-feature bin edges, d x (b+1), strictly ascending along each row.
using BinEdges = RowMatrixXd;

struct FeatureHistograms {
    BinEdges edges;
    RowMatrixXd masses;  ///< d x b

    Index bins() const { return masses.cols(); }
    /// Row j normalized to unit mass (a zero row stays zero).
    VectorXd normalized(Index feature) const;
};

/// b equal-width bins spanning the union range of the given matrices per feature.
BinEdges union_bin_edges(std::span<const RowMatrixXd* const> parts, Index bins);

/// Bin index of every entry (n x d); values outside the edges clamp to the end bins.
Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bin_indices(const RowMatrixXd& x,
                                                                                  const BinEdges& edges);

FeatureHistograms feature_histograms(const RowMatrixXd& x, const BinEdges& edges,
                                     const std::optional<VectorXd>& weights = std::nullopt);

// ---------------------------------------------------------------------------
// Strategic forgetting and sampling
// ---------------------------------------------------------------------------

struct OptimizerParams {
    double step = 0.05;
    int max_iterations = 500;
    double tolerance = 1e-6;
    double eps = 1e-8;
};

/// Objective value and gradient of one of the two weighted-histogram KL problems.
class WeightedKlObjective {
public:
    enum class Kind { Forgetting, Sampling };

    /// `weighted` holds the samples carrying weights; `target` defines H^new.
    /// For sampling, `fixed` is the temporary buffer whose histogram enters the mixture.
    WeightedKlObjective(Kind kind, const RowMatrixXd& weighted, const RowMatrixXd& target, const BinEdges& edges,
                        const RowMatrixXd* fixed, double eps);

    double value(const VectorXd& w) const;
    double value_and_gradient(const VectorXd& w, VectorXd& grad) const;
    Index size() const { return bins_.rows(); }

private:
    Kind kind_;
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bins_;
    RowMatrixXd target_;       ///< smoothed H^new, d x b
    RowMatrixXd fixed_dist_;   ///< normalized temp histogram (sampling only)
    Index nbins_;
    double eps_;
};

struct OptimizeResult {
    VectorXd weights;
    std::vector<double> objective_history;  ///< accepted iterates, starting point first
};

/// Projected gradient descent on [0,1]^n with step halving on increase.
OptimizeResult minimize_box(const WeightedKlObjective& objective, VectorXd start, const OptimizerParams& params);

/// Memory samples under revision plus admitted new samples.
struct TempBuffer {
    RowMatrixXd samples;
    std::vector<Index> origins;  ///< task index each sample came from
    std::vector<Index> slots;    ///< position in the flattened memory, -1 for admitted rows

    Index size() const { return samples.rows(); }
    void append(const RowMatrixXd& rows, std::span<const Index> row_origins);
    void remove(std::span<const Index> sorted_unique_rows);
};

struct ForgetResult {
    VectorXd weights;
    std::vector<Index> dropped;  ///< buffer rows removed, ascending
    std::vector<double> objective_history;
};

struct SampleResult {
    VectorXd weights;
    std::vector<Index> selected;  ///< rows of X_new admitted, ascending
    std::vector<double> objective_history;
};

/// Minimize sum_j KL(H_j^new || H_j^temp(w)) and drop exactly `quota` samples:
/// those with w < 0.5, truncated or padded by ascending weight (ties by index).
ForgetResult strategic_forget(TempBuffer& temp, const RowMatrixXd& x_new, Index bins, Index quota,
                              const OptimizerParams& params = {});

/// Minimize sum_j KL(H_j^new || (H_j^temp + H_j^new(w))/2) and admit the
/// `quota` highest-weight new samples (ties by index), tagged with `task_index`.
SampleResult strategic_sample(TempBuffer& temp, const RowMatrixXd& x_new, Index bins, Index quota, Index task_index,
                              const OptimizerParams& params = {});

// ---------------------------------------------------------------------------
// Drift and levels
// ---------------------------------------------------------------------------

struct DriftResult {
    bool drifted = false;
    double severity = 0.0;  ///< mean per-feature KS statistic
    VectorXd statistics;
    double critical_value = 0.0;
};

DriftResult detect_drift(const RowMatrixXd& x_new, const RowMatrixXd& memory, double alpha = 0.05);

/// floor(L_min + (L_max - L_min) * (e^{lambda s} - 1)/(e^lambda - 1) + 0.5)
Index assign_level(double severity, double lambda = 5.5, Index min_level = 1, Index max_level = 10);

/// capacity * gamma^{-(L-1)} / sum_j gamma^{-(j-1)}, largest-remainder rounded to sum to capacity.
std::vector<Index> level_allocations(Index capacity, Index levels, double gamma = 2.0);

/// Keep the `target` rows nearest to any k-means centroid (ties by index), ascending.
std::vector<Index> downsize(const RowMatrixXd& x, Index target, Index clusters, Seed seed);

// ---------------------------------------------------------------------------
// Hierarchical memory
// ---------------------------------------------------------------------------

struct MemoryBuffer {
    Index task = 0;       ///< task that created the buffer
    bool marked = false;  ///< placeholder copy of the first concept
    RowMatrixXd samples;
    std::vector<Index> origins;

    Index size() const { return samples.rows(); }
};

struct MemoryParams {
    Index capacity = 5000;
    Index levels = 10;
    double gamma = 2.0;
    Index downsize_clusters = 5;
};

class HierarchicalMemory {
public:
    explicit HierarchicalMemory(const MemoryParams& params);

    Index capacity() const { return params_.capacity; }
    Index level_count() const { return params_.levels; }
    const MemoryParams& params() const { return params_; }
    const std::vector<Index>& allocations() const { return allocations_; }
    /// Level numbers are 1-based.
    const std::vector<MemoryBuffer>& level(Index level) const;
    Index level_size(Index level) const;
    Index size() const;
    bool empty() const { return size() == 0; }
    Index feature_dim() const { return feature_dim_; }

    /// Every stored sample, level by level.
    RowMatrixXd flatten() const;
    TempBuffer make_temp() const;

    /// Empty memory: the concept fills level 1 and marked copies fill the others.
    /// Otherwise: stored entries missing from `temp` are forgotten, marked entries at
    /// `level` are evicted, every genuine buffer there gets an equal share of its
    /// allocation, and the admitted rows of `temp` are downsized to that share.
    void integrate(const TempBuffer& temp, Index level, Index task_index, Seed seed);

    /// Throws std::logic_error if capacity or allocation bounds are violated.
    void check_invariants() const;

private:
    MemoryParams params_;
    std::vector<Index> allocations_;
    std::vector<std::vector<MemoryBuffer>> levels_;
    Index feature_dim_ = -1;

    MemoryBuffer make_buffer(const TempBuffer& temp, Index target, Index task, bool marked, Seed seed) const;
};

/// JSON (per level: allocation and buffers with task, marked flag, sample count)
/// plus a companion CSV of every stored sample.
void write_memory_audit(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                        const HierarchicalMemory& memory, Index task_index);

}  // namespace citadel
