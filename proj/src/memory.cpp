#include "citadel/memory.hpp"

#include "citadel/data.hpp"
#include "citadel/kmeans.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <numeric>

namespace citadel {

double ks_critical_value(double alpha, Index n, Index m) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ks: alpha must be in (0,1)");
    const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
    const auto nn = static_cast<double>(n);
    const auto mm = static_cast<double>(m);
    return c * std::sqrt((nn + mm) / (nn * mm));
}

VectorXd FeatureHistograms::normalized(Index feature) const {
    const VectorXd row = masses.row(feature).transpose();
    const double total = row.sum();
    return total > 0.0 ? VectorXd(row / total) : VectorXd::Zero(row.size());
}

BinEdges union_bin_edges(std::span<const RowMatrixXd* const> parts, Index bins) {
    if (bins < 1) throw std::invalid_argument("histogram: bin count must be >= 1");
    Index d = -1;
    for (const auto* p : parts) {
        if (p->rows() == 0) continue;
        if (d >= 0 && p->cols() != d) throw std::invalid_argument("histogram: feature dimensions differ");
        d = p->cols();
    }
    if (d < 0) throw std::invalid_argument("histogram: no samples to bin");

    VectorXd lo = VectorXd::Constant(d, std::numeric_limits<double>::infinity());
    VectorXd hi = -lo;
    for (const auto* p : parts) {
        if (p->rows() == 0) continue;
        lo = lo.cwiseMin(p->colwise().minCoeff().transpose());
        hi = hi.cwiseMax(p->colwise().maxCoeff().transpose());
    }
    BinEdges edges(d, bins + 1);
    for (Index j = 0; j < d; ++j) {
        double a = lo[j];
        double b = hi[j];
        if (!(b > a)) {
            a -= 0.5;
            b += 0.5;
        }
        for (Index t = 0; t <= bins; ++t)
            edges(j, t) = a + (b - a) * static_cast<double>(t) / static_cast<double>(bins);
        edges(j, bins) = b;
    }
    return edges;
}

Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bin_indices(const RowMatrixXd& x,
                                                                                  const BinEdges& edges) {
    if (x.cols() != edges.rows()) throw std::invalid_argument("histogram: edge rows do not match feature count");
    const Index b = edges.cols() - 1;
    for (Index j = 0; j < edges.rows(); ++j)
        for (Index t = 0; t < b; ++t)
            if (!(edges(j, t + 1) > edges(j, t))) throw std::invalid_argument("histogram: edges must be ascending");

    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const double* row = edges.data() + j * edges.cols();
        for (Index i = 0; i < x.rows(); ++i) {
            // First interior edge strictly greater than the value gives the bin.
            const double* it = std::upper_bound(row + 1, row + b, x(i, j));
            out(i, j) = static_cast<Index>(it - (row + 1));
        }
    }
    return out;
}

FeatureHistograms feature_histograms(const RowMatrixXd& x, const BinEdges& edges, const std::optional<VectorXd>& weights) {
    if (weights && weights->size() != x.rows())
        throw std::invalid_argument("histogram: weight count does not match sample count");
    const auto idx = bin_indices(x, edges);
    FeatureHistograms h;
    h.edges = edges;
    h.masses = RowMatrixXd::Zero(x.cols(), edges.cols() - 1);
    for (Index i = 0; i < x.rows(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0;
        for (Index j = 0; j < x.cols(); ++j) h.masses(j, idx(i, j)) += w;
    }
    return h;
}

WeightedKlObjective::WeightedKlObjective(Kind kind, const RowMatrixXd& weighted, const RowMatrixXd& target,
                                         const BinEdges& edges, const RowMatrixXd* fixed, double eps)
    : kind_(kind), bins_(bin_indices(weighted, edges)), nbins_(edges.cols() - 1), eps_(eps) {
    const auto target_hist = feature_histograms(target, edges);
    const Index d = edges.rows();
    target_.resize(d, nbins_);
    for (Index j = 0; j < d; ++j) target_.row(j) = smooth_distribution(target_hist.masses.row(j).transpose(), eps).transpose();
    if (kind_ == Kind::Sampling) {
        fixed_dist_ = RowMatrixXd::Zero(d, nbins_);
        if (fixed && fixed->rows() > 0) {
            const auto fixed_hist = feature_histograms(*fixed, edges);
            for (Index j = 0; j < d; ++j) fixed_dist_.row(j) = fixed_hist.normalized(j).transpose();
        }
    }
}

double WeightedKlObjective::value(const VectorXd& w) const {
    VectorXd unused;
    return value_and_gradient(w, unused);
}

double WeightedKlObjective::value_and_gradient(const VectorXd& w, VectorXd& grad) const {
    const Index n = bins_.rows();
    const Index d = bins_.cols();
    if (w.size() != n) throw std::invalid_argument("kl objective: weight count mismatch");
    RowMatrixXd h = RowMatrixXd::Zero(d, nbins_);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) h(j, bins_(i, j)) += w[i];

    const bool want_grad = grad.size() == n || grad.size() == 0;
    RowMatrixXd g_hist = RowMatrixXd::Zero(d, nbins_);
    double total = 0.0;
    const double z = 1.0 + static_cast<double>(nbins_) * eps_;
    for (Index j = 0; j < d; ++j) {
        const double s = h.row(j).sum();
        const VectorXd r = s > 0.0 ? VectorXd(h.row(j).transpose() / s) : VectorXd::Zero(nbins_);
        VectorXd mix = r;
        double mass_scale = 1.0;
        if (kind_ == Kind::Sampling) {
            mix = 0.5 * (fixed_dist_.row(j).transpose() + r);
            mass_scale = mix.sum();
        }
        const VectorXd q = smooth_distribution(mix, eps_);
        const VectorXd p = target_.row(j).transpose();
        VectorXd ratio(nbins_);
        for (Index t = 0; t < nbins_; ++t) {
            total += p[t] * std::log(p[t] / q[t]);
            ratio[t] = p[t] / q[t];
        }
        if (s > 0.0 && mass_scale > 0.0) {
            // dq_t/dH_u = c * (delta_tu - r_t) / s, with c folding the mixture weight and smoothing.
            const double c = (kind_ == Kind::Sampling ? 0.5 / mass_scale : 1.0) / (z * s);
            const double centre = ratio.dot(r);
            for (Index u = 0; u < nbins_; ++u) g_hist(j, u) = -c * (ratio[u] - centre);
        }
    }
    if (want_grad) {
        grad = VectorXd::Zero(n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < d; ++j) grad[i] += g_hist(j, bins_(i, j));
    }
    return total;
}

OptimizeResult minimize_box(const WeightedKlObjective& objective, VectorXd start, const OptimizerParams& params) {
    OptimizeResult result;
    VectorXd w = start.cwiseMax(0.0).cwiseMin(1.0);
    VectorXd grad;
    double f = objective.value_and_gradient(w, grad);
    result.objective_history.push_back(f);
    for (int it = 0; it < params.max_iterations; ++it) {
        // Every iteration starts from the base step and halves it until the objective does not increase.
        double step = params.step;
        VectorXd trial;
        VectorXd trial_grad;
        double trial_f = 0.0;
        for (;;) {
            trial = (w - step * grad).cwiseMax(0.0).cwiseMin(1.0);
            trial_f = objective.value_and_gradient(trial, trial_grad);
            if (trial_f <= f || step < 1e-12) break;
            step *= 0.5;
        }
        if (trial_f > f) break;
        const double improvement = f - trial_f;
        w = trial;
        f = trial_f;
        grad = std::move(trial_grad);
        result.objective_history.push_back(f);
        // A backtracked step only shows the local curvature, not convergence.
        if (improvement < params.tolerance && step == params.step) break;
    }
    result.weights = std::move(w);
    return result;
}

void TempBuffer::append(const RowMatrixXd& rows, std::span<const Index> row_origins) {
    if (static_cast<Index>(row_origins.size()) != rows.rows())
        throw std::invalid_argument("temp buffer: origin count mismatch");
    if (samples.rows() > 0 && rows.rows() > 0 && rows.cols() != samples.cols())
        throw std::invalid_argument("temp buffer: feature dimension mismatch");
    RowMatrixXd merged(samples.rows() + rows.rows(), rows.rows() > 0 ? rows.cols() : samples.cols());
    if (samples.rows() > 0) merged.topRows(samples.rows()) = samples;
    if (rows.rows() > 0) merged.bottomRows(rows.rows()) = rows;
    samples = std::move(merged);
    origins.insert(origins.end(), row_origins.begin(), row_origins.end());
    slots.resize(origins.size(), -1);
}

void TempBuffer::remove(std::span<const Index> sorted_unique_rows) {
    RowMatrixXd kept(samples.rows() - static_cast<Index>(sorted_unique_rows.size()), samples.cols());
    std::vector<Index> kept_origins;
    std::vector<Index> kept_slots;
    slots.resize(origins.size(), -1);
    std::size_t cursor = 0;
    Index out = 0;
    for (Index i = 0; i < samples.rows(); ++i) {
        if (cursor < sorted_unique_rows.size() && sorted_unique_rows[cursor] == i) {
            ++cursor;
            continue;
        }
        kept.row(out++) = samples.row(i);
        kept_origins.push_back(origins[static_cast<std::size_t>(i)]);
        kept_slots.push_back(slots[static_cast<std::size_t>(i)]);
    }
    samples = std::move(kept);
    origins = std::move(kept_origins);
    slots = std::move(kept_slots);
}

namespace {

// Indices ordered by (weight, index) ascending or descending-weight with ascending index.
std::vector<Index> order_by_weight(const VectorXd& w, bool descending) {
    std::vector<Index> idx(static_cast<std::size_t>(w.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return descending ? w[a] > w[b] : w[a] < w[b]; });
    return idx;
}

}  // namespace

ForgetResult strategic_forget(TempBuffer& temp, const RowMatrixXd& x_new, Index bins, Index quota,
                              const OptimizerParams& params) {
    if (quota < 1) throw std::invalid_argument("strategic_forget: quota must be >= 1");
    if (quota >= temp.size())
        throw std::invalid_argument("strategic_forget: quota " + std::to_string(quota) + " >= buffer size " +
                                    std::to_string(temp.size()));
    if (x_new.rows() < 1) throw std::invalid_argument("strategic_forget: no new samples");

    const RowMatrixXd* parts[] = {&temp.samples, &x_new};
    const auto edges = union_bin_edges(parts, bins);
    const WeightedKlObjective objective(WeightedKlObjective::Kind::Forgetting, temp.samples, x_new, edges, nullptr,
                                        params.eps);
    auto opt = minimize_box(objective, VectorXd::Ones(temp.size()), params);

    // Weights below 0.5 come first in ascending order, so truncating or padding
    // that set to `quota` both reduce to the first `quota` entries.
    auto order = order_by_weight(opt.weights, false);
    std::vector<Index> dropped(order.begin(), order.begin() + quota);
    std::sort(dropped.begin(), dropped.end());
    temp.remove(dropped);
    return ForgetResult{std::move(opt.weights), std::move(dropped), std::move(opt.objective_history)};
}

SampleResult strategic_sample(TempBuffer& temp, const RowMatrixXd& x_new, Index bins, Index quota, Index task_index,
                              const OptimizerParams& params) {
    const Index m = x_new.rows();
    if (quota < 1) throw std::invalid_argument("strategic_sample: quota must be >= 1");
    if (quota > m)
        throw std::invalid_argument("strategic_sample: quota " + std::to_string(quota) + " > " + std::to_string(m) +
                                    " new samples");
    const RowMatrixXd* parts[] = {&temp.samples, &x_new};
    const auto edges = union_bin_edges(parts, bins);
    const WeightedKlObjective objective(WeightedKlObjective::Kind::Sampling, x_new, x_new, edges, &temp.samples,
                                        params.eps);
    auto opt = minimize_box(objective, VectorXd::Constant(m, 0.5), params);

    auto order = order_by_weight(opt.weights, true);
    std::vector<Index> selected(order.begin(), order.begin() + quota);
    std::sort(selected.begin(), selected.end());
    RowMatrixXd rows(quota, x_new.cols());
    for (Index i = 0; i < quota; ++i) rows.row(i) = x_new.row(selected[static_cast<std::size_t>(i)]);
    const std::vector<Index> origins(static_cast<std::size_t>(quota), task_index);
    temp.append(rows, origins);
    return SampleResult{std::move(opt.weights), std::move(selected), std::move(opt.objective_history)};
}

DriftResult detect_drift(const RowMatrixXd& x_new, const RowMatrixXd& memory, double alpha) {
    if (x_new.rows() == 0 || memory.rows() == 0) throw std::invalid_argument("detect_drift: empty population");
    if (x_new.cols() != memory.cols()) throw std::invalid_argument("detect_drift: feature dimension mismatch");
    DriftResult r;
    r.critical_value = ks_critical_value(alpha, x_new.rows(), memory.rows());
    r.statistics.resize(x_new.cols());
    std::vector<double> a(static_cast<std::size_t>(x_new.rows()));
    std::vector<double> b(static_cast<std::size_t>(memory.rows()));
    for (Index j = 0; j < x_new.cols(); ++j) {
        for (Index i = 0; i < x_new.rows(); ++i) a[static_cast<std::size_t>(i)] = x_new(i, j);
        for (Index i = 0; i < memory.rows(); ++i) b[static_cast<std::size_t>(i)] = memory(i, j);
        r.statistics[j] = ks_statistic<double>(a, b);
        if (r.statistics[j] > r.critical_value) r.drifted = true;
    }
    r.severity = r.statistics.mean();
    return r;
}

Index assign_level(double severity, double lambda, Index min_level, Index max_level) {
    if (min_level > max_level) throw std::invalid_argument("assign_level: min level above max level");
    if (!(lambda > 0.0)) throw std::invalid_argument("assign_level: lambda must be positive");
    const double s = std::clamp(severity, 0.0, 1.0);
    const double ratio = std::expm1(lambda * s) / std::expm1(lambda);
    const double raw = static_cast<double>(min_level) + static_cast<double>(max_level - min_level) * ratio + 0.5;
    return std::clamp(static_cast<Index>(std::floor(raw)), min_level, max_level);
}

std::vector<Index> level_allocations(Index capacity, Index levels, double gamma) {
    if (!(gamma > 1.0)) throw std::invalid_argument("level_allocations: gamma must be > 1");
    if (levels < 1) throw std::invalid_argument("level_allocations: need at least one level");
    if (capacity < 0) throw std::invalid_argument("level_allocations: negative capacity");
    std::vector<double> exact(static_cast<std::size_t>(levels));
    double norm = 0.0;
    for (Index j = 0; j < levels; ++j) norm += std::pow(gamma, -static_cast<double>(j));
    std::vector<Index> out(static_cast<std::size_t>(levels));
    Index assigned = 0;
    for (Index j = 0; j < levels; ++j) {
        const auto js = static_cast<std::size_t>(j);
        exact[js] = static_cast<double>(capacity) * std::pow(gamma, -static_cast<double>(j)) / norm;
        out[js] = static_cast<Index>(std::floor(exact[js]));
        assigned += out[js];
    }
    std::vector<Index> order(static_cast<std::size_t>(levels));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        const auto as = static_cast<std::size_t>(a);
        const auto bs = static_cast<std::size_t>(b);
        return exact[as] - static_cast<double>(out[as]) > exact[bs] - static_cast<double>(out[bs]);
    });
    for (Index r = 0; assigned < capacity; ++r, ++assigned) ++out[static_cast<std::size_t>(order[static_cast<std::size_t>(r % levels)])];
    return out;
}

std::vector<Index> downsize(const RowMatrixXd& x, Index target, Index clusters, Seed seed) {
    const Index n = x.rows();
    if (target < 0 || target > n)
        throw std::invalid_argument("downsize: target " + std::to_string(target) + " outside [0, " + std::to_string(n) + "]");
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    if (target == n) return all;
    if (target == 0) return {};

    const auto km = kmeans(x, std::clamp<Index>(clusters, 1, n), seed);
    VectorXd nearest(n);
    for (Index i = 0; i < n; ++i) nearest[i] = (km.centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff();
    std::stable_sort(all.begin(), all.end(), [&](Index a, Index b) { return nearest[a] < nearest[b]; });
    all.resize(static_cast<std::size_t>(target));
    std::sort(all.begin(), all.end());
    return all;
}

HierarchicalMemory::HierarchicalMemory(const MemoryParams& params)
    : params_(params),
      allocations_(level_allocations(params.capacity, params.levels, params.gamma)),
      levels_(static_cast<std::size_t>(params.levels)) {
    if (params.capacity < 1) throw std::invalid_argument("memory: capacity must be >= 1");
}

const std::vector<MemoryBuffer>& HierarchicalMemory::level(Index level) const {
    if (level < 1 || level > params_.levels) throw std::out_of_range("memory: level " + std::to_string(level) + " out of range");
    return levels_[static_cast<std::size_t>(level - 1)];
}

Index HierarchicalMemory::level_size(Index level) const {
    Index s = 0;
    for (const auto& b : this->level(level)) s += b.size();
    return s;
}

Index HierarchicalMemory::size() const {
    Index s = 0;
    for (Index l = 1; l <= params_.levels; ++l) s += level_size(l);
    return s;
}

RowMatrixXd HierarchicalMemory::flatten() const {
    RowMatrixXd out(size(), std::max<Index>(feature_dim_, 0));
    Index at = 0;
    for (const auto& lv : levels_)
        for (const auto& b : lv) {
            out.middleRows(at, b.size()) = b.samples;
            at += b.size();
        }
    return out;
}

TempBuffer HierarchicalMemory::make_temp() const {
    TempBuffer t;
    t.samples = flatten();
    for (const auto& lv : levels_)
        for (const auto& b : lv) t.origins.insert(t.origins.end(), b.origins.begin(), b.origins.end());
    t.slots.resize(t.origins.size());
    std::iota(t.slots.begin(), t.slots.end(), Index{0});
    return t;
}

MemoryBuffer HierarchicalMemory::make_buffer(const TempBuffer& temp, Index target, Index task, bool marked,
                                             Seed seed) const {
    const auto rows = downsize(temp.samples, std::min(target, temp.size()), params_.downsize_clusters, seed);
    MemoryBuffer b;
    b.task = task;
    b.marked = marked;
    b.samples.resize(static_cast<Index>(rows.size()), temp.samples.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        b.samples.row(static_cast<Index>(i)) = temp.samples.row(rows[i]);
        b.origins.push_back(temp.origins[static_cast<std::size_t>(rows[i])]);
    }
    return b;
}

void HierarchicalMemory::integrate(const TempBuffer& temp, Index level, Index task_index, Seed seed) {
    if (level < 1 || level > params_.levels)
        throw std::out_of_range("memory: level " + std::to_string(level) + " outside [1, " +
                                std::to_string(params_.levels) + "]");
    if (temp.size() == 0) throw std::invalid_argument("memory: nothing to integrate");
    if (feature_dim_ >= 0 && temp.samples.cols() != feature_dim_)
        throw std::invalid_argument("memory: feature dimension mismatch");

    if (empty()) {
        feature_dim_ = temp.samples.cols();
        for (Index l = 1; l <= params_.levels; ++l) {
            const Index alloc = allocations_[static_cast<std::size_t>(l - 1)];
            if (alloc == 0) continue;
            auto b = make_buffer(temp, alloc, task_index, l != 1, derive_seed(seed, "memory/init", static_cast<std::uint64_t>(l)));
            if (b.size() > 0) levels_[static_cast<std::size_t>(l - 1)].push_back(std::move(b));
        }
        return;
    }

    // Forgetting: drop stored entries that the temporary buffer no longer holds.
    std::vector<bool> kept(static_cast<std::size_t>(size()), false);
    std::vector<Index> incoming;
    for (Index i = 0; i < temp.size(); ++i) {
        const Index slot = i < static_cast<Index>(temp.slots.size()) ? temp.slots[static_cast<std::size_t>(i)] : -1;
        if (slot < 0) {
            incoming.push_back(i);
        } else {
            if (slot >= static_cast<Index>(kept.size())) throw std::invalid_argument("memory: temp slot out of range");
            kept[static_cast<std::size_t>(slot)] = true;
        }
    }
    Index slot = 0;
    for (auto& lv : levels_) {
        for (auto& b : lv) {
            std::vector<Index> rows;
            for (Index r = 0; r < b.size(); ++r, ++slot)
                if (kept[static_cast<std::size_t>(slot)]) rows.push_back(r);
            if (static_cast<Index>(rows.size()) == b.size()) continue;
            std::vector<Index> origins;
            for (Index r : rows) origins.push_back(b.origins[static_cast<std::size_t>(r)]);
            b.samples = RowMatrixXd(b.samples(rows, Eigen::all));
            b.origins = std::move(origins);
        }
        std::erase_if(lv, [](const MemoryBuffer& b) { return b.size() == 0; });
    }

    auto& lv = levels_[static_cast<std::size_t>(level - 1)];
    std::erase_if(lv, [](const MemoryBuffer& b) { return b.marked; });
    const Index alloc = allocations_[static_cast<std::size_t>(level - 1)];
    const Index share = alloc / static_cast<Index>(lv.size() + 1);
    for (std::size_t i = 0; i < lv.size(); ++i) {
        if (lv[i].size() <= share) continue;
        TempBuffer existing{lv[i].samples, lv[i].origins, {}};
        const Index task = lv[i].task;
        lv[i] = make_buffer(existing, share, task, false, derive_seed(seed, "memory/resize", i));
    }
    if (!incoming.empty()) {
        TempBuffer admitted;
        admitted.samples = temp.samples(incoming, Eigen::all);
        for (Index i : incoming) admitted.origins.push_back(temp.origins[static_cast<std::size_t>(i)]);
        lv.push_back(make_buffer(admitted, share, task_index, false, derive_seed(seed, "memory/incoming")));
    }
    std::erase_if(lv, [](const MemoryBuffer& b) { return b.size() == 0; });
}

void HierarchicalMemory::check_invariants() const {
    if (size() > params_.capacity)
        throw std::logic_error("memory: " + std::to_string(size()) + " entries exceed capacity " +
                               std::to_string(params_.capacity));
    for (Index l = 1; l <= params_.levels; ++l) {
        if (level_size(l) > allocations_[static_cast<std::size_t>(l - 1)] + 1)
            throw std::logic_error("memory: level " + std::to_string(l) + " exceeds its allocation");
        bool marked = false;
        bool genuine = false;
        for (const auto& b : level(l)) (b.marked ? marked : genuine) = true;
        if (marked && genuine) throw std::logic_error("memory: level " + std::to_string(l) + " mixes marked and genuine buffers");
    }
}

void write_memory_audit(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                        const HierarchicalMemory& memory, Index task_index) {
    nlohmann::json j;
    j["version"] = 1;
    j["task"] = task_index + 1;
    j["capacity"] = memory.capacity();
    j["total"] = memory.size();
    auto& levels = j["levels"] = nlohmann::json::array();
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("write_memory_audit: cannot open " + csv_path.string());
    csv << "level,buffer,task,marked,origin";
    for (Index f = 0; f < std::max<Index>(memory.feature_dim(), 0); ++f) csv << ",f" << f;
    csv << '\n';
    for (Index l = 1; l <= memory.level_count(); ++l) {
        nlohmann::json lv;
        lv["level"] = l;
        lv["allocation"] = memory.allocations()[static_cast<std::size_t>(l - 1)];
        lv["size"] = memory.level_size(l);
        auto& buffers = lv["buffers"] = nlohmann::json::array();
        const auto& bufs = memory.level(l);
        for (std::size_t bi = 0; bi < bufs.size(); ++bi) {
            const auto& b = bufs[bi];
            buffers.push_back({{"task", b.task + 1}, {"marked", b.marked}, {"count", b.size()}});
            for (Index r = 0; r < b.size(); ++r) {
                csv << l << ',' << bi << ',' << (b.task + 1) << ',' << (b.marked ? 1 : 0) << ','
                    << (b.origins[static_cast<std::size_t>(r)] + 1);
                for (Index f = 0; f < b.samples.cols(); ++f) csv << ',' << format_double(b.samples(r, f));
                csv << '\n';
            }
        }
        levels.push_back(std::move(lv));
    }
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw std::runtime_error("write_memory_audit: cannot open " + json_path.string());
    out << j.dump(2) << '\n';
}

}  // namespace citadel
