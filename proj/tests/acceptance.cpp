// Acceptance run: one PASS/FAIL line per criterion, each with its wall-clock time.
// Oracles here are written independently of the library code they check.

#include "citadel/mae.hpp"
#include "citadel/memory.hpp"
#include "citadel/metrics.hpp"
#include "citadel/novelty.hpp"
#include "citadel/runner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace citadel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double limit_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < limit_seconds;
    const bool pass = out.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %2d: %s  %s (%.2f s, limit %.0f s)%s%s\n", id, pass ? "PASS" : "FAIL", title.c_str(), secs,
                limit_seconds, out.detail.empty() ? "" : "  ", out.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

RowMatrixXd gaussian(std::mt19937_64& rng, Index n, Index d, double shift = 0.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    RowMatrixXd x(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) x(i, j) = g(rng) + shift;
    return x;
}

RowMatrixXd uniform(std::mt19937_64& rng, Index n, Index d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RowMatrixXd x(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) x(i, j) = u(rng);
    return x;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- 1: metrics

Outcome metric_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        MatrixXd r(5, 5);
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 5; ++j) r(i, j) = u(rng);
        double ll = 0, bw = 0, fw = 0;
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 5; ++j) {
                if (j <= i) ll += r(i, j);
                if (j < i) bw += r(i, j) - r(j, j);
                if (j > i) fw += r(i, j);
            }
        worst = std::max({worst, std::abs(ll_pr_auc(r) - ll / 15), std::abs(bwt(r) - bw / 10), std::abs(fwt(r) - fw / 10)});
    }
    MatrixXd two(2, 2);
    two << 0.9, 0.6, 0.8, 0.7;
    MatrixXd three(3, 3);
    three << 0.9, 0.5, 0.4, 0.7, 0.8, 0.6, 0.6, 0.7, 0.5;
    const bool fixtures = std::abs(ll_pr_auc(MatrixXd::Constant(3, 3, 0.8)) - 0.8) < 1e-15 &&
                          std::abs(ll_pr_auc(two) - 0.8) < 1e-15 && std::abs(bwt(two) + 0.1) < 1e-15 &&
                          std::abs(fwt(two) - 0.6) < 1e-15 && std::abs(bwt(three) + 0.2) < 1e-15 &&
                          std::abs(fwt(three) - 0.5) < 1e-15;
    return {worst <= 1e-12 && fixtures, "max deviation " + fmt(worst) + (fixtures ? ", fixtures exact" : ", fixture mismatch")};
}

// ---------------------------------------------------------------- 2: LOF

double brute_lof(const RowMatrixXd& ref, Index k, const Eigen::RowVectorXd& q) {
    const Index n = ref.rows();
    auto dist = [](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) { return std::max((a - b).norm(), 1e-12); };
    auto knn = [&](const Eigen::RowVectorXd& x, Index skip) {
        std::vector<Index> idx;
        for (Index i = 0; i < n; ++i)
            if (i != skip) idx.push_back(i);
        std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return dist(x, ref.row(a)) < dist(x, ref.row(b)); });
        idx.resize(static_cast<std::size_t>(k));
        return idx;
    };
    std::vector<std::vector<Index>> nb(static_cast<std::size_t>(n));
    VectorXd kd(n), lrd(n);
    for (Index i = 0; i < n; ++i) {
        nb[static_cast<std::size_t>(i)] = knn(ref.row(i), i);
        kd[i] = dist(ref.row(i), ref.row(nb[static_cast<std::size_t>(i)].back()));
    }
    for (Index i = 0; i < n; ++i) {
        double s = 0;
        for (Index o : nb[static_cast<std::size_t>(i)]) s += std::max(kd[o], dist(ref.row(i), ref.row(o)));
        lrd[i] = static_cast<double>(k) / s;
    }
    const auto qn = knn(q, -1);
    double s = 0, l = 0;
    for (Index o : qn) {
        s += std::max(kd[o], dist(q, ref.row(o)));
        l += lrd[o];
    }
    return (l / static_cast<double>(k)) / (static_cast<double>(k) / s);
}

Outcome lof_oracle() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> size(25, 100), dim(1, 4);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Index k = trial % 2 == 0 ? 5 : 20;
        const auto ref = uniform(rng, size(rng), dim(rng));
        const auto model = fit_lof(ref, k);
        const auto queries = uniform(rng, 5, ref.cols());
        for (Index q = 0; q < queries.rows(); ++q) {
            const double expect = brute_lof(ref, k, queries.row(q));
            worst = std::max(worst, std::abs(score(model, queries.row(q).transpose()) - expect) / std::max(1.0, expect));
        }
    }
    return {worst <= 1e-9, "max relative deviation " + fmt(worst)};
}

// ---------------------------------------------------------------- 3: KS

Outcome ks_oracle() {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> size(1, 200), coarse(0, 9);
    std::normal_distribution<double> g(0.0, 1.0);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
        const bool ties = trial % 2 == 0;
        for (auto& v : a) v = ties ? coarse(rng) : g(rng);
        for (auto& v : b) v = ties ? coarse(rng) : g(rng) + 0.25;
        double sup = 0.0;
        for (const auto* pool : {&a, &b})
            for (double x : *pool) {
                const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; })) / a.size();
                const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; })) / b.size();
                sup = std::max(sup, std::abs(fa - fb));
            }
        mismatches += ks_statistic<double>(a, b) != sup;
    }
    return {mismatches == 0, std::to_string(mismatches) + " of 100 differ"};
}

// ---------------------------------------------------------------- 4: KL optimizers

// Weighted-histogram objective evaluated from precomputed bin indices (b = 2).
struct TinyKl {
    std::vector<std::array<double, 2>> target;  // smoothed new-data histogram per feature
    std::vector<std::vector<int>> bins;         // [feature][sample] bin of the weighted samples
    std::vector<std::array<double, 2>> fixed;   // normalized temp histogram (sampling only)
    bool sampling = false;

    static std::array<double, 2> smooth(std::array<double, 2> m) {
        const double eps = 1e-8, s = m[0] + m[1];
        for (auto& v : m) v = (s > 0 ? v / s : 0.0) + eps;
        const double z = m[0] + m[1];
        return {m[0] / z, m[1] / z};
    }

    double operator()(const VectorXd& w) const {
        double f = 0.0;
        for (std::size_t j = 0; j < bins.size(); ++j) {
            std::array<double, 2> m{0, 0};
            for (std::size_t i = 0; i < bins[j].size(); ++i) m[static_cast<std::size_t>(bins[j][i])] += w[static_cast<Index>(i)];
            if (sampling) {
                const double s = m[0] + m[1];
                for (int t = 0; t < 2; ++t) m[t] = 0.5 * (fixed[j][t] + (s > 0 ? m[t] / s : 0.0));
            }
            const auto q = smooth(m);
            for (int t = 0; t < 2; ++t) f += target[j][t] * std::log(target[j][t] / q[t]);
        }
        return f;
    }
};

std::vector<std::array<double, 2>> histogram2(const RowMatrixXd& x, const BinEdges& e) {
    std::vector<std::array<double, 2>> h(static_cast<std::size_t>(x.cols()), {0.0, 0.0});
    for (Index j = 0; j < x.cols(); ++j)
        for (Index i = 0; i < x.rows(); ++i) h[static_cast<std::size_t>(j)][x(i, j) < e(j, 1) ? 0 : 1] += 1.0;
    return h;
}

std::vector<std::vector<int>> bins2(const RowMatrixXd& x, const BinEdges& e) {
    std::vector<std::vector<int>> b(static_cast<std::size_t>(x.cols()));
    for (Index j = 0; j < x.cols(); ++j)
        for (Index i = 0; i < x.rows(); ++i) b[static_cast<std::size_t>(j)].push_back(x(i, j) < e(j, 1) ? 0 : 1);
    return b;
}

// Minimum over {0, 0.1, ..., 1}^n without the all-zero vector, which carries no histogram.
double grid_minimum(Index n, const TinyKl& f) {
    std::vector<int> digit(static_cast<std::size_t>(n), 0);
    double best = std::numeric_limits<double>::infinity();
    VectorXd w(n);
    for (;;) {
        for (Index i = 0; i < n; ++i) w[i] = digit[static_cast<std::size_t>(i)] / 10.0;
        if (w.any()) best = std::min(best, f(w));
        Index p = 0;
        while (p < n && ++digit[static_cast<std::size_t>(p)] == 11) digit[static_cast<std::size_t>(p++)] = 0;
        if (p == n) return best;
    }
}

Outcome kl_near_optimality() {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> dim(1, 3), count(2, 6);
    int strict_ok = 0, monotone_ok = 0, total = 0, misses_near_zero = 0;
    double worst_excess = 0.0, largest_missed_opt = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Index d = dim(rng);
        const auto buffer = gaussian(rng, count(rng), d);
        const auto x_new = gaussian(rng, count(rng), d, 0.5);
        const RowMatrixXd* parts[] = {&buffer, &x_new};
        const auto edges = union_bin_edges(parts, 2);
        const bool sampling = trial % 2 == 1;

        TinyKl f;
        f.sampling = sampling;
        for (const auto& h : histogram2(x_new, edges)) f.target.push_back(TinyKl::smooth(h));
        std::vector<double> history;
        Index n = 0;
        if (!sampling) {
            f.bins = bins2(buffer, edges);
            TempBuffer temp;
            temp.append(buffer, std::vector<Index>(static_cast<std::size_t>(buffer.rows()), 0));
            history = strategic_forget(temp, x_new, 2, 1).objective_history;
            n = buffer.rows();
        } else {
            f.bins = bins2(x_new, edges);
            for (auto h : histogram2(buffer, edges)) {
                const double s = h[0] + h[1];
                f.fixed.push_back({h[0] / s, h[1] / s});
            }
            TempBuffer temp;
            temp.append(buffer, std::vector<Index>(static_cast<std::size_t>(buffer.rows()), 0));
            history = strategic_sample(temp, x_new, 2, 1, 1).objective_history;
            n = x_new.rows();
        }
        const double opt = grid_minimum(n, f);
        const double final_f = history.back();
        ++total;
        const bool within = final_f <= 1.05 * opt;
        strict_ok += within;
        if (!within) {
            misses_near_zero += opt < 1e-3;
            largest_missed_opt = std::max(largest_missed_opt, opt);
        }
        worst_excess = std::max(worst_excess, final_f - 1.05 * opt);
        monotone_ok += std::is_sorted(history.rbegin(), history.rend());
    }
    return {strict_ok == total && monotone_ok == total,
            std::to_string(strict_ok) + "/" + std::to_string(total) + " within 1.05x grid optimum, " +
                std::to_string(monotone_ok) + "/" + std::to_string(total) + " monotone, largest excess " + fmt(worst_excess) +
                ", misses with grid optimum < 1e-3: " + std::to_string(misses_near_zero) + "/" +
                std::to_string(total - strict_ok) + ", largest missed optimum " + fmt(largest_missed_opt)};
}

// ---------------------------------------------------------------- 5: MAE gradient

Outcome mae_gradient() {
    std::mt19937_64 rng(505);
    std::uniform_int_distribution<int> px(0, 255);
    const auto model = init_mae(8, 4, 5);
    std::vector<RowMatrixXd> originals;
    std::vector<Mask> masks;
    for (int i = 0; i < 2; ++i) {
        ImageGrid img(8, 8);
        for (Index r = 0; r < 8; ++r)
            for (Index c = 0; c < 8; ++c) img(r, c) = static_cast<std::uint8_t>(px(rng));
        originals.push_back(to_unit(img));
        masks.push_back(mask_sample(img, 0.75, rng).second);
    }
    VectorXd grad;
    batch_loss(model, originals, masks, &grad);
    MaeModel probe = model;
    double worst = 0.0;
    Index floored = 0;
    for (Index p = 0; p < grad.size(); ++p) {
        const double keep = probe.parameters()[p];
        probe.parameters()[p] = keep + 1e-5;
        const double up = batch_loss(probe, originals, masks);
        probe.parameters()[p] = keep - 1e-5;
        const double down = batch_loss(probe, originals, masks);
        probe.parameters()[p] = keep;
        const double fd = (up - down) / 2e-5;
        const double mag = std::max(std::abs(fd), std::abs(grad[p]));
        floored += mag < 1e-6;
        worst = std::max(worst, std::abs(fd - grad[p]) / std::max(mag, 1e-6));
    }
    return {worst < 1e-4, "max relative error " + fmt(worst) + " over " + std::to_string(grad.size()) + " parameters (" +
                              std::to_string(floored) + " below the 1e-6 magnitude floor)"};
}

// ---------------------------------------------------------------- 6: memory invariants

Outcome memory_invariants() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> cap(60, 400), lv(1, 6), rows(5, 80), unit(0, 1 << 20);
    std::uniform_real_distribution<double> shift(-3.0, 3.0);
    std::optional<HierarchicalMemory> mem;
    int violations = 0, moved_wrong = 0;
    for (int step = 0; step < 1000; ++step) {
        if (step % 50 == 0) mem.emplace(MemoryParams{cap(rng), lv(rng), 2.0, 3});
        const Index n = rows(rng);
        const auto x_new = gaussian(rng, n, 3, shift(rng));
        auto temp = mem->make_temp();
        if (mem->empty()) {
            temp.append(x_new, std::vector<Index>(static_cast<std::size_t>(n), step));
            mem->integrate(temp, 1, step, static_cast<Seed>(step));
        } else {
            const Index before = temp.size();
            const Index fq = 1 + unit(rng) % std::min<Index>(before - 1 > 0 ? before - 1 : 1, 40);
            if (fq < before) {
                const auto r = strategic_forget(temp, x_new, 5, fq);
                moved_wrong += static_cast<Index>(r.dropped.size()) != fq || temp.size() != before - fq;
            }
            const Index mid = temp.size();
            const Index sq = 1 + unit(rng) % n;
            const auto s = strategic_sample(temp, x_new, 5, sq, step);
            moved_wrong += static_cast<Index>(s.selected.size()) != sq || temp.size() != mid + sq;
            mem->integrate(temp, 1 + unit(rng) % mem->level_count(), step, static_cast<Seed>(step));
        }
        bool ok = mem->size() <= mem->capacity();
        for (Index l = 1; l <= mem->level_count(); ++l)
            ok = ok && mem->level_size(l) <= mem->allocations()[static_cast<std::size_t>(l - 1)] + 1;
        try {
            mem->check_invariants();
        } catch (const std::exception&) {
            ok = false;
        }
        violations += !ok;
    }
    return {violations == 0 && moved_wrong == 0,
            std::to_string(violations) + " bound violations, " + std::to_string(moved_wrong) + " wrong move counts in 1000 steps"};
}

// ---------------------------------------------------------------- 7-9: scenarios

ScenarioConfig desk_config(Seed seed, RunMode mode) {
    std::ostringstream js;
    js << R"({"schema": 1, "source": {"type": "synthetic", "concepts": 5, "samples_per_concept": 400, "feature_dim": 8,)"
       << R"( "drift_magnitude": 1.5, "anomaly_offset": 6, "seed": )" << seed << R"(},)"
       << R"( "capacity": 1000, "forget_quota": 150, "sample_quota": 150, "seed": )" << seed << R"(, "mode": ")"
       << to_string(mode) << R"("})";
    return parse_config(js.str());
}

std::map<RunMode, std::vector<LifelongMetrics>> scenario_cache;

const std::vector<LifelongMetrics>& scenario_metrics(RunMode mode) {
    auto& slot = scenario_cache[mode];
    if (slot.empty())
        for (Seed s = 1; s <= 5; ++s) slot.push_back(run_scenario(desk_config(s, mode)).metrics);
    return slot;
}

std::vector<double> field(const std::vector<LifelongMetrics>& m, double LifelongMetrics::*f) {
    std::vector<double> out;
    for (const auto& x : m) out.push_back(x.*f);
    return out;
}

std::string list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
    return s + "]";
}

Outcome forgetting_mitigation() {
    const auto full = scenario_metrics(RunMode::Citadel);
    const auto stat = scenario_metrics(RunMode::Static);
    const double bwt_full = median(field(full, &LifelongMetrics::bwt));
    const double bwt_static = median(field(stat, &LifelongMetrics::bwt));
    const double ll_full = median(field(full, &LifelongMetrics::ll_pr_auc));
    return {bwt_full >= bwt_static + 0.05 && ll_full >= 0.7,
            "median BWT " + fmt(bwt_full) + " vs static " + fmt(bwt_static) + " (+0.05 needed), median LL PR-AUC " +
                fmt(ll_full) + "; per-seed BWT " + list(field(full, &LifelongMetrics::bwt)) + ", LL " +
                list(field(full, &LifelongMetrics::ll_pr_auc))};
}

Outcome ablation() {
    const double full = median(field(scenario_metrics(RunMode::Citadel), &LifelongMetrics::bwt));
    const auto ssf = field(scenario_metrics(RunMode::SsfOnly), &LifelongMetrics::bwt);
    const auto hm = field(scenario_metrics(RunMode::HmOnly), &LifelongMetrics::bwt);
    return {full >= median(ssf) && full >= median(hm),
            "median BWT full " + fmt(full) + ", forgetting/sampling only " + fmt(median(ssf)) + " " + list(ssf) +
                ", hierarchical memory only " + fmt(median(hm)) + " " + list(hm)};
}

std::string bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    const auto base = fs::temp_directory_path() / "citadel_acceptance";
    fs::remove_all(base);
    const auto cfg = desk_config(7, RunMode::Citadel);
    run_scenario(cfg, base / "a");
    run_scenario(cfg, base / "b");
    const bool r_same = bytes(base / "a" / "R.csv") == bytes(base / "b" / "R.csv");
    const bool m_same = bytes(base / "a" / "metrics.json") == bytes(base / "b" / "metrics.json");
    const bool present = !bytes(base / "a" / "R.csv").empty();
    return {r_same && m_same && present, std::string("R.csv ") + (r_same ? "identical" : "differs") + ", metrics.json " +
                                             (m_same ? "identical" : "differs")};
}

// ---------------------------------------------------------------- 10: levels

Outcome level_fixtures() {
    const auto alloc = level_allocations(5000, 10, 2.0);
    Index sum = 0;
    for (Index a : alloc) sum += a;
    const bool ok = assign_level(0.0) == 1 && assign_level(1.0) == 10 && assign_level(0.5) == 2 && sum == 5000 &&
                    alloc.front() == 2502;
    return {ok, "levels " + std::to_string(assign_level(0.0)) + "/" + std::to_string(assign_level(1.0)) + "/" +
                    std::to_string(assign_level(0.5)) + ", allocation sum " + std::to_string(sum) + ", first " +
                    std::to_string(alloc.front())};
}

}  // namespace

int main() {
    criterion(1, "lifelong metrics equal brute-force recomputation", 1, metric_oracle);
    criterion(2, "LOF equals brute-force LOF", 5, lof_oracle);
    criterion(3, "KS statistic equals brute-force ECDF gap", 1, ks_oracle);
    criterion(4, "KL optimizers near the 0.1-grid optimum and monotone", 30, kl_near_optimality);
    criterion(5, "MAE analytic gradient equals central differences", 30, mae_gradient);
    criterion(6, "memory bounds over 1000 randomized steps", 60, memory_invariants);
    criterion(7, "full pipeline beats the static baseline on BWT with LL PR-AUC >= 0.7", 600, forgetting_mitigation);
    criterion(8, "full pipeline BWT >= each single-component variant", 1200, ablation);
    criterion(9, "identical runs give byte-identical R.csv and metrics.json", 600, determinism);
    criterion(10, "level mapping and allocation fixtures", 1, level_fixtures);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
