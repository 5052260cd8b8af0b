#include "citadel/runner.hpp"

#include "citadel/concepts.hpp"
#include "citadel/features.hpp"
#include "citadel/imaging.hpp"
#include "citadel/mae.hpp"
#include "citadel/memory.hpp"
#include "citadel/novelty.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace citadel {

using nlohmann::json;

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Citadel: return "citadel";
        case RunMode::Static: return "static";
        case RunMode::SsfOnly: return "ssf_only";
        case RunMode::HmOnly: return "hm_only";
    }
    return "citadel";
}

RunMode parse_run_mode(const std::string& name) {
    if (name == "citadel") return RunMode::Citadel;
    if (name == "static") return RunMode::Static;
    if (name == "ssf_only") return RunMode::SsfOnly;
    if (name == "hm_only") return RunMode::HmOnly;
    throw std::invalid_argument("unknown mode '" + name + "' (expected citadel, static, ssf_only or hm_only)");
}

void ScenarioConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw std::invalid_argument("config: " + what);
    };
    require(synthetic.has_value() != csv.has_value(), "exactly one data source (synthetic or csv) is required");
    if (synthetic) synthetic->validate();
    if (csv) require(!csv->paths.empty(), "csv source needs at least one path");
    require(concepts >= 1, "concepts must be >= 1");
    require(grid_dim >= 4, "grid_dim must be >= 4");
    require(k_features >= 1, "k_features must be >= 1");
    require(k_features <= grid_dim * grid_dim, "k_features must not exceed grid_dim^2");
    require(mask_ratio > 0.0 && mask_ratio < 1.0, "mask_ratio must be in (0,1)");
    require(epochs >= 1, "epochs must be >= 1");
    require(latent_dim >= 1, "latent_dim must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(capacity >= 1, "capacity must be >= 1");
    require(forget_quota >= 1 && forget_quota < capacity, "forget_quota must be in [1, capacity)");
    require(sample_quota >= 1 && sample_quota < capacity, "sample_quota must be in [1, capacity)");
    require(bins >= 1, "bins must be >= 1");
    require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
    require(lambda > 0.0, "lambda must be positive");
    require(levels >= 1, "levels must be >= 1");
    require(gamma > 1.0, "gamma must be > 1");
    require(downsize_clusters >= 1, "downsize_clusters must be >= 1");
    require(lof_neighbors >= 1, "lof_neighbors must be >= 1");
    require(variance_threshold > 0.0 && variance_threshold <= 1.0, "variance_threshold must be in (0,1]");
    require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must be in (0,1)");
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

const std::set<std::string> kTopLevelKeys = {
    "schema",  "source",        "concepts",      "k_features",   "grid_dim",      "mask_ratio",
    "epochs",  "latent_dim",    "batch_size",    "learning_rate", "capacity",     "forget_quota",
    "sample_quota", "bins",     "alpha",         "lambda",        "levels",       "gamma",
    "downsize_clusters", "lof_neighbors", "lof_threshold", "variance_threshold", "train_fraction", "seed", "mode"};

}  // namespace

ScenarioConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    if (!j.contains("schema") || j.at("schema") != 1) throw std::invalid_argument("config: \"schema\": 1 is required");
    for (const auto& [key, value] : j.items())
        if (!kTopLevelKeys.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");

    ScenarioConfig cfg;
    try {
        if (!j.contains("source")) throw std::invalid_argument("config: missing \"source\"");
        const auto& src = j.at("source");
        const auto type = src.at("type").get<std::string>();
        if (type == "synthetic") {
            StreamSpec s;
            read_opt(src, "concepts", s.concept_count);
            read_opt(src, "samples_per_concept", s.samples_per_concept);
            read_opt(src, "feature_dim", s.feature_dim);
            read_opt(src, "drift_magnitude", s.drift_magnitude);
            read_opt(src, "anomaly_offset", s.anomaly_offset);
            read_opt(src, "seed", s.seed);
            cfg.synthetic = s;
        } else if (type == "csv") {
            CsvSource c;
            for (const auto& p : src.at("paths")) {
                std::filesystem::path path = p.get<std::string>();
                c.paths.push_back(path.is_relative() && !base_dir.empty() ? base_dir / path : path);
            }
            read_opt(src, "label_column", c.label_column);
            read_opt(src, "normal_value", c.normal_value);
            cfg.csv = c;
        } else {
            throw std::invalid_argument("config: unknown source type '" + type + "'");
        }
        read_opt(j, "concepts", cfg.concepts);
        read_opt(j, "k_features", cfg.k_features);
        read_opt(j, "grid_dim", cfg.grid_dim);
        read_opt(j, "mask_ratio", cfg.mask_ratio);
        read_opt(j, "epochs", cfg.epochs);
        read_opt(j, "latent_dim", cfg.latent_dim);
        read_opt(j, "batch_size", cfg.batch_size);
        read_opt(j, "learning_rate", cfg.learning_rate);
        read_opt(j, "capacity", cfg.capacity);
        read_opt(j, "forget_quota", cfg.forget_quota);
        read_opt(j, "sample_quota", cfg.sample_quota);
        read_opt(j, "bins", cfg.bins);
        read_opt(j, "alpha", cfg.alpha);
        read_opt(j, "lambda", cfg.lambda);
        read_opt(j, "levels", cfg.levels);
        read_opt(j, "gamma", cfg.gamma);
        read_opt(j, "downsize_clusters", cfg.downsize_clusters);
        read_opt(j, "lof_neighbors", cfg.lof_neighbors);
        read_opt(j, "lof_threshold", cfg.lof_threshold);
        read_opt(j, "variance_threshold", cfg.variance_threshold);
        read_opt(j, "train_fraction", cfg.train_fraction);
        read_opt(j, "seed", cfg.seed);
        if (j.contains("mode")) cfg.mode = parse_run_mode(j.at("mode").get<std::string>());
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["schema"] = 1;
    if (cfg.synthetic) {
        const auto& s = *cfg.synthetic;
        j["source"] = {{"type", "synthetic"},
                       {"concepts", s.concept_count},
                       {"samples_per_concept", s.samples_per_concept},
                       {"feature_dim", s.feature_dim},
                       {"drift_magnitude", s.drift_magnitude},
                       {"anomaly_offset", s.anomaly_offset},
                       {"seed", s.seed}};
    } else if (cfg.csv) {
        std::vector<std::string> paths;
        for (const auto& p : cfg.csv->paths) paths.push_back(p.generic_string());
        j["source"] = {{"type", "csv"},
                       {"paths", paths},
                       {"label_column", cfg.csv->label_column},
                       {"normal_value", cfg.csv->normal_value}};
    }
    j["concepts"] = cfg.concepts;
    j["k_features"] = cfg.k_features;
    j["grid_dim"] = cfg.grid_dim;
    j["mask_ratio"] = cfg.mask_ratio;
    j["epochs"] = cfg.epochs;
    j["latent_dim"] = cfg.latent_dim;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["capacity"] = cfg.capacity;
    j["forget_quota"] = cfg.forget_quota;
    j["sample_quota"] = cfg.sample_quota;
    j["bins"] = cfg.bins;
    j["alpha"] = cfg.alpha;
    j["lambda"] = cfg.lambda;
    j["levels"] = cfg.levels;
    j["gamma"] = cfg.gamma;
    j["downsize_clusters"] = cfg.downsize_clusters;
    j["lof_neighbors"] = cfg.lof_neighbors;
    j["lof_threshold"] = cfg.lof_threshold;
    j["variance_threshold"] = cfg.variance_threshold;
    j["train_fraction"] = cfg.train_fraction;
    j["seed"] = cfg.seed;
    j["mode"] = to_string(cfg.mode);
    return j.dump(2);
}

PhaseError::PhaseError(std::string phase, const std::string& message)
    : std::runtime_error("[" + phase + "] " + message), phase_(std::move(phase)) {}

namespace {

class PhaseClock {
public:
    explicit PhaseClock(std::map<std::string, double>& sink) : sink_(sink) {}

    template <typename F>
    auto operator()(const std::string& phase, const std::string& context, F&& body) {
        const auto start = std::chrono::steady_clock::now();
        struct Charge {
            std::map<std::string, double>& sink;
            const std::string& phase;
            std::chrono::steady_clock::time_point start;
            ~Charge() {
                sink[phase] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            }
        } charge{sink_, phase, start};
        try {
            return body();
        } catch (const PhaseError&) {
            throw;
        } catch (const std::exception& e) {
            throw PhaseError(context.empty() ? phase : context + "/" + phase, e.what());
        }
    }

private:
    std::map<std::string, double>& sink_;
};

struct Population {
    TabularDataset normals;
    TabularDataset anomalies;
    NormStats stats;
};

Population load_population(const ScenarioConfig& cfg) {
    Population pop;
    std::vector<TabularDataset> normals;
    std::vector<TabularDataset> anomalies;
    if (cfg.synthetic) {
        for (auto& c : gen_synthetic_stream(*cfg.synthetic)) {
            normals.push_back(std::move(c.normals));
            anomalies.push_back(std::move(c.anomalies));
        }
    } else {
        for (const auto& path : cfg.csv->paths) {
            const auto ds = load_csv(path, cfg.csv->label_column, cfg.csv->normal_value);
            normals.push_back(ds.with_label(0));
            anomalies.push_back(ds.with_label(1));
        }
    }
    pop.normals = concat(normals);
    pop.anomalies = concat(anomalies);
    if (pop.normals.rows() == 0 || pop.anomalies.rows() == 0)
        throw std::invalid_argument("data needs both normal and anomalous rows");

    // Min-max scaling over the whole ingested stream, before any concept split.
    const TabularDataset all[] = {pop.normals, pop.anomalies};
    pop.stats = NormStats::fit(concat(all).samples);
    pop.normals = normalize(pop.normals, pop.stats).first;
    pop.anomalies = normalize(pop.anomalies, pop.stats).first;
    return pop;
}

struct TestSet {
    RowMatrixXd samples;
    VectorXi labels;
};

TestSet make_test_set(const Population& pop, const Task& task) {
    const auto n = pop.normals.subset(task.normal_test);
    const auto a = pop.anomalies.subset(task.anomaly_test);
    TestSet t;
    t.samples.resize(n.rows() + a.rows(), n.cols());
    t.samples << n.samples, a.samples;
    t.labels.resize(n.rows() + a.rows());
    t.labels << VectorXi::Zero(n.rows()), VectorXi::Ones(a.rows());
    return t;
}

RowMatrixXd select_columns(const RowMatrixXd& x, const std::vector<Index>& cols) {
    RowMatrixXd out(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = x.col(cols[c]);
    return out;
}

// Rows in first-occurrence order with exact repeats removed.
RowMatrixXd distinct_rows(const RowMatrixXd& x) {
    std::vector<Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    auto less = [&](Index a, Index b) {
        for (Index j = 0; j < x.cols(); ++j)
            if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
        return a < b;
    };
    std::sort(order.begin(), order.end(), less);
    std::vector<bool> keep(static_cast<std::size_t>(x.rows()), true);
    for (std::size_t i = 1; i < order.size(); ++i)
        if (x.row(order[i]) == x.row(order[i - 1])) keep[static_cast<std::size_t>(order[i])] = false;
    std::vector<Index> rows;
    for (Index i = 0; i < x.rows(); ++i)
        if (keep[static_cast<std::size_t>(i)]) rows.push_back(i);
    return x(rows, Eigen::all);
}

json record_to_json(const TaskRecord& r) {
    json j = {{"task", r.task + 1},
              {"drift_checked", r.drift_checked},
              {"level", r.level},
              {"forget_quota", r.forget_quota},
              {"sample_quota", r.sample_quota},
              {"memory_size", r.memory_size},
              {"trained", r.trained},
              {"loss_history", r.loss_history}};
    if (r.drift_checked) {
        j["drifted"] = r.drifted;
        j["severity"] = r.severity;
        j["ks_statistics"] = r.ks_statistics;
        j["ks_critical"] = r.ks_critical;
    }
    if (r.forget_quota > 0) j["forget_objective"] = r.forget_objective;
    if (r.sample_quota > 0) j["sample_objective"] = r.sample_objective;
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << text << '\n';
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    RunReport report;
    PhaseClock phase(report.seconds);
    const bool write = !out_dir.empty();
    if (write) {
        phase("output", "", [&] {
            std::filesystem::create_directories(out_dir / "memory_audit");
            return 0;
        });
    }

    const auto pop = phase("ingest", "", [&] { return load_population(cfg); });
    const Index c = cfg.concepts;
    if (write) {
        phase("output", "", [&] {
            const json norm = {{"feature_names", pop.normals.feature_names},
                               {"min", std::vector<double>(pop.stats.min.begin(), pop.stats.min.end())},
                               {"max", std::vector<double>(pop.stats.max.begin(), pop.stats.max.end())}};
            write_text(out_dir / "normalization.json", norm.dump(2));
            return 0;
        });
    }

    const auto tasks = phase("concepts", "", [&] {
        const auto cs = cluster_concepts(pop.normals, pop.anomalies, c, derive_seed(cfg.seed, "concepts"));
        const auto pairs = match_concepts(cs);
        std::vector<Task> out;
        for (Index t = 0; t < c; ++t)
            out.push_back(split_task(cs, pairs[static_cast<std::size_t>(t)], cfg.train_fraction,
                                     derive_seed(cfg.seed, "split", static_cast<std::uint64_t>(t)), t));
        if (write) write_task_manifest(out_dir / "tasks.json", out);
        return out;
    });

    std::vector<TestSet> tests;
    for (const auto& t : tasks) tests.push_back(make_test_set(pop, t));

    // Ranking and layout are fit on the first task's benign training rows and then frozen.
    const auto first_train = pop.normals.subset(tasks[0].normal_train);
    const auto selected = phase("features", "task 1", [&] {
        const auto [pca, ranking] = rank_features(first_train, cfg.variance_threshold);
        const Index k = std::min(cfg.k_features, first_train.cols());
        if (write) write_ranking_csv(out_dir / "ranking.csv", ranking, first_train.feature_names);
        return top_k_indices(ranking, k);
    });
    report.selected_features = selected;
    const auto layout = phase("layout", "task 1", [&] {
        const auto ds = first_train.columns(selected);
        auto l = fit_layout(ds, cfg.grid_dim, TsneParams::for_points(ds.cols()), derive_seed(cfg.seed, "layout"));
        if (write) save_layout_json(out_dir / "layout.json", l);
        return l;
    });
    auto images_of = [&](const RowMatrixXd& x) { return to_images(select_columns(x, selected), layout); };

    const MemoryParams mem_params{cfg.capacity, cfg.levels, cfg.gamma, cfg.downsize_clusters};
    HierarchicalMemory memory(mem_params);
    TempBuffer flat;  // ssf_only replay buffer
    const OptimizerParams opt;

    MaeModel model = init_mae(cfg.grid_dim, cfg.latent_dim, derive_seed(cfg.seed, "mae/init"));
    report.r = empty_result_matrix(c);

    for (Index t = 0; t < c; ++t) {
        const std::string ctx = "task " + std::to_string(t + 1);
        const auto ut = static_cast<std::uint64_t>(t);
        TaskRecord rec;
        rec.task = t;
        const RowMatrixXd x_new = pop.normals.subset(tasks[static_cast<std::size_t>(t)].normal_train).samples;
        const std::vector<Index> new_origins(static_cast<std::size_t>(x_new.rows()), t);

        if (cfg.mode == RunMode::Static && t > 0) {
            rec.memory_size = memory.size();
            report.r.row(t) = report.r.row(0);
            report.tasks.push_back(std::move(rec));
            continue;
        }

        phase("memory", ctx, [&] {
            const Seed mseed = derive_seed(cfg.seed, "memory", ut);
            if (t == 0) {
                TempBuffer temp;
                temp.append(x_new, new_origins);
                if (cfg.mode == RunMode::SsfOnly) {
                    const auto keep = downsize(temp.samples, std::min(cfg.capacity, temp.size()), cfg.downsize_clusters, mseed);
                    flat.append(temp.samples(keep, Eigen::all), std::vector<Index>(keep.size(), t));
                } else {
                    memory.integrate(temp, 1, t, mseed);
                }
            } else {
                const RowMatrixXd stored = cfg.mode == RunMode::SsfOnly ? flat.samples : memory.flatten();
                const auto drift = detect_drift(x_new, stored, cfg.alpha);
                rec.drift_checked = true;
                rec.drifted = drift.drifted;
                rec.severity = drift.severity;
                rec.ks_statistics.assign(drift.statistics.begin(), drift.statistics.end());
                rec.ks_critical = drift.critical_value;
                rec.level = assign_level(drift.severity, cfg.lambda, 1, cfg.levels);

                TempBuffer temp = cfg.mode == RunMode::SsfOnly ? flat : memory.make_temp();
                if (cfg.mode == RunMode::HmOnly) {
                    temp.append(x_new, new_origins);
                } else {
                    rec.forget_quota = std::min(cfg.forget_quota, temp.size() - 1);
                    if (rec.forget_quota >= 1) {
                        const auto f = strategic_forget(temp, x_new, cfg.bins, rec.forget_quota, opt);
                        rec.forget_objective = f.objective_history.back();
                    }
                    rec.sample_quota = std::min(cfg.sample_quota, x_new.rows());
                    const auto s = strategic_sample(temp, x_new, cfg.bins, rec.sample_quota, t, opt);
                    rec.sample_objective = s.objective_history.back();
                }
                if (cfg.mode == RunMode::SsfOnly) {
                    if (temp.size() > cfg.capacity) {
                        const auto keep = downsize(temp.samples, cfg.capacity, cfg.downsize_clusters, mseed);
                        TempBuffer kept;
                        std::vector<Index> origins;
                        for (Index i : keep) origins.push_back(temp.origins[static_cast<std::size_t>(i)]);
                        kept.append(temp.samples(keep, Eigen::all), origins);
                        temp = std::move(kept);
                    }
                    flat = std::move(temp);
                } else {
                    memory.integrate(temp, rec.level, t, mseed);
                }
            }
            if (cfg.mode != RunMode::SsfOnly) {
                memory.check_invariants();
                if (write) {
                    const auto stem = "task" + std::to_string(t + 1);
                    write_memory_audit(out_dir / "memory_audit" / (stem + ".json"),
                                       out_dir / "memory_audit" / (stem + ".csv"), memory, t);
                }
            } else if (flat.size() > cfg.capacity) {
                throw std::logic_error("flat buffer exceeds capacity");
            }
            rec.memory_size = cfg.mode == RunMode::SsfOnly ? flat.size() : memory.size();
            return 0;
        });

        const RowMatrixXd train_rows = distinct_rows(cfg.mode == RunMode::SsfOnly ? flat.samples : memory.flatten());
        const auto lof = phase("train", ctx, [&] {
            const auto images = images_of(train_rows);
            TrainConfig tc;
            tc.epochs = cfg.epochs;
            tc.batch_size = cfg.batch_size;
            tc.learning_rate = cfg.learning_rate;
            tc.mask_ratio = cfg.mask_ratio;
            tc.seed = derive_seed(cfg.seed, "mae/train", ut);
            auto result = train(std::move(model), images, tc);
            model = std::move(result.model);
            rec.loss_history = std::move(result.loss_history);
            rec.trained = true;
            if (write) {
                save_model(out_dir / ("model_task" + std::to_string(t + 1) + ".bin"), model);
                write_loss_csv(out_dir / ("loss_task" + std::to_string(t + 1) + ".csv"), rec.loss_history);
            }
            const auto latents = encode_all(model, images);
            return fit_lof(latents, std::min(cfg.lof_neighbors, latents.rows() - 1), cfg.lof_threshold);
        });

        phase("evaluate", ctx, [&] {
            for (Index j = 0; j < c; ++j) {
                const auto& test = tests[static_cast<std::size_t>(j)];
                const auto scores = score_all(lof, encode_all(model, images_of(test.samples)));
                report.r(t, j) = pr_auc(scores, test.labels);
            }
            return 0;
        });
        report.tasks.push_back(std::move(rec));
    }

    report.metrics = phase("metrics", "", [&] { return lifelong_metrics(report.r); });

    if (write) {
        phase("output", "", [&] {
            write_result_matrix(out_dir / "R.csv", report.r);
            write_metrics_json(out_dir / "metrics.json", report.metrics);
            json rep;
            rep["schema"] = 1;
            rep["config"] = json::parse(config_to_json(cfg));
            rep["mode"] = to_string(cfg.mode);
            rep["anomalies_in_training"] = false;
            rep["training_population"] = "benign training rows only; anomaly training splits stay in tasks.json";
            std::vector<std::string> names;
            for (Index f : selected) names.push_back(pop.normals.feature_names[static_cast<std::size_t>(f)]);
            rep["selected_features"] = names;
            rep["tasks"] = json::array();
            for (const auto& r : report.tasks) rep["tasks"].push_back(record_to_json(r));
            std::vector<std::vector<double>> rows;
            for (Index i = 0; i < c; ++i) rows.emplace_back(report.r.row(i).begin(), report.r.row(i).end());
            rep["R"] = rows;
            rep["metrics"] = {{"ll_pr_auc", report.metrics.ll_pr_auc},
                              {"bwt", report.metrics.bwt},
                              {"fwt", report.metrics.fwt},
                              {"c", report.metrics.tasks}};
            write_text(out_dir / "report.json", rep.dump(2));
            return 0;
        });
        write_text(out_dir / "timing.json", json(report.seconds).dump(2));
    }
    return report;
}

}  // namespace citadel
