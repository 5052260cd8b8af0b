// Command-line front end: run scenarios, generate data, score result matrices,
// dump image grids and summarize memory audits.

#include "citadel/data.hpp"
#include "citadel/imaging.hpp"
#include "citadel/metrics.hpp"
#include "citadel/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace citadel;

namespace {

struct Tagged : std::runtime_error {
    Tagged(const std::string& phase, const std::string& what) : std::runtime_error("[" + phase + "] " + what) {}
};

template <typename F>
void tagged(const std::string& phase, F&& body) {
    try {
        body();
    } catch (const PhaseError&) {
        throw;
    } catch (const Tagged&) {
        throw;
    } catch (const std::exception& e) {
        throw Tagged(phase, e.what());
    }
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

void cmd_run(const fs::path& config, const fs::path& out, std::optional<Seed> seed, bool no_cl) {
    ScenarioConfig cfg;
    tagged("config", [&] {
        cfg = load_config(config);
        if (seed) cfg.seed = *seed;
        if (no_cl) cfg.mode = RunMode::Static;
    });
    const auto report = run_scenario(cfg, out);
    std::cout << "ll_pr_auc " << format_double(report.metrics.ll_pr_auc) << "\nbwt " << format_double(report.metrics.bwt)
              << "\nfwt " << format_double(report.metrics.fwt) << "\nwrote " << out.string() << '\n';
}

void cmd_gen_data(StreamSpec spec, const fs::path& out) {
    tagged("gen-data", [&] {
        const auto concepts = gen_synthetic_stream(spec);
        fs::create_directories(out);
        for (std::size_t i = 0; i < concepts.size(); ++i) {
            const TabularDataset parts[] = {concepts[i].normals, concepts[i].anomalies};
            const auto path = out / ("concept" + std::to_string(i + 1) + ".csv");
            write_csv(path, concat(parts));
            std::cout << path.string() << '\n';
        }
    });
}

void cmd_metrics(const fs::path& matrix) {
    tagged("metrics", [&] {
        const auto m = lifelong_metrics(read_result_matrix(matrix));
        const nlohmann::json j = {{"ll_pr_auc", m.ll_pr_auc}, {"bwt", m.bwt}, {"fwt", m.fwt}, {"c", m.tasks}};
        std::cout << j.dump(2) << '\n';
    });
}

void cmd_transform(const fs::path& run_dir, const fs::path& data, const fs::path& out, Index limit,
                   const std::string& label_column, const std::string& normal_value) {
    tagged("transform", [&] {
        const auto layout = load_layout_json(run_dir / "layout.json");
        const auto norm = read_json(run_dir / "normalization.json");
        const auto names = norm.at("feature_names").get<std::vector<std::string>>();
        NormStats stats;
        const auto lo = norm.at("min").get<std::vector<double>>();
        const auto hi = norm.at("max").get<std::vector<double>>();
        stats.min = Eigen::Map<const VectorXd>(lo.data(), static_cast<Index>(lo.size()));
        stats.max = Eigen::Map<const VectorXd>(hi.data(), static_cast<Index>(hi.size()));

        auto ds = load_csv(data, label_column, normal_value);
        if (ds.feature_names != names) throw std::runtime_error("data columns do not match the run's features");
        ds = normalize(ds, stats).first;
        std::vector<Index> cols;
        for (const auto& f : layout.feature_names)
            cols.push_back(static_cast<Index>(std::find(names.begin(), names.end(), f) - names.begin()));
        const auto selected = ds.columns(cols);

        fs::create_directories(out);
        const Index n = limit > 0 ? std::min(limit, selected.rows()) : selected.rows();
        for (Index i = 0; i < n; ++i) {
            const VectorXd row = selected.samples.row(i).transpose();
            write_pgm(out / ("sample" + std::to_string(i) + "_label" + std::to_string(ds.labels[i]) + ".pgm"),
                      to_image(row, layout));
        }
        std::cout << "wrote " << n << " images to " << out.string() << '\n';
    });
}

void cmd_inspect_memory(const fs::path& audit) {
    tagged("inspect-memory", [&] {
        const auto j = read_json(audit);
        const Index capacity = j.at("capacity").get<Index>();
        const Index total = j.at("total").get<Index>();
        std::cout << "task " << j.at("task").get<Index>() << ": " << total << " / " << capacity << " entries\n";
        bool ok = total <= capacity;
        for (const auto& lv : j.at("levels")) {
            const Index alloc = lv.at("allocation").get<Index>();
            const Index size = lv.at("size").get<Index>();
            ok = ok && size <= alloc + 1;
            std::cout << "  level " << lv.at("level").get<Index>() << ": " << size << " / " << alloc;
            for (const auto& b : lv.at("buffers"))
                std::cout << "  [task " << b.at("task").get<Index>() << (b.at("marked").get<bool>() ? " marked" : "")
                          << ": " << b.at("count").get<Index>() << "]";
            std::cout << '\n';
        }
        std::cout << (ok ? "invariants hold\n" : "invariants VIOLATED\n");
        if (!ok) throw std::runtime_error("capacity or allocation bound violated");
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual anomaly-detection laboratory"};
    app.require_subcommand(1);

    fs::path config, out;
    std::optional<Seed> seed;
    bool no_cl = false;
    auto* run = app.add_subcommand("run", "Run a continual scenario");
    run->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--seed", seed, "Override the master seed");
    run->add_flag("--no-cl", no_cl, "Static baseline: train on the first task only");

    StreamSpec spec;
    fs::path gen_out;
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic drifting stream, one CSV per concept");
    gen->add_option("--concepts", spec.concept_count)->default_val(spec.concept_count);
    gen->add_option("--samples", spec.samples_per_concept, "Normal samples per concept")->default_val(spec.samples_per_concept);
    gen->add_option("--dim", spec.feature_dim)->default_val(spec.feature_dim);
    gen->add_option("--seed", spec.seed)->default_val(spec.seed);
    gen->add_option("--drift", spec.drift_magnitude)->default_val(spec.drift_magnitude);
    gen->add_option("--offset", spec.anomaly_offset, "Anomaly offset")->default_val(spec.anomaly_offset);
    gen->add_option("--out", gen_out)->required();

    fs::path matrix;
    auto* met = app.add_subcommand("metrics", "Lifelong metrics of a result matrix CSV");
    met->add_option("--matrix", matrix)->required()->check(CLI::ExistingFile);

    fs::path run_dir, data, img_out;
    Index limit = 0;
    std::string label_column = "label", normal_value = "0";
    auto* tr = app.add_subcommand("transform", "Render samples as PGM grids using a run's frozen layout");
    tr->add_option("--run", run_dir, "Directory of a finished run")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--data", data, "CSV with the run's feature columns")->required()->check(CLI::ExistingFile);
    tr->add_option("--out", img_out)->required();
    tr->add_option("--limit", limit, "Render at most this many rows (0 = all)");
    tr->add_option("--label-column", label_column)->default_val(label_column);
    tr->add_option("--normal-value", normal_value)->default_val(normal_value);

    fs::path audit;
    auto* insp = app.add_subcommand("inspect-memory", "Summarize a memory audit snapshot");
    insp->add_option("--audit", audit)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run) cmd_run(config, out, seed, no_cl);
        else if (*gen) {
            tagged("gen-data", [&] { spec.validate(); });
            cmd_gen_data(spec, gen_out);
        } else if (*met) cmd_metrics(matrix);
        else if (*tr) cmd_transform(run_dir, data, img_out, limit, label_column, normal_value);
        else if (*insp) cmd_inspect_memory(audit);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
