#pragma once

#include "citadel/data.hpp"
#include "citadel/metrics.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace citadel {

enum class RunMode {
    Citadel,  ///< forgetting + sampling + hierarchical memory
    Static,   ///< train on the first task only
    SsfOnly,  ///< forgetting + sampling over a flat buffer
    HmOnly,   ///< hierarchical memory fed with raw concept data
};

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& name);

struct CsvSource {
    std::vector<std::filesystem::path> paths;
    std::string label_column = "label";
    std::string normal_value = "0";
};

struct ScenarioConfig {
    std::optional<StreamSpec> synthetic;
    std::optional<CsvSource> csv;

    Index concepts = 5;
    Index k_features = 31;
    Index grid_dim = 8;
    double mask_ratio = 0.75;
    int epochs = 20;
    Index latent_dim = 16;
    Index batch_size = 32;
    double learning_rate = 1e-3;
    Index capacity = 5000;
    Index forget_quota = 1000;
    Index sample_quota = 1000;
    Index bins = 20;
    double alpha = 0.05;
    double lambda = 5.5;
    Index levels = 10;
    double gamma = 2.0;
    Index downsize_clusters = 5;
    Index lof_neighbors = 20;
    double lof_threshold = 1.5;
    double variance_threshold = 0.95;
    double train_fraction = 0.7;
    Seed seed = 7;
    RunMode mode = RunMode::Citadel;

    void validate() const;
};

/// Parse a schema-1 config; relative CSV paths resolve against `base_dir`.
ScenarioConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ScenarioConfig& cfg);

/// Error raised inside a pipeline phase; what() reads "[phase] message".
class PhaseError : public std::runtime_error {
public:
    PhaseError(std::string phase, const std::string& message);
    const std::string& phase() const { return phase_; }

private:
    std::string phase_;
};

struct TaskRecord {
    Index task = 0;
    bool drift_checked = false;
    bool drifted = false;
    double severity = 0.0;
    std::vector<double> ks_statistics;
    double ks_critical = 0.0;
    Index level = 1;
    Index forget_quota = 0;
    Index sample_quota = 0;
    double forget_objective = 0.0;
    double sample_objective = 0.0;
    Index memory_size = 0;
    bool trained = false;
    std::vector<double> loss_history;
};

struct RunReport {
    ResultMatrix r;
    LifelongMetrics metrics;
    std::vector<TaskRecord> tasks;
    std::vector<Index> selected_features;
    std::map<std::string, double> seconds;  ///< wall clock per phase, summed over tasks
};

/// Full continual scenario. Writes artifacts into `out_dir` when it is non-empty.
RunReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir = {});

}  // namespace citadel
