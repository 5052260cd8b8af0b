#pragma once

#include "citadel/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace citadel {

/// Numeric samples with binary labels (0 = normal, 1 = attack).
struct TabularDataset {
    RowMatrixXd samples;
    VectorXi labels;
    std::vector<std::string> feature_names;

    Index rows() const { return samples.rows(); }
    Index cols() const { return samples.cols(); }

    /// Throws std::invalid_argument when any invariant is broken.
    void validate() const;

    TabularDataset subset(std::span<const Index> row_indices) const;
    TabularDataset columns(std::span<const Index> col_indices) const;
    /// Rows whose label equals `label`.
    TabularDataset with_label(int label) const;
};

/// Stack datasets with identical feature names.
TabularDataset concat(std::span<const TabularDataset> parts);

/// Per-feature min/max computed from training data.
struct NormStats {
    VectorXd min;
    VectorXd max;

    Index dim() const { return min.size(); }
    static NormStats fit(const RowMatrixXd& samples);
};

/// Min-max scale into [0,1] with clamping; constant features map to 0.
/// When `stats` is empty they are fit on `ds` first.
std::pair<TabularDataset, NormStats> normalize(const TabularDataset& ds,
                                               const std::optional<NormStats>& stats = std::nullopt);

RowMatrixXd apply_norm(const RowMatrixXd& samples, const NormStats& stats);

TabularDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const std::string& normal_value);

/// Writes the features followed by an integer label column.
void write_csv(const std::filesystem::path& path, const TabularDataset& ds,
               const std::string& label_column = "label");

struct StreamSpec {
    int concept_count = 5;
    int samples_per_concept = 400;
    int feature_dim = 8;
    double drift_magnitude = 1.5;
    double anomaly_offset = 6.0;
    Seed seed = 7;

    void validate() const;
    /// Anomalies per concept; a quarter of the normals, rounded up.
    int anomalies_per_concept() const { return (samples_per_concept + 3) / 4; }
};

struct ConceptData {
    TabularDataset normals;
    TabularDataset anomalies;
};

/// Unit-variance Gaussian concepts. Concept i has mean i * drift along a fixed
/// diagonal direction; its anomalies sit `anomaly_offset` away along a seeded
/// direction orthogonal to the drift.
std::vector<ConceptData> gen_synthetic_stream(const StreamSpec& spec);

/// Format a double so that parsing it back yields the same value.
std::string format_double(double v);

}  // namespace citadel
