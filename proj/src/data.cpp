#include "citadel/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace citadel {

namespace {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    out.push_back(trim(cell));
    return out;
}

bool parse_double(const std::string& s, double& value) {
    if (s.empty()) return false;
    const char* begin = s.data();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), value);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void TabularDataset::validate() const {
    if (rows() < 1 || cols() < 1) throw std::invalid_argument("dataset: empty dataset");
    if (labels.size() != rows())
        throw std::invalid_argument("dataset: label count does not match row count");
    if (static_cast<Index>(feature_names.size()) != cols())
        throw std::invalid_argument("dataset: feature name count does not match column count");
    if (!samples.allFinite()) throw std::invalid_argument("dataset: non-finite sample value");
    for (Index i = 0; i < labels.size(); ++i)
        if (labels[i] != 0 && labels[i] != 1)
            throw std::invalid_argument("dataset: labels must be 0 or 1");
    std::unordered_set<std::string> seen(feature_names.begin(), feature_names.end());
    if (seen.size() != feature_names.size())
        throw std::invalid_argument("dataset: duplicate feature names");
}

TabularDataset TabularDataset::subset(std::span<const Index> row_indices) const {
    TabularDataset out;
    out.samples.resize(static_cast<Index>(row_indices.size()), cols());
    out.labels.resize(static_cast<Index>(row_indices.size()));
    for (std::size_t i = 0; i < row_indices.size(); ++i) {
        out.samples.row(static_cast<Index>(i)) = samples.row(row_indices[i]);
        out.labels[static_cast<Index>(i)] = labels[row_indices[i]];
    }
    out.feature_names = feature_names;
    return out;
}

TabularDataset TabularDataset::columns(std::span<const Index> col_indices) const {
    TabularDataset out;
    out.samples.resize(rows(), static_cast<Index>(col_indices.size()));
    for (std::size_t j = 0; j < col_indices.size(); ++j) {
        out.samples.col(static_cast<Index>(j)) = samples.col(col_indices[j]);
        out.feature_names.push_back(feature_names[static_cast<std::size_t>(col_indices[j])]);
    }
    out.labels = labels;
    return out;
}

TabularDataset TabularDataset::with_label(int label) const {
    std::vector<Index> idx;
    for (Index i = 0; i < rows(); ++i)
        if (labels[i] == label) idx.push_back(i);
    return subset(idx);
}

TabularDataset concat(std::span<const TabularDataset> parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no datasets");
    Index total = 0;
    for (const auto& p : parts) {
        if (p.feature_names != parts.front().feature_names)
            throw std::invalid_argument("concat: feature names differ");
        total += p.rows();
    }
    TabularDataset out;
    out.feature_names = parts.front().feature_names;
    out.samples.resize(total, parts.front().cols());
    out.labels.resize(total);
    Index at = 0;
    for (const auto& p : parts) {
        out.samples.middleRows(at, p.rows()) = p.samples;
        out.labels.segment(at, p.rows()) = p.labels;
        at += p.rows();
    }
    return out;
}

NormStats NormStats::fit(const RowMatrixXd& samples) {
    if (samples.rows() < 1) throw std::invalid_argument("normalize: empty sample matrix");
    return NormStats{samples.colwise().minCoeff().transpose(), samples.colwise().maxCoeff().transpose()};
}

RowMatrixXd apply_norm(const RowMatrixXd& samples, const NormStats& stats) {
    if (stats.dim() != samples.cols())
        throw std::invalid_argument("normalize: stats dimension " + std::to_string(stats.dim()) +
                                    " does not match data dimension " + std::to_string(samples.cols()));
    RowMatrixXd out(samples.rows(), samples.cols());
    for (Index j = 0; j < samples.cols(); ++j) {
        const double lo = stats.min[j];
        const double range = stats.max[j] - lo;
        if (!(range > 0.0)) {
            out.col(j).setZero();
            continue;
        }
        out.col(j) = ((samples.col(j).array() - lo) / range).cwiseMax(0.0).cwiseMin(1.0);
    }
    return out;
}

std::pair<TabularDataset, NormStats> normalize(const TabularDataset& ds, const std::optional<NormStats>& stats) {
    NormStats s = stats ? *stats : NormStats::fit(ds.samples);
    TabularDataset out{apply_norm(ds.samples, s), ds.labels, ds.feature_names};
    return {std::move(out), std::move(s)};
}

TabularDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const std::string& normal_value) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: " + path.string() + ": missing header row");
    auto header = split_csv_line(line);
    auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end())
        throw std::runtime_error("load_csv: " + path.string() + ": label column '" + label_column + "' not found");
    const auto label_pos = static_cast<std::size_t>(label_it - header.begin());

    TabularDataset ds;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != label_pos) ds.feature_names.push_back(header[c]);
    const auto d = ds.feature_names.size();

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("load_csv: " + path.string() + ": row " + std::to_string(row_number) +
                                     " has " + std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_pos) {
                labels.push_back(cells[c] == normal_value ? 0 : 1);
                continue;
            }
            double v = 0.0;
            if (!parse_double(cells[c], v) || !std::isfinite(v))
                throw std::runtime_error("load_csv: " + path.string() + ": cannot parse '" + cells[c] +
                                         "' at row " + std::to_string(row_number) + ", column " +
                                         std::to_string(c + 1));
            values.push_back(v);
        }
    }
    if (labels.empty()) throw std::runtime_error("load_csv: " + path.string() + ": empty dataset");

    const auto n = static_cast<Index>(labels.size());
    ds.samples = Eigen::Map<RowMatrixXd>(values.data(), n, static_cast<Index>(d));
    ds.labels = Eigen::Map<VectorXi>(labels.data(), n);
    ds.validate();
    return ds;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const TabularDataset& ds, const std::string& label_column) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
    for (const auto& name : ds.feature_names) out << name << ',';
    out << label_column << '\n';
    for (Index i = 0; i < ds.rows(); ++i) {
        for (Index j = 0; j < ds.cols(); ++j) out << format_double(ds.samples(i, j)) << ',';
        out << ds.labels[i] << '\n';
    }
}

void StreamSpec::validate() const {
    if (concept_count < 2) throw std::invalid_argument("stream: concept_count must be >= 2");
    if (samples_per_concept < 20) throw std::invalid_argument("stream: samples_per_concept must be >= 20");
    if (feature_dim < 1) throw std::invalid_argument("stream: feature_dim must be >= 1");
    if (!(drift_magnitude >= 0.0) || !(anomaly_offset >= 0.0))
        throw std::invalid_argument("stream: drift_magnitude and anomaly_offset must be nonnegative");
}

std::vector<ConceptData> gen_synthetic_stream(const StreamSpec& spec) {
    spec.validate();
    const Index d = spec.feature_dim;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const VectorXd drift_dir = VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    VectorXd anomaly_dir(d);
    if (d == 1) {
        anomaly_dir.setOnes();
    } else {
        do {
            for (Index j = 0; j < d; ++j) anomaly_dir[j] = gauss(rng);
            anomaly_dir -= anomaly_dir.dot(drift_dir) * drift_dir;
        } while (anomaly_dir.norm() < 1e-6);
        anomaly_dir.normalize();
    }

    std::vector<std::string> names;
    for (Index j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));

    auto draw = [&](const VectorXd& mean, Index n, int label) {
        TabularDataset ds;
        ds.feature_names = names;
        ds.samples.resize(n, d);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < d; ++j) ds.samples(i, j) = mean[j] + gauss(rng);
        ds.labels = VectorXi::Constant(n, label);
        return ds;
    };

    std::vector<ConceptData> out;
    for (int c = 0; c < spec.concept_count; ++c) {
        const VectorXd mean = static_cast<double>(c) * spec.drift_magnitude * drift_dir;
        ConceptData cd;
        cd.normals = draw(mean, spec.samples_per_concept, 0);
        cd.anomalies = draw(mean + spec.anomaly_offset * anomaly_dir, spec.anomalies_per_concept(), 1);
        out.push_back(std::move(cd));
    }
    return out;
}

}  // namespace citadel
