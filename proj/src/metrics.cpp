#include "citadel/metrics.hpp"

#include "citadel/data.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace citadel {

namespace {

double entry(const ResultMatrix& r, Index i, Index j, const char* who) {
    const double v = r(i, j);
    if (!std::isfinite(v))
        throw std::invalid_argument(std::string(who) + ": R(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                    ") is not populated");
    return v;
}

void require_square(const ResultMatrix& r, const char* who, Index min_tasks) {
    if (r.rows() != r.cols()) throw std::invalid_argument(std::string(who) + ": result matrix must be square");
    if (r.rows() < min_tasks)
        throw std::invalid_argument(std::string(who) + ": need at least " + std::to_string(min_tasks) + " tasks");
}

}  // namespace

ResultMatrix empty_result_matrix(Index tasks) {
    return ResultMatrix::Constant(tasks, tasks, std::numeric_limits<double>::quiet_NaN());
}

double ll_pr_auc(const ResultMatrix& r) {
    require_square(r, "ll_pr_auc", 1);
    double s = 0.0;
    for (Index i = 0; i < r.rows(); ++i)
        for (Index j = 0; j <= i; ++j) s += entry(r, i, j, "ll_pr_auc");
    const auto c = static_cast<double>(r.rows());
    return 2.0 * s / (c * (c + 1.0));
}

double bwt(const ResultMatrix& r) {
    require_square(r, "bwt", 2);
    double s = 0.0;
    for (Index i = 1; i < r.rows(); ++i)
        for (Index j = 0; j < i; ++j) s += entry(r, i, j, "bwt") - entry(r, j, j, "bwt");
    const auto c = static_cast<double>(r.rows());
    return 2.0 * s / (c * (c - 1.0));
}

double fwt(const ResultMatrix& r) {
    require_square(r, "fwt", 2);
    double s = 0.0;
    for (Index i = 0; i < r.rows(); ++i)
        for (Index j = i + 1; j < r.cols(); ++j) s += entry(r, i, j, "fwt");
    const auto c = static_cast<double>(r.rows());
    return 2.0 * s / (c * (c - 1.0));
}

LifelongMetrics lifelong_metrics(const ResultMatrix& r) {
    LifelongMetrics m;
    m.tasks = r.rows();
    m.ll_pr_auc = ll_pr_auc(r);
    if (m.tasks >= 2) {
        m.bwt = bwt(r);
        m.fwt = fwt(r);
    }
    return m;
}

void write_result_matrix(const std::filesystem::path& path, const ResultMatrix& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_result_matrix: cannot open " + path.string());
    for (Index i = 0; i < r.rows(); ++i) {
        for (Index j = 0; j < r.cols(); ++j) {
            if (j) out << ',';
            if (std::isfinite(r(i, j))) out << format_double(r(i, j));
        }
        out << '\n';
    }
}

ResultMatrix read_result_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_result_matrix: cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = std::numeric_limits<double>::quiet_NaN();
            if (!cell.empty()) {
                auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec != std::errc() || ptr != cell.data() + cell.size())
                    throw std::runtime_error("read_result_matrix: cannot parse '" + cell + "' at row " +
                                             std::to_string(rows.size() + 1));
            }
            row.push_back(v);
        }
        if (!line.empty() && line.back() == ',') row.push_back(std::numeric_limits<double>::quiet_NaN());
        rows.push_back(std::move(row));
    }
    const auto c = static_cast<Index>(rows.size());
    if (c == 0) throw std::runtime_error("read_result_matrix: empty file");
    ResultMatrix r(c, c);
    for (Index i = 0; i < c; ++i) {
        if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != c)
            throw std::runtime_error("read_result_matrix: row " + std::to_string(i + 1) + " has " +
                                     std::to_string(rows[static_cast<std::size_t>(i)].size()) + " columns, expected " +
                                     std::to_string(c));
        for (Index j = 0; j < c; ++j) r(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return r;
}

void write_metrics_json(const std::filesystem::path& path, const LifelongMetrics& m) {
    const nlohmann::json j = {{"ll_pr_auc", m.ll_pr_auc}, {"bwt", m.bwt}, {"fwt", m.fwt}, {"c", m.tasks}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_metrics_json: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace citadel
