#include "citadel/imaging.hpp"

#include "citadel/assignment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace citadel {

namespace {

constexpr int kLayoutVersion = 1;

double cross(const RowMatrixXd& p, Index o, Index a, Index b) {
    return (p(a, 0) - p(o, 0)) * (p(b, 1) - p(o, 1)) - (p(a, 1) - p(o, 1)) * (p(b, 0) - p(o, 0));
}

}  // namespace

std::vector<Index> convex_hull(const RowMatrixXd& points) {
    const Index n = points.rows();
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::sort(idx.begin(), idx.end(), [&](Index a, Index b) {
        if (points(a, 0) != points(b, 0)) return points(a, 0) < points(b, 0);
        if (points(a, 1) != points(b, 1)) return points(a, 1) < points(b, 1);
        return a < b;
    });
    idx.erase(std::unique(idx.begin(), idx.end(),
                          [&](Index a, Index b) { return points.row(a) == points.row(b); }),
              idx.end());
    if (idx.size() < 3) return idx;

    std::vector<Index> hull(2 * idx.size());
    std::size_t k = 0;
    for (Index i : idx) {
        while (k >= 2 && cross(points, hull[k - 2], hull[k - 1], i) <= 0) --k;
        hull[k++] = i;
    }
    for (std::size_t t = idx.size() - 1, lower = k + 1; t-- > 0;) {
        const Index i = idx[t];
        while (k >= lower && cross(points, hull[k - 2], hull[k - 1], i) <= 0) --k;
        hull[k++] = i;
    }
    hull.resize(k - 1);
    return hull;
}

RowMatrixXd project_to_grid(const RowMatrixXd& coords, Index grid_dim) {
    const auto hull = convex_hull(coords);
    Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector2d hi = -lo;
    for (Index h : hull) {
        lo = lo.cwiseMin(coords.row(h).transpose());
        hi = hi.cwiseMax(coords.row(h).transpose());
    }
    const double extent = static_cast<double>(grid_dim - 1);
    RowMatrixXd out(coords.rows(), 2);
    for (Index c = 0; c < 2; ++c) {
        const double range = hi[c] - lo[c];
        if (range > 0.0)
            out.col(c) = (coords.col(c).array() - lo[c]) / range * extent;
        else
            out.col(c).setConstant(extent / 2.0);
    }
    return out;
}

std::vector<Cell> assign_cells(const RowMatrixXd& grid_coords, Index grid_dim) {
    const Index k = grid_coords.rows();
    const Index cells = grid_dim * grid_dim;
    if (k > cells)
        throw std::invalid_argument("layout: " + std::to_string(k) + " features do not fit a " +
                                    std::to_string(grid_dim) + "x" + std::to_string(grid_dim) + " grid");
    MatrixXd cost(k, cells);
    for (Index f = 0; f < k; ++f) {
        for (Index r = 0; r < grid_dim; ++r) {
            for (Index c = 0; c < grid_dim; ++c) {
                const double dx = static_cast<double>(c) - grid_coords(f, 0);
                const double dy = static_cast<double>(r) - grid_coords(f, 1);
                cost(f, r * grid_dim + c) = dx * dx + dy * dy;
            }
        }
    }
    const auto assigned = solve_assignment(cost);
    std::vector<Cell> out;
    out.reserve(static_cast<std::size_t>(k));
    for (Index cell : assigned) out.push_back(Cell{cell / grid_dim, cell % grid_dim});
    return out;
}

FeatureLayout fit_layout(const TabularDataset& train_normals_selected, Index grid_dim, const TsneParams& tsne,
                         Seed seed) {
    const Index k = train_normals_selected.cols();
    if (grid_dim < 1) throw std::invalid_argument("layout: grid_dim must be positive");
    if (k > grid_dim * grid_dim)
        throw std::invalid_argument("layout: " + std::to_string(k) + " features do not fit a " +
                                    std::to_string(grid_dim) + "x" + std::to_string(grid_dim) + " grid");
    if (train_normals_selected.rows() < 5) throw std::invalid_argument("layout: need at least 5 training rows");

    FeatureLayout layout;
    layout.grid_dim = grid_dim;
    layout.norm = NormStats::fit(train_normals_selected.samples);
    layout.feature_names = train_normals_selected.feature_names;

    // Each feature is a point whose coordinates are its training column.
    const RowMatrixXd feature_points = train_normals_selected.samples.transpose();
    const RowMatrixXd embedded = tsne_embed(feature_points, tsne, seed);
    layout.cells = assign_cells(project_to_grid(embedded, grid_dim), grid_dim);
    return layout;
}

ImageGrid to_image(std::span<const double> sample, const FeatureLayout& layout) {
    if (static_cast<Index>(sample.size()) != layout.feature_count())
        throw std::invalid_argument("to_image: sample has " + std::to_string(sample.size()) + " features, layout " +
                                    std::to_string(layout.feature_count()));
    ImageGrid image = ImageGrid::Zero(layout.grid_dim, layout.grid_dim);
    for (std::size_t s = 0; s < sample.size(); ++s) {
        const auto f = static_cast<Index>(s);
        const double range = layout.norm.max[f] - layout.norm.min[f];
        double unit = range > 0.0 ? (sample[s] - layout.norm.min[f]) / range : 0.0;
        unit = std::clamp(unit, 0.0, 1.0);
        image(layout.cells[s].row, layout.cells[s].col) = static_cast<std::uint8_t>(std::lround(255.0 * unit));
    }
    return image;
}

ImageGrid to_image(const VectorXd& sample, const FeatureLayout& layout) {
    return to_image(std::span<const double>(sample.data(), static_cast<std::size_t>(sample.size())), layout);
}

std::vector<ImageGrid> to_images(const RowMatrixXd& samples, const FeatureLayout& layout) {
    std::vector<ImageGrid> out;
    out.reserve(static_cast<std::size_t>(samples.rows()));
    for (Index i = 0; i < samples.rows(); ++i) {
        const double* row = samples.data() + i * samples.cols();
        out.push_back(to_image(std::span<const double>(row, static_cast<std::size_t>(samples.cols())), layout));
    }
    return out;
}

void save_layout_json(const std::filesystem::path& path, const FeatureLayout& layout) {
    nlohmann::json j;
    j["version"] = kLayoutVersion;
    j["grid_dim"] = layout.grid_dim;
    auto& features = j["features"] = nlohmann::json::array();
    for (Index f = 0; f < layout.feature_count(); ++f) {
        const auto fs = static_cast<std::size_t>(f);
        features.push_back({{"name", fs < layout.feature_names.size() ? layout.feature_names[fs] : ""},
                            {"row", layout.cells[fs].row},
                            {"col", layout.cells[fs].col},
                            {"min", layout.norm.min[f]},
                            {"max", layout.norm.max[f]}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_layout_json: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

FeatureLayout load_layout_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_layout_json: cannot open " + path.string());
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != kLayoutVersion)
        throw std::runtime_error("load_layout_json: unsupported layout version");
    FeatureLayout layout;
    layout.grid_dim = j.at("grid_dim").get<Index>();
    const auto& features = j.at("features");
    const auto k = static_cast<Index>(features.size());
    layout.norm.min.resize(k);
    layout.norm.max.resize(k);
    for (Index f = 0; f < k; ++f) {
        const auto& e = features[static_cast<std::size_t>(f)];
        layout.feature_names.push_back(e.at("name").get<std::string>());
        layout.cells.push_back(Cell{e.at("row").get<Index>(), e.at("col").get<Index>()});
        layout.norm.min[f] = e.at("min").get<double>();
        layout.norm.max[f] = e.at("max").get<double>();
    }
    return layout;
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
    out << "P2\n" << image.cols() << ' ' << image.rows() << "\n255\n";
    for (Index r = 0; r < image.rows(); ++r) {
        for (Index c = 0; c < image.cols(); ++c) out << (c ? " " : "") << static_cast<int>(image(r, c));
        out << '\n';
    }
}

}  // namespace citadel
