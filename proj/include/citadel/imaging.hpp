#pragma once

#include "citadel/data.hpp"
#include "citadel/tsne.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace citadel {

/// Grayscale grid, intensities 0..255; cells outside the layout stay 0.
using ImageGrid = RowMatrixX<std::uint8_t>;

struct Cell {
    Index row = 0;
    Index col = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

/// Frozen feature -> cell map with per-feature intensity scaling.
struct FeatureLayout {
    Index grid_dim = 0;
    std::vector<Cell> cells;                 ///< one per selected feature, all distinct
    NormStats norm;                          ///< fit on the training rows
    std::vector<std::string> feature_names;  ///< selected features, in column order

    Index feature_count() const { return static_cast<Index>(cells.size()); }
};

/// Counter-clockwise hull (Andrew's monotone chain); collinear points dropped.
/// Returns indices into `points` (n x 2).
std::vector<Index> convex_hull(const RowMatrixXd& points);

/// Scale 2-D feature coordinates onto [0, grid_dim-1]^2 using the bounding box
/// of their convex hull. Columns: x -> grid column, y -> grid row.
RowMatrixXd project_to_grid(const RowMatrixXd& coords, Index grid_dim);

/// Injective minimum total squared distance map from projected coordinates to cells.
std::vector<Cell> assign_cells(const RowMatrixXd& grid_coords, Index grid_dim);

FeatureLayout fit_layout(const TabularDataset& train_normals_selected, Index grid_dim, const TsneParams& tsne,
                         Seed seed);

ImageGrid to_image(std::span<const double> sample, const FeatureLayout& layout);
ImageGrid to_image(const VectorXd& sample, const FeatureLayout& layout);
std::vector<ImageGrid> to_images(const RowMatrixXd& samples, const FeatureLayout& layout);

void save_layout_json(const std::filesystem::path& path, const FeatureLayout& layout);
FeatureLayout load_layout_json(const std::filesystem::path& path);

/// Plain-text PGM (P2), maxval 255.
void write_pgm(const std::filesystem::path& path, const ImageGrid& image);

}  // namespace citadel
