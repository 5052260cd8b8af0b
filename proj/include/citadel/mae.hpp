#pragma once

#include "citadel/imaging.hpp"

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace citadel {

/// True where a pixel is hidden from the encoder and scored by the loss.
using Mask = RowMatrixX<bool>;

/// One named parameter tensor inside the flat parameter vector.
struct ParamTensor {
    std::string name;
    std::vector<Index> dims;
    Index offset = 0;
    Index size = 0;
};

/// Convolutional masked autoencoder for single-channel d'xd' grids.
///
/// encoder: conv(1->8, 3x3, s2, p1) -> act -> conv(8->16, 3x3, s2, p1) -> act -> dense(16*s*s -> latent)
/// decoder: dense(latent -> 16*s*s) -> act -> deconv(16->8) -> act -> deconv(8->1), linear output
///
/// `act` is the tanh-form GELU. Transposed convolutions are the exact adjoints of
/// the stride-2 encoder convolutions, so the reconstruction has the input shape.
/// All parameters live in one contiguous vector, tensors in the order listed by tensors().
class MaeModel {
public:
    static constexpr Index kConv1Channels = 8;
    static constexpr Index kConv2Channels = 16;

    MaeModel() = default;
    MaeModel(Index grid_dim, Index latent_dim);

    Index grid_dim() const { return grid_dim_; }
    Index latent_dim() const { return latent_dim_; }
    /// Spatial side after the first and second stride-2 convolution.
    Index mid_dim() const { return mid_dim_; }
    Index bottleneck_dim() const { return bottleneck_dim_; }
    /// Width of the flattened feature map feeding the latent dense layer.
    Index dense_input_size() const { return kConv2Channels * bottleneck_dim_ * bottleneck_dim_; }

    VectorXd& parameters() { return params_; }
    const VectorXd& parameters() const { return params_; }
    const std::vector<ParamTensor>& tensors() const { return tensors_; }
    const ParamTensor& tensor(const std::string& name) const;

    Eigen::Map<VectorXd> view(const ParamTensor& t) { return {params_.data() + t.offset, t.size}; }
    Eigen::Map<const VectorXd> view(const ParamTensor& t) const { return {params_.data() + t.offset, t.size}; }

private:
    Index grid_dim_ = 0;
    Index latent_dim_ = 0;
    Index mid_dim_ = 0;
    Index bottleneck_dim_ = 0;
    VectorXd params_;
    std::vector<ParamTensor> tensors_;
};

/// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
MaeModel init_mae(Index grid_dim, Index latent_dim, Seed seed);

struct TrainConfig {
    int epochs = 20;
    Index batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double mask_ratio = 0.75;
    Seed seed = 0;

    void validate() const;
};

struct TrainResult {
    MaeModel model;
    std::vector<double> loss_history;  ///< mean masked MSE per epoch
};

/// Number of pixels a mask of `ratio` hides on a grid with `pixel_count` cells.
Index masked_count(double ratio, Index pixel_count);

/// Zero out floor(ratio * d'^2) distinct uniformly chosen pixels.
std::pair<ImageGrid, Mask> mask_sample(const ImageGrid& image, double ratio, std::mt19937_64& rng);

/// Mean squared error over masked entries only.
double masked_mse(const RowMatrixXd& reconstruction, const RowMatrixXd& original, const Mask& mask);

/// Pixels rescaled to [0,1].
RowMatrixXd to_unit(const ImageGrid& image);

/// Full reconstruction of a (possibly masked) unit-scale grid.
RowMatrixXd reconstruct(const MaeModel& model, const RowMatrixXd& input);

/// Mean masked MSE over the batch; the input of each sample is its original
/// with masked pixels zeroed. Writes d(loss)/d(parameters) into `gradient` when given.
double batch_loss(const MaeModel& model, std::span<const RowMatrixXd> originals, std::span<const Mask> masks,
                  VectorXd* gradient = nullptr);

/// Adam on masked MSE. Masks are redrawn every epoch; shuffle and mask streams
/// come from cfg.seed. Throws std::runtime_error on a non-finite loss.
TrainResult train(MaeModel model, std::span<const ImageGrid> images, const TrainConfig& cfg);

VectorXd encode(const MaeModel& model, const ImageGrid& image);
RowMatrixXd encode_all(const MaeModel& model, std::span<const ImageGrid> images);

/// Binary snapshot: "CTDL", u32 version, u32 grid_dim, u32 latent_dim, u32 tensor count,
/// then per tensor u32 rank, u32 dims[rank], little-endian f64 values (row-major).
void save_model(const std::filesystem::path& path, const MaeModel& model);
MaeModel load_model(const std::filesystem::path& path);

void write_loss_csv(const std::filesystem::path& path, std::span<const double> losses);

}  // namespace citadel
