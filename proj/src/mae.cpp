#include "citadel/mae.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace citadel {

namespace {

constexpr Index kKernel = 3;
constexpr std::uint32_t kSnapshotVersion = 1;
constexpr char kMagic[4] = {'C', 'T', 'D', 'L'};

Index strided_size(Index s) { return (s - 1) / 2 + 1; }

// tanh-form GELU and its derivative.
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu(double x) {
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return 0.5 * x * (1.0 + t);
}

inline double gelu_grad(double x) {
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

// Stride-2, padding-1, 3x3 convolution. W is [cout, cin, 3, 3].
void conv_forward(const double* in, Index cin, Index sin, const double* w, const double* b, Index cout, Index sout,
                  double* out) {
    for (Index oc = 0; oc < cout; ++oc) {
        for (Index oy = 0; oy < sout; ++oy) {
            for (Index ox = 0; ox < sout; ++ox) {
                double acc = b[oc];
                for (Index ic = 0; ic < cin; ++ic) {
                    for (Index kh = 0; kh < kKernel; ++kh) {
                        const Index iy = 2 * oy - 1 + kh;
                        if (iy < 0 || iy >= sin) continue;
                        for (Index kw = 0; kw < kKernel; ++kw) {
                            const Index ix = 2 * ox - 1 + kw;
                            if (ix < 0 || ix >= sin) continue;
                            acc += w[((oc * cin + ic) * kKernel + kh) * kKernel + kw] * in[(ic * sin + iy) * sin + ix];
                        }
                    }
                }
                out[(oc * sout + oy) * sout + ox] = acc;
            }
        }
    }
}

void conv_backward(const double* grad_out, const double* in, Index cin, Index sin, const double* w, Index cout,
                   Index sout, double* grad_in, double* grad_w, double* grad_b) {
    for (Index oc = 0; oc < cout; ++oc) {
        for (Index oy = 0; oy < sout; ++oy) {
            for (Index ox = 0; ox < sout; ++ox) {
                const double g = grad_out[(oc * sout + oy) * sout + ox];
                grad_b[oc] += g;
                for (Index ic = 0; ic < cin; ++ic) {
                    for (Index kh = 0; kh < kKernel; ++kh) {
                        const Index iy = 2 * oy - 1 + kh;
                        if (iy < 0 || iy >= sin) continue;
                        for (Index kw = 0; kw < kKernel; ++kw) {
                            const Index ix = 2 * ox - 1 + kw;
                            if (ix < 0 || ix >= sin) continue;
                            const Index wi = ((oc * cin + ic) * kKernel + kh) * kKernel + kw;
                            const Index ii = (ic * sin + iy) * sin + ix;
                            grad_w[wi] += g * in[ii];
                            if (grad_in) grad_in[ii] += g * w[wi];
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of conv_forward's spatial map. W is [cin, cout, 3, 3].
void deconv_forward(const double* in, Index cin, Index sin, const double* w, const double* b, Index cout, Index sout,
                    double* out) {
    for (Index oc = 0; oc < cout; ++oc)
        for (Index p = 0; p < sout * sout; ++p) out[oc * sout * sout + p] = b[oc];
    for (Index ic = 0; ic < cin; ++ic) {
        for (Index iy = 0; iy < sin; ++iy) {
            for (Index ix = 0; ix < sin; ++ix) {
                const double v = in[(ic * sin + iy) * sin + ix];
                for (Index oc = 0; oc < cout; ++oc) {
                    for (Index kh = 0; kh < kKernel; ++kh) {
                        const Index oy = 2 * iy - 1 + kh;
                        if (oy < 0 || oy >= sout) continue;
                        for (Index kw = 0; kw < kKernel; ++kw) {
                            const Index ox = 2 * ix - 1 + kw;
                            if (ox < 0 || ox >= sout) continue;
                            out[(oc * sout + oy) * sout + ox] += w[((ic * cout + oc) * kKernel + kh) * kKernel + kw] * v;
                        }
                    }
                }
            }
        }
    }
}

void deconv_backward(const double* grad_out, const double* in, Index cin, Index sin, const double* w, Index cout,
                     Index sout, double* grad_in, double* grad_w, double* grad_b) {
    for (Index oc = 0; oc < cout; ++oc)
        for (Index p = 0; p < sout * sout; ++p) grad_b[oc] += grad_out[oc * sout * sout + p];
    for (Index ic = 0; ic < cin; ++ic) {
        for (Index iy = 0; iy < sin; ++iy) {
            for (Index ix = 0; ix < sin; ++ix) {
                const Index ii = (ic * sin + iy) * sin + ix;
                double acc = 0.0;
                for (Index oc = 0; oc < cout; ++oc) {
                    for (Index kh = 0; kh < kKernel; ++kh) {
                        const Index oy = 2 * iy - 1 + kh;
                        if (oy < 0 || oy >= sout) continue;
                        for (Index kw = 0; kw < kKernel; ++kw) {
                            const Index ox = 2 * ix - 1 + kw;
                            if (ox < 0 || ox >= sout) continue;
                            const Index wi = ((ic * cout + oc) * kKernel + kh) * kKernel + kw;
                            const double g = grad_out[(oc * sout + oy) * sout + ox];
                            grad_w[wi] += g * in[ii];
                            acc += w[wi] * g;
                        }
                    }
                }
                if (grad_in) grad_in[ii] += acc;
            }
        }
    }
}

using ConstRowMap = Eigen::Map<const RowMatrixXd>;

// Offsets of every tensor, resolved once per call.
struct Layout {
    const double* conv1_w;
    const double* conv1_b;
    const double* conv2_w;
    const double* conv2_b;
    const double* enc_w;
    const double* enc_b;
    const double* dec_w;
    const double* dec_b;
    const double* deconv1_w;
    const double* deconv1_b;
    const double* deconv2_w;
    const double* deconv2_b;

    explicit Layout(const MaeModel& m) {
        const double* base = m.parameters().data();
        const auto& t = m.tensors();
        conv1_w = base + t[0].offset;
        conv1_b = base + t[1].offset;
        conv2_w = base + t[2].offset;
        conv2_b = base + t[3].offset;
        enc_w = base + t[4].offset;
        enc_b = base + t[5].offset;
        dec_w = base + t[6].offset;
        dec_b = base + t[7].offset;
        deconv1_w = base + t[8].offset;
        deconv1_b = base + t[9].offset;
        deconv2_w = base + t[10].offset;
        deconv2_b = base + t[11].offset;
    }
};

struct Activations {
    VectorXd x0, a1_pre, a1, a2_pre, a2, z, h_pre, h, r1_pre, r1, out;
};

void encoder_forward(const MaeModel& m, const Layout& p, Activations& act) {
    const Index g = m.grid_dim();
    const Index s1 = m.mid_dim();
    const Index s2 = m.bottleneck_dim();
    const Index c1 = MaeModel::kConv1Channels;
    const Index c2 = MaeModel::kConv2Channels;
    const Index f = m.dense_input_size();

    act.a1_pre.resize(c1 * s1 * s1);
    conv_forward(act.x0.data(), 1, g, p.conv1_w, p.conv1_b, c1, s1, act.a1_pre.data());
    act.a1 = act.a1_pre.unaryExpr([](double v) { return gelu(v); });

    act.a2_pre.resize(f);
    conv_forward(act.a1.data(), c1, s1, p.conv2_w, p.conv2_b, c2, s2, act.a2_pre.data());
    act.a2 = act.a2_pre.unaryExpr([](double v) { return gelu(v); });

    act.z = ConstRowMap(p.enc_w, m.latent_dim(), f) * act.a2 +
            Eigen::Map<const VectorXd>(p.enc_b, m.latent_dim());
}

void decoder_forward(const MaeModel& m, const Layout& p, Activations& act) {
    const Index g = m.grid_dim();
    const Index s1 = m.mid_dim();
    const Index s2 = m.bottleneck_dim();
    const Index c1 = MaeModel::kConv1Channels;
    const Index c2 = MaeModel::kConv2Channels;
    const Index f = m.dense_input_size();

    act.h_pre = ConstRowMap(p.dec_w, f, m.latent_dim()) * act.z + Eigen::Map<const VectorXd>(p.dec_b, f);
    act.h = act.h_pre.unaryExpr([](double v) { return gelu(v); });

    act.r1_pre.resize(c1 * s1 * s1);
    deconv_forward(act.h.data(), c2, s2, p.deconv1_w, p.deconv1_b, c1, s1, act.r1_pre.data());
    act.r1 = act.r1_pre.unaryExpr([](double v) { return gelu(v); });

    act.out.resize(g * g);
    deconv_forward(act.r1.data(), c1, s1, p.deconv2_w, p.deconv2_b, 1, g, act.out.data());
}

// Backpropagate d(loss)/d(out) into `grad` (same layout as the parameter vector).
void backward(const MaeModel& m, const Layout& p, const Activations& act, const VectorXd& grad_out, VectorXd& grad) {
    const Index g = m.grid_dim();
    const Index s1 = m.mid_dim();
    const Index s2 = m.bottleneck_dim();
    const Index c1 = MaeModel::kConv1Channels;
    const Index c2 = MaeModel::kConv2Channels;
    const Index f = m.dense_input_size();
    const Index latent = m.latent_dim();
    const auto& t = m.tensors();
    double* gp = grad.data();

    VectorXd g_r1 = VectorXd::Zero(c1 * s1 * s1);
    deconv_backward(grad_out.data(), act.r1.data(), c1, s1, p.deconv2_w, 1, g, g_r1.data(), gp + t[10].offset,
                    gp + t[11].offset);
    const VectorXd g_r1_pre = g_r1.cwiseProduct(act.r1_pre.unaryExpr([](double v) { return gelu_grad(v); }));

    VectorXd g_h = VectorXd::Zero(f);
    deconv_backward(g_r1_pre.data(), act.h.data(), c2, s2, p.deconv1_w, c1, s1, g_h.data(), gp + t[8].offset,
                    gp + t[9].offset);
    const VectorXd g_h_pre = g_h.cwiseProduct(act.h_pre.unaryExpr([](double v) { return gelu_grad(v); }));

    Eigen::Map<RowMatrixXd>(gp + t[6].offset, f, latent).noalias() += g_h_pre * act.z.transpose();
    Eigen::Map<VectorXd>(gp + t[7].offset, f) += g_h_pre;
    const VectorXd g_z = ConstRowMap(p.dec_w, f, latent).transpose() * g_h_pre;

    Eigen::Map<RowMatrixXd>(gp + t[4].offset, latent, f).noalias() += g_z * act.a2.transpose();
    Eigen::Map<VectorXd>(gp + t[5].offset, latent) += g_z;
    const VectorXd g_a2 = ConstRowMap(p.enc_w, latent, f).transpose() * g_z;
    const VectorXd g_a2_pre = g_a2.cwiseProduct(act.a2_pre.unaryExpr([](double v) { return gelu_grad(v); }));

    VectorXd g_a1 = VectorXd::Zero(c1 * s1 * s1);
    conv_backward(g_a2_pre.data(), act.a1.data(), c1, s1, p.conv2_w, c2, s2, g_a1.data(), gp + t[2].offset,
                  gp + t[3].offset);
    const VectorXd g_a1_pre = g_a1.cwiseProduct(act.a1_pre.unaryExpr([](double v) { return gelu_grad(v); }));

    conv_backward(g_a1_pre.data(), act.x0.data(), 1, g, p.conv1_w, c1, s1, nullptr, gp + t[0].offset,
                  gp + t[1].offset);
}

VectorXd flatten(const RowMatrixXd& grid) { return Eigen::Map<const VectorXd>(grid.data(), grid.size()); }

void write_u32(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw std::runtime_error("load_model: truncated snapshot");
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

double read_f64(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("load_model: truncated snapshot");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

MaeModel::MaeModel(Index grid_dim, Index latent_dim)
    : grid_dim_(grid_dim),
      latent_dim_(latent_dim),
      mid_dim_(strided_size(grid_dim)),
      bottleneck_dim_(strided_size(strided_size(grid_dim))) {
    if (grid_dim < 4) throw std::invalid_argument("mae: grid_dim must be >= 4");
    if (latent_dim < 1) throw std::invalid_argument("mae: latent_dim must be >= 1");
    const Index f = dense_input_size();
    const std::vector<std::pair<std::string, std::vector<Index>>> specs = {
        {"enc.conv1.weight", {kConv1Channels, 1, kKernel, kKernel}},
        {"enc.conv1.bias", {kConv1Channels}},
        {"enc.conv2.weight", {kConv2Channels, kConv1Channels, kKernel, kKernel}},
        {"enc.conv2.bias", {kConv2Channels}},
        {"enc.fc.weight", {latent_dim, f}},
        {"enc.fc.bias", {latent_dim}},
        {"dec.fc.weight", {f, latent_dim}},
        {"dec.fc.bias", {f}},
        {"dec.deconv1.weight", {kConv2Channels, kConv1Channels, kKernel, kKernel}},
        {"dec.deconv1.bias", {kConv1Channels}},
        {"dec.deconv2.weight", {kConv1Channels, 1, kKernel, kKernel}},
        {"dec.deconv2.bias", {1}},
    };
    Index offset = 0;
    for (const auto& [name, dims] : specs) {
        const Index size = std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
        tensors_.push_back(ParamTensor{name, dims, offset, size});
        offset += size;
    }
    params_ = VectorXd::Zero(offset);
}

const ParamTensor& MaeModel::tensor(const std::string& name) const {
    for (const auto& t : tensors_)
        if (t.name == name) return t;
    throw std::out_of_range("mae: no tensor named " + name);
}

MaeModel init_mae(Index grid_dim, Index latent_dim, Seed seed) {
    MaeModel model(grid_dim, latent_dim);
    std::mt19937_64 rng(seed);
    for (const auto& t : model.tensors()) {
        if (t.dims.size() == 1) continue;  // biases stay zero
        Index fan_in = 0;
        Index fan_out = 0;
        if (t.dims.size() == 2) {
            fan_out = t.dims[0];
            fan_in = t.dims[1];
        } else {
            // conv weights are [cout, cin, k, k]; deconv weights [cin, cout, k, k]
            const bool transposed = t.name.rfind("dec.", 0) == 0;
            const Index receptive = t.dims[2] * t.dims[3];
            fan_in = (transposed ? t.dims[0] : t.dims[1]) * receptive;
            fan_out = (transposed ? t.dims[1] : t.dims[0]) * receptive;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        auto w = model.view(t);
        for (Index i = 0; i < t.size; ++i) w[i] = dist(rng);
    }
    return model;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) throw std::invalid_argument("train: mask ratio must be in [0,1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
}

Index masked_count(double ratio, Index pixel_count) {
    return static_cast<Index>(std::floor(ratio * static_cast<double>(pixel_count) + 1e-9));
}

std::pair<ImageGrid, Mask> mask_sample(const ImageGrid& image, double ratio, std::mt19937_64& rng) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("mask_sample: ratio must be in [0,1)");
    const Index n = image.size();
    const Index hidden = masked_count(ratio, n);
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    // Partial Fisher-Yates: the first `hidden` slots are a uniform sample without replacement.
    for (Index i = 0; i < hidden; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    ImageGrid masked = image;
    Mask mask = Mask::Constant(image.rows(), image.cols(), false);
    for (Index i = 0; i < hidden; ++i) {
        const Index p = idx[static_cast<std::size_t>(i)];
        masked.data()[p] = 0;
        mask.data()[p] = true;
    }
    return {std::move(masked), std::move(mask)};
}

double masked_mse(const RowMatrixXd& reconstruction, const RowMatrixXd& original, const Mask& mask) {
    if (reconstruction.rows() != original.rows() || reconstruction.cols() != original.cols() ||
        mask.rows() != original.rows() || mask.cols() != original.cols())
        throw std::invalid_argument("masked_mse: shape mismatch");
    const Index count = mask.count();
    if (count == 0) throw std::invalid_argument("masked_mse: empty mask");
    double sum = 0.0;
    for (Index i = 0; i < original.size(); ++i)
        if (mask.data()[i]) {
            const double diff = reconstruction.data()[i] - original.data()[i];
            sum += diff * diff;
        }
    return sum / static_cast<double>(count);
}

RowMatrixXd to_unit(const ImageGrid& image) { return image.cast<double>() / 255.0; }

RowMatrixXd reconstruct(const MaeModel& model, const RowMatrixXd& input) {
    const Layout p(model);
    Activations act;
    act.x0 = flatten(input);
    encoder_forward(model, p, act);
    decoder_forward(model, p, act);
    return Eigen::Map<const RowMatrixXd>(act.out.data(), model.grid_dim(), model.grid_dim());
}

double batch_loss(const MaeModel& model, std::span<const RowMatrixXd> originals, std::span<const Mask> masks,
                  VectorXd* gradient) {
    if (originals.empty() || originals.size() != masks.size())
        throw std::invalid_argument("batch_loss: need matching, non-empty originals and masks");
    const Layout p(model);
    const auto batch = static_cast<double>(originals.size());
    if (gradient) gradient->setZero(model.parameters().size());

    double total = 0.0;
    Activations act;
    VectorXd grad_out;
    for (std::size_t s = 0; s < originals.size(); ++s) {
        const RowMatrixXd& orig = originals[s];
        const Mask& mask = masks[s];
        const Index count = mask.count();
        if (count == 0) throw std::invalid_argument("batch_loss: empty mask");
        act.x0 = flatten(orig);
        for (Index i = 0; i < act.x0.size(); ++i)
            if (mask.data()[i]) act.x0[i] = 0.0;
        encoder_forward(model, p, act);
        decoder_forward(model, p, act);

        double sum = 0.0;
        grad_out = VectorXd::Zero(act.out.size());
        for (Index i = 0; i < act.out.size(); ++i) {
            if (!mask.data()[i]) continue;
            const double diff = act.out[i] - orig.data()[i];
            sum += diff * diff;
            grad_out[i] = 2.0 * diff / (static_cast<double>(count) * batch);
        }
        total += sum / static_cast<double>(count);
        if (gradient) backward(model, p, act, grad_out, *gradient);
    }
    return total / batch;
}

TrainResult train(MaeModel model, std::span<const ImageGrid> images, const TrainConfig& cfg) {
    cfg.validate();
    if (images.empty()) throw std::invalid_argument("train: no images");
    for (const auto& img : images)
        if (img.rows() != model.grid_dim() || img.cols() != model.grid_dim())
            throw std::invalid_argument("train: image shape does not match the model grid");
    if (masked_count(cfg.mask_ratio, model.grid_dim() * model.grid_dim()) < 1)
        throw std::invalid_argument("train: mask ratio hides no pixels");

    const auto n = images.size();
    std::vector<RowMatrixXd> unit(n);
    for (std::size_t i = 0; i < n; ++i) unit[i] = to_unit(images[i]);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    VectorXd& params = model.parameters();
    VectorXd m1 = VectorXd::Zero(params.size());
    VectorXd m2 = VectorXd::Zero(params.size());
    VectorXd grad(params.size());
    long step = 0;

    TrainResult result;
    std::vector<RowMatrixXd> batch_orig;
    std::vector<Mask> batch_mask;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            batch_orig.clear();
            batch_mask.clear();
            for (std::size_t i = start; i < stop; ++i) {
                auto [masked, mask] = mask_sample(images[order[i]], cfg.mask_ratio, rng);
                batch_orig.push_back(unit[order[i]]);
                batch_mask.push_back(std::move(mask));
            }
            const double loss = batch_loss(model, batch_orig, batch_mask, &grad);
            if (!std::isfinite(loss) || !grad.allFinite())
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                         std::to_string(batch_index + 1));
            epoch_sum += loss * static_cast<double>(stop - start);

            ++step;
            m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
            m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            params.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
        }
        result.loss_history.push_back(epoch_sum / static_cast<double>(n));
    }
    result.model = std::move(model);
    return result;
}

VectorXd encode(const MaeModel& model, const ImageGrid& image) {
    if (image.rows() != model.grid_dim() || image.cols() != model.grid_dim())
        throw std::invalid_argument("encode: image shape does not match the model grid");
    const Layout p(model);
    Activations act;
    act.x0 = flatten(to_unit(image));
    encoder_forward(model, p, act);
    return act.z;
}

RowMatrixXd encode_all(const MaeModel& model, std::span<const ImageGrid> images) {
    RowMatrixXd out(static_cast<Index>(images.size()), model.latent_dim());
    for (std::size_t i = 0; i < images.size(); ++i) out.row(static_cast<Index>(i)) = encode(model, images[i]).transpose();
    return out;
}

void save_model(const std::filesystem::path& path, const MaeModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path.string());
    out.write(kMagic, 4);
    write_u32(out, kSnapshotVersion);
    write_u32(out, static_cast<std::uint32_t>(model.grid_dim()));
    write_u32(out, static_cast<std::uint32_t>(model.latent_dim()));
    write_u32(out, static_cast<std::uint32_t>(model.tensors().size()));
    for (const auto& t : model.tensors()) {
        write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (Index d : t.dims) write_u32(out, static_cast<std::uint32_t>(d));
        const auto values = model.view(t);
        for (Index i = 0; i < t.size; ++i) write_f64(out, values[i]);
    }
}

MaeModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_model: bad magic in " + path.string());
    if (read_u32(in) != kSnapshotVersion) throw std::runtime_error("load_model: unsupported snapshot version");
    const auto grid = static_cast<Index>(read_u32(in));
    const auto latent = static_cast<Index>(read_u32(in));
    MaeModel model(grid, latent);
    if (read_u32(in) != model.tensors().size()) throw std::runtime_error("load_model: tensor count mismatch");
    for (const auto& t : model.tensors()) {
        const auto rank = read_u32(in);
        if (rank != t.dims.size()) throw std::runtime_error("load_model: rank mismatch for " + t.name);
        for (Index d : t.dims)
            if (static_cast<Index>(read_u32(in)) != d) throw std::runtime_error("load_model: shape mismatch for " + t.name);
        auto values = model.view(t);
        for (Index i = 0; i < t.size; ++i) values[i] = read_f64(in);
    }
    return model;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const double> losses) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_loss_csv: cannot open " + path.string());
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e) out << (e + 1) << ',' << format_double(losses[e]) << '\n';
}

}  // namespace citadel
