#include "citadel/mae.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace citadel;

namespace {

ImageGrid random_image(std::mt19937_64& rng, Index d) {
    std::uniform_int_distribution<int> px(0, 255);
    ImageGrid img(d, d);
    for (Index r = 0; r < d; ++r)
        for (Index c = 0; c < d; ++c) img(r, c) = static_cast<std::uint8_t>(px(rng));
    return img;
}

// Images with a bright diagonal band whose position varies: structured enough to learn.
std::vector<ImageGrid> band_images(std::mt19937_64& rng, Index n, Index d) {
    std::uniform_int_distribution<int> shift(0, static_cast<int>(d) - 1);
    std::vector<ImageGrid> out;
    for (Index i = 0; i < n; ++i) {
        const int s = shift(rng);
        ImageGrid img = ImageGrid::Zero(d, d);
        for (Index r = 0; r < d; ++r) img(r, (r + s) % d) = 255;
        out.push_back(img);
    }
    return out;
}

}  // namespace

TEST_CASE("init is deterministic with zero biases and the expected shapes") {
    const auto a = init_mae(8, 16, 3);
    const auto b = init_mae(8, 16, 3);
    CHECK(a.parameters() == b.parameters());
    CHECK_FALSE(a.parameters() == init_mae(8, 16, 4).parameters());
    CHECK(a.mid_dim() == 4);
    CHECK(a.bottleneck_dim() == 2);
    CHECK(a.dense_input_size() == 64);
    for (const auto& t : a.tensors()) {
        const auto v = a.view(t);
        if (t.dims.size() == 1) {
            CHECK(v.cwiseAbs().maxCoeff() == 0.0);
        } else {
            Index fan_in = 1, fan_out = 1;
            if (t.dims.size() == 2) {
                fan_out = t.dims[0];
                fan_in = t.dims[1];
            } else {
                const Index field = t.dims[2] * t.dims[3];
                fan_out = t.dims[0] * field;
                fan_in = t.dims[1] * field;
            }
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            CHECK(v.cwiseAbs().maxCoeff() <= bound);
            CHECK(v.cwiseAbs().maxCoeff() > 0.5 * bound);
        }
    }
    CHECK_THROWS(init_mae(3, 4, 1));
    CHECK_THROWS(init_mae(8, 0, 1));
}

TEST_CASE("mask_sample") {
    std::mt19937_64 rng(1);
    const auto img = random_image(rng, 8);
    std::mt19937_64 r1(5), r2(5);
    const auto [masked, mask] = mask_sample(img, 0.75, r1);
    CHECK(mask.count() == 48);
    CHECK(masked_count(0.75, 64) == 48);
    for (Index r = 0; r < 8; ++r)
        for (Index c = 0; c < 8; ++c) CHECK(masked(r, c) == (mask(r, c) ? 0 : img(r, c)));
    CHECK(mask_sample(img, 0.75, r2).second == mask);

    const auto [same, none] = mask_sample(img, 0.0, r1);
    CHECK(none.count() == 0);
    CHECK(same == img);
    CHECK_THROWS(mask_sample(img, 1.0, r1));
}

TEST_CASE("masked_mse fixtures") {
    const RowMatrixXd orig = RowMatrixXd::Zero(4, 4);
    Mask one = Mask::Constant(4, 4, false);
    one(1, 2) = true;
    CHECK(masked_mse(orig, orig, one) == 0.0);
    RowMatrixXd rec = orig;
    rec(1, 2) = 0.5;
    CHECK(masked_mse(rec, orig, one) == doctest::Approx(0.25));
    RowMatrixXd off = orig;
    off(0, 0) = 0.9;
    CHECK(masked_mse(off, orig, one) == 0.0);
    CHECK_THROWS(masked_mse(orig, orig, Mask::Constant(4, 4, false)));
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(2);
    const auto model = init_mae(8, 4, 9);
    std::vector<RowMatrixXd> originals;
    std::vector<Mask> masks;
    for (int i = 0; i < 2; ++i) {
        const auto img = random_image(rng, 8);
        originals.push_back(to_unit(img));
        masks.push_back(mask_sample(img, 0.75, rng).second);
    }
    VectorXd grad;
    batch_loss(model, originals, masks, &grad);
    REQUIRE(grad.size() == model.parameters().size());

    MaeModel probe = model;
    double worst = 0.0;
    const double h = 1e-5;
    for (Index p = 0; p < grad.size(); ++p) {
        const double keep = probe.parameters()[p];
        probe.parameters()[p] = keep + h;
        const double up = batch_loss(probe, originals, masks);
        probe.parameters()[p] = keep - h;
        const double down = batch_loss(probe, originals, masks);
        probe.parameters()[p] = keep;
        const double fd = (up - down) / (2 * h);
        // Central differences carry about 1e-11 of round-off at this loss scale, so
        // magnitudes under 1e-6 are compared on that floor instead of themselves.
        const double scale = std::max({std::abs(fd), std::abs(grad[p]), 1e-6});
        worst = std::max(worst, std::abs(fd - grad[p]) / scale);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("identical zero images are learnable") {
    std::vector<ImageGrid> zeros(20, ImageGrid::Zero(8, 8));
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-2;
    cfg.seed = 1;
    const auto r = train(init_mae(8, 16, 1), zeros, cfg);
    REQUIRE(r.loss_history.size() == 20);
    CHECK(r.loss_history.back() <= 1e-4);
}

TEST_CASE("training reduces the loss and is deterministic") {
    std::mt19937_64 rng(7);
    const auto images = band_images(rng, 200, 8);
    TrainConfig cfg;
    cfg.seed = 7;
    const auto a = train(init_mae(8, 16, 7), images, cfg);
    CHECK(a.loss_history.back() < a.loss_history.front());
    const auto b = train(init_mae(8, 16, 7), images, cfg);
    CHECK(a.model.parameters() == b.model.parameters());
    CHECK(a.loss_history == b.loss_history);

    const auto z0 = encode(a.model, images[0]);
    CHECK(z0.size() == 16);
    CHECK(encode(a.model, images[0]) == z0);
    const auto all = encode_all(a.model, images);
    CHECK(all.rows() == 200);
    CHECK(all.row(0).transpose() == z0);
}

TEST_CASE("untrained encoder on a zero image is a fixed dense map") {
    const auto model = init_mae(8, 16, 3);
    const auto z = encode(model, ImageGrid::Zero(8, 8));
    // GELU(0) = 0 with zero biases: every activation vanishes and so does the latent.
    CHECK(z == VectorXd::Zero(16));
}

TEST_CASE("model snapshot round trip") {
    const auto model = init_mae(8, 16, 11);
    const auto path = std::filesystem::temp_directory_path() / "citadel_model.bin";
    save_model(path, model);
    const auto back = load_model(path);
    CHECK(back.grid_dim() == 8);
    CHECK(back.latent_dim() == 16);
    CHECK(back.parameters() == model.parameters());
    {
        std::ofstream bad(path, std::ios::binary);
        bad << "XXXX";
    }
    CHECK_THROWS(load_model(path));
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.mask_ratio = 1.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    CHECK_THROWS(train(init_mae(8, 4, 1), std::vector<ImageGrid>{}, cfg));
}
