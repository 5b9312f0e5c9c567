#include <doctest.h>

#include <Eigen/Dense>
#include <filesystem>

#include "attt/nets.hpp"
#include "testutil.hpp"

using namespace attt;
using namespace attt::testutil;

namespace {

// projection loss sum(out * r): backward(r) fills the grads it checks
double projection(const Tensor& out, const Tensor& r) {
    double acc = 0.0;
    for (size_t i = 0; i < out.size(); ++i) acc += out.v[i] * r.v[i];
    return acc;
}

double svd_sigma_max(const std::vector<double>& w, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = w[size_t(i) * cols + j];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

double power_iter_sigma(const std::vector<double>& w, int rows, int cols, int iters) {
    std::vector<double> u, v;
    std::vector<double> copy = w;
    double sigma = 0.0;
    spectral_normalize(copy, rows, cols, u, v, iters, &sigma);
    return sigma;
}

} // namespace

TEST_CASE("gaussian activation anchors") {
    CHECK(gaussian_activation(0.0, 0.7) == doctest::Approx(1.0));
    CHECK(gaussian_activation(1.3, 1.3) == doctest::Approx(std::exp(-1.0)));
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        const double t = rng.normal(), s = rng.uniform(0.3, 2.0);
        CHECK(gaussian_activation(t, s) == doctest::Approx(gaussian_activation(-t, s)));
    }
}

TEST_CASE("adaptor contract") {
    Rng rng(3);
    Adaptor a;
    a.init(16, rng);
    CHECK(a.param_count() < 10000);

    Tensor x = random_tensor(2, 1, 16, 16, rng);
    Tensor y = a.forward(x, true);
    CHECK(y.same_shape(x));

    SUBCASE("gradients match finite differences") {
        Tensor r = random_tensor(2, 1, 16, 16, rng);
        std::vector<ParamRef> params;
        a.collect(params);
        zero_grads(params);
        Tensor dx = a.backward(r, true);
        auto loss_fn = [&] { return projection(a.forward(x, false), r); };
        Rng pick(4);
        CHECK(max_rel_grad_error_params(params, loss_fn, pick, 10) < 1e-3);
        CHECK(max_rel_grad_error(x.v, dx.v, loss_fn, pick, 20) < 1e-3);
    }
}

TEST_CASE("segmentor outputs valid soft masks, deterministic in inference mode") {
    Rng rng(5);
    Segmentor s;
    s.init(1, 3, 3, 4, rng);
    Tensor x = random_tensor(2, 1, 16, 16, rng);

    // a training pass populates batch-norm statistics
    s.forward(x, true, false);
    Tensor p1 = s.forward(x, false, false);
    Tensor p2 = s.forward(x, false, false);
    CHECK(p1.v == p2.v);
    CHECK(p1.n == 2);
    CHECK(p1.c == 3);
    CHECK(p1.h == 16);
    for (int i = 0; i < p1.n; ++i)
        for (int y = 0; y < p1.h; ++y)
            for (int xx = 0; xx < p1.w; ++xx) {
                double sum = 0.0;
                for (int c = 0; c < p1.c; ++c) sum += p1.at(i, c, y, xx);
                CHECK(std::fabs(sum - 1.0) < 1e-5);
            }
}

TEST_CASE("segmentor gradients match finite differences") {
    Rng rng(7);
    Segmentor s;
    s.init(1, 2, 2, 2, rng);
    Tensor x = random_tensor(2, 1, 8, 8, rng);
    Tensor r = random_tensor(2, 2, 8, 8, rng);

    SUBCASE("training mode (batch statistics)") {
        std::vector<ParamRef> params;
        s.collect(params);
        zero_grads(params);
        Tensor probs = s.forward(x, true, true);
        Tensor dx = s.backward(r, true);
        auto loss_fn = [&] { return projection(s.forward(x, true, false), r); };
        Rng pick(8);
        CHECK(max_rel_grad_error_params(params, loss_fn, pick, 8) < 1e-3);
        CHECK(max_rel_grad_error(x.v, dx.v, loss_fn, pick, 16) < 1e-3);
    }
    SUBCASE("inference mode (frozen statistics), the TTT path") {
        s.forward(x, true, false); // populate running stats
        std::vector<ParamRef> params;
        s.collect(params);
        zero_grads(params);
        Tensor probs = s.forward(x, false, true);
        Tensor dx = s.backward(r, true);
        auto loss_fn = [&] { return projection(s.forward(x, false, false), r); };
        Rng pick(9);
        CHECK(max_rel_grad_error_params(params, loss_fn, pick, 8) < 1e-3);
        CHECK(max_rel_grad_error(x.v, dx.v, loss_fn, pick, 16) < 1e-3);
    }
}

TEST_CASE("discriminator scalar output at the paper scale") {
    Rng rng(11);
    Discriminator d;
    d.init(4, 32, 224, true, rng);
    CHECK(d.layer_widths() == std::vector<int>{32, 64, 128, 256, 512});
    Tensor m = random_soft_mask(4, 224, 224, rng);
    auto scores = d.forward(m, false, false);
    REQUIRE(scores.size() == 1);
    CHECK(std::isfinite(scores[0]));
}

TEST_CASE("discriminator hidden activations bounded, output unbounded linear") {
    Rng rng(13);
    Discriminator d;
    d.init(2, 4, 16, true, rng);
    Tensor m = random_soft_mask(2, 16, 16, rng);
    auto s0 = d.forward(m, true, false);
    // tanh keeps every hidden activation in (-1, 1); the fc output is linear
    // in its weight, so scaling the weight scales the score with no squashing
    for (double v : d.fc.x_cache) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }
    // the head is linear in its weight: scaling it scales the score with no
    // squashing, so scores escape [-1, 1]
    Discriminator d2;
    d2.init(2, 4, 16, true, rng);
    d2.fc.sn_enabled = false;
    auto a = d2.forward(m, false, false);
    for (double& w : d2.fc.weight.value) w *= 1e6;
    const double b0 = d2.fc.bias.value[0];
    auto b = d2.forward(m, false, false);
    CHECK(b[0] - b0 == doctest::Approx(1e6 * (a[0] - b0)));
    CHECK(std::fabs(b[0]) > 1.0);
}

TEST_CASE("discriminator local Lipschitz estimates stay in family") {
    Rng rng(17);
    Discriminator d;
    d.init(2, 4, 16, true, rng);
    Tensor warm = random_soft_mask(2, 16, 16, rng);
    for (int i = 0; i < 10; ++i) d.forward(warm, false, true);

    std::vector<double> ratios;
    for (int t = 0; t < 100; ++t) {
        Tensor a = random_soft_mask(2, 16, 16, rng);
        Tensor b = random_soft_mask(2, 16, 16, rng);
        const double da = d.forward(a, false, false)[0];
        const double db = d.forward(b, false, false)[0];
        double dist = 0.0;
        for (size_t i = 0; i < a.size(); ++i) dist += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
        dist = std::sqrt(dist);
        ratios.push_back(std::fabs(da - db) / dist);
    }
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    for (double r : ratios) CHECK(r <= 10.0 * med + 1e-12);
}

TEST_CASE("discriminator gradients match finite differences") {
    Rng rng(19);
    Discriminator d;
    d.init(2, 2, 8, true, rng);
    Tensor m = random_soft_mask(2, 8, 8, rng);
    m = concat_batch(m, random_soft_mask(2, 8, 8, rng));
    d.forward(m, true, true); // warm the SN vectors, then freeze

    std::vector<double> r = {0.7, -1.3};
    std::vector<ParamRef> params;
    d.collect(params);
    zero_grads(params);
    d.forward(m, true, false);
    Tensor dm = d.backward(r, true);
    d.finalize_sn_grads();
    auto loss_fn = [&] {
        auto s = d.forward(m, true, false);
        return s[0] * r[0] + s[1] * r[1];
    };
    Rng pick(20);
    CHECK(max_rel_grad_error_params(params, loss_fn, pick, 8) < 1e-3);
    CHECK(max_rel_grad_error(m.v, dm.v, loss_fn, pick, 16) < 1e-3);

    SUBCASE("ablated (leaky, no SN) variant") {
        Discriminator dl;
        Rng rng2(21);
        dl.init(2, 2, 8, false, rng2);
        std::vector<ParamRef> lp;
        dl.collect(lp);
        zero_grads(lp);
        dl.forward(m, true, false);
        Tensor dml = dl.backward(r, true);
        dl.finalize_sn_grads();
        auto lf = [&] {
            auto s = dl.forward(m, true, false);
            return s[0] * r[0] + s[1] * r[1];
        };
        Rng pick2(22);
        CHECK(max_rel_grad_error_params(lp, lf, pick2, 8) < 1e-3);
        CHECK(max_rel_grad_error(m.v, dml.v, lf, pick2, 16) < 1e-3);
    }
}

TEST_CASE("spectral_normalize against an exact SVD oracle") {
    SUBCASE("matrix with known top singular value 4") {
        // diag(4, 2, 1) embedded in a 3x5 matrix
        std::vector<double> w(15, 0.0);
        w[0] = 4.0;
        w[6] = 2.0;
        w[12] = 1.0;
        CHECK(svd_sigma_max(w, 3, 5) == doctest::Approx(4.0));
        std::vector<double> u, v;
        double sigma = 0.0;
        spectral_normalize(w, 3, 5, u, v, 25, &sigma);
        CHECK(sigma == doctest::Approx(4.0).epsilon(1e-3));
        CHECK(svd_sigma_max(w, 3, 5) == doctest::Approx(1.0).epsilon(1e-3));
    }
    SUBCASE("random matrices normalize to unit top singular value") {
        Rng rng(23);
        for (int t = 0; t < 5; ++t) {
            std::vector<double> w(24);
            for (auto& x : w) x = rng.normal();
            std::vector<double> u, v;
            spectral_normalize(w, 4, 6, u, v, 40, nullptr);
            CHECK(svd_sigma_max(w, 4, 6) == doctest::Approx(1.0).epsilon(1e-3));
        }
    }
    SUBCASE("identity passes through unchanged") {
        std::vector<double> w = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        std::vector<double> orig = w;
        std::vector<double> u, v;
        spectral_normalize(w, 3, 3, u, v, 30, nullptr);
        for (size_t i = 0; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(orig[i]));
    }
    SUBCASE("scale invariance of the normalized weight") {
        Rng rng(29);
        std::vector<double> w(12);
        for (auto& x : w) x = rng.normal();
        std::vector<double> w2 = w;
        for (auto& x : w2) x *= 3.7;
        std::vector<double> u1, v1, u2, v2;
        spectral_normalize(w, 3, 4, u1, v1, 40, nullptr);
        spectral_normalize(w2, 3, 4, u2, v2, 40, nullptr);
        for (size_t i = 0; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(w2[i]).epsilon(1e-10));
    }
    SUBCASE("zero weight passes through") {
        std::vector<double> w(6, 0.0), u, v;
        double sigma = 1.0;
        spectral_normalize(w, 2, 3, u, v, 10, &sigma);
        CHECK(sigma == 0.0);
        for (double x : w) CHECK(x == 0.0);
    }
}

TEST_CASE("normalized discriminator layers have top singular value near 1") {
    Rng rng(31);
    Discriminator d;
    d.init(3, 4, 16, true, rng);
    Tensor m = random_soft_mask(3, 16, 16, rng);
    for (int i = 0; i < 50; ++i) d.forward(m, false, true); // power-iteration warmup

    for (int l = 0; l < Discriminator::kLayers; ++l) {
        const int rows = d.conv[l].out_ch;
        const int cols = d.conv[l].in_ch * d.conv[l].kh * d.conv[l].kw;
        const double sigma = power_iter_sigma(d.conv[l].eff_w(), rows, cols, 200);
        CHECK(sigma >= 0.9);
        CHECK(sigma <= 1.1);
    }
    const double sigma_fc = power_iter_sigma(d.fc.eff_w(), d.fc.out_dim, d.fc.in_dim, 200);
    CHECK(sigma_fc >= 0.9);
    CHECK(sigma_fc <= 1.1);
}

TEST_CASE("init_models determinism and validation") {
    NetConfig cfg = tiny_net_config(8, 3);
    ModelBundle a = init_models(cfg, ModelKind::gan, 42);
    ModelBundle b = init_models(cfg, ModelKind::gan, 42);
    CHECK(params_hash(a.all_params()) == params_hash(b.all_params()));
    ModelBundle c = init_models(cfg, ModelKind::gan, 43);
    CHECK(params_hash(a.all_params()) != params_hash(c.all_params()));

    // paper-scale discriminator widths are declared 32..512
    NetConfig paper = cfg;
    paper.disc_base = 32;
    paper.image_size = 32;
    paper.unet_levels = 2;
    ModelBundle pb = init_models(paper, ModelKind::gan, 1);
    CHECK(pb.disc.layer_widths() == std::vector<int>{32, 64, 128, 256, 512});

    NetConfig bad = cfg;
    bad.n_classes = 1;
    CHECK_THROWS_AS(init_models(bad, ModelKind::gan, 1), ConfigError);
    NetConfig bad2 = cfg;
    bad2.image_size = 10; // not divisible by 4
    CHECK_THROWS_AS(init_models(bad2, ModelKind::gan, 1), ConfigError);
}

TEST_CASE("bundle checkpoint round-trip") {
    namespace fs = std::filesystem;
    NetConfig cfg = tiny_net_config(8, 2);
    ModelBundle a = init_models(cfg, ModelKind::gan, 7);
    Rng rng(3);
    Tensor x = random_tensor(1, 1, 8, 8, rng);
    a.segment(a.adapt(x, false), true, false); // move BN/SN state off init
    a.disc.forward(random_soft_mask(2, 8, 8, rng), false, true);
    a.epoch = 12;
    a.val_loss = 0.345;

    const std::string dir = "test_ckpt_tmp";
    fs::remove_all(dir);
    save_bundle(a, dir, "checkpoint");
    ModelBundle b = load_bundle(dir, "checkpoint");
    CHECK(b.epoch == 12);
    CHECK(b.val_loss == doctest::Approx(0.345));
    CHECK(params_hash(a.all_params()) == params_hash(b.all_params()));

    Tensor pa = a.segment(a.adapt(x, false), false, false);
    Tensor pb = b.segment(b.adapt(x, false), false, false);
    CHECK(pa.v == pb.v);
    const double sa = a.disc.forward(pa, false, false)[0];
    const double sb = b.disc.forward(pb, false, false)[0];
    CHECK(sa == sb);
    fs::remove_all(dir);

    SUBCASE("causal bundle round-trips too") {
        ModelBundle ca = init_models(tiny_net_config(8, 2), ModelKind::causal, 9);
        Tensor probs = ca.segment(ca.adapt(x, false), true, false);
        Tensor rec_a = ca.reconstruct(probs, ca.last_residual(), false);
        fs::remove_all(dir);
        save_bundle(ca, dir, "checkpoint");
        ModelBundle cb = load_bundle(dir, "checkpoint");
        Tensor probs_b = cb.segment(cb.adapt(x, false), false, false);
        Tensor rec_b = cb.reconstruct(probs_b, cb.last_residual(), false);
        CHECK(params_hash(ca.all_params()) == params_hash(cb.all_params()));
        fs::remove_all(dir);
    }
}
