#include <doctest.h>

#include "attt/diagnostics.hpp"
#include "testutil.hpp"

using namespace attt;
using namespace attt::testutil;

namespace {

TrainHistory shaped_history(double val_real, double val_fake, double train_real, double train_fake,
                            int epochs = 30) {
    TrainHistory h;
    Rng rng(8);
    for (int e = 1; e <= epochs; ++e) {
        EpochRecord r;
        r.epoch = e;
        // early epochs wander, final window sits on the target band
        const double drift = e <= epochs - 12 ? 0.5 * std::exp(-0.2 * e) : 0.0;
        r.val_disc_real = val_real + drift + 0.01 * rng.normal();
        r.val_disc_fake = val_fake + drift + 0.01 * rng.normal();
        r.train_disc_real = train_real + drift + 0.01 * rng.normal();
        r.train_disc_fake = train_fake + drift + 0.01 * rng.normal();
        h.epochs.push_back(r);
    }
    return h;
}

} // namespace

TEST_CASE("classify_convergence signatures") {
    SUBCASE("equilibrium: both validation losses near 1.0") {
        auto h = shaped_history(1.0, 1.0, 1.0, 1.0);
        auto r = classify_convergence(h, 10, 0.15);
        CHECK(r.mode == ConvergenceMode::equilibrium);
        CHECK(std::string(to_string(r.mode)) == "equilibrium");
    }
    SUBCASE("memorization: validation real loss near 2.0, fake near 0") {
        auto h = shaped_history(2.0, 0.02, 0.05, 0.05);
        auto r = classify_convergence(h, 10, 0.15);
        CHECK(r.mode == ConvergenceMode::memorization);
    }
    SUBCASE("discriminative: both validation losses near 0") {
        auto h = shaped_history(0.02, 0.02, 0.02, 0.02);
        auto r = classify_convergence(h, 10, 0.15);
        CHECK(r.mode == ConvergenceMode::discriminative);
    }
    SUBCASE("equilibrium-shaped losses with a failing probe mean forgetting") {
        auto h = shaped_history(1.0, 1.0, 1.0, 1.0);
        auto r = classify_convergence(h, 10, 0.15, 0.01);
        CHECK(r.mode == ConvergenceMode::forgetting_collapse);
        auto r2 = classify_convergence(h, 10, 0.15, 1.5);
        CHECK(r2.mode == ConvergenceMode::equilibrium);
    }
    SUBCASE("anything else is undetermined") {
        auto h = shaped_history(1.4, 0.6, 1.0, 1.0);
        CHECK(classify_convergence(h, 10, 0.15).mode == ConvergenceMode::undetermined);
    }
    SUBCASE("short history rejected") {
        auto h = shaped_history(1.0, 1.0, 1.0, 1.0, 5);
        CHECK_THROWS_AS(classify_convergence(h, 10, 0.15), ContractError);
    }
}

TEST_CASE("classification ignores epochs outside the final window") {
    auto h = shaped_history(1.0, 1.0, 1.0, 1.0);
    auto base = classify_convergence(h, 10, 0.15);
    // scramble everything before the window
    TrainHistory scrambled = h;
    Rng rng(5);
    for (size_t i = 0; i + 10 < scrambled.epochs.size(); ++i) {
        scrambled.epochs[i].val_disc_real = rng.uniform(0.0, 3.0);
        scrambled.epochs[i].val_disc_fake = rng.uniform(0.0, 3.0);
    }
    auto same = classify_convergence(scrambled, 10, 0.15);
    CHECK(same.mode == base.mode);
    CHECK(same.val_real == doctest::Approx(base.val_real));
}

TEST_CASE("auc basics and monotone-transform invariance") {
    SUBCASE("perfect separation") {
        std::vector<double> clean(25, 1.0), corr(25, -1.0);
        CHECK(auc_from_scores(clean, corr) == doctest::Approx(1.0));
    }
    SUBCASE("identical distributions give 0.5") {
        std::vector<double> a(30, 0.3), b(30, 0.3);
        CHECK(auc_from_scores(a, b) == doctest::Approx(0.5));
    }
    SUBCASE("strictly monotone transforms leave the auc unchanged") {
        Rng rng(3);
        std::vector<double> pos, neg;
        for (int i = 0; i < 40; ++i) {
            pos.push_back(rng.normal() + 0.8);
            neg.push_back(rng.normal());
        }
        const double base = auc_from_scores(pos, neg);
        auto squash = [](std::vector<double> xs) {
            for (auto& x : xs) x = std::tanh(0.7 * x) + 3.0;
            return xs;
        };
        CHECK(auc_from_scores(squash(pos), squash(neg)) == doctest::Approx(base));
    }
}

TEST_CASE("corrupted_detection_auc contracts") {
    NetConfig cfg = tiny_net_config(8, 2);
    ModelBundle b = init_models(cfg, ModelKind::gan, 3);
    Rng rng(4);
    std::vector<Tensor> clean, corr;
    for (int i = 0; i < 25; ++i) {
        clean.push_back(random_one_hot(2, 8, 8, rng));
        corr.push_back(random_one_hot(2, 8, 8, rng));
    }
    const double auc = corrupted_detection_auc(b.disc, clean, corr);
    CHECK(auc >= 0.0);
    CHECK(auc <= 1.0);

    std::vector<Tensor> few(clean.begin(), clean.begin() + 5);
    CHECK_THROWS_AS(corrupted_detection_auc(b.disc, few, corr), ContractError);
    CHECK_THROWS_AS(corrupted_detection_auc(b.disc, clean, few), ContractError);
}
