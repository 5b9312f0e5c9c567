#include <doctest.h>

#include <filesystem>

#include "attt/train.hpp"
#include "testutil.hpp"

using namespace attt;
using namespace attt::testutil;

namespace {

SplitResult tiny_split(int n_patients = 8, int slices = 2, int size = 32, int classes = 3,
                       uint64_t seed = 3) {
    auto raw = generate_synthetic_dataset(n_patients, slices, size, classes, seed);
    std::vector<PatientVolume> prepped;
    for (const auto& v : raw) prepped.push_back(preprocess_volume(v, 1.0, size));
    return split_patients(prepped, 0.5, 0.25, 0.25, 0.5, seed + 1);
}

NetConfig small_net(int size = 32, int classes = 3) {
    NetConfig cfg;
    cfg.image_size = size;
    cfg.n_classes = classes;
    cfg.unet_levels = 2;
    cfg.unet_base = 4;
    cfg.disc_base = 4;
    cfg.adaptor_channels = 8;
    return cfg;
}

TrainConfig quick_train(uint64_t seed = 5) {
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_epochs = 2;
    tc.val_patience = 2;
    tc.seed = seed;
    return tc;
}

} // namespace

TEST_CASE("should_stop semantics") {
    CHECK_FALSE(should_stop({3, 2, 1}, 2));
    CHECK(should_stop({3, 2, 1, 1.5, 1.2}, 2));
    CHECK_FALSE(should_stop({1}, 1));
    CHECK_FALSE(should_stop({1}, 5));
    CHECK(should_stop({1, 1, 1}, 2));
    CHECK_THROWS_AS(should_stop({1, 2}, 0), ConfigError);
    CHECK_THROWS_AS(should_stop({}, 2), ContractError);
}

TEST_CASE("supervised step trains the generator and leaves the discriminator alone") {
    SplitResult split = tiny_split();
    ModelBundle bundle = init_models(small_net(), ModelKind::gan, 7);
    Trainer trainer(bundle, split, quick_train());

    Tensor y;
    Tensor x = trainer.next_labelled_batch(y);
    const uint64_t disc_before = bundle.disc_hash();
    const uint64_t gen_before = params_hash(bundle.generator_params());

    LossValue first = trainer.step_supervised(x, y);
    CHECK(bundle.disc_hash() == disc_before);
    CHECK(params_hash(bundle.generator_params()) != gen_before);

    // loss on the same fixed batch does not increase by more than 10%
    Tensor probs = bundle.segment(bundle.adapt(x, false), true, false);
    const double after = weighted_cross_entropy(probs, y).value;
    CHECK(after <= 1.1 * first.value);

    CHECK_THROWS_AS(trainer.step_supervised(Tensor(), Tensor()), ContractError);
}

TEST_CASE("adaptor ablation bypasses the adaptor") {
    SplitResult split = tiny_split();
    ModelBundle bundle = init_models(small_net(), ModelKind::gan, 7);
    TrainConfig tc = quick_train();
    tc.use_adaptor = false;
    Trainer trainer(bundle, split, tc);
    Rng rng(9);
    Tensor x = random_tensor(2, 1, 32, 32, rng);
    Tensor xp = bundle.adapt(x, false);
    CHECK(xp.v == x.v);
}

TEST_CASE("adversarial phases are isolated") {
    SplitResult split = tiny_split();
    ModelBundle bundle = init_models(small_net(), ModelKind::gan, 7);
    Trainer trainer(bundle, split, quick_train());

    Tensor y;
    trainer.step_supervised(trainer.next_labelled_batch(y), y);

    Tensor xu = trainer.next_unlabelled_batch();
    Tensor ym = trainer.next_mask_batch();

    const uint64_t disc_before = bundle.disc_hash();
    trainer.step_adversarial_generator(xu);
    CHECK(bundle.disc_hash() == disc_before); // generator step leaves disc alone

    const uint64_t gen_before = params_hash(bundle.generator_params());
    trainer.step_adversarial_discriminator(ym);
    CHECK(params_hash(bundle.generator_params()) == gen_before); // and vice versa
    CHECK(bundle.disc_hash() != disc_before);
}

TEST_CASE("fake batch mixes corrupted masks and detached predictions") {
    SplitResult split = tiny_split();
    ModelBundle bundle = init_models(small_net(), ModelKind::gan, 7);
    TrainConfig tc = quick_train();
    tc.corrupted_fraction = 0.5;
    Trainer trainer(bundle, split, tc);

    Tensor preds(4, 2, 4, 4, 0.25); // recognizable filler
    Tensor corr(4, 2, 4, 4, 1.0);
    Tensor fake = trainer.make_fake_batch(preds, corr);
    REQUIRE(fake.n == 4);
    // first round(0.5*4)=2 slots carry corrupted masks, the rest predictions
    CHECK(fake.at(0, 0, 0, 0) == 1.0);
    CHECK(fake.at(1, 0, 0, 0) == 1.0);
    CHECK(fake.at(2, 0, 0, 0) == 0.25);
    CHECK(fake.at(3, 0, 0, 0) == 0.25);

    TrainConfig no_anchor = tc;
    no_anchor.use_fake_anchors = false;
    ModelBundle bundle2 = init_models(small_net(), ModelKind::gan, 7);
    Trainer t2(bundle2, split, no_anchor);
    Tensor fake2 = t2.make_fake_batch(preds, corr);
    for (int i = 0; i < 4; ++i) CHECK(fake2.at(i, 0, 0, 0) == 0.25);
}

TEST_CASE("fit early stopping, best-checkpoint restore, reproducibility") {
    SplitResult split = tiny_split(8, 2, 32, 3, 13);
    NetConfig net = small_net();
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_epochs = 8;
    tc.val_patience = 2;
    tc.seed = 17;

    ModelBundle a = init_models(net, ModelKind::gan, 100);
    TrainHistory ha = fit(a, split, tc);
    CHECK(int(ha.epochs.size()) <= tc.max_epochs);

    // returned bundle holds the minimum-validation-loss checkpoint
    double best = 1e300;
    for (const auto& r : ha.epochs) best = std::min(best, r.val_sup);
    CHECK(a.val_loss == doctest::Approx(best));
    Trainer probe(a, split, tc);
    CHECK(probe.validation_supervised_loss() == doctest::Approx(best).epsilon(1e-9));

    // identical (config, seed, data) reproduce the final validation loss
    ModelBundle b = init_models(net, ModelKind::gan, 100);
    TrainHistory hb = fit(b, split, tc);
    REQUIRE(ha.epochs.size() == hb.epochs.size());
    CHECK(std::fabs(a.val_loss - b.val_loss) < 1e-6);
    for (size_t i = 0; i < ha.epochs.size(); ++i)
        CHECK(ha.epochs[i].val_sup == hb.epochs[i].val_sup);
}

TEST_CASE("early stopping waits for the patience window") {
    // direct check of the fit-level rule on a crafted sequence
    std::vector<double> vals = {1.0, 0.9, 0.9, 0.9};
    CHECK_FALSE(should_stop({1.0, 0.9, 0.9}, 2));
    CHECK(should_stop(vals, 2)); // two non-improving epochs after the min
}

TEST_CASE("divergence aborts with a diagnostic error") {
    SplitResult split = tiny_split();
    ModelBundle bundle = init_models(small_net(), ModelKind::gan, 7);
    bundle.segmentor.head.weight.value[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig tc = quick_train();
    CHECK_THROWS_AS(fit(bundle, split, tc), DivergenceError);
}

TEST_CASE("history csv round-trip") {
    TrainHistory h;
    for (int e = 1; e <= 3; ++e) {
        EpochRecord r;
        r.epoch = e;
        r.train_sup = 0.5 / e;
        r.val_sup = 0.6 / e;
        r.train_disc_real = 0.9;
        r.train_disc_fake = 1.1;
        r.val_disc_real = 1.0;
        r.val_disc_fake = 1.0;
        r.gen_adv = 0.25;
        r.dyn_weight = 0.1;
        h.epochs.push_back(r);
    }
    const std::string path = "test_history_tmp.csv";
    write_history_csv(h, path);
    TrainHistory rt = read_history_csv(path);
    REQUIRE(rt.epochs.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(rt.epochs[i].epoch == h.epochs[i].epoch);
        CHECK(rt.epochs[i].train_sup == h.epochs[i].train_sup);
        CHECK(rt.epochs[i].val_sup == h.epochs[i].val_sup);
        CHECK(rt.epochs[i].val_disc_real == h.epochs[i].val_disc_real);
        CHECK(rt.epochs[i].val_disc_fake == h.epochs[i].val_disc_fake);
        CHECK(rt.epochs[i].dyn_weight == h.epochs[i].dyn_weight);
    }
    std::filesystem::remove(path);
}

TEST_CASE("smoothness ablation removes SN, tanh, and the gradient penalty") {
    NetConfig net = small_net();
    net.smooth_disc = false;
    ModelBundle bundle = init_models(net, ModelKind::gan, 7);
    CHECK_FALSE(bundle.disc.conv[0].sn_enabled);
    CHECK_FALSE(bundle.disc.fc.sn_enabled);
    CHECK_FALSE(bundle.disc.act[0].smooth);

    // gp_lambda is gated by use_smoothness inside the discriminator step;
    // the step must run cleanly without SN state
    SplitResult split = tiny_split();
    TrainConfig tc = quick_train();
    tc.use_smoothness = false;
    Trainer trainer(bundle, split, tc);
    Tensor y;
    trainer.step_supervised(trainer.next_labelled_batch(y), y);
    auto [gen, disc] = trainer.step_adversarial(trainer.next_unlabelled_batch(),
                                                trainer.next_mask_batch());
    CHECK(std::isfinite(gen.value));
    CHECK(std::isfinite(disc.value));
    for (const auto& [k, v] : disc.components) CHECK(k != "gp");
}
