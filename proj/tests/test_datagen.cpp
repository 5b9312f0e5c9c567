#include <doctest.h>

#include <filesystem>
#include <set>

#include "attt/datagen.hpp"
#include "testutil.hpp"

using namespace attt;
using namespace attt::testutil;

namespace {

// 4-connectivity flood fill count of foreground components for one class.
int count_components(const Tensor& mask, int cls) {
    const int h = mask.h, w = mask.w;
    std::vector<int> seen(size_t(h) * w, 0);
    int comps = 0;
    for (int y0 = 0; y0 < h; ++y0)
        for (int x0 = 0; x0 < w; ++x0) {
            if (mask.at(0, cls, y0, x0) == 0.0 || seen[size_t(y0) * w + x0]) continue;
            ++comps;
            std::vector<std::pair<int, int>> stack{{y0, x0}};
            seen[size_t(y0) * w + x0] = 1;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                const int dy[] = {1, -1, 0, 0}, dx[] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int ny = y + dy[k], nx = x + dx[k];
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    if (mask.at(0, cls, ny, nx) == 0.0 || seen[size_t(ny) * w + nx]) continue;
                    seen[size_t(ny) * w + nx] = 1;
                    stack.emplace_back(ny, nx);
                }
            }
        }
    return comps;
}

std::vector<long> class_histogram(const Tensor& m) {
    std::vector<long> h(size_t(m.c), 0);
    for (int c = 0; c < m.c; ++c)
        for (int y = 0; y < m.h; ++y)
            for (int x = 0; x < m.w; ++x)
                if (m.at(0, c, y, x) != 0.0) ++h[size_t(c)];
    return h;
}

} // namespace

TEST_CASE("generate_synthetic_dataset contract") {
    auto vols = generate_synthetic_dataset(10, 8, 64, 3, 7);
    REQUIRE(vols.size() == 10);
    std::set<std::string> ids;
    for (const auto& v : vols) {
        ids.insert(v.patient_id);
        REQUIRE(v.slices.size() == 8);
        for (const auto& sl : v.slices) {
            CHECK(sl.image.h() == 64);
            CHECK(sl.image.pix.all_finite());
            REQUIRE(sl.mask.has_value());
            CHECK(is_one_hot(*sl.mask));
            // nested cardiac-like shapes stay connected
            CHECK(count_components(*sl.mask, 1) == 1);
            CHECK(count_components(*sl.mask, 2) == 1);
        }
    }
    CHECK(ids.size() == 10);
}

TEST_CASE("generate_synthetic_dataset determinism and errors") {
    auto a = generate_synthetic_dataset(3, 2, 32, 3, 99);
    auto b = generate_synthetic_dataset(3, 2, 32, 3, 99);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t k = 0; k < a[i].slices.size(); ++k) {
            CHECK(a[i].slices[k].image.pix.v == b[i].slices[k].image.pix.v);
            CHECK(a[i].slices[k].mask->v == b[i].slices[k].mask->v);
        }
    auto c = generate_synthetic_dataset(3, 2, 32, 3, 100);
    CHECK(a[0].slices[0].image.pix.v != c[0].slices[0].image.pix.v);

    CHECK_THROWS_AS(generate_synthetic_dataset(3, 2, 32, 1, 7), ConfigError);
    CHECK_THROWS_AS(generate_synthetic_dataset(3, 2, 16, 3, 7), ConfigError);
}

TEST_CASE("apply_domain_shift") {
    Rng rng(3);
    Image img;
    img.pix = random_tensor(1, 1, 16, 16, rng);
    img.patient_id = "p";

    SUBCASE("identity params return the input exactly") {
        ShiftParams id;
        Image out = apply_domain_shift(img, id, 4);
        CHECK(out.pix.v == img.pix.v);
    }
    SUBCASE("gamma on a constant non-negative image follows the signed-power convention") {
        Image flat;
        flat.pix = Tensor(1, 1, 8, 8, 0.3);
        ShiftParams sp;
        sp.gamma = 2.0;
        Image out = apply_domain_shift(flat, sp, 4);
        for (double v : out.pix.v) CHECK(v == doctest::Approx(0.09));
    }
    SUBCASE("noise is reproducible under a fixed seed") {
        ShiftParams sp;
        sp.noise_std = 0.1;
        Image o1 = apply_domain_shift(img, sp, 12);
        Image o2 = apply_domain_shift(img, sp, 12);
        Image o3 = apply_domain_shift(img, sp, 13);
        CHECK(o1.pix.v == o2.pix.v);
        CHECK(o1.pix.v != o3.pix.v);
    }
    SUBCASE("invalid gamma rejected") {
        ShiftParams sp;
        sp.gamma = 0.0;
        CHECK_THROWS_AS(apply_domain_shift(img, sp, 4), ConfigError);
    }
    SUBCASE("the paired mask is untouched by construction") {
        // shift operates on Image only; masks never enter the call
        auto vols = generate_synthetic_dataset(1, 1, 32, 3, 5);
        const Tensor mask_before = *vols[0].slices[0].mask;
        ShiftParams sp;
        sp.gamma = 1.7;
        sp.noise_std = 0.2;
        vols[0].slices[0].image = apply_domain_shift(vols[0].slices[0].image, sp, 9);
        CHECK(vols[0].slices[0].mask->v == mask_before.v);
    }
}

TEST_CASE("preprocess_volume") {
    SUBCASE("constant volume is degenerate") {
        PatientVolume v;
        v.patient_id = "flat";
        Slice s;
        s.image.pix = Tensor(1, 1, 16, 16, 2.5);
        v.slices.push_back(s);
        CHECK_THROWS_AS(preprocess_volume(v, 1.0, 16), DegenerateVolumeError);
    }
    SUBCASE("volume already at spec keeps geometry, normalizes intensities") {
        auto vols = generate_synthetic_dataset(2, 4, 32, 3, 11);
        PatientVolume out = preprocess_volume(vols[0], 1.0, 32);
        REQUIRE(out.slices.size() == 4);
        CHECK(out.slices[0].image.h() == 32);
        CHECK(out.slices[0].mask->v == vols[0].slices[0].mask->v);
        std::vector<double> all;
        for (const auto& sl : out.slices)
            all.insert(all.end(), sl.image.pix.v.begin(), sl.image.pix.v.end());
        CHECK(std::fabs(median(all)) < 1e-5);
        CHECK(std::fabs(quantile(all, 0.75) - quantile(all, 0.25) - 1.0) < 1e-5);
    }
    SUBCASE("cardiac-style recipe parameters (224px, 1.51mm) work") {
        auto vols = generate_synthetic_dataset(1, 2, 64, 3, 13);
        PatientVolume out = preprocess_volume(vols[0], 1.51, 224);
        CHECK(out.slices[0].image.h() == 224);
        CHECK(out.slices[0].image.w() == 224);
        CHECK(out.slices[0].image.spacing == 1.51);
        CHECK(is_one_hot(*out.slices[0].mask));
        // normalization statistics come from the acquired pixels, so the
        // padding sits at the normalized median (exact zero)
        const int inner = int(std::lround(64 * 1.0 / 1.51));
        const int off = (224 - inner) / 2;
        CHECK(out.slices[0].image.pix.at(0, 0, 0, 0) == 0.0);
        std::vector<double> acquired;
        for (const auto& sl : out.slices)
            for (int y = off; y < off + inner; ++y)
                for (int x = off; x < off + inner; ++x)
                    acquired.push_back(sl.image.pix.at(0, 0, y, x));
        CHECK(std::fabs(median(acquired)) < 1e-5);
        CHECK(std::fabs(quantile(acquired, 0.75) - quantile(acquired, 0.25) - 1.0) < 1e-5);
    }
}

TEST_CASE("corrupt_mask") {
    Rng rng(19);
    SUBCASE("patch side follows round(patch_frac * image side)") {
        // 224px at 10% -> 22px patches; verified via changed-pixel geometry
        Tensor m(1, 2, 224, 224);
        for (int y = 0; y < 224; ++y)
            for (int x = 0; x < 224; ++x) m.at(0, (y < 112) ? 0 : 1, y, x) = 1.0;
        Tensor c = corrupt_mask(m, 0.1, 0.0, 1, 3);
        int changed = 0;
        for (size_t i = 0; i < m.size(); ++i) changed += m.v[i] != c.v[i];
        // two swapped 22x22 patches can touch at most 2*22*22 pixels (x2 channels)
        CHECK(changed <= 2 * 2 * 22 * 22);
        CHECK(is_one_hot(c));
    }
    SUBCASE("identity when nothing is corrupted") {
        Tensor m = random_one_hot(3, 16, 16, rng);
        Tensor c = corrupt_mask(m, 0.1, 0.0, 0, 3);
        CHECK(c.v == m.v);
    }
    SUBCASE("patch exchange preserves per-class histograms exactly") {
        for (int t = 0; t < 10; ++t) {
            Tensor m = random_one_hot(3, 32, 32, rng);
            Tensor c = corrupt_mask(m, 0.2, 0.0, 3, uint64_t(t));
            CHECK(class_histogram(m) == class_histogram(c));
            CHECK(is_one_hot(c));
        }
    }
    SUBCASE("binary noise changes labels, output stays one-hot") {
        Tensor m = random_one_hot(3, 32, 32, rng);
        Tensor c = corrupt_mask(m, 0.1, 0.5, 0, 3);
        CHECK(is_one_hot(c));
        CHECK(class_histogram(m) != class_histogram(c));
    }
    SUBCASE("bad patch fraction rejected") {
        Tensor m = random_one_hot(2, 16, 16, rng);
        CHECK_THROWS_AS(corrupt_mask(m, 1.5, 0.0, 1, 3), ConfigError);
        CHECK_THROWS_AS(corrupt_mask(m, 0.0, 0.0, 1, 3), ConfigError);
    }
    SUBCASE("determinism") {
        Tensor m = random_one_hot(3, 32, 32, rng);
        CHECK(corrupt_mask(m, 0.1, 0.1, 2, 5).v == corrupt_mask(m, 0.1, 0.1, 2, 5).v);
    }
}

TEST_CASE("augment_discriminator_input") {
    Rng rng(29);
    Tensor m = random_soft_mask(3, 16, 16, rng);
    SUBCASE("degenerate parameters act as identity") {
        Tensor out = augment_discriminator_input(m, 0.0, 0.0, 0.0, 9);
        CHECK(out.v == m.v);
    }
    SUBCASE("default configuration perturbs, clips, and keeps shape") {
        Tensor out = augment_discriminator_input(m, 0.1, 1.5707963267948966, 0.1, 9);
        CHECK(out.same_shape(m));
        CHECK(out.v != m.v);
        for (double v : out.v) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    SUBCASE("fixed seed is deterministic") {
        auto a = augment_discriminator_input(m, 0.1, 1.0, 0.1, 17);
        auto b = augment_discriminator_input(m, 0.1, 1.0, 0.1, 17);
        auto c = augment_discriminator_input(m, 0.1, 1.0, 0.1, 18);
        CHECK(a.v == b.v);
        CHECK(a.v != c.v);
    }
}

TEST_CASE("split_patients") {
    auto vols = generate_synthetic_dataset(40, 1, 32, 2, 55);
    SUBCASE("40 patients split 16/8/16 at patient granularity") {
        SplitResult s = split_patients(vols, 0.4, 0.2, 0.4, 0.25, 5);
        CHECK(s.train.size() == 16);
        CHECK(s.val.size() == 8);
        CHECK(s.test.size() == 16);
        CHECK(s.labelled_ids.size() == 4); // ceil(0.25 * 16)
        std::set<std::string> seen;
        for (const auto& v : s.train) seen.insert(v.patient_id);
        for (const auto& v : s.val) seen.insert(v.patient_id);
        for (const auto& v : s.test) seen.insert(v.patient_id);
        CHECK(seen.size() == 40); // disjoint
        for (const auto& id : s.labelled_ids) CHECK(s.is_labelled(id));
    }
    SUBCASE("same seed reproduces the split") {
        SplitResult a = split_patients(vols, 0.4, 0.2, 0.4, 0.25, 5);
        SplitResult b = split_patients(vols, 0.4, 0.2, 0.4, 0.25, 5);
        for (size_t i = 0; i < a.train.size(); ++i)
            CHECK(a.train[i].patient_id == b.train[i].patient_id);
        SplitResult c = split_patients(vols, 0.4, 0.2, 0.4, 0.25, 6);
        bool same = true;
        for (size_t i = 0; i < a.train.size(); ++i)
            same = same && a.train[i].patient_id == c.train[i].patient_id;
        CHECK_FALSE(same);
    }
    SUBCASE("bad fractions rejected") {
        CHECK_THROWS_AS(split_patients(vols, 0.5, 0.2, 0.4, 0.25, 5), ConfigError);
    }
}

TEST_CASE("dataset directory round-trip") {
    namespace fs = std::filesystem;
    const std::string root = "test_dataset_tmp";
    fs::remove_all(root);
    auto vols = generate_synthetic_dataset(6, 2, 32, 3, 77);
    std::vector<PatientVolume> prepped;
    for (const auto& v : vols) prepped.push_back(preprocess_volume(v, 1.0, 32));
    SplitResult s = split_patients(prepped, 0.5, 0.25, 0.25, 0.5, 3);
    save_split_dataset(root, s, 3);

    int n_classes = 0;
    SplitResult loaded = load_split_dataset(root, &n_classes);
    CHECK(n_classes == 3);
    REQUIRE(loaded.train.size() == s.train.size());
    REQUIRE(loaded.val.size() == s.val.size());
    REQUIRE(loaded.test.size() == s.test.size());
    CHECK(loaded.labelled_ids == s.labelled_ids);
    // float32 on disk: values round-trip to within f32 precision
    for (size_t i = 0; i < s.train.size(); ++i) {
        CHECK(loaded.train[i].patient_id == s.train[i].patient_id);
        for (size_t k = 0; k < s.train[i].slices.size(); ++k) {
            const auto& a = s.train[i].slices[k];
            const auto& b = loaded.train[i].slices[k];
            CHECK(b.image.spacing == a.image.spacing);
            double worst = 0.0;
            for (size_t j = 0; j < a.image.pix.size(); ++j)
                worst = std::max(worst, std::fabs(a.image.pix.v[j] - b.image.pix.v[j]));
            CHECK(worst < 1e-5);
            CHECK(b.mask->v == a.mask->v);
        }
    }
    fs::remove_all(root);
}
