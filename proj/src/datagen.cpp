#include "attt/datagen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace attt {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// mask helpers

bool is_one_hot(const Tensor& m) {
    for (double x : m.v)
        if (x != 0.0 && x != 1.0) return false;
    for (int i = 0; i < m.n; ++i)
        for (int y = 0; y < m.h; ++y)
            for (int x = 0; x < m.w; ++x) {
                double s = 0.0;
                for (int c = 0; c < m.c; ++c) s += m.at(i, c, y, x);
                if (s != 1.0) return false;
            }
    return true;
}

bool is_soft_mask(const Tensor& m, double tol) {
    for (double x : m.v)
        if (!(x >= -tol && x <= 1.0 + tol)) return false;
    for (int i = 0; i < m.n; ++i)
        for (int y = 0; y < m.h; ++y)
            for (int x = 0; x < m.w; ++x) {
                double s = 0.0;
                for (int c = 0; c < m.c; ++c) s += m.at(i, c, y, x);
                if (std::fabs(s - 1.0) > tol) return false;
            }
    return true;
}

Tensor mask_from_labels(const std::vector<uint8_t>& labels, int h, int w, int c) {
    Tensor m(1, c, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int l = labels[size_t(y) * w + x];
            if (l >= c) throw ContractError("mask_from_labels: label out of range");
            m.at(0, l, y, x) = 1.0;
        }
    return m;
}

std::vector<uint8_t> labels_from_mask(const Tensor& m) {
    std::vector<uint8_t> out(size_t(m.h) * m.w, 0);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            int best = 0;
            double bv = m.at(0, 0, y, x);
            for (int c = 1; c < m.c; ++c)
                if (m.at(0, c, y, x) > bv) {
                    bv = m.at(0, c, y, x);
                    best = c;
                }
            out[size_t(y) * m.w + x] = uint8_t(best);
        }
    return out;
}

Tensor harden(const Tensor& soft) {
    Tensor m = Tensor::like(soft);
    for (int i = 0; i < soft.n; ++i)
        for (int y = 0; y < soft.h; ++y)
            for (int x = 0; x < soft.w; ++x) {
                int best = 0;
                double bv = soft.at(i, 0, y, x);
                for (int c = 1; c < soft.c; ++c)
                    if (soft.at(i, c, y, x) > bv) {
                        bv = soft.at(i, c, y, x);
                        best = c;
                    }
                m.at(i, best, y, x) = 1.0;
            }
    return m;
}

// ---------------------------------------------------------------------------
// synthetic generator

namespace {

// Smooth random field in [-1, 1]: a few low-frequency sinusoids.
struct SmoothField {
    double a[3], fy[3], fx[3], ph[3];

    static SmoothField sample(Rng& rng) {
        SmoothField f;
        double norm = 0.0;
        for (int i = 0; i < 3; ++i) {
            f.a[i] = rng.uniform(0.3, 1.0);
            f.fy[i] = rng.uniform(0.5, 2.0);
            f.fx[i] = rng.uniform(0.5, 2.0);
            f.ph[i] = rng.uniform(0.0, 6.2831853);
            norm += f.a[i];
        }
        for (int i = 0; i < 3; ++i) f.a[i] /= norm;
        return f;
    }

    double operator()(double uy, double ux) const {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            s += a[i] * std::sin(6.2831853 * (fy[i] * uy + fx[i] * ux) + ph[i]);
        return s;
    }
};

} // namespace

std::vector<PatientVolume> generate_synthetic_dataset(int n_patients, int slices_per_patient,
                                                      int image_size, int n_classes, uint64_t seed) {
    if (n_classes < 2) throw ConfigError("generate_synthetic_dataset: need at least 2 classes");
    if (image_size < 32) throw ConfigError("generate_synthetic_dataset: image_size must be >= 32");
    if (n_patients < 1 || slices_per_patient < 1)
        throw ConfigError("generate_synthetic_dataset: counts must be positive");

    std::vector<PatientVolume> out;
    out.reserve(n_patients);
    const double s = double(image_size);
    for (int p = 0; p < n_patients; ++p) {
        Rng rng(derive_seed(seed, "synth_patient", uint64_t(p)));
        PatientVolume vol;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "patient_%03d", p);
        vol.patient_id = buf;

        const double cy0 = rng.uniform(0.44, 0.56) * s;
        const double cx0 = rng.uniform(0.44, 0.56) * s;
        const double r_in = rng.uniform(0.14, 0.19) * s;
        const double ring = rng.uniform(0.08, 0.12) * s;
        const double squash = rng.uniform(0.85, 1.15); // mild anisotropy
        const double blob_r = rng.uniform(0.05, 0.08) * s;
        const double blob_ang = rng.uniform(0.0, 6.2831853);
        const double blob_dist = rng.uniform(0.36, 0.42) * s;
        // a torso ellipse surrounds the heart so the patient IQR spans the
        // air/tissue contrast instead of the noise band
        const double body_ry = rng.uniform(0.40, 0.47) * s;
        const double body_rx = rng.uniform(0.40, 0.47) * s;

        // per-patient appearance
        const double i_air = rng.uniform(0.02, 0.06);
        const double i_body = rng.uniform(0.22, 0.34);
        const double i_ventricle = rng.uniform(0.70, 0.90);
        const double i_myo = rng.uniform(0.42, 0.56);
        const double i_blob = rng.uniform(0.60, 0.80);
        const double gain = rng.uniform(0.8, 1.3);    // removed by normalization
        const double offset = rng.uniform(-0.1, 0.2); // removed by normalization
        // smooth texture dominates the high-frequency noise so the patient
        // IQR spans appearance structure, not the noise band
        const double tex_amp = rng.uniform(0.12, 0.22);
        const double noise_std = rng.uniform(0.004, 0.01);
        SmoothField tex = SmoothField::sample(rng);

        for (int k = 0; k < slices_per_patient; ++k) {
            const double pos = slices_per_patient == 1
                                   ? 0.0
                                   : 2.0 * double(k) / double(slices_per_patient - 1) - 1.0;
            const double m = std::sqrt(std::max(0.5, 1.0 - 0.35 * pos * pos));
            const double cy = cy0 + rng.uniform(-0.01, 0.01) * s;
            const double cx = cx0 + rng.uniform(-0.01, 0.01) * s;
            const double bcy = cy0 + blob_dist * std::sin(blob_ang);
            const double bcx = cx0 + blob_dist * std::cos(blob_ang);

            Image img;
            img.pix = Tensor(1, 1, image_size, image_size);
            img.spacing = 1.0;
            img.patient_id = vol.patient_id;
            std::vector<uint8_t> labels(size_t(image_size) * image_size, 0);

            for (int y = 0; y < image_size; ++y)
                for (int x = 0; x < image_size; ++x) {
                    const double dy = (y + 0.5 - cy) * squash;
                    const double dx = (x + 0.5 - cx) / squash;
                    const double d = std::sqrt(dy * dy + dx * dx);
                    const double by = (y + 0.5 - 0.5 * s) / body_ry;
                    const double bx = (x + 0.5 - 0.5 * s) / body_rx;
                    const bool in_body = by * by + bx * bx <= 1.0;
                    uint8_t lab = 0;
                    if (d <= r_in * m)
                        lab = 1;
                    else if (n_classes >= 3 && d <= (r_in + ring) * m)
                        lab = 2;
                    else if (n_classes >= 4) {
                        const double bdy = y + 0.5 - bcy, bdx = x + 0.5 - bcx;
                        if (std::sqrt(bdy * bdy + bdx * bdx) <= blob_r * m) lab = 3;
                    }
                    labels[size_t(y) * image_size + x] = lab;
                    double base = in_body ? i_body : i_air;
                    if (lab == 1) base = i_ventricle;
                    else if (lab == 2) base = i_myo;
                    else if (lab == 3) base = i_blob;
                    const double t = tex(double(y) / s, double(x) / s);
                    double val = gain * (base * (1.0 + tex_amp * t)) + offset +
                                 noise_std * rng.normal();
                    img.pix.at(0, 0, y, x) = val;
                }

            Slice sl;
            sl.image = std::move(img);
            sl.mask = mask_from_labels(labels, image_size, image_size, n_classes);
            vol.slices.push_back(std::move(sl));
        }
        out.push_back(std::move(vol));
    }
    return out;
}

// ---------------------------------------------------------------------------
// domain shift

Image apply_domain_shift(const Image& img, const ShiftParams& params, uint64_t seed) {
    if (params.gamma <= 0.0) throw ConfigError("apply_domain_shift: gamma must be positive");
    if (params.contrast_scale <= 0.0)
        throw ConfigError("apply_domain_shift: contrast_scale must be positive");
    Image out = img;
    if (params.is_identity()) return out;

    Rng rng(derive_seed(seed, "shift"));
    SmoothField bias = SmoothField::sample(rng);
    const int h = img.h(), w = img.w();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = img.pix.at(0, 0, y, x);
            if (params.gamma != 1.0) {
                // signed gamma keeps negative normalized intensities meaningful
                v = (v >= 0.0 ? 1.0 : -1.0) * std::pow(std::fabs(v), params.gamma);
            }
            if (params.bias_field_amplitude != 0.0)
                v *= 1.0 + params.bias_field_amplitude * bias(double(y) / h, double(x) / w);
            if (params.noise_std != 0.0) v += params.noise_std * rng.normal();
            if (params.contrast_scale != 1.0) v *= params.contrast_scale;
            out.pix.at(0, 0, y, x) = v;
        }
    return out;
}

// ---------------------------------------------------------------------------
// preprocessing

namespace {

Tensor resample_bilinear(const Tensor& x, int oh, int ow) {
    Tensor y(x.n, x.c, oh, ow);
    const double sy = double(x.h) / oh, sx = double(x.w) / ow;
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c)
            for (int yy = 0; yy < oh; ++yy)
                for (int xx = 0; xx < ow; ++xx) {
                    const double fy = (yy + 0.5) * sy - 0.5;
                    const double fx = (xx + 0.5) * sx - 0.5;
                    const int y0 = int(std::floor(fy)), x0 = int(std::floor(fx));
                    const double wy = fy - y0, wx = fx - x0;
                    double acc = 0.0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int yi = std::clamp(y0 + dy, 0, x.h - 1);
                            const int xi = std::clamp(x0 + dx, 0, x.w - 1);
                            const double wgt = (dy ? wy : 1.0 - wy) * (dx ? wx : 1.0 - wx);
                            acc += wgt * x.at(i, c, yi, xi);
                        }
                    y.at(i, c, yy, xx) = acc;
                }
    return y;
}

Tensor resample_nearest(const Tensor& x, int oh, int ow) {
    Tensor y(x.n, x.c, oh, ow);
    const double sy = double(x.h) / oh, sx = double(x.w) / ow;
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c)
            for (int yy = 0; yy < oh; ++yy)
                for (int xx = 0; xx < ow; ++xx) {
                    const int yi = std::clamp(int((yy + 0.5) * sy), 0, x.h - 1);
                    const int xi = std::clamp(int((xx + 0.5) * sx), 0, x.w - 1);
                    y.at(i, c, yy, xx) = x.at(i, c, yi, xi);
                }
    return y;
}

// Center crop or pad to size; pad_background puts one in channel 0.
Tensor crop_or_pad(const Tensor& x, int size, bool pad_background) {
    Tensor y(x.n, x.c, size, size);
    if (pad_background)
        for (int i = 0; i < x.n; ++i)
            for (int yy = 0; yy < size; ++yy)
                for (int xx = 0; xx < size; ++xx) y.at(i, 0, yy, xx) = 1.0;
    const int oy = (size - x.h) / 2, ox = (size - x.w) / 2;
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c)
            for (int yy = 0; yy < x.h; ++yy) {
                const int ty = yy + oy;
                if (ty < 0 || ty >= size) continue;
                for (int xx = 0; xx < x.w; ++xx) {
                    const int tx = xx + ox;
                    if (tx < 0 || tx >= size) continue;
                    y.at(i, c, ty, tx) = x.at(i, c, yy, xx);
                }
            }
    return y;
}

} // namespace

PatientVolume preprocess_volume(const PatientVolume& volume, double target_spacing,
                                int target_size) {
    if (volume.slices.empty()) throw ContractError("preprocess_volume: empty volume");

    // resample first; normalization statistics come from the acquired pixels,
    // so zero padding later sits exactly at the normalized median
    std::vector<Tensor> pixs, masks;
    std::vector<double> all;
    for (const auto& sl : volume.slices) {
        Tensor pix = sl.image.pix;
        Tensor mask = sl.mask ? *sl.mask : Tensor();
        if (sl.image.spacing != target_spacing) {
            const int oh =
                std::max(1, int(std::lround(sl.image.h() * sl.image.spacing / target_spacing)));
            const int ow =
                std::max(1, int(std::lround(sl.image.w() * sl.image.spacing / target_spacing)));
            pix = resample_bilinear(pix, oh, ow);
            if (mask.size() > 0) mask = resample_nearest(mask, oh, ow);
        }
        all.insert(all.end(), pix.v.begin(), pix.v.end());
        pixs.push_back(std::move(pix));
        masks.push_back(std::move(mask));
    }
    const double med = median(all);
    const double iqr = quantile(all, 0.75) - quantile(all, 0.25);
    if (iqr == 0.0)
        throw DegenerateVolumeError("preprocess_volume: IQR is zero for patient " +
                                    volume.patient_id);

    PatientVolume out;
    out.patient_id = volume.patient_id;
    for (size_t k = 0; k < pixs.size(); ++k) {
        for (double& v : pixs[k].v) v = (v - med) / iqr;
        Slice ns;
        ns.image.pix = crop_or_pad(pixs[k], target_size, false);
        ns.image.spacing = target_spacing;
        ns.image.patient_id = volume.slices[k].image.patient_id;
        if (masks[k].size() > 0) ns.mask = crop_or_pad(masks[k], target_size, true);
        out.slices.push_back(std::move(ns));
    }
    return out;
}

// ---------------------------------------------------------------------------
// fake anchors

Tensor corrupt_mask(const Tensor& mask, double patch_frac, double flip_prob, int n_swaps,
                    uint64_t seed) {
    if (!(patch_frac > 0.0 && patch_frac < 1.0))
        throw ConfigError("corrupt_mask: patch_frac must be in (0,1)");
    const int side_img = std::min(mask.h, mask.w);
    const int side = int(std::lround(patch_frac * side_img));
    if (side > side_img) throw ConfigError("corrupt_mask: patch larger than image");
    Tensor out = mask;
    Rng rng(derive_seed(seed, "corrupt"));

    if (side > 0) {
        for (int sw = 0; sw < n_swaps; ++sw) {
            int y1 = 0, x1 = 0, y2 = 0, x2 = 0;
            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                y1 = rng.uniform_int(mask.h - side + 1);
                x1 = rng.uniform_int(mask.w - side + 1);
                y2 = rng.uniform_int(mask.h - side + 1);
                x2 = rng.uniform_int(mask.w - side + 1);
                const bool overlap = std::abs(y1 - y2) < side && std::abs(x1 - x2) < side;
                placed = !overlap;
            }
            if (!placed) throw ConfigError("corrupt_mask: cannot place non-overlapping patches");
            for (int c = 0; c < mask.c; ++c)
                for (int dy = 0; dy < side; ++dy)
                    for (int dx = 0; dx < side; ++dx)
                        std::swap(out.at(0, c, y1 + dy, x1 + dx), out.at(0, c, y2 + dy, x2 + dx));
        }
    }

    if (flip_prob > 0.0) {
        for (int y = 0; y < mask.h; ++y)
            for (int x = 0; x < mask.w; ++x) {
                if (rng.uniform() < flip_prob) {
                    const int cls = rng.uniform_int(mask.c);
                    for (int c = 0; c < mask.c; ++c) out.at(0, c, y, x) = (c == cls) ? 1.0 : 0.0;
                }
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// discriminator-input augmentation

Tensor augment_discriminator_input(const Tensor& mask, double noise_std, double max_rot,
                                   double max_shift_frac, uint64_t seed) {
    Rng rng(derive_seed(seed, "disc_aug"));
    Tensor out = mask;

    if (noise_std > 0.0)
        for (double& v : out.v) v += noise_std * rng.normal();

    const double theta = max_rot > 0.0 ? rng.uniform(0.0, max_rot) : 0.0;
    const double sy = max_shift_frac > 0.0
                          ? rng.uniform(-max_shift_frac, max_shift_frac) * mask.h
                          : 0.0;
    const double sx = max_shift_frac > 0.0
                          ? rng.uniform(-max_shift_frac, max_shift_frac) * mask.w
                          : 0.0;
    if (theta != 0.0 || sy != 0.0 || sx != 0.0) {
        Tensor warped = Tensor::like(out);
        const double cy = (mask.h - 1) / 2.0, cx = (mask.w - 1) / 2.0;
        const double ct = std::cos(theta), st = std::sin(theta);
        for (int i = 0; i < mask.n; ++i)
            for (int y = 0; y < mask.h; ++y)
                for (int x = 0; x < mask.w; ++x) {
                    // inverse map of rotate-then-shift
                    const double ry = y - sy - cy, rx = x - sx - cx;
                    const double fy = ct * ry + st * rx + cy;
                    const double fx = -st * ry + ct * rx + cx;
                    const int y0 = int(std::floor(fy)), x0 = int(std::floor(fx));
                    const double wy = fy - y0, wx = fx - x0;
                    for (int c = 0; c < mask.c; ++c) {
                        double acc = 0.0;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const int yi = y0 + dy, xi = x0 + dx;
                                const double wgt = (dy ? wy : 1.0 - wy) * (dx ? wx : 1.0 - wx);
                                double v;
                                if (yi < 0 || yi >= mask.h || xi < 0 || xi >= mask.w)
                                    v = (c == 0) ? 1.0 : 0.0; // background fill
                                else
                                    v = out.at(i, c, yi, xi);
                                acc += wgt * v;
                            }
                        warped.at(i, c, y, x) = acc;
                    }
                }
        out = std::move(warped);
    }

    for (double& v : out.v) v = std::clamp(v, 0.0, 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// patient split

SplitResult split_patients(const std::vector<PatientVolume>& dataset, double frac_train,
                           double frac_val, double frac_test, double labelled_frac, uint64_t seed) {
    if (std::fabs(frac_train + frac_val + frac_test - 1.0) > 1e-9)
        throw ConfigError("split_patients: fractions must sum to 1");
    if (labelled_frac < 0.0 || labelled_frac > 1.0)
        throw ConfigError("split_patients: labelled_frac must be in [0,1]");
    const int n = int(dataset.size());
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(idx);

    const int n_train = int(std::lround(frac_train * n));
    const int n_val = int(std::lround(frac_val * n));
    if (n_train + n_val > n) throw ConfigError("split_patients: split rounds past dataset size");

    SplitResult out;
    for (int i = 0; i < n_train; ++i) out.train.push_back(dataset[idx[i]]);
    for (int i = n_train; i < n_train + n_val; ++i) out.val.push_back(dataset[idx[i]]);
    for (int i = n_train + n_val; i < n; ++i) out.test.push_back(dataset[idx[i]]);

    const int n_lab = int(std::ceil(labelled_frac * n_train));
    for (int i = 0; i < n_lab && i < n_train; ++i) out.labelled_ids.push_back(out.train[i].patient_id);
    return out;
}

// ---------------------------------------------------------------------------
// dataset persistence

namespace {

void save_patient(const std::string& dir, const PatientVolume& vol, int n_classes) {
    fs::create_directories(dir);
    for (size_t k = 0; k < vol.slices.size(); ++k) {
        const Slice& sl = vol.slices[k];
        char base[32];
        std::snprintf(base, sizeof(base), "slice_%03zu", k);
        {
            std::ofstream f(dir + "/" + base + ".img", std::ios::binary);
            std::vector<float> buf(sl.image.pix.v.begin(), sl.image.pix.v.end());
            f.write(reinterpret_cast<const char*>(buf.data()),
                    std::streamsize(buf.size() * sizeof(float)));
        }
        {
            json side;
            side["height"] = sl.image.h();
            side["width"] = sl.image.w();
            side["classes"] = n_classes;
            side["spacing"] = sl.image.spacing;
            side["patient_id"] = vol.patient_id;
            std::ofstream f(dir + "/" + base + ".json");
            f << side.dump(2) << "\n";
        }
        if (sl.mask) {
            std::ofstream f(dir + "/" + base + ".msk", std::ios::binary);
            const auto labels = labels_from_mask(*sl.mask);
            f.write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size()));
        }
    }
}

PatientVolume load_patient(const std::string& dir) {
    PatientVolume vol;
    std::vector<std::string> bases;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string p = e.path().string();
        if (p.size() > 5 && p.substr(p.size() - 5) == ".json")
            bases.push_back(p.substr(0, p.size() - 5));
    }
    std::sort(bases.begin(), bases.end());
    for (const auto& base : bases) {
        std::ifstream sf(base + ".json");
        json side = json::parse(sf);
        const int h = side.at("height"), w = side.at("width");
        const int classes = side.at("classes");
        Slice sl;
        sl.image.pix = Tensor(1, 1, h, w);
        sl.image.spacing = side.at("spacing");
        sl.image.patient_id = side.at("patient_id");
        vol.patient_id = sl.image.patient_id;
        {
            std::ifstream f(base + ".img", std::ios::binary);
            std::vector<float> buf(size_t(h) * w);
            f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
            for (size_t i = 0; i < buf.size(); ++i) sl.image.pix.v[i] = buf[i];
        }
        if (fs::exists(base + ".msk")) {
            std::ifstream f(base + ".msk", std::ios::binary);
            std::vector<uint8_t> labels(size_t(h) * w);
            f.read(reinterpret_cast<char*>(labels.data()), std::streamsize(labels.size()));
            sl.mask = mask_from_labels(labels, h, w, classes);
        }
        vol.slices.push_back(std::move(sl));
    }
    return vol;
}

} // namespace

void save_split_dataset(const std::string& root, const SplitResult& split, int n_classes) {
    fs::create_directories(root);
    json manifest;
    manifest["n_classes"] = n_classes;
    manifest["labelled"] = split.labelled_ids;
    json splits;
    auto dump = [&](const char* name, const std::vector<PatientVolume>& vols) {
        std::vector<std::string> ids;
        for (const auto& v : vols) {
            ids.push_back(v.patient_id);
            save_patient(root + "/" + name + "/" + v.patient_id, v, n_classes);
        }
        splits[name] = ids;
    };
    dump("train", split.train);
    dump("val", split.val);
    dump("test", split.test);
    manifest["splits"] = splits;
    std::ofstream f(root + "/dataset.json");
    f << manifest.dump(2) << "\n";
}

SplitResult load_split_dataset(const std::string& root, int* n_classes_out) {
    std::ifstream f(root + "/dataset.json");
    if (!f) throw ConfigError("load_split_dataset: missing manifest in " + root);
    json manifest = json::parse(f);
    if (n_classes_out) *n_classes_out = manifest.at("n_classes");
    SplitResult out;
    out.labelled_ids = manifest.at("labelled").get<std::vector<std::string>>();
    auto load = [&](const char* name, std::vector<PatientVolume>& vols) {
        for (const auto& id : manifest.at("splits").at(name).get<std::vector<std::string>>())
            vols.push_back(load_patient(root + "/" + name + "/" + id));
    };
    load("train", out.train);
    load("val", out.val);
    load("test", out.test);
    return out;
}

} // namespace attt
