#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attt/tensor.hpp"

namespace attt {

// Single-channel 2D image with spacing metadata. Pixels live in a (1,1,h,w)
// tensor so images feed the nets directly.
struct Image {
    Tensor pix;
    double spacing = 1.0; // mm per pixel, isotropic
    std::string patient_id;

    int h() const { return pix.h; }
    int w() const { return pix.w; }
};

// Masks are (1,c,h,w) one-hot tensors, soft masks (1,c,h,w) probability maps.
bool is_one_hot(const Tensor& m);
bool is_soft_mask(const Tensor& m, double tol = 1e-5);

// One-hot mask from a label map (row-major labels in [0, c)).
Tensor mask_from_labels(const std::vector<uint8_t>& labels, int h, int w, int c);
std::vector<uint8_t> labels_from_mask(const Tensor& m);
Tensor harden(const Tensor& soft); // argmax -> one-hot

struct Slice {
    Image image;
    std::optional<Tensor> mask;
};

struct PatientVolume {
    std::string patient_id;
    std::vector<Slice> slices;
};

// Controllable test-time distribution shift (stands in for a scanner change).
struct ShiftParams {
    double gamma = 1.0;
    double bias_field_amplitude = 0.0;
    double noise_std = 0.0;
    double contrast_scale = 1.0;

    bool is_identity() const {
        return gamma == 1.0 && bias_field_amplitude == 0.0 && noise_std == 0.0 &&
               contrast_scale == 1.0;
    }
};

// Cardiac-like nested shapes (disk inside annulus, optional extra blob for
// c >= 4) with per-patient randomized pose, size and texture. Deterministic
// in (arguments, seed); raw intensities, spacing 1.0.
std::vector<PatientVolume> generate_synthetic_dataset(int n_patients, int slices_per_patient,
                                                      int image_size, int n_classes, uint64_t seed);

// Pixel-wise intensity shift of a preprocessed image: signed gamma curve,
// multiplicative smooth bias field, additive noise, contrast scaling. The
// paired mask is untouched by construction.
Image apply_domain_shift(const Image& img, const ShiftParams& params, uint64_t seed);

// Resample to target spacing, center-crop/zero-pad to target_size^2 (masks
// padded as background), then normalize (x - median) / IQR with patient-level
// statistics. IQR of zero is a degenerate volume.
PatientVolume preprocess_volume(const PatientVolume& volume, double target_spacing, int target_size);

// Fake-anchor corruption: n_swaps exchanges of non-overlapping square patches
// with side round(patch_frac * image side), then independent per-pixel label
// flips to a uniformly random class with probability flip_prob.
Tensor corrupt_mask(const Tensor& mask, double patch_frac, double flip_prob, int n_swaps,
                    uint64_t seed);

// Discriminator-input augmentation: additive Gaussian noise, then a random
// rotation in [0, max_rot] and sub-pixel shift up to max_shift_frac per axis
// (one bilinear warp, background fill), clipped to [0,1]. No per-pixel
// renormalization: soft inputs are off-simplex anyway.
Tensor augment_discriminator_input(const Tensor& mask, double noise_std, double max_rot,
                                   double max_shift_frac, uint64_t seed);

struct SplitResult {
    std::vector<PatientVolume> train;
    std::vector<std::string> labelled_ids; // train patients whose masks are paired
    std::vector<PatientVolume> val;
    std::vector<PatientVolume> test;

    bool is_labelled(const std::string& id) const {
        for (const auto& s : labelled_ids)
            if (s == id) return true;
        return false;
    }
};

// Patient-level split; within train only ceil(labelled_frac * n) patients
// keep their masks paired, the held-out masks feed the unpaired-mask pool.
SplitResult split_patients(const std::vector<PatientVolume>& dataset, double frac_train,
                           double frac_val, double frac_test, double labelled_frac, uint64_t seed);

// On-disk dataset: one directory per patient under <root>/<split>/; slices as
// raw little-endian float32 plus a JSON sidecar, masks as 8-bit label maps,
// and a dataset.json manifest at the root.
void save_split_dataset(const std::string& root, const SplitResult& split, int n_classes);
SplitResult load_split_dataset(const std::string& root, int* n_classes_out = nullptr);

} // namespace attt
