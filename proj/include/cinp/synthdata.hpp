#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cinp {

struct Dims3 {
    std::size_t d = 16;
    std::size_t h = 16;
    std::size_t w = 16;

    std::size_t voxels() const { return d * h * w; }
    bool operator==(const Dims3&) const = default;
};

struct Volume3D {
    Dims3 dims;
    std::vector<double> voxels;  // row-major (d, h, w)
    std::string subject_id;

    double at(std::size_t z, std::size_t y, std::size_t x) const {
        return voxels[(z * dims.h + y) * dims.w + x];
    }
};

struct BoldSeries {
    std::size_t n_rois = 0;
    std::size_t n_timepoints = 0;
    std::vector<double> signals;  // n_rois x n_timepoints, row-major
};

struct Fcn {
    std::size_t n_rois = 0;
    std::vector<double> matrix;  // n_rois x n_rois, row-major

    double at(std::size_t i, std::size_t j) const { return matrix[i * n_rois + j]; }
};

struct PairedSample {
    Volume3D volume;
    BoldSeries bold;
    Fcn fcn;
    int label = 0;
    std::string subject_id;
};

struct CohortSpec {
    std::size_t n_subjects = 256;
    std::size_t k_classes = 2;
    Dims3 dims{};
    std::size_t n_rois = 16;
    std::size_t n_timepoints = 200;
    std::uint64_t seed = 0;
};

struct Cohort {
    CohortSpec spec;
    std::vector<PairedSample> samples;
};

struct MaskSpec {
    double ratio = 0.30;
    std::uint64_t seed = 0;
};

struct MaskedVolume {
    Volume3D masked;
    std::vector<std::uint8_t> mask;  // 1 where the voxel was zeroed
};

struct AugmentCfg {
    double noise_sigma = 0.05;
    std::array<double, 3> flip_prob{0.5, 0.5, 0.5};  // per axis (d, h, w)
    std::array<double, 2> intensity_scale_range{0.9, 1.1};
    std::array<double, 2> intensity_shift_range{-0.1, 0.1};
    std::uint64_t seed = 0;

    static AugmentCfg identity() {
        AugmentCfg cfg;
        cfg.noise_sigma = 0.0;
        cfg.flip_prob = {0.0, 0.0, 0.0};
        cfg.intensity_scale_range = {1.0, 1.0};
        cfg.intensity_shift_range = {0.0, 0.0};
        return cfg;
    }
};

// Cohort of paired (volume, BOLD) subjects. Each class has a prototype that
// shapes both modalities: faint intensity blobs at class-specific positions
// (mirrored into all octants so axis flips keep them), and a class-specific
// assignment of ROIs to correlated modules of uneven size in the BOLD
// covariance, so each ROI's overall connectivity depends on the class. A
// per-subject latent u in [-1, 1] sets the anatomy size, the amplitude of a
// central blob and the within-module correlation, so image and network of
// one subject share more than their class. Many random nuisance blobs, kept
// clear of the central blob, keep the class signal from being trivially
// linear in the raw image. Subject i draws from seed
// stream ("subject", i).
std::vector<PairedSample> gen_paired_cohort(const CohortSpec& spec);

// Pearson correlation between every pair of ROI rows; unit diagonal.
Fcn bold_to_fcn(const BoldSeries& bold);

// Node i's feature vector is row i of the FCN.
std::vector<double> fcn_node_features(const Fcn& fcn);

// Selects exactly floor(ratio * V) voxels with a partial Fisher-Yates shuffle
// driven by Rng(spec.seed): for i in [0, m): j = i + rng.index(V - i),
// swap(order[i], order[j]). The first m entries of `order` are zeroed.
MaskedVolume mask_volume(const Volume3D& v, const MaskSpec& spec);
std::vector<std::size_t> mask_indices(std::size_t n_voxels, const MaskSpec& spec);

// Flip (d, h, w axes, each Bernoulli), scale, shift, then Gaussian noise.
Volume3D augment_volume(const Volume3D& v, const AugmentCfg& cfg);

// Trilinear, corner-aligned (source coordinate = i * (S - 1) / (T - 1)).
Volume3D resize_volume(const Volume3D& v, const Dims3& target);

void validate_fcn(const Fcn& fcn);
void validate_augment_cfg(const AugmentCfg& cfg);

// Cohort directory: cohort.json plus <subject_id>.vol / <subject_id>.bold,
// raw little-endian f64. The FCN is rebuilt from the BOLD series on import.
void export_cohort(const std::filesystem::path& dir, const Cohort& cohort);
Cohort import_cohort(const std::filesystem::path& dir);

}  // namespace cinp
