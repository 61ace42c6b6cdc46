#include "cinp/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cinp/error.hpp"
#include "cinp/rng.hpp"

namespace cinp {

namespace {

struct Blob {
    std::array<double, 3> center;
    double radius;
    double amplitude;
};

struct ClassPrototype {
    std::vector<Blob> blobs;
    std::vector<std::size_t> module_of_roi;
};

struct Prototypes {
    std::vector<ClassPrototype> classes;
};

// Volume model. Anatomy and class blobs are symmetric under the flips the
// augmentation applies, so flipping never changes what a volume says about
// its subject. The shared latent scales the anatomy and a central blob; the
// nuisance blobs are per-subject and carry no cross-modal information.
constexpr double kAnatomyLevel = 0.4;
constexpr double kAnatomyLatentScale = 0.10;
constexpr std::size_t kClassSeeds = 2;  // each mirrored into all 8 octants
constexpr double kClassBlobAmplitude = 0.10;
constexpr double kClassBlobRadius = 0.08;
constexpr double kCenterJitter = 0.02;
constexpr double kLatentBlobAmplitude = 1.0;
constexpr double kLatentBlobRadius = 0.12;
constexpr std::size_t kNuisanceBlobs = 18;
constexpr double kNuisanceAmplitude = 1.2;
constexpr double kNuisanceRadius = 0.10;
constexpr double kVoxelNoise = 0.05;
constexpr double kModuleRho = 0.6;
constexpr double kModuleRhoLatent = 0.12;

Prototypes make_prototypes(const CohortSpec& spec) {
    Rng rng(derive_seed(spec.seed, "prototype"));
    Prototypes proto;
    const std::size_t n_modules = std::max<std::size_t>(2, spec.n_rois / 4);
    for (std::size_t c = 0; c < spec.k_classes; ++c) {
        ClassPrototype cp;
        for (std::size_t b = 0; b < kClassSeeds; ++b) {
            const std::array<double, 3> seed_center{rng.uniform(0.12, 0.40), rng.uniform(0.12, 0.40),
                                                    rng.uniform(0.12, 0.40)};
            for (int octant = 0; octant < 8; ++octant) {
                Blob blob{seed_center, kClassBlobRadius, kClassBlobAmplitude};
                for (int axis = 0; axis < 3; ++axis) {
                    if (octant >> axis & 1) blob.center[axis] = 1.0 - blob.center[axis];
                }
                cp.blobs.push_back(blob);
            }
        }
        std::vector<std::size_t> order(spec.n_rois);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            std::swap(order[i], order[i + rng.index(order.size() - i)]);
        }
        // Uneven, class-specific module sizes: a small floor per module, the
        // rest dealt out at random. How strongly each ROI connects overall
        // then differs between classes, not just which ROIs pair up.
        const std::size_t floor_size = std::min<std::size_t>(2, spec.n_rois / n_modules);
        std::vector<std::size_t> sizes(n_modules, floor_size);
        for (std::size_t extra = spec.n_rois - floor_size * n_modules; extra > 0; --extra) {
            ++sizes[rng.index(n_modules)];
        }
        cp.module_of_roi.resize(spec.n_rois);
        std::size_t pos = 0;
        for (std::size_t m = 0; m < n_modules; ++m) {
            for (std::size_t i = 0; i < sizes[m]; ++i) cp.module_of_roi[order[pos++]] = m;
        }
        proto.classes.push_back(std::move(cp));
    }
    return proto;
}

double blob_value(const Blob& b, double z, double y, double x) {
    const double dz = z - b.center[0], dy = y - b.center[1], dx = x - b.center[2];
    return b.amplitude * std::exp(-(dz * dz + dy * dy + dx * dx) / (2.0 * b.radius * b.radius));
}

double anatomy_value(double z, double y, double x, double size) {
    const double rz = (z - 0.5) / (0.42 * size), ry = (y - 0.5) / (0.45 * size), rx = (x - 0.5) / (0.40 * size);
    const double r2 = rz * rz + ry * ry + rx * rx;
    // Soft-edged ellipsoid.
    return kAnatomyLevel / (1.0 + std::exp((std::sqrt(r2) - 1.0) * 12.0));
}

Volume3D make_volume(const CohortSpec& spec, const Prototypes& proto, int label, double latent, Rng& rng) {
    std::vector<Blob> blobs = proto.classes[static_cast<std::size_t>(label)].blobs;
    for (auto& b : blobs) {
        for (double& c : b.center) c += rng.normal(0.0, kCenterJitter);
    }
    blobs.push_back({{0.5, 0.5, 0.5}, kLatentBlobRadius, kLatentBlobAmplitude * latent});
    // Nuisance stays clear of the latent blob; overlapping it would corrupt
    // the one readout both modalities share.
    for (std::size_t i = 0; i < kNuisanceBlobs; ++i) {
        std::array<double, 3> c;
        double r2;
        do {
            c = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
            r2 = 0.0;
            for (double x : c) r2 += (x - 0.5) * (x - 0.5);
        } while (r2 < (kLatentBlobRadius + kNuisanceRadius) * (kLatentBlobRadius + kNuisanceRadius));
        blobs.push_back({c, kNuisanceRadius, rng.uniform(0.0, kNuisanceAmplitude)});
    }
    const double size = 1.0 + kAnatomyLatentScale * latent;

    const Dims3& d = spec.dims;
    Volume3D v;
    v.dims = d;
    v.voxels.resize(d.voxels());
    std::size_t idx = 0;
    for (std::size_t iz = 0; iz < d.d; ++iz) {
        const double z = (static_cast<double>(iz) + 0.5) / static_cast<double>(d.d);
        for (std::size_t iy = 0; iy < d.h; ++iy) {
            const double y = (static_cast<double>(iy) + 0.5) / static_cast<double>(d.h);
            for (std::size_t ix = 0; ix < d.w; ++ix) {
                const double x = (static_cast<double>(ix) + 0.5) / static_cast<double>(d.w);
                double value = anatomy_value(z, y, x, size);
                for (const auto& b : blobs) value += blob_value(b, z, y, x);
                v.voxels[idx++] = value + rng.normal(0.0, kVoxelNoise);
            }
        }
    }
    return v;
}

// Lower-triangular L with L L^T = a (a symmetric positive definite).
std::vector<double> cholesky(const std::vector<double>& a, std::size_t n) {
    std::vector<double> l(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
            if (i == j) {
                if (s <= 0.0) fail(ErrorCode::BadCohortSpec, "correlation target is not positive definite");
                l[i * n + i] = std::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    return l;
}

BoldSeries make_bold(const CohortSpec& spec, const Prototypes& proto, int label, double latent, Rng& rng) {
    const std::size_t n = spec.n_rois;
    const std::size_t t = spec.n_timepoints;
    const auto& modules = proto.classes[static_cast<std::size_t>(label)].module_of_roi;
    const double rho = kModuleRho + kModuleRhoLatent * latent;

    std::vector<double> target(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            target[i * n + j] = i == j ? 1.0 : (modules[i] == modules[j] ? rho : 0.0);
        }
    }
    const auto l = cholesky(target, n);

    std::vector<double> offset(n), gain(n);
    for (std::size_t i = 0; i < n; ++i) {
        offset[i] = rng.normal();
        gain[i] = rng.uniform(0.5, 2.0);
    }
    BoldSeries bold;
    bold.n_rois = n;
    bold.n_timepoints = t;
    bold.signals.assign(n * t, 0.0);
    std::vector<double> z(n);
    for (std::size_t s = 0; s < t; ++s) {
        for (auto& zi : z) zi = rng.normal();
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k <= i; ++k) acc += l[i * n + k] * z[k];
            bold.signals[i * t + s] = offset[i] + gain[i] * acc;
        }
    }
    return bold;
}

void flip_axis(Volume3D& v, int axis) {
    const Dims3 d = v.dims;
    std::vector<double> out(v.voxels.size());
    for (std::size_t z = 0; z < d.d; ++z) {
        for (std::size_t y = 0; y < d.h; ++y) {
            for (std::size_t x = 0; x < d.w; ++x) {
                const std::size_t sz = axis == 0 ? d.d - 1 - z : z;
                const std::size_t sy = axis == 1 ? d.h - 1 - y : y;
                const std::size_t sx = axis == 2 ? d.w - 1 - x : x;
                out[(z * d.h + y) * d.w + x] = v.voxels[(sz * d.h + sy) * d.w + sx];
            }
        }
    }
    v.voxels = std::move(out);
}

}  // namespace

std::vector<PairedSample> gen_paired_cohort(const CohortSpec& spec) {
    if (spec.k_classes < 2 || spec.n_subjects < spec.k_classes) {
        fail(ErrorCode::BadCohortSpec, "need n_subjects >= k_classes >= 2");
    }
    if (spec.dims.voxels() == 0 || spec.n_rois < 2 || spec.n_timepoints < 2) {
        fail(ErrorCode::BadCohortSpec, "dims, n_rois >= 2 and n_timepoints >= 2 must be positive");
    }
    const Prototypes proto = make_prototypes(spec);

    std::vector<std::size_t> order(spec.n_subjects);
    std::iota(order.begin(), order.end(), 0);
    Rng label_rng(derive_seed(spec.seed, "labels"));
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        std::swap(order[i], order[i + label_rng.index(order.size() - i)]);
    }
    std::vector<int> labels(spec.n_subjects);
    for (std::size_t j = 0; j < order.size(); ++j) labels[order[j]] = static_cast<int>(j % spec.k_classes);

    std::vector<PairedSample> cohort;
    cohort.reserve(spec.n_subjects);
    for (std::size_t i = 0; i < spec.n_subjects; ++i) {
        Rng rng(derive_seed(spec.seed, "subject", i));
        const double latent = rng.uniform(-1.0, 1.0);
        char id[32];
        std::snprintf(id, sizeof id, "sub-%05zu", i);

        PairedSample s;
        s.subject_id = id;
        s.label = labels[i];
        s.volume = make_volume(spec, proto, s.label, latent, rng);
        s.volume.subject_id = id;
        s.bold = make_bold(spec, proto, s.label, latent, rng);
        s.fcn = bold_to_fcn(s.bold);
        cohort.push_back(std::move(s));
    }
    return cohort;
}

Fcn bold_to_fcn(const BoldSeries& bold) {
    const std::size_t n = bold.n_rois;
    const std::size_t t = bold.n_timepoints;
    if (n == 0 || t < 2 || bold.signals.size() != n * t) {
        fail(ErrorCode::ShapeMismatch, "BOLD series needs n_rois >= 1, n_timepoints >= 2 and matching data");
    }
    std::vector<double> centered(n * t);
    std::vector<double> norm(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = bold.signals.data() + i * t;
        const bool constant = std::all_of(row, row + t, [&](double v) { return v == row[0]; });
        double mu = 0.0;
        for (std::size_t s = 0; s < t; ++s) mu += row[s];
        mu /= static_cast<double>(t);
        double ss = 0.0;
        for (std::size_t s = 0; s < t; ++s) {
            const double c = row[s] - mu;
            centered[i * t + s] = c;
            ss += c * c;
        }
        if (constant || ss == 0.0 || !std::isfinite(ss)) {
            fail(ErrorCode::ZeroVarianceRoi, "ROI " + std::to_string(i) + " has zero variance");
        }
        norm[i] = std::sqrt(ss);
    }
    Fcn fcn;
    fcn.n_rois = n;
    fcn.matrix.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        fcn.matrix[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t s = 0; s < t; ++s) dot += centered[i * t + s] * centered[j * t + s];
            const double r = std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0);
            fcn.matrix[i * n + j] = r;
            fcn.matrix[j * n + i] = r;
        }
    }
    return fcn;
}

std::vector<double> fcn_node_features(const Fcn& fcn) { return fcn.matrix; }

void validate_fcn(const Fcn& fcn) {
    const std::size_t n = fcn.n_rois;
    if (fcn.matrix.size() != n * n) fail(ErrorCode::ShapeMismatch, "FCN matrix size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (fcn.at(i, i) != 1.0) fail(ErrorCode::ValidationError, "FCN diagonal must be 1");
        for (std::size_t j = 0; j < n; ++j) {
            const double v = fcn.at(i, j);
            if (!(v >= -1.0 && v <= 1.0)) fail(ErrorCode::ValidationError, "FCN entry outside [-1, 1]");
            if (std::abs(v - fcn.at(j, i)) >= 1e-12) fail(ErrorCode::ValidationError, "FCN not symmetric");
        }
    }
}

std::vector<std::size_t> mask_indices(std::size_t n_voxels, const MaskSpec& spec) {
    if (!(spec.ratio > 0.0 && spec.ratio < 1.0)) {
        fail(ErrorCode::BadRatio, "mask ratio must lie in (0, 1), got " + std::to_string(spec.ratio));
    }
    const auto m = static_cast<std::size_t>(std::floor(spec.ratio * static_cast<double>(n_voxels)));
    std::vector<std::size_t> order(n_voxels);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::swap(order[i], order[i + rng.index(n_voxels - i)]);
    }
    order.resize(m);
    return order;
}

MaskedVolume mask_volume(const Volume3D& v, const MaskSpec& spec) {
    MaskedVolume out{v, std::vector<std::uint8_t>(v.voxels.size(), 0)};
    for (std::size_t idx : mask_indices(v.voxels.size(), spec)) {
        out.masked.voxels[idx] = 0.0;
        out.mask[idx] = 1;
    }
    return out;
}

void validate_augment_cfg(const AugmentCfg& cfg) {
    if (!(cfg.noise_sigma >= 0.0)) fail(ErrorCode::ValidationError, "noise_sigma must be >= 0");
    for (double p : cfg.flip_prob) {
        if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::ValidationError, "flip_prob must lie in [0, 1]");
    }
    if (!(cfg.intensity_scale_range[0] <= cfg.intensity_scale_range[1])) {
        fail(ErrorCode::ValidationError, "intensity_scale_range must satisfy lo <= hi");
    }
    if (!(cfg.intensity_shift_range[0] <= cfg.intensity_shift_range[1])) {
        fail(ErrorCode::ValidationError, "intensity_shift_range must satisfy lo <= hi");
    }
}

Volume3D augment_volume(const Volume3D& v, const AugmentCfg& cfg) {
    validate_augment_cfg(cfg);
    Rng rng(cfg.seed);
    Volume3D out = v;
    for (int axis = 0; axis < 3; ++axis) {
        if (rng.bernoulli(cfg.flip_prob[static_cast<std::size_t>(axis)])) flip_axis(out, axis);
    }
    const double s = rng.uniform(cfg.intensity_scale_range[0], cfg.intensity_scale_range[1]);
    const double t = rng.uniform(cfg.intensity_shift_range[0], cfg.intensity_shift_range[1]);
    for (double& x : out.voxels) x = x * s + t;
    if (cfg.noise_sigma > 0.0) {
        for (double& x : out.voxels) x += cfg.noise_sigma * rng.normal();
    }
    return out;
}

Volume3D resize_volume(const Volume3D& v, const Dims3& target) {
    if (target.d == 0 || target.h == 0 || target.w == 0) {
        fail(ErrorCode::ShapeMismatch, "resize target extents must be >= 1");
    }
    if (target == v.dims) return v;

    auto axis_coords = [](std::size_t src, std::size_t dst) {
        // (lower index, weight of upper neighbour) per destination index
        std::vector<std::pair<std::size_t, double>> out(dst);
        for (std::size_t i = 0; i < dst; ++i) {
            const double pos = dst == 1 ? 0.5 * static_cast<double>(src - 1)
                                        : static_cast<double>(i) * static_cast<double>(src - 1) /
                                              static_cast<double>(dst - 1);
            std::size_t lo = static_cast<std::size_t>(std::floor(pos));
            if (src == 1) {
                out[i] = {0, 0.0};
                continue;
            }
            lo = std::min(lo, src - 2);
            out[i] = {lo, pos - static_cast<double>(lo)};
        }
        return out;
    };
    const auto cz = axis_coords(v.dims.d, target.d);
    const auto cy = axis_coords(v.dims.h, target.h);
    const auto cx = axis_coords(v.dims.w, target.w);

    auto src = [&](std::size_t z, std::size_t y, std::size_t x) {
        z = std::min(z, v.dims.d - 1);
        y = std::min(y, v.dims.h - 1);
        x = std::min(x, v.dims.w - 1);
        return v.at(z, y, x);
    };

    Volume3D out;
    out.dims = target;
    out.subject_id = v.subject_id;
    out.voxels.resize(target.voxels());
    std::size_t idx = 0;
    for (const auto& [z0, fz] : cz) {
        for (const auto& [y0, fy] : cy) {
            for (const auto& [x0, fx] : cx) {
                double acc = 0.0;
                for (int a = 0; a < 2; ++a) {
                    const double wz = a ? fz : 1.0 - fz;
                    if (wz == 0.0) continue;
                    for (int b = 0; b < 2; ++b) {
                        const double wy = b ? fy : 1.0 - fy;
                        if (wy == 0.0) continue;
                        for (int c = 0; c < 2; ++c) {
                            const double wx = c ? fx : 1.0 - fx;
                            if (wx == 0.0) continue;
                            acc += wz * wy * wx * src(z0 + a, y0 + b, x0 + c);
                        }
                    }
                }
                out.voxels[idx++] = acc;
            }
        }
    }
    return out;
}

}  // namespace cinp
