#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cinp/rng.hpp"
#include "cinp/synthdata.hpp"
#include "oracles.hpp"

using namespace cinp;

namespace {

CohortSpec small_spec(std::size_t n, std::size_t k, std::uint64_t seed) {
    CohortSpec s;
    s.n_subjects = n;
    s.k_classes = k;
    s.dims = {8, 8, 8};
    s.n_rois = 8;
    s.n_timepoints = 60;
    s.seed = seed;
    return s;
}

bool same_cohort(const std::vector<PairedSample>& a, const std::vector<PairedSample>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].label != b[i].label || a[i].subject_id != b[i].subject_id) return false;
        if (a[i].volume.voxels != b[i].volume.voxels) return false;
        if (a[i].bold.signals != b[i].bold.signals || a[i].fcn.matrix != b[i].fcn.matrix) return false;
    }
    return true;
}

BoldSeries series(std::size_t n, std::size_t t, std::vector<double> signals) { return {n, t, std::move(signals)}; }

Volume3D ramp(Dims3 dims) {
    Volume3D v{dims, std::vector<double>(dims.voxels()), "r"};
    for (std::size_t i = 0; i < v.voxels.size(); ++i) v.voxels[i] = static_cast<double>(i) * 0.5 - 1.0;
    return v;
}

// Partial Fisher-Yates over [0, n) written against the raw engine: index
// draws use rejection above the largest multiple of the range.
std::set<std::size_t> reference_mask(std::size_t n, double ratio, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    const auto m = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < m; ++i) {
        const std::uint64_t range = n - i;
        std::uint64_t pick = 0;
        if (range > 1) {
            const std::uint64_t top = UINT64_MAX - UINT64_MAX % range;
            std::uint64_t x;
            do x = eng(); while (x >= top);
            pick = x % range;
        }
        std::swap(order[i], order[i + pick]);
    }
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m)};
}

}  // namespace

TEST_CASE("cohort generation is deterministic and balanced") {
    const auto a = gen_paired_cohort(small_spec(4, 2, 7));
    const auto b = gen_paired_cohort(small_spec(4, 2, 7));
    CHECK(same_cohort(a, b));
    CHECK(std::count_if(a.begin(), a.end(), [](const auto& s) { return s.label == 0; }) == 2);
    CHECK(std::count_if(a.begin(), a.end(), [](const auto& s) { return s.label == 1; }) == 2);
}

TEST_CASE("class sizes differ by at most one") {
    for (std::size_t k = 2; k <= 5; ++k) {
        for (std::size_t n = k; n < k + 12; n += 3) {
            const auto c = gen_paired_cohort(small_spec(n, k, n * 31 + k));
            std::vector<std::size_t> count(k, 0);
            for (const auto& s : c) {
                REQUIRE(s.label >= 0);
                REQUIRE(static_cast<std::size_t>(s.label) < k);
                ++count[static_cast<std::size_t>(s.label)];
            }
            CHECK(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()) <= 1);
        }
    }
}

TEST_CASE("different seeds give different cohorts") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        CHECK_FALSE(same_cohort(gen_paired_cohort(small_spec(6, 2, s)), gen_paired_cohort(small_spec(6, 2, s + 100))));
    }
}

TEST_CASE("cohort samples satisfy their type invariants") {
    const auto c = gen_paired_cohort(small_spec(10, 3, 1));
    for (const auto& s : c) {
        CHECK(s.volume.voxels.size() == s.volume.dims.voxels());
        CHECK(std::all_of(s.volume.voxels.begin(), s.volume.voxels.end(), [](double v) { return std::isfinite(v); }));
        CHECK(s.fcn.matrix == bold_to_fcn(s.bold).matrix);
        CHECK_NOTHROW(validate_fcn(s.fcn));
        CHECK(s.volume.subject_id == s.subject_id);
    }
}

TEST_CASE("invalid cohort specs are rejected") {
    CHECK(error_code_of([] { gen_paired_cohort(small_spec(1, 2, 0)); }) == ErrorCode::BadCohortSpec);
    CHECK(error_code_of([] { gen_paired_cohort(small_spec(5, 1, 0)); }) == ErrorCode::BadCohortSpec);
}

TEST_CASE("class mean FCNs are well separated on a 200-subject cohort") {
    CohortSpec spec;  // desk defaults: 16 ROIs, 200 timepoints
    spec.n_subjects = 200;
    spec.dims = {4, 4, 4};
    spec.seed = 3;
    const auto c = gen_paired_cohort(spec);
    const std::size_t cells = spec.n_rois * spec.n_rois;
    std::vector<std::vector<double>> mean(2, std::vector<double>(cells, 0.0));
    std::vector<double> count(2, 0.0);
    for (const auto& s : c) {
        for (std::size_t e = 0; e < cells; ++e) mean[s.label][e] += s.fcn.matrix[e];
        count[s.label] += 1;
    }
    for (int k = 0; k < 2; ++k)
        for (double& v : mean[k]) v /= count[k];
    double between = 0.0;
    for (std::size_t e = 0; e < cells; ++e) between += (mean[0][e] - mean[1][e]) * (mean[0][e] - mean[1][e]);
    between = std::sqrt(between);
    // RMS Frobenius distance of a subject's FCN from its own class mean
    double spread = 0.0;
    for (const auto& s : c) {
        for (std::size_t e = 0; e < cells; ++e) {
            const double d = s.fcn.matrix[e] - mean[s.label][e];
            spread += d * d;
        }
    }
    spread = std::sqrt(spread / static_cast<double>(c.size()));
    MESSAGE("between " << between << " within " << spread);
    CHECK(between > 3.0 * spread);
}

TEST_CASE("Pearson FCN examples") {
    const Fcn affine = bold_to_fcn(series(2, 5, {1, 4, 2, 8, 5, 5, 11, 7, 19, 13}));
    CHECK(std::fabs(affine.at(0, 1) - 1.0) < 1e-15);
    const Fcn flipped = bold_to_fcn(series(2, 4, {1, 2, 0, 5, -1, -2, 0, -5}));
    CHECK(std::fabs(flipped.at(0, 1) + 1.0) < 1e-15);
    CHECK(error_code_of([] { bold_to_fcn(series(2, 3, {1, 2, 3, 4, 4, 4})); }) == ErrorCode::ZeroVarianceRoi);
}

TEST_CASE("FCN matches a two-pass Pearson oracle") {
    std::mt19937_64 g(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = oracle::normals(g, 4 * 50);
        const Fcn f = bold_to_fcn(series(4, 50, x));
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                const double want = i == j ? 1.0 : oracle::pearson(&x[i * 50], &x[j * 50], 50);
                CHECK(std::fabs(f.at(i, j) - want) < 1e-12);
            }
        }
    }
}

TEST_CASE("FCN invariants and affine invariance over 1000 random series") {
    std::mt19937_64 g(23);
    std::uniform_int_distribution<std::size_t> roi(2, 7), tp(3, 40);
    std::uniform_real_distribution<double> a(0.1, 10), b(-5, 5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = roi(g), t = tp(g);
        auto x = oracle::normals(g, n * t);
        const Fcn f = bold_to_fcn(series(n, t, x));
        CHECK_NOTHROW(validate_fcn(f));
        for (std::size_t i = 0; i < n; ++i) {
            const double ai = a(g), bi = b(g);
            for (std::size_t s = 0; s < t; ++s) x[i * t + s] = ai * x[i * t + s] + bi;
        }
        const Fcn h = bold_to_fcn(series(n, t, x));
        for (std::size_t e = 0; e < n * n; ++e) CHECK(std::fabs(f.matrix[e] - h.matrix[e]) < 1e-10);
    }
}

TEST_CASE("node features are the FCN rows") {
    Fcn eye{3, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
    const auto feats = fcn_node_features(eye);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(feats[i * 3 + j] == (i == j ? 1.0 : 0.0));
    std::mt19937_64 g(2);
    const Fcn f = bold_to_fcn(series(5, 30, oracle::normals(g, 150)));
    const auto ff = fcn_node_features(f);
    CHECK(ff == f.matrix);
    CHECK(ff.data() != f.matrix.data());
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(ff[i * 5 + j] == ff[j * 5 + i]);
}

TEST_CASE("masking examples") {
    const Volume3D v = ramp({10, 10, 10});
    const MaskedVolume m = mask_volume(v, {0.30, 5});
    CHECK(std::count(m.mask.begin(), m.mask.end(), 1) == 300);
    const MaskedVolume again = mask_volume(v, {0.30, 5});
    CHECK(again.mask == m.mask);
    CHECK(again.masked.voxels == m.masked.voxels);
    CHECK(error_code_of([&] { mask_volume(v, {0.0, 1}); }) == ErrorCode::BadRatio);
    CHECK(error_code_of([&] { mask_volume(v, {1.0, 1}); }) == ErrorCode::BadRatio);
}

TEST_CASE("mask selection equals a reference Fisher-Yates draw") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto got = mask_indices(10, {0.5, seed});
        CHECK(std::set<std::size_t>(got.begin(), got.end()) == reference_mask(10, 0.5, seed));
    }
    // frozen draw for seed 42
    const auto frozen = mask_indices(10, {0.5, 42});
    CHECK(std::set<std::size_t>(frozen.begin(), frozen.end()) == std::set<std::size_t>{0, 4, 6, 7, 9});
}

TEST_CASE("masking partitions the voxels and leaves the rest untouched") {
    std::mt19937_64 g(29);
    std::uniform_real_distribution<double> ratio(0.01, 0.99);
    std::uniform_int_distribution<std::size_t> ext(1, 7);
    for (int trial = 0; trial < 1000; ++trial) {
        const Volume3D v = ramp({ext(g), ext(g), ext(g)});
        const MaskSpec spec{ratio(g), g()};
        const MaskedVolume m = mask_volume(v, spec);
        const auto expected = static_cast<std::size_t>(std::floor(spec.ratio * static_cast<double>(v.voxels.size())));
        CHECK(static_cast<std::size_t>(std::count(m.mask.begin(), m.mask.end(), 1)) == expected);
        for (std::size_t i = 0; i < v.voxels.size(); ++i) {
            if (m.mask[i]) CHECK(m.masked.voxels[i] == 0.0);
            else CHECK(m.masked.voxels[i] == v.voxels[i]);
        }
    }
}

TEST_CASE("augmentation examples") {
    const Volume3D v = ramp({3, 4, 5});
    const Volume3D same = augment_volume(v, AugmentCfg::identity());
    CHECK(same.voxels == v.voxels);

    for (int axis = 0; axis < 3; ++axis) {
        AugmentCfg flip = AugmentCfg::identity();
        flip.flip_prob[static_cast<std::size_t>(axis)] = 1.0;
        const Volume3D once = augment_volume(v, flip);
        CHECK(once.voxels != v.voxels);
        CHECK(augment_volume(once, flip).voxels == v.voxels);
    }

    AugmentCfg affine = AugmentCfg::identity();
    affine.intensity_scale_range = {2, 2};
    affine.intensity_shift_range = {1, 1};
    const Volume3D two{{1, 1, 2}, {0, 1}, "x"};
    const Volume3D out = augment_volume(two, affine);
    CHECK(out.voxels == std::vector<double>{1, 3});

    AugmentCfg noisy;
    noisy.seed = 4;
    CHECK(augment_volume(v, noisy).voxels == augment_volume(v, noisy).voxels);

    AugmentCfg bad;
    bad.intensity_scale_range = {1.2, 0.8};
    CHECK(error_code_of([&] { augment_volume(v, bad); }).has_value());
}

TEST_CASE("resize examples") {
    const Volume3D v = ramp({3, 4, 5});
    CHECK(resize_volume(v, v.dims).voxels == v.voxels);

    const Volume3D flat{{2, 3, 2}, std::vector<double>(12, 0.37), "c"};
    const Volume3D big = resize_volume(flat, {5, 4, 7});
    for (double x : big.voxels) CHECK(std::fabs(x - 0.37) < 1e-15);

    const Volume3D cube{{2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7}, "q"};
    const Volume3D up = resize_volume(cube, {3, 3, 3});
    CHECK(std::fabs(up.at(1, 1, 1) - 3.5) < 1e-15);  // mean of the eight corners
    CHECK(up.at(0, 0, 0) == 0.0);
    CHECK(up.at(2, 2, 2) == 7.0);
}

TEST_CASE("corner-aligned resize keeps corners and is exact on linear fields") {
    std::mt19937_64 g(31);
    std::uniform_int_distribution<std::size_t> ext(2, 6);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 200; ++trial) {
        const Dims3 src{ext(g), ext(g), ext(g)}, dst{ext(g), ext(g), ext(g)};
        const double a = nd(g), b = nd(g), c = nd(g), d = nd(g);
        // f linear in the normalized coordinate, sampled on both grids
        auto field = [&](Dims3 dims) {
            Volume3D v{dims, {}, "l"};
            for (std::size_t z = 0; z < dims.d; ++z)
                for (std::size_t y = 0; y < dims.h; ++y)
                    for (std::size_t x = 0; x < dims.w; ++x)
                        v.voxels.push_back(a * z / double(dims.d - 1) + b * y / double(dims.h - 1) +
                                           c * x / double(dims.w - 1) + d);
            return v;
        };
        const Volume3D out = resize_volume(field(src), dst);
        const Volume3D want = field(dst);
        for (std::size_t i = 0; i < out.voxels.size(); ++i) CHECK(std::fabs(out.voxels[i] - want.voxels[i]) < 1e-12);
    }
}
