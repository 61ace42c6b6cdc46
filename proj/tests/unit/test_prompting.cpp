#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "cinp/pipeline.hpp"
#include "cinp/prompting.hpp"
#include "oracles.hpp"

using namespace cinp;

namespace {

std::vector<std::vector<double>> unit_list(std::mt19937_64& g, std::size_t n, std::size_t d) {
    const auto flat = oracle::unit_rows(g, n, d);
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(flat.begin() + i * d, flat.begin() + (i + 1) * d);
    return out;
}

ClassBank bank_of(std::vector<std::vector<double>> e, const std::string& tag) {
    ClassBank b;
    for (std::size_t i = 0; i < e.size(); ++i) b.subject_ids.push_back(tag + std::to_string(i));
    b.embeddings = std::move(e);
    return b;
}

std::vector<ClassBank> random_banks(std::mt19937_64& g, std::size_t k, std::size_t d, std::size_t lo, std::size_t hi) {
    std::uniform_int_distribution<std::size_t> count(lo, hi);
    std::vector<ClassBank> banks;
    for (std::size_t c = 0; c < k; ++c) banks.push_back(bank_of(unit_list(g, count(g), d), "c" + std::to_string(c) + "-"));
    return banks;
}

// class means by explicit double loop
std::vector<double> mean_oracle(const std::vector<double>& v, const ReferenceSet& refs) {
    std::vector<double> out(refs.k, 0.0);
    for (std::size_t c = 0; c < refs.k; ++c) {
        for (std::size_t i = 0; i < refs.r; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < refs.dim; ++j) s += v[j] * refs.refs[(c * refs.r + i) * refs.dim + j];
            out[c] += s;
        }
        out[c] /= static_cast<double>(refs.r);
    }
    return out;
}

}  // namespace

TEST_CASE("r = 1 gives the class mean of every embedding") {
    std::mt19937_64 g(1);
    const auto banks = random_banks(g, 3, 5, 2, 9);
    const ReferenceSet refs = build_reference_set(banks, 1, 7);
    CHECK(refs.k == 3);
    CHECK(refs.r == 1);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& e = banks[c].embeddings;
        for (std::size_t j = 0; j < 5; ++j) {
            double m = 0.0;
            for (const auto& x : e) m += x[j];
            CHECK(std::fabs(refs.reference(c, 0)[j] - m / static_cast<double>(e.size())) < 1e-12);
        }
        CHECK(refs.provenance[c].size() == e.size());
    }
}

TEST_CASE("indivisible class sizes drop the remainder") {
    std::mt19937_64 g(2);
    const std::vector<ClassBank> banks{bank_of(unit_list(g, 10, 4), "a"), bank_of(unit_list(g, 9, 4), "b")};
    const ReferenceSet refs = build_reference_set(banks, 3, 11);
    std::set<std::string> used;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& prov = refs.provenance[c * 3 + i];
            CHECK(prov.size() == 3);
            for (const auto& id : prov) CHECK(used.insert(id).second);  // disjoint
        }
    }
    CHECK(used.size() == 18);
}

TEST_CASE("without the shuffle, references are order-invariant means of fixed subsets") {
    std::mt19937_64 g(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = 1 + trial % 4, per = 1 + trial % 3, d = 2 + trial % 5;
        auto e = unit_list(g, r * per, d);
        const ReferenceSet base = build_reference_set(std::vector<ClassBank>{bank_of(e, "x")}, r, 0, false);
        // permute inside each subset only
        for (std::size_t i = 0; i < r; ++i) {
            std::shuffle(e.begin() + static_cast<std::ptrdiff_t>(i * per),
                         e.begin() + static_cast<std::ptrdiff_t>((i + 1) * per), g);
        }
        const ReferenceSet perm = build_reference_set(std::vector<ClassBank>{bank_of(e, "x")}, r, 0, false);
        for (std::size_t j = 0; j < base.refs.size(); ++j) CHECK(std::fabs(base.refs[j] - perm.refs[j]) < 1e-12);
    }
}

TEST_CASE("reference construction is deterministic under its seed") {
    std::mt19937_64 g(4);
    const auto banks = random_banks(g, 2, 6, 10, 20);
    const ReferenceSet a = build_reference_set(banks, 5, 99), b = build_reference_set(banks, 5, 99);
    CHECK(a.refs == b.refs);
    CHECK(a.provenance == b.provenance);
    const ReferenceSet c = build_reference_set(banks, 5, 100);
    CHECK(c.provenance != a.provenance);
}

TEST_CASE("too few embeddings for r") {
    std::mt19937_64 g(5);
    const std::vector<ClassBank> banks{bank_of(unit_list(g, 4, 3), "a"), bank_of(unit_list(g, 2, 3), "b")};
    CHECK(error_code_of([&] { build_reference_set(banks, 3, 0); }) == ErrorCode::TooFewReferences);
    CHECK(error_code_of([&] { build_reference_set(banks, 0, 0); }) == ErrorCode::TooFewReferences);
    CHECK_NOTHROW(build_reference_set(banks, 2, 0));
}

TEST_CASE("mean of all references equals the mean of the retained embeddings") {
    std::mt19937_64 g(6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t r = 1 + trial % 5, d = 3;
        const auto e = unit_list(g, r * (1 + trial % 4), d);
        const ReferenceSet refs = build_reference_set(std::vector<ClassBank>{bank_of(e, "x")}, r, g());
        for (std::size_t j = 0; j < d; ++j) {
            double a = 0.0, b = 0.0;
            for (std::size_t i = 0; i < r; ++i) a += refs.reference(0, i)[j];
            for (const auto& x : e) b += x[j];
            CHECK(std::fabs(a / double(r) - b / double(e.size())) < 1e-12);
        }
    }
}

TEST_CASE("prompt classification examples") {
    const std::vector<ClassBank> banks{bank_of({{1, 0, 0}}, "a"), bank_of({{0, 1, 0}}, "b")};
    const ReferenceSet refs = build_reference_set(banks, 1, 0);
    const std::vector<double> e1{1, 0, 0};
    const PromptResult hit = prompt_classify(e1, refs);
    CHECK(hit.predicted == 0);
    CHECK(hit.class_mean == std::vector<double>{1, 0});

    const std::vector<double> e3{0, 0, 1};
    const PromptResult tie = prompt_classify(e3, refs);
    CHECK(tie.class_mean == std::vector<double>{0, 0});
    CHECK(tie.predicted == 0);

    const std::vector<double> e2{0, 1, 0};
    CHECK(prompt_classify(e2, refs).predicted == 1);
    CHECK(error_code_of([&] { prompt_classify(std::vector<double>{1, 0}, refs); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("class means match a scalar oracle and the table") {
    std::mt19937_64 g(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + trial % 3, d = 2 + trial % 6, r = 1 + trial % 4;
        const auto banks = random_banks(g, k, d, r, 3 * r);
        const ReferenceSet refs = build_reference_set(banks, r, g());
        const auto v = oracle::unit_rows(g, 1, d);
        const PromptResult res = prompt_classify(v, refs);
        const auto want = mean_oracle(v, refs);
        for (std::size_t c = 0; c < k; ++c) {
            CHECK(std::fabs(res.class_mean[c] - want[c]) < 1e-12);
            double m = 0.0;
            for (std::size_t i = 0; i < r; ++i) m += res.table[c * r + i];
            CHECK(std::fabs(res.class_mean[c] - m / double(r)) < 1e-12);
        }
        const auto best = std::max_element(res.class_mean.begin(), res.class_mean.end()) - res.class_mean.begin();
        CHECK(res.predicted == best);
    }
}

TEST_CASE("scale covariance, within-class and class permutations") {
    std::mt19937_64 g(8);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + trial % 4, d = 2 + trial % 5, r = 1 + trial % 3;
        const auto banks = random_banks(g, k, d, r, 2 * r + 1);
        const ReferenceSet refs = build_reference_set(banks, r, g());
        const auto v = oracle::unit_rows(g, 1, d);
        const PromptResult base = prompt_classify(v, refs);

        const double c = scale(g);
        std::vector<double> cv(v);
        for (double& x : cv) x *= c;
        const PromptResult scaled = prompt_classify(cv, refs);
        for (std::size_t i = 0; i < base.table.size(); ++i)
            CHECK(std::fabs(scaled.table[i] - c * base.table[i]) < 1e-12 * c);
        CHECK(scaled.predicted == base.predicted);

        // shuffle the references inside one class
        ReferenceSet within = refs;
        const std::size_t cls = trial % k;
        std::vector<std::size_t> order(r);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), g);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < d; ++j)
                within.refs[(cls * r + i) * d + j] = refs.refs[(cls * r + order[i]) * d + j];
        const PromptResult w = prompt_classify(v, within);
        CHECK(std::fabs(w.class_mean[cls] - base.class_mean[cls]) < 1e-12);
        CHECK(w.predicted == base.predicted);

        // relabel classes: new class p holds old class perm[p]
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), g);
        ReferenceSet relabeled = refs;
        for (std::size_t p = 0; p < k; ++p)
            std::copy_n(refs.refs.begin() + static_cast<std::ptrdiff_t>(perm[p] * r * d), r * d,
                        relabeled.refs.begin() + static_cast<std::ptrdiff_t>(p * r * d));
        const PromptResult rl = prompt_classify(v, relabeled);
        for (std::size_t p = 0; p < k; ++p) CHECK(rl.class_mean[p] == base.class_mean[perm[p]]);
        // exact ties are measure-zero here
        CHECK(perm[static_cast<std::size_t>(rl.predicted)] == static_cast<std::size_t>(base.predicted));
    }
}

TEST_CASE("reference set export and table formatting") {
    const std::vector<ClassBank> banks{bank_of({{1, 0}, {0, 1}}, "a"), bank_of({{-1, 0}, {0, -1}}, "b")};
    const ReferenceSet refs = build_reference_set(banks, 2, 3);
    const auto j = reference_set_to_json(refs);
    CHECK(j.at("k") == 2);
    CHECK(j.at("r") == 2);
    CHECK(j.at("refs").size() == 2);
    CHECK(j.at("refs")[0].size() == 2);
    CHECK(j.at("provenance").size() == 4);  // one list per reference
    const auto text = format_prompt_result(prompt_classify(std::vector<double>{1, 0}, refs), 2);
    CHECK(text.find("predicted") != std::string::npos);
}

namespace {

// Two well separated directions; network embeddings sit on their class axis.
EmbeddingSet toy_set(std::size_t n, std::mt19937_64& g, bool images_on_axis) {
    EmbeddingSet set;
    set.n = n;
    set.d = 3;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        set.labels.push_back(label);
        set.subject_ids.push_back("s" + std::to_string(i));
        const std::vector<double> axis = label == 0 ? std::vector<double>{1, 0, 0} : std::vector<double>{0, 1, 0};
        set.network.insert(set.network.end(), axis.begin(), axis.end());
        if (images_on_axis) {
            set.image.insert(set.image.end(), axis.begin(), axis.end());
        } else {
            const auto u = oracle::unit_rows(g, 1, 3);
            set.image.insert(set.image.end(), u.begin(), u.end());
        }
    }
    return set;
}

}  // namespace

TEST_CASE("prompt evaluation: exact references give ACC 1") {
    std::mt19937_64 g(9);
    Config cfg = desk_config();
    apply_seed(cfg, 4);
    const EmbeddingSet set = toy_set(200, g, true);
    const PromptRun run = run_prompt(set, cfg, 5, 0.1);
    CHECK(run.metrics.acc == 1.0);
    CHECK(run.metrics.mcc == doctest::Approx(1.0));
    REQUIRE(run.metrics.auc.has_value());
    CHECK(*run.metrics.auc == 1.0);
    CHECK(run.references.r == 5);
    CHECK(run.results.size() == run.test_rows.size());
    // 70 training subjects per class; ceil(5% of 70) = 4, too few for r = 5
    CHECK(error_code_of([&] { run_prompt(set, cfg, 5, 0.05); }) == ErrorCode::TooFewReferences);
    CHECK(error_code_of([&] { run_prompt(set, cfg, 1, 0.0); }) == ErrorCode::ValidationError);
}

TEST_CASE("prompt evaluation: random images sit at chance") {
    std::mt19937_64 g(10);
    double total = 0.0;
    const int seeds = 40;
    for (int s = 0; s < seeds; ++s) {
        Config cfg = desk_config();
        apply_seed(cfg, static_cast<std::uint64_t>(s));
        total += run_prompt(toy_set(200, g, false), cfg, 1, 0.5).metrics.acc;
    }
    const double mean = total / seeds;
    MESSAGE("mean chance accuracy " << mean);
    // 40 runs of 40 test images: sd of the mean about 0.012
    CHECK(std::fabs(mean - 0.5) < 0.06);
}
