#include "cinp/prompting.hpp"

#include <cstdio>
#include <numeric>

#include "cinp/error.hpp"
#include "cinp/rng.hpp"

namespace cinp {

ReferenceSet build_reference_set(std::span<const ClassBank> banks, std::size_t r, std::uint64_t seed, bool shuffle) {
    if (banks.empty()) fail(ErrorCode::TooFewReferences, "no classes given");
    if (r == 0) fail(ErrorCode::TooFewReferences, "r must be positive");
    ReferenceSet set;
    set.k = banks.size();
    set.r = r;
    set.dim = banks[0].embeddings.empty() ? 0 : banks[0].embeddings[0].size();
    set.refs.assign(set.k * r * set.dim, 0.0);
    set.provenance.resize(set.k * r);

    for (std::size_t cls = 0; cls < banks.size(); ++cls) {
        const auto& bank = banks[cls];
        const std::size_t n = bank.embeddings.size();
        if (n < r) {
            fail(ErrorCode::TooFewReferences, "class " + std::to_string(cls) + " has " + std::to_string(n) +
                                                  " embeddings, fewer than r = " + std::to_string(r));
        }
        if (!bank.subject_ids.empty() && bank.subject_ids.size() != n) {
            fail(ErrorCode::LengthMismatch, "subject ids do not match embeddings in class " + std::to_string(cls));
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        if (shuffle) {
            Rng rng(derive_seed(seed, "references", cls));
            for (std::size_t i = 0; i + 1 < n; ++i) std::swap(order[i], order[i + rng.index(n - i)]);
        }
        const std::size_t subset = n / r;
        for (std::size_t i = 0; i < r; ++i) {
            double* ref = set.refs.data() + (cls * r + i) * set.dim;
            auto& prov = set.provenance[cls * r + i];
            for (std::size_t m = 0; m < subset; ++m) {
                const std::size_t idx = order[i * subset + m];
                const auto& e = bank.embeddings[idx];
                if (e.size() != set.dim) fail(ErrorCode::ShapeMismatch, "embedding dimensions differ");
                for (std::size_t c = 0; c < set.dim; ++c) ref[c] += e[c];
                prov.push_back(bank.subject_ids.empty() ? std::to_string(idx) : bank.subject_ids[idx]);
            }
            for (std::size_t c = 0; c < set.dim; ++c) ref[c] /= static_cast<double>(subset);
        }
    }
    return set;
}

PromptResult prompt_classify(std::span<const double> v, const ReferenceSet& refs) {
    if (v.size() != refs.dim) {
        fail(ErrorCode::ShapeMismatch, "query has dimension " + std::to_string(v.size()) + ", references " +
                                           std::to_string(refs.dim));
    }
    PromptResult out;
    out.table.resize(refs.k * refs.r);
    out.class_mean.resize(refs.k);
    for (std::size_t cls = 0; cls < refs.k; ++cls) {
        double acc = 0.0;
        for (std::size_t i = 0; i < refs.r; ++i) {
            const auto ref = refs.reference(cls, i);
            const double s = std::inner_product(v.begin(), v.end(), ref.begin(), 0.0);
            out.table[cls * refs.r + i] = s;
            acc += s;
        }
        out.class_mean[cls] = acc / static_cast<double>(refs.r);
    }
    for (std::size_t cls = 1; cls < refs.k; ++cls) {
        if (out.class_mean[cls] > out.class_mean[static_cast<std::size_t>(out.predicted)]) {
            out.predicted = static_cast<int>(cls);
        }
    }
    return out;
}

nlohmann::json reference_set_to_json(const ReferenceSet& refs) {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t cls = 0; cls < refs.k; ++cls) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < refs.r; ++i) {
            const auto ref = refs.reference(cls, i);
            rows.push_back(std::vector<double>(ref.begin(), ref.end()));
        }
        classes.push_back(rows);
    }
    return {{"k", refs.k}, {"r", refs.r}, {"dims", refs.dim}, {"refs", classes}, {"provenance", refs.provenance}};
}

std::string format_prompt_result(const PromptResult& result, std::size_t r) {
    std::string out = "class  mean_sim   per-reference\n";
    char buf[64];
    for (std::size_t cls = 0; cls < result.class_mean.size(); ++cls) {
        std::snprintf(buf, sizeof buf, "%5zu  %+.5f ", cls, result.class_mean[cls]);
        out += buf;
        for (std::size_t i = 0; i < r; ++i) {
            std::snprintf(buf, sizeof buf, " %+.4f", result.table[cls * r + i]);
            out += buf;
        }
        out += static_cast<int>(cls) == result.predicted ? "  <- predicted\n" : "\n";
    }
    return out;
}

}  // namespace cinp
