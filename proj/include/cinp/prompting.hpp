#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cinp {

// Labeled FCN embeddings of one class.
struct ClassBank {
    std::vector<std::vector<double>> embeddings;  // unit-norm, all of one dimension
    std::vector<std::string> subject_ids;         // parallel to embeddings
};

// k classes x r group-level references; each reference is the plain
// (not re-normalized) mean of a disjoint, equal-size subset of its class.
struct ReferenceSet {
    std::size_t k = 0;
    std::size_t r = 0;
    std::size_t dim = 0;
    std::vector<double> refs;                          // (class * r + i) * dim + c
    std::vector<std::vector<std::string>> provenance;  // class * r + i -> subject ids

    std::span<const double> reference(std::size_t cls, std::size_t i) const {
        return std::span<const double>(refs).subspan((cls * r + i) * dim, dim);
    }
};

// Per class: seeded Fisher-Yates shuffle (skipped when `shuffle` is false),
// drop the trailing n mod r items, split into r contiguous subsets, average.
ReferenceSet build_reference_set(std::span<const ClassBank> banks, std::size_t r, std::uint64_t seed,
                                 bool shuffle = true);

struct PromptResult {
    std::vector<double> class_mean;  // k
    int predicted = 0;               // argmax, lowest class index on ties
    std::vector<double> table;       // k x r similarities v . ref
};

PromptResult prompt_classify(std::span<const double> v, const ReferenceSet& refs);

nlohmann::json reference_set_to_json(const ReferenceSet& refs);
std::string format_prompt_result(const PromptResult& result, std::size_t r);

}  // namespace cinp
