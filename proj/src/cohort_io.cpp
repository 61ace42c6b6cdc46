#include <json.hpp>

#include <filesystem>

#include "binio.hpp"
#include "cinp/error.hpp"
#include "cinp/synthdata.hpp"

namespace cinp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "cohort.json";
constexpr int kCohortVersion = 1;

void write_f64_file(const fs::path& path, std::span<const double> values) {
    std::string bytes;
    binio::put_f64s(bytes, values);
    binio::write_file(path.string(), bytes);
}

std::vector<double> read_f64_file(const fs::path& path, std::size_t expected) {
    const std::string bytes = binio::read_file(path.string());
    if (bytes.size() != expected * sizeof(double)) {
        fail(ErrorCode::ValidationError, path.string() + ": expected " + std::to_string(expected) +
                                             " f64 values, found " + std::to_string(bytes.size()) + " bytes");
    }
    binio::Reader r(bytes, ErrorCode::ValidationError);
    return r.get_f64s(expected);
}

}  // namespace

void export_cohort(const fs::path& dir, const Cohort& cohort) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

    const auto& spec = cohort.spec;
    json subjects = json::array();
    for (const auto& s : cohort.samples) {
        subjects.push_back({{"id", s.subject_id}, {"label", s.label}});
        write_f64_file(dir / (s.subject_id + ".vol"), s.volume.voxels);
        write_f64_file(dir / (s.subject_id + ".bold"), s.bold.signals);
    }
    json manifest = {
        {"format", "cinp-cohort"},
        {"version", kCohortVersion},
        {"n_subjects", cohort.samples.size()},
        {"k_classes", spec.k_classes},
        {"dims", {spec.dims.d, spec.dims.h, spec.dims.w}},
        {"n_rois", spec.n_rois},
        {"n_timepoints", spec.n_timepoints},
        {"seed", spec.seed},
        {"subject_seed_rule", "derive_seed(seed, \"subject\", index)"},
        {"byte_layout",
         {{"vol", "little-endian f64, D*H*W values, row-major (d, h, w)"},
          {"bold", "little-endian f64, n_rois*n_timepoints values, row-major (roi, time)"}}},
        {"subjects", subjects},
    };
    std::string text = manifest.dump(2);
    text.push_back('\n');
    binio::write_file((dir / kManifest).string(), text);
}

Cohort import_cohort(const fs::path& dir) {
    json manifest;
    try {
        manifest = json::parse(binio::read_file((dir / kManifest).string()));
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, (dir / kManifest).string() + ": " + e.what());
    }
    try {
        if (manifest.at("format") != "cinp-cohort") fail(ErrorCode::ValidationError, "not a cohort manifest");
        if (manifest.at("version").get<int>() != kCohortVersion) {
            fail(ErrorCode::VersionMismatch, "unsupported cohort version");
        }
        Cohort cohort;
        auto& spec = cohort.spec;
        spec.n_subjects = manifest.at("n_subjects").get<std::size_t>();
        spec.k_classes = manifest.at("k_classes").get<std::size_t>();
        const auto dims = manifest.at("dims").get<std::vector<std::size_t>>();
        if (dims.size() != 3) fail(ErrorCode::ValidationError, "dims must have three extents");
        spec.dims = {dims[0], dims[1], dims[2]};
        spec.n_rois = manifest.at("n_rois").get<std::size_t>();
        spec.n_timepoints = manifest.at("n_timepoints").get<std::size_t>();
        spec.seed = manifest.at("seed").get<std::uint64_t>();

        for (const auto& entry : manifest.at("subjects")) {
            PairedSample s;
            s.subject_id = entry.at("id").get<std::string>();
            s.label = entry.at("label").get<int>();
            if (s.label < 0 || static_cast<std::size_t>(s.label) >= spec.k_classes) {
                fail(ErrorCode::ValidationError, "label out of range for " + s.subject_id);
            }
            s.volume.dims = spec.dims;
            s.volume.subject_id = s.subject_id;
            s.volume.voxels = read_f64_file(dir / (s.subject_id + ".vol"), spec.dims.voxels());
            s.bold.n_rois = spec.n_rois;
            s.bold.n_timepoints = spec.n_timepoints;
            s.bold.signals = read_f64_file(dir / (s.subject_id + ".bold"), spec.n_rois * spec.n_timepoints);
            s.fcn = bold_to_fcn(s.bold);
            cohort.samples.push_back(std::move(s));
        }
        if (cohort.samples.size() != spec.n_subjects) {
            fail(ErrorCode::ValidationError, "manifest subject count does not match n_subjects");
        }
        return cohort;
    } catch (const json::exception& e) {
        fail(ErrorCode::ValidationError, std::string("cohort manifest: ") + e.what());
    }
}

}  // namespace cinp
