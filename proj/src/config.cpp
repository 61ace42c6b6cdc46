#include "cinp/config.hpp"

#include <cmath>
#include <set>

#include "binio.hpp"
#include "cinp/error.hpp"
#include "cinp/rng.hpp"

namespace cinp {

using nlohmann::json;

namespace {

// Walks one JSON object, reading known keys into fields and rejecting the rest.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(ErrorCode::ValidationError, where() + " must be an object");
    }

    ~Section() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) fail(ErrorCode::UnknownKey, "unknown key \"" + child(key) + "\"");
        }
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(ErrorCode::ValidationError, child(key) + " has the wrong type");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    Section sub(const char* key) {
        seen_.insert(key);
        return Section(j_.contains(key) ? j_.at(key) : empty(), child(key));
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "config" : path_; }

private:
    static const json& empty() {
        static const json e = json::object();
        return e;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_dims(Section& s, const char* key, Dims3& dims) {
    std::vector<std::size_t> v{dims.d, dims.h, dims.w};
    s.read(key, v);
    if (v.size() != 3) fail(ErrorCode::ValidationError, s.child(key) + " must have three extents");
    dims = {v[0], v[1], v[2]};
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) fail(ErrorCode::ValidationError, field + " " + what);
}

}  // namespace

Config desk_config() {
    Config cfg;
    apply_seed(cfg, cfg.seed);
    return cfg;
}

Config paper_config() {
    Config cfg;
    cfg.cohort.n_subjects = 4619;
    cfg.cohort.dims = {96, 96, 96};
    cfg.cohort.n_rois = 116;
    cfg.cohort.n_timepoints = 200;
    cfg.model.visual.dims = {96, 96, 96};
    cfg.model.visual.patch_size = 16;
    cfg.model.visual.embed_dim = 768;
    cfg.model.visual.n_layers = 8;
    cfg.model.visual.n_heads = 12;
    cfg.model.network.n_rois = 116;
    cfg.model.network.embed_dim = 768;
    cfg.model.network.n_layers = 2;
    cfg.model.network.n_heads = 4;
    cfg.hyper.epochs = 400;
    cfg.hyper.batch_size = 256;
    cfg.hyper.lr_initial = 1e-5;
    cfg.hyper.lr_min = 1e-6;
    cfg.hyper.weight_decay = 1e-5;
    apply_seed(cfg, cfg.seed);
    return cfg;
}

void apply_seed(Config& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.cohort.seed = derive_seed(seed, "cohort");
    cfg.eval.probe.seed = derive_seed(seed, "probe");
}

SplitSpec split_spec(const Config& cfg) {
    return {cfg.eval.split, derive_seed(cfg.seed, "split"), cfg.eval.stratified};
}

Config config_from_json(const json& j) {
    Config cfg;
    {
        Section root(j, "");
        std::string preset = "desk";
        root.read("preset", preset);
        if (preset == "paper") {
            cfg = paper_config();
        } else if (preset != "desk") {
            fail(ErrorCode::ValidationError, "preset must be \"desk\" or \"paper\"");
        }
        std::uint64_t seed = cfg.seed;
        root.read("seed", seed);

        {
            Section c = root.sub("cohort");
            c.read("n_subjects", cfg.cohort.n_subjects);
            c.read("k_classes", cfg.cohort.k_classes);
            const bool dims_given = c.has("dims");
            read_dims(c, "dims", cfg.cohort.dims);
            if (dims_given) cfg.model.visual.dims = cfg.cohort.dims;
            c.read("n_rois", cfg.cohort.n_rois);
            cfg.model.network.n_rois = cfg.cohort.n_rois;
            c.read("n_timepoints", cfg.cohort.n_timepoints);
        }
        {
            Section v = root.sub("visual");
            read_dims(v, "dims", cfg.model.visual.dims);
            v.read("patch_size", cfg.model.visual.patch_size);
            v.read("embed_dim", cfg.model.visual.embed_dim);
            v.read("n_layers", cfg.model.visual.n_layers);
            v.read("n_heads", cfg.model.visual.n_heads);
        }
        {
            Section n = root.sub("network");
            n.read("embed_dim", cfg.model.network.embed_dim);
            n.read("n_layers", cfg.model.network.n_layers);
            n.read("n_heads", cfg.model.network.n_heads);
            n.read("positional", cfg.model.network.positional);
        }
        {
            Section h = root.sub("hyper");
            auto& hp = cfg.hyper;
            h.read("epochs", hp.epochs);
            h.read("batch_size", hp.batch_size);
            h.read("lr_initial", hp.lr_initial);
            h.read("lr_min", hp.lr_min);
            h.read("weight_decay", hp.weight_decay);
            h.read("alpha", hp.alpha);
            h.read("beta", hp.beta);
            h.read("mask_ratio", hp.mask_ratio);
            Section a = h.sub("augment");
            a.read("noise_sigma", hp.augment.noise_sigma);
            a.read("flip_prob", hp.augment.flip_prob);
            a.read("intensity_scale_range", hp.augment.intensity_scale_range);
            a.read("intensity_shift_range", hp.augment.intensity_shift_range);
        }
        {
            Section e = root.sub("eval");
            e.read("split", cfg.eval.split);
            e.read("stratified", cfg.eval.stratified);
            e.read("prompt_r", cfg.eval.prompt_r);
            e.read("fcn_fraction", cfg.eval.fcn_fraction);
            Section p = e.sub("probe");
            p.read("l2", cfg.eval.probe.l2);
            p.read("epochs", cfg.eval.probe.epochs);
            p.read("lr", cfg.eval.probe.lr);
        }
        apply_seed(cfg, seed);
    }
    validate_config(cfg);
    return cfg;
}

json config_to_json(const Config& cfg) {
    const auto& c = cfg.cohort;
    const auto& v = cfg.model.visual;
    const auto& n = cfg.model.network;
    const auto& h = cfg.hyper;
    const auto& e = cfg.eval;
    return {
        {"seed", cfg.seed},
        {"cohort",
         {{"n_subjects", c.n_subjects},
          {"k_classes", c.k_classes},
          {"dims", {c.dims.d, c.dims.h, c.dims.w}},
          {"n_rois", c.n_rois},
          {"n_timepoints", c.n_timepoints}}},
        {"visual",
         {{"dims", {v.dims.d, v.dims.h, v.dims.w}},
          {"patch_size", v.patch_size},
          {"embed_dim", v.embed_dim},
          {"n_layers", v.n_layers},
          {"n_heads", v.n_heads}}},
        {"network",
         {{"embed_dim", n.embed_dim}, {"n_layers", n.n_layers}, {"n_heads", n.n_heads}, {"positional", n.positional}}},
        {"hyper",
         {{"epochs", h.epochs},
          {"batch_size", h.batch_size},
          {"lr_initial", h.lr_initial},
          {"lr_min", h.lr_min},
          {"weight_decay", h.weight_decay},
          {"alpha", h.alpha},
          {"beta", h.beta},
          {"mask_ratio", h.mask_ratio},
          {"augment",
           {{"noise_sigma", h.augment.noise_sigma},
            {"flip_prob", h.augment.flip_prob},
            {"intensity_scale_range", h.augment.intensity_scale_range},
            {"intensity_shift_range", h.augment.intensity_shift_range}}}}},
        {"eval",
         {{"split", e.split},
          {"stratified", e.stratified},
          {"prompt_r", e.prompt_r},
          {"fcn_fraction", e.fcn_fraction},
          {"probe", {{"l2", e.probe.l2}, {"epochs", e.probe.epochs}, {"lr", e.probe.lr}}}}},
    };
}

void validate_config(const Config& cfg) {
    const auto& c = cfg.cohort;
    require(c.k_classes >= 2, "cohort.k_classes", "must be >= 2");
    require(c.n_subjects >= c.k_classes, "cohort.n_subjects", "must be >= cohort.k_classes");
    require(c.dims.voxels() > 0, "cohort.dims", "must be positive");
    require(c.n_rois >= 2, "cohort.n_rois", "must be >= 2");
    require(c.n_timepoints >= 2, "cohort.n_timepoints", "must be >= 2");

    const auto& h = cfg.hyper;
    require(h.batch_size >= 2, "hyper.batch_size", "must be >= 2");
    require(h.lr_initial > 0.0, "hyper.lr_initial", "must be > 0");
    require(h.lr_min > 0.0 && h.lr_min <= h.lr_initial, "hyper.lr_min", "must lie in (0, lr_initial]");
    require(h.weight_decay >= 0.0, "hyper.weight_decay", "must be >= 0");
    require(h.alpha >= 0.0, "hyper.alpha", "must be >= 0");
    require(h.beta >= 0.0, "hyper.beta", "must be >= 0");
    require(h.mask_ratio > 0.0 && h.mask_ratio < 1.0, "hyper.mask_ratio", "must lie in (0, 1)");
    try {
        validate_augment_cfg(h.augment);
    } catch (const Error& e) {
        fail(ErrorCode::ValidationError, std::string("hyper.augment: ") + e.what());
    }

    const auto& e = cfg.eval;
    require(e.fcn_fraction > 0.0 && e.fcn_fraction <= 1.0, "eval.fcn_fraction", "must lie in (0, 1]");
    for (double r : e.split) require(r >= 0.0 && r <= 1.0, "eval.split", "entries must lie in [0, 1]");
    require(std::abs(e.split[0] + e.split[1] + e.split[2] - 1.0) <= 1e-12, "eval.split", "must sum to 1");
    require(e.split[0] > 0.0 && e.split[2] > 0.0, "eval.split", "needs non-empty train and test shares");
    for (std::size_t r : e.prompt_r) require(r >= 1, "eval.prompt_r", "entries must be >= 1");
    require(e.probe.l2 >= 0.0, "eval.probe.l2", "must be >= 0");
    require(e.probe.lr > 0.0, "eval.probe.lr", "must be > 0");

    require(cfg.model.network.n_rois == c.n_rois, "network.n_rois", "must equal cohort.n_rois");
    try {
        validate_model_cfg(cfg.model);
    } catch (const Error& err) {
        fail(ErrorCode::ValidationError, err.what());
    }
}

Config load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(binio::read_file(path.string()));
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace cinp
