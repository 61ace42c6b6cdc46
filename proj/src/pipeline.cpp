#include "cinp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "binio.hpp"
#include "cinp/error.hpp"
#include "cinp/rng.hpp"

namespace cinp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kEmbeddingFormat = "cinp-embeddings";
constexpr int kEmbeddingVersion = 1;

std::vector<int> labels_of(std::span<const PairedSample> cohort) {
    std::vector<int> out;
    out.reserve(cohort.size());
    for (const auto& s : cohort) out.push_back(s.label);
    return out;
}

std::size_t n_classes(std::span<const int> labels) {
    int top = 0;
    for (int y : labels) top = std::max(top, y);
    return static_cast<std::size_t>(top) + 1;
}

std::vector<int> gather_labels(const EmbeddingSet& set, std::span<const std::size_t> rows) {
    std::vector<int> out;
    for (std::size_t i : rows) out.push_back(set.labels[i]);
    return out;
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

}  // namespace

EmbeddingSet embed_cohort(std::span<const PairedSample> cohort, const ModelParams& params, const Config& cfg) {
    EmbeddingSet set;
    set.n = cohort.size();
    set.d = cfg.model.visual.embed_dim;
    set.config = config_to_json(cfg);
    set.image.reserve(set.n * set.d);
    set.network.reserve(set.n * set.d);
    for (const auto& s : cohort) {
        const Volume3D vol = s.volume.dims == cfg.model.visual.dims ? s.volume : resize_volume(s.volume, cfg.model.visual.dims);
        const Tensor v = visual_encode(vol, params, cfg.model.visual).embedding;
        const Tensor w = network_encode(s.fcn, params, cfg.model.network);
        set.image.insert(set.image.end(), v.data().begin(), v.data().end());
        set.network.insert(set.network.end(), w.data().begin(), w.data().end());
        set.subject_ids.push_back(s.subject_id);
        set.labels.push_back(s.label);
    }
    return set;
}

void save_embeddings(const fs::path& path, const EmbeddingSet& set) {
    json header = {{"format", kEmbeddingFormat},
                   {"version", kEmbeddingVersion},
                   {"n", set.n},
                   {"d", set.d},
                   {"dtype", "f64le"},
                   {"blocks", {"image", "network"}},
                   {"subject_ids", set.subject_ids},
                   {"labels", set.labels},
                   {"config", set.config}};
    std::string bytes = header.dump() + "\n";
    binio::put_f64s(bytes, set.image);
    binio::put_f64s(bytes, set.network);
    binio::write_file(path.string(), bytes);
}

EmbeddingSet load_embeddings(const fs::path& path) {
    const std::string bytes = binio::read_file(path.string());
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) fail(ErrorCode::ParseError, path.string() + ": missing embeddings header");
    EmbeddingSet set;
    try {
        const json h = json::parse(bytes.substr(0, nl));
        if (h.at("format") != kEmbeddingFormat) fail(ErrorCode::ParseError, path.string() + ": not an embeddings file");
        if (h.at("version") != kEmbeddingVersion) {
            fail(ErrorCode::VersionMismatch, path.string() + ": unsupported embeddings version");
        }
        set.n = h.at("n").get<std::size_t>();
        set.d = h.at("d").get<std::size_t>();
        set.subject_ids = h.at("subject_ids").get<std::vector<std::string>>();
        set.labels = h.at("labels").get<std::vector<int>>();
        set.config = h.at("config");
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": bad embeddings header: " + e.what());
    }
    if (set.subject_ids.size() != set.n || set.labels.size() != set.n) {
        fail(ErrorCode::ParseError, path.string() + ": header lists do not match n");
    }
    const std::size_t payload = bytes.size() - nl - 1;
    if (payload != 2 * set.n * set.d * sizeof(double)) {
        fail(ErrorCode::ParseError, path.string() + ": payload size does not match n x d");
    }
    binio::Reader r(std::span<const char>(bytes).subspan(nl + 1), ErrorCode::ParseError);
    set.image = r.get_f64s(set.n * set.d);
    set.network = r.get_f64s(set.n * set.d);
    return set;
}

EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> rows) {
    EmbeddingSet out;
    out.n = rows.size();
    out.d = set.d;
    out.config = set.config;
    for (std::size_t i : rows) {
        out.subject_ids.push_back(set.subject_ids.at(i));
        out.labels.push_back(set.labels.at(i));
        auto v = set.image_row(i);
        auto w = set.network_row(i);
        out.image.insert(out.image.end(), v.begin(), v.end());
        out.network.insert(out.network.end(), w.begin(), w.end());
    }
    return out;
}

std::vector<std::size_t> pretrain_indices(std::span<const int> labels, const Config& cfg) {
    const SplitIndices split = split_dataset(labels, split_spec(cfg));
    std::vector<std::size_t> out = split.train;
    out.insert(out.end(), split.val.begin(), split.val.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t retrieval_top1(const EmbeddingSet& set) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < set.n; ++i) {
        const auto v = set.image_row(i);
        std::size_t best = 0;
        double best_s = -INFINITY;
        for (std::size_t j = 0; j < set.n; ++j) {
            const auto w = set.network_row(j);
            const double s = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
            if (s > best_s) {
                best_s = s;
                best = j;
            }
        }
        hits += best == i;
    }
    return hits;
}

ProbeRun run_probe(const EmbeddingSet& set, const Config& cfg) {
    const SplitIndices split = split_dataset(set.labels, split_spec(cfg));
    const std::size_t k = std::max(cfg.cohort.k_classes, n_classes(set.labels));
    const EmbeddingSet train = subset(set, split.train);
    ProbeRun run;
    run.probe = linear_probe_fit(train.image, train.n, set.d, train.labels, k, cfg.eval.probe);

    std::vector<int> preds;
    std::vector<double> scores;
    for (std::size_t i : split.test) {
        const auto logits = run.probe.logits(set.image_row(i));
        preds.push_back(static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
        if (k == 2) scores.push_back(logits[1] - logits[0]);
    }
    const auto truth = gather_labels(set, split.test);
    run.metrics = k == 2 ? metrics_compute(preds, truth, k, std::span<const double>(scores))
                         : metrics_compute(preds, truth, k);
    return run;
}

PromptRun run_prompt(const EmbeddingSet& set, const Config& cfg, std::size_t r, double fcn_fraction) {
    if (!(fcn_fraction > 0.0 && fcn_fraction <= 1.0)) {
        fail(ErrorCode::ValidationError, "fcn_fraction must lie in (0, 1]");
    }
    const SplitIndices split = split_dataset(set.labels, split_spec(cfg));
    const std::size_t k = std::max(cfg.cohort.k_classes, n_classes(set.labels));

    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i : split.train) by_class[static_cast<std::size_t>(set.labels[i])].push_back(i);
    std::vector<ClassBank> banks(k);
    for (std::size_t c = 0; c < k; ++c) {
        auto& pool = by_class[c];
        Rng rng(derive_seed(cfg.seed, "fcn-sample", c));
        for (std::size_t i = 0; i + 1 < pool.size(); ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
        const auto take = std::min(pool.size(), static_cast<std::size_t>(std::ceil(fcn_fraction * pool.size() - 1e-9)));
        for (std::size_t m = 0; m < take; ++m) {
            const auto w = set.network_row(pool[m]);
            banks[c].embeddings.emplace_back(w.begin(), w.end());
            banks[c].subject_ids.push_back(set.subject_ids[pool[m]]);
        }
    }

    PromptRun run;
    run.references = build_reference_set(banks, r, derive_seed(cfg.seed, "references"));
    run.test_rows = split.test;
    std::vector<int> preds;
    std::vector<double> scores;
    for (std::size_t i : split.test) {
        run.results.push_back(prompt_classify(set.image_row(i), run.references));
        preds.push_back(run.results.back().predicted);
        if (k == 2) scores.push_back(run.results.back().class_mean[1] - run.results.back().class_mean[0]);
    }
    const auto truth = gather_labels(set, split.test);
    run.metrics = k == 2 ? metrics_compute(preds, truth, k, std::span<const double>(scores))
                         : metrics_compute(preds, truth, k);
    return run;
}

json metrics_to_json(const MetricsReport& m) {
    json j = {{"acc", m.acc}, {"mcc", m.mcc}, {"n", m.n}, {"k", m.k}, {"confusion", m.confusion}};
    j["auc"] = m.auc ? json(*m.auc) : json(nullptr);
    return j;
}

MetricsReport metrics_from_json(const json& j) {
    MetricsReport m;
    try {
        m.acc = j.at("acc").get<double>();
        m.mcc = j.at("mcc").get<double>();
        m.n = j.at("n").get<std::size_t>();
        m.k = j.at("k").get<std::size_t>();
        m.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
        if (j.contains("auc") && !j.at("auc").is_null()) m.auc = j.at("auc").get<double>();
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("bad metrics report: ") + e.what());
    }
    return m;
}

std::vector<AblationRow> run_ablation(std::span<const PairedSample> cohort, const Config& cfg, std::size_t r,
                                      const ProgressFn& progress, std::vector<EmbeddingSet>* embeddings) {
    const auto labels = labels_of(cohort);
    const auto train_rows = pretrain_indices(labels, cfg);
    std::vector<PairedSample> train;
    for (std::size_t i : train_rows) train.push_back(cohort[i]);
    const SplitIndices split = split_dataset(labels, split_spec(cfg));

    struct Toggle {
        const char* name;
        bool mim;
        bool inm;
    };
    const Toggle toggles[] = {{"INC", false, false}, {"INC+MIM", true, false}, {"INC+INM", false, true},
                              {"INC+MIM+INM", true, true}};
    std::vector<AblationRow> rows;
    for (const auto& t : toggles) {
        Config c = cfg;
        c.hyper.alpha = t.mim ? cfg.hyper.alpha : 0.0;
        c.hyper.beta = t.inm ? cfg.hyper.beta : 0.0;
        if (progress) progress(std::string("ablation row ") + t.name);
        const TrainResult trained = pretrain(train, c);
        EmbeddingSet set = embed_cohort(cohort, trained.checkpoint.params, c);

        AblationRow row;
        row.name = t.name;
        row.alpha = c.hyper.alpha;
        row.beta = c.hyper.beta;
        row.final_loss = trained.history.empty() ? 0.0 : trained.history.back().total;
        row.retrieval_n = split.test.size();
        row.retrieval_hits = retrieval_top1(subset(set, split.test));
        row.prompt = run_prompt(set, c, r, c.eval.fcn_fraction).metrics;
        row.probe = run_probe(set, c).metrics;
        rows.push_back(std::move(row));
        if (embeddings) embeddings->push_back(std::move(set));
    }
    return rows;
}

json ablation_to_json(const std::vector<AblationRow>& rows, std::size_t r) {
    json out = json::array();
    for (const auto& row : rows) {
        out.push_back({{"name", row.name},
                       {"alpha", row.alpha},
                       {"beta", row.beta},
                       {"final_loss", row.final_loss},
                       {"retrieval_top1", row.retrieval_hits},
                       {"retrieval_n", row.retrieval_n},
                       {"prompt", metrics_to_json(row.prompt)},
                       {"probe", metrics_to_json(row.probe)}});
    }
    return {{"kind", "ablation"}, {"r", r}, {"rows", out}};
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
    std::string out = "objectives      alpha  beta   loss     retr@1   prompt ACC  AUC     MCC     probe ACC\n";
    for (const auto& row : rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-14s  %-5.2f  %-5.2f  %-7.4f  %2zu/%-3zu   %.4f      %-6s  %+.3f  %.4f\n",
                      row.name.c_str(), row.alpha, row.beta, row.final_loss, row.retrieval_hits, row.retrieval_n,
                      row.prompt.acc, row.prompt.auc ? fmt("%.4f", *row.prompt.auc).c_str() : "-", row.prompt.mcc,
                      row.probe.acc);
        out += buf;
    }
    return out;
}

std::vector<LossReport> load_history(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<LossReport> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            LossReport r;
            r.step = j.at("step");
            r.epoch = j.at("epoch");
            r.lr = j.at("lr");
            r.inc = j.at("inc");
            r.mim = j.at("mim");
            r.inm = j.at("inm");
            r.total = j.at("total");
            r.tau = j.at("tau");
            out.push_back(r);
        } catch (const json::exception& e) {
            fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

namespace {

std::string render_history(const std::vector<LossReport>& h) {
    if (h.empty()) return "  (empty history)\n";
    std::string out;
    char buf[200];
    std::snprintf(buf, sizeof buf, "  steps %zu, epochs %llu\n", h.size(),
                  static_cast<unsigned long long>(h.back().epoch + 1));
    out += buf;
    out += "  epoch   total     inc       mim       inm       tau      lr\n";
    // Mean per epoch, printed for a handful of evenly spaced epochs.
    const std::size_t epochs = h.back().epoch + 1;
    const std::size_t stride = std::max<std::size_t>(1, epochs / 10);
    for (std::size_t e = 0; e < epochs; ++e) {
        if (e % stride && e + 1 != epochs) continue;
        LossReport acc;
        std::size_t n = 0;
        for (const auto& r : h) {
            if (r.epoch != e) continue;
            acc.total += r.total;
            acc.inc += r.inc;
            acc.mim += r.mim;
            acc.inm += r.inm;
            acc.tau = r.tau;
            acc.lr = r.lr;
            ++n;
        }
        if (!n) continue;
        std::snprintf(buf, sizeof buf, "  %5zu   %-8.4f  %-8.4f  %-8.4f  %-8.4f  %-7.4f  %.2e\n", e, acc.total / n,
                      acc.inc / n, acc.mim / n, acc.inm / n, acc.tau, acc.lr);
        out += buf;
    }
    return out;
}

std::string render_metrics(const MetricsReport& m) {
    std::string out;
    char buf[200];
    std::snprintf(buf, sizeof buf, "  n %zu  ACC %.4f  AUC %s  MCC %+.4f\n", m.n, m.acc,
                  m.auc ? fmt("%.4f", *m.auc).c_str() : "-", m.mcc);
    out += buf;
    out += "  confusion (rows true, cols predicted):\n";
    for (const auto& row : m.confusion) {
        out += "   ";
        for (std::size_t c : row) {
            std::snprintf(buf, sizeof buf, " %5zu", c);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace

std::string render_report(std::span<const fs::path> inputs) {
    std::string out;
    for (const auto& path : inputs) {
        out += "== " + path.string() + "\n";
        if (path.extension() == ".jsonl") {
            out += render_history(load_history(path));
            continue;
        }
        json j;
        try {
            j = json::parse(binio::read_file(path.string()));
        } catch (const json::exception& e) {
            fail(ErrorCode::ParseError, path.string() + ": " + e.what());
        }
        const std::string kind = j.value("kind", "");
        if (kind == "ablation") {
            std::vector<AblationRow> rows;
            for (const auto& r : j.at("rows")) {
                AblationRow row;
                row.name = r.at("name");
                row.alpha = r.at("alpha");
                row.beta = r.at("beta");
                row.final_loss = r.at("final_loss");
                row.retrieval_hits = r.at("retrieval_top1");
                row.retrieval_n = r.at("retrieval_n");
                row.prompt = metrics_from_json(r.at("prompt"));
                row.probe = metrics_from_json(r.at("probe"));
                rows.push_back(row);
            }
            out += "  ablation, r = " + j.at("r").dump() + "\n";
            out += format_ablation(rows);
        } else if (j.contains("metrics")) {
            out += "  " + kind;
            if (j.contains("r")) out += ", r = " + j.at("r").dump();
            if (j.contains("fcn_fraction")) out += ", fcn_fraction = " + j.at("fcn_fraction").dump();
            out += "\n" + render_metrics(metrics_from_json(j.at("metrics")));
        } else {
            out += render_metrics(metrics_from_json(j));
        }
    }
    return out;
}

}  // namespace cinp
