// cinp: synthetic image/network contrastive pretraining and evaluation.
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cinp/checkpoint.hpp"
#include "cinp/config.hpp"
#include "cinp/error.hpp"
#include "cinp/objectives.hpp"
#include "cinp/pipeline.hpp"
#include "cinp/prompting.hpp"
#include "cinp/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
    static const Level level = [] {
        const char* env = std::getenv("CINP_LOG");
        const std::string v = env ? env : "info";
        if (v == "error" || v == "quiet") return Level::Error;
        if (v == "warn") return Level::Warn;
        if (v == "debug") return Level::Debug;
        return Level::Info;
    }();
    return level;
}

void log(Level level, const std::string& msg) {
    if (level > log_level()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    std::cerr << stamp << " [" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON config file (desk-scale defaults when omitted)");
    cmd->add_option("--seed", c.seed, "global seed, overrides the config");
}

// --config wins, then the config embedded in an input artifact, then the desk preset.
cinp::Config resolve_config(const Common& c, const std::optional<cinp::Config>& from_artifact = std::nullopt) {
    cinp::Config cfg = !c.config.empty() ? cinp::load_config(c.config)
                                         : from_artifact ? *from_artifact : cinp::desk_config();
    if (c.seed) cinp::apply_seed(cfg, *c.seed);
    return cfg;
}

std::vector<cinp::PairedSample> load_or_generate(const std::string& data, const cinp::Config& cfg) {
    if (!data.empty()) {
        log(Level::Info, "reading cohort " + data);
        return cinp::import_cohort(data).samples;
    }
    log(Level::Info, "generating cohort (" + std::to_string(cfg.cohort.n_subjects) + " subjects)");
    return cinp::gen_paired_cohort(cfg.cohort);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) cinp::fail(cinp::ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) cinp::fail(cinp::ErrorCode::IoError, "write failed for " + path.string());
}

void usage(const std::string& msg) { cinp::fail(cinp::ErrorCode::UsageError, msg); }

// Embeddings either read from --embeddings or computed with --checkpoint.
struct EmbeddingSource {
    std::string checkpoint;
    std::string embeddings;
    std::string data;
};

std::pair<cinp::EmbeddingSet, cinp::Config> obtain_embeddings(const EmbeddingSource& src, const Common& common) {
    if (src.checkpoint.empty() == src.embeddings.empty()) usage("give exactly one of --checkpoint or --embeddings");
    if (!src.embeddings.empty()) {
        cinp::EmbeddingSet set = cinp::load_embeddings(src.embeddings);
        cinp::Config cfg = resolve_config(common, cinp::config_from_json(set.config));
        return {std::move(set), cfg};
    }
    const cinp::Checkpoint ckpt = cinp::load_checkpoint(src.checkpoint);
    cinp::Config cfg = resolve_config(common, ckpt.config);
    cfg.model = ckpt.config.model;
    const auto cohort = load_or_generate(src.data, cfg);
    log(Level::Info, "embedding " + std::to_string(cohort.size()) + " subjects");
    return {cinp::embed_cohort(cohort, ckpt.params, cfg), cfg};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cinp: contrastive image-network pretraining on synthetic cohorts"};
    app.require_subcommand(1);

    Common common;
    std::string out;
    std::string data;
    EmbeddingSource src;
    std::optional<std::size_t> r_opt;
    std::optional<double> fcn_fraction;
    std::vector<std::string> inputs;

    auto* gen = app.add_subcommand("gen-data", "write a synthetic paired cohort directory");
    add_common(gen, common);
    gen->add_option("--out", out, "output cohort directory")->required();

    auto* pre = app.add_subcommand("pretrain", "pretrain both encoders; writes checkpoint.bin and history.jsonl");
    add_common(pre, common);
    pre->add_option("--data", data, "cohort directory (regenerated from the config when omitted)");
    pre->add_option("--out", out, "output directory")->required();

    auto* emb = app.add_subcommand("embed", "embed every subject with a checkpoint");
    add_common(emb, common);
    emb->add_option("--checkpoint", src.checkpoint, "checkpoint file")->required();
    emb->add_option("--data", src.data, "cohort directory");
    emb->add_option("--out", out, "output embeddings file")->required();

    auto* probe = app.add_subcommand("probe", "linear probe on frozen image embeddings");
    add_common(probe, common);
    probe->add_option("--checkpoint", src.checkpoint, "checkpoint file");
    probe->add_option("--embeddings", src.embeddings, "embeddings file");
    probe->add_option("--data", src.data, "cohort directory");
    probe->add_option("--out", out, "output metrics JSON")->required();

    auto* prompt = app.add_subcommand("prompt", "classify images against group-level network references");
    add_common(prompt, common);
    prompt->add_option("--checkpoint", src.checkpoint, "checkpoint file");
    prompt->add_option("--embeddings", src.embeddings, "embeddings file");
    prompt->add_option("--data", src.data, "cohort directory");
    prompt->add_option("--r", r_opt, "references per class (default 5)");
    prompt->add_option("--fcn-fraction", fcn_fraction, "share of training FCNs used for references");
    prompt->add_option("--out", out, "output metrics JSON")->required();

    auto* ablate = app.add_subcommand("ablate", "pretrain and evaluate the four objective combinations");
    add_common(ablate, common);
    ablate->add_option("--data", data, "cohort directory");
    ablate->add_option("--r", r_opt, "references per class (default 5)");
    ablate->add_option("--fcn-fraction", fcn_fraction, "share of training FCNs used for references");
    ablate->add_option("--out", out, "output ablation JSON")->required();

    auto* report = app.add_subcommand("report", "render history, metrics and ablation files as text");
    add_common(report, common);
    report->add_option("inputs", inputs, "history .jsonl / metrics .json / ablation .json files")->required();
    report->add_option("--out", out, "write the report here as well as to stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) {
            const cinp::Config cfg = resolve_config(common);
            cinp::Cohort cohort{cfg.cohort, cinp::gen_paired_cohort(cfg.cohort)};
            cinp::export_cohort(out, cohort);
            log(Level::Info, "wrote " + std::to_string(cohort.samples.size()) + " subjects to " + out);
        } else if (pre->parsed()) {
            const cinp::Config cfg = resolve_config(common);
            const auto cohort = load_or_generate(data, cfg);
            std::vector<int> labels;
            for (const auto& s : cohort) labels.push_back(s.label);
            std::vector<cinp::PairedSample> train;
            for (std::size_t i : cinp::pretrain_indices(labels, cfg)) train.push_back(cohort[i]);
            log(Level::Info, "pretraining on " + std::to_string(train.size()) + " subjects, " +
                                 std::to_string(cfg.hyper.epochs) + " epochs");
            fs::create_directories(out);
            std::ofstream history(fs::path(out) / "history.jsonl", std::ios::binary);
            if (!history) cinp::fail(cinp::ErrorCode::IoError, "cannot write history in " + out);
            const auto result = cinp::pretrain(train, cfg, [&](const cinp::LossReport& r) {
                history << cinp::loss_report_jsonl(r) << "\n";
                log(Level::Debug, "step " + std::to_string(r.step) + " loss " + std::to_string(r.total));
                if (r.step % 50 == 0) {
                    log(Level::Info, "epoch " + std::to_string(r.epoch) + " step " + std::to_string(r.step) +
                                         " loss " + std::to_string(r.total));
                }
            });
            history.close();
            cinp::save_checkpoint(fs::path(out) / "checkpoint.bin", result.checkpoint);
            log(Level::Info, "wrote checkpoint.bin and history.jsonl to " + out);
        } else if (emb->parsed()) {
            const auto [set, cfg] = obtain_embeddings(src, common);
            cinp::save_embeddings(out, set);
            log(Level::Info, "wrote " + std::to_string(set.n) + " x " + std::to_string(set.d) + " embeddings to " + out);
        } else if (probe->parsed()) {
            const auto [set, cfg] = obtain_embeddings(src, common);
            const auto run = cinp::run_probe(set, cfg);
            json doc = {{"kind", "probe"}, {"seed", cfg.seed}, {"metrics", cinp::metrics_to_json(run.metrics)}};
            write_text(out, doc.dump(2) + "\n");
            log(Level::Info, "probe ACC " + std::to_string(run.metrics.acc));
        } else if (prompt->parsed()) {
            const auto [set, cfg] = obtain_embeddings(src, common);
            const std::size_t r = r_opt.value_or(5);
            const double frac = fcn_fraction.value_or(cfg.eval.fcn_fraction);
            const auto run = cinp::run_prompt(set, cfg, r, frac);
            json doc = {{"kind", "prompt"},
                        {"seed", cfg.seed},
                        {"r", r},
                        {"fcn_fraction", frac},
                        {"metrics", cinp::metrics_to_json(run.metrics)}};
            write_text(out, doc.dump(2) + "\n");
            fs::path refs = out;
            refs.replace_extension(".references.json");
            write_text(refs, cinp::reference_set_to_json(run.references).dump() + "\n");
            log(Level::Info, "prompt r=" + std::to_string(r) + " ACC " + std::to_string(run.metrics.acc));
        } else if (ablate->parsed()) {
            cinp::Config cfg = resolve_config(common);
            if (fcn_fraction) cfg.eval.fcn_fraction = *fcn_fraction;
            cinp::validate_config(cfg);
            const auto cohort = load_or_generate(data, cfg);
            const std::size_t r = r_opt.value_or(5);
            const auto rows = cinp::run_ablation(cohort, cfg, r, [](const std::string& m) { log(Level::Info, m); });
            write_text(out, cinp::ablation_to_json(rows, r).dump(2) + "\n");
            std::cout << cinp::format_ablation(rows);
        } else if (report->parsed()) {
            std::vector<fs::path> paths(inputs.begin(), inputs.end());
            const std::string text = cinp::render_report(paths);
            std::cout << text;
            if (!out.empty()) write_text(out, text);
        }
    } catch (const cinp::Error& e) {
        log(Level::Error, e.what());
        return e.is_validation() ? 1 : 2;
    } catch (const std::exception& e) {
        log(Level::Error, e.what());
        return 2;
    }
    return 0;
}
