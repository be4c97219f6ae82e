#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

#include "csft/config.hpp"
#include "csft/data.hpp"
#include "csft/embx.hpp"
#include "csft/error.hpp"
#include "csft/evaluator.hpp"
#include "csft/synthetic.hpp"
#include "csft/trainer.hpp"

#ifndef CSFT_VERSION
#define CSFT_VERSION "unknown"
#endif

namespace csft::cli {

namespace fs = std::filesystem;

const char* version_string() noexcept {
    return CSFT_VERSION;
}

namespace {

fs::path default_out(const std::string& command) {
    const char* root = std::getenv("CSFT_OUT_ROOT");
    return fs::path(root != nullptr && *root != '\0' ? root : "runs") / command;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

void prepare_run_dir(const fs::path& dir, const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    write_text(dir / "config.ini", render_config(cfg));
    write_text(dir / "VERSION", std::string("csft ") + version_string() + "\n");
}

// Options shared by the training commands.
struct Common {
    std::string config;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--config", config, "INI config file (flags override it)");
        app->add_option("--out", out, "output directory (default $CSFT_OUT_ROOT/<command>)");
    }
    RunConfig resolve() const {
        RunConfig cfg;
        if (!config.empty()) {
            apply_config_file(cfg, config);
        }
        return cfg;
    }
    fs::path out_dir(const std::string& command) const { return out.empty() ? default_out(command) : fs::path(out); }
};

EmbeddingDataset load_labeled(const std::string& path, const char* role) {
    EmbeddingDataset d = read_embx(path);
    if (d.num_classes < 2) {
        throw ContractError(std::string(role) + " file " + path + " declares " + std::to_string(d.num_classes) +
                            " classes; need at least 2");
    }
    return d;
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
    Common common;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> classes;
    std::optional<std::size_t> dim;
    std::optional<std::size_t> train_rows;
    std::optional<std::size_t> test_rows;
    std::optional<double> mean_scale;
    std::optional<double> noise_scale;
    std::optional<std::size_t> nuisance_dim;
    std::optional<double> nuisance_scale;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    RunConfig cfg = a.common.resolve();
    auto& s = cfg.synthetic;
    if (a.seed) s.seed = *a.seed;
    if (a.classes) s.num_classes = *a.classes;
    if (a.dim) s.cls_dim = *a.dim;
    if (a.train_rows) s.train_rows = *a.train_rows;
    if (a.test_rows) s.test_rows = *a.test_rows;
    if (a.mean_scale) s.mean_scale = *a.mean_scale;
    if (a.noise_scale) s.noise_scale = *a.noise_scale;
    if (a.nuisance_dim) s.nuisance_dim = *a.nuisance_dim;
    if (a.nuisance_scale) s.nuisance_scale = *a.nuisance_scale;

    const SyntheticData data = generate_synthetic(s);
    const fs::path dir = a.common.out_dir("synth");
    prepare_run_dir(dir, cfg);
    write_embx(dir / "train.embx", data.train);
    write_embx(dir / "test.embx", data.test);
    nlohmann::ordered_json report;
    report["classes"] = s.num_classes;
    report["dim"] = s.cls_dim;
    report["train_rows"] = s.train_rows;
    report["test_rows"] = s.test_rows;
    report["seed"] = s.seed;
    report["full_label_probe_error"] = data.probe_error;
    write_text(dir / "synth_report.json", report.dump(1) + "\n");
    out << "wrote " << (dir / "train.embx").string() << " and " << (dir / "test.embx").string()
        << " (probe error " << data.probe_error << ")\n";
    return 0;
}

// ----------------------------------------------------------------- train

struct TrainArgs {
    Common common;
    std::string train;
    std::string test;
    std::optional<std::size_t> budget;
    std::optional<std::string> method;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    RunConfig cfg = a.common.resolve();
    if (a.budget) cfg.budget = *a.budget;
    if (a.method) cfg.train.method = parse_method(*a.method);
    apply_simd(cfg.simd);

    const EmbeddingDataset train = load_labeled(a.train, "train");
    const EmbeddingDataset test = load_labeled(a.test, "test");
    const LabeledSplit split = select_labeled(train, cfg.budget, cfg.train.seed);
    Trainer trainer(train, test, split, cfg.budget, cfg.train);

    const fs::path dir = a.common.out_dir("train");
    prepare_run_dir(dir, cfg);
    const fs::path ckpt = dir / "checkpoint.sfck";
    const auto start = std::chrono::steady_clock::now();
    while (trainer.step()) {
        if (cfg.checkpoint_every > 0 && trainer.current_step() % cfg.checkpoint_every == 0) {
            save_checkpoint(trainer.checkpoint(), ckpt);
        }
    }
    TrainReport report = trainer.report();
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(dir / "report.json", report_to_json(report));
    nlohmann::ordered_json timing;
    timing["wall_clock_seconds"] = report.wall_clock_seconds;
    timing["steps_run"] = report.steps_run;
    write_text(dir / "timing.json", timing.dump(1) + "\n");
    if (report.diverged) {
        // The last periodic checkpoint, if any, is left as it was.
        throw NumericError("training diverged at " + report.divergence +
                           (fs::exists(ckpt) ? "; last checkpoint kept at " + ckpt.string() : ""));
    }
    save_checkpoint(trainer.checkpoint(), ckpt);
    out << report.method << " budget " << report.budget << ": best error " << report.best_error << " at step "
        << report.best_step << " of " << report.steps_run << "\n";
    return 0;
}

// ----------------------------------------------------------------- sweep

struct SweepArgs {
    Common common;
    std::string train;
    std::string test;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> jobs;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    RunConfig cfg = a.common.resolve();
    if (a.seeds) cfg.sweep_seeds = *a.seeds;
    if (a.jobs) cfg.sweep_jobs = *a.jobs;
    if (cfg.sweep_seeds == 0) {
        throw ParameterError("sweep: --seeds must be positive");
    }
    apply_simd(cfg.simd);
    const EmbeddingDataset train = load_labeled(a.train, "train");
    const EmbeddingDataset test = load_labeled(a.test, "test");
    const LabelBudget ladder = label_ladder(train.size(), train.num_classes);
    std::vector<std::uint64_t> seeds(cfg.sweep_seeds);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        seeds[i] = cfg.train.seed + i;
    }
    const std::vector<Method> methods{Method::Supervised, Method::SemiSupervised};

    const fs::path dir = a.common.out_dir("sweep");
    prepare_run_dir(dir, cfg);
    const SweepResult result = run_sweep(train, test, ladder.ladder, methods, seeds, cfg.train, cfg.sweep_jobs);
    write_text(dir / "sweep.csv", result.to_csv());
    out << std::setw(8) << "budget" << std::setw(12) << "supervised" << std::setw(17) << "semi-supervised\n";
    for (std::size_t b : ladder.ladder) {
        out << std::setw(8) << b << std::setw(12) << result.mean_error(b, Method::Supervised) << std::setw(16)
            << result.mean_error(b, Method::SemiSupervised) << "\n";
    }
    return 0;
}

// --------------------------------------------------------------- inspect

int cmd_inspect(const std::string& file, std::ostream& out) {
    char magic[4] = {};
    {
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            throw IoError("cannot open " + file);
        }
        in.read(magic, 4);
    }
    if (std::string(magic, 4) == "SFCK") {
        const CheckpointState s = load_checkpoint(file);
        std::size_t values = 0;
        for (const auto& p : s.parameters) {
            values += p.value.size();
        }
        out << "format: SFCK v" << kCheckpointVersion << "\n"
            << "cls_dim: " << s.cls_dim << "\n"
            << "classes: " << s.num_classes << "\n"
            << "step: " << s.step << "\n"
            << "tensors: " << s.parameters.size() << " (" << values << " values)\n"
            << "best_error: " << s.best_error << "\n";
        return 0;
    }
    const EmbeddingDataset d = read_embx(file);
    std::size_t labeled = 0;
    for (auto l : d.labels) {
        labeled += l != kUnlabeled ? 1 : 0;
    }
    out << "format: EMBX v" << kEmbxVersion << "\n"
        << "cls_dim: " << d.cls_dim << "\n"
        << "classes: " << d.num_classes << "\n"
        << "rows: " << d.size() << "\n"
        << "labeled: " << labeled << "\n"
        << "metadata:\n";
    for (const auto& [k, v] : d.metadata_map()) {
        out << "  " << k << " = " << v << "\n";
    }
    return 0;
}

// ------------------------------------------------------- export-features

int cmd_export(const std::string& checkpoint, const std::string& data, const std::string& csv, std::ostream& out) {
    const CheckpointState state = load_checkpoint(checkpoint);
    auto bundle = bundle_from_checkpoint(state);
    const EmbeddingDataset d = read_embx(data);
    const ProjectedFeatures proj = export_features(*bundle, d, csv);
    out << "wrote " << d.size() << " rows x " << proj.loadings.rows() << " features to " << csv
        << "; explained variance";
    for (double r : proj.explained_variance_ratio) {
        out << ' ' << r;
    }
    out << "\n";
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semi-supervised content/style fine-tuning on precomputed embeddings", "csft"};
    app.set_version_flag("--version", std::string("csft ") + version_string());
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic train/test EMBX pair");
    synth.common.add(s);
    s->add_option("--seed", synth.seed);
    s->add_option("--classes", synth.classes);
    s->add_option("--dim", synth.dim);
    s->add_option("--train-rows", synth.train_rows);
    s->add_option("--test-rows", synth.test_rows);
    s->add_option("--mean-scale", synth.mean_scale);
    s->add_option("--noise-scale", synth.noise_scale);
    s->add_option("--nuisance-dim", synth.nuisance_dim);
    s->add_option("--nuisance-scale", synth.nuisance_scale);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "train one model and write its report and checkpoint");
    train.common.add(t);
    t->add_option("--train", train.train, "training EMBX")->required();
    t->add_option("--test", train.test, "held-out EMBX")->required();
    t->add_option("--budget", train.budget, "number of labeled rows");
    t->add_option("--method", train.method, "sup or semi");

    SweepArgs sweep;
    auto* w = app.add_subcommand("sweep", "label-budget sweep over both methods");
    sweep.common.add(w);
    w->add_option("--train", sweep.train, "training EMBX")->required();
    w->add_option("--test", sweep.test, "held-out EMBX")->required();
    w->add_option("--seeds", sweep.seeds, "number of seeds per cell");
    w->add_option("--jobs", sweep.jobs, "cells trained concurrently");

    std::string inspect_file;
    auto* i = app.add_subcommand("inspect", "print an EMBX or checkpoint header");
    i->add_option("--file", inspect_file)->required();

    std::string ex_ckpt;
    std::string ex_data;
    std::string ex_out;
    auto* e = app.add_subcommand("export-features", "write penultimate content features and their PCA as CSV");
    e->add_option("--checkpoint", ex_ckpt)->required();
    e->add_option("--data", ex_data)->required();
    e->add_option("--out", ex_out, "CSV path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& pe) {
        return app.exit(pe, out, err) == 0 ? 0 : 2;
    }
    try {
        if (s->parsed()) return cmd_synth(synth, out);
        if (t->parsed()) return cmd_train(train, out);
        if (w->parsed()) return cmd_sweep(sweep, out);
        if (i->parsed()) return cmd_inspect(inspect_file, out);
        if (e->parsed()) return cmd_export(ex_ckpt, ex_data, ex_out, out);
    } catch (const Error& ex) {
        err << ex.kind() << ": " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        err << "Error: " << ex.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace csft::cli
