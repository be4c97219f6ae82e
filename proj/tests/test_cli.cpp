#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "csft/config.hpp"
#include "csft/embx.hpp"
#include "csft/error.hpp"
#include "csft/evaluator.hpp"

using namespace csft;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Fresh scratch directory per test case.
struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("csft_test_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

const char* kSmallConfig = R"(
[run]
seed = 3
budget = 8

[schedule]
total_steps = 40
batch_supervised = 8
batch_unsupervised = 32
eval_every = 10
patience = 0

[optimizer]
lr = 1e-3

[discriminator_optimizer]
lr = 1e-3

[architecture]
width_scale = 0.01
style_dim = 8
)";

void synth_small(const Scratch& s) {
    const Result r = run_cli({"synth", "--out", s / "data", "--classes", "4", "--dim", "12", "--train-rows", "200",
                              "--test-rows", "40", "--seed", "5"});
    REQUIRE(r.code == 0);
    std::ofstream(s / "small.ini") << kSmallConfig;
}

} // namespace

TEST_SUITE("config") {

TEST_CASE("config text overrides defaults and renders back") {
    RunConfig cfg;
    apply_config_text(cfg, kSmallConfig);
    CHECK(cfg.train.seed == 3);
    CHECK(cfg.budget == 8);
    CHECK(cfg.train.schedule.total_steps == 40);
    CHECK(cfg.train.component_optimizer.lr == 1e-3);
    CHECK(cfg.train.architecture.style_dim == 8);
    RunConfig again;
    apply_config_text(again, render_config(cfg));
    CHECK(render_config(again) == render_config(cfg));
    set_config_value(cfg, "run.method", "sup");
    CHECK(cfg.train.method == Method::Supervised);
}

TEST_CASE("config errors name the offending key") {
    RunConfig cfg;
    try {
        apply_config_text(cfg, "[schedule]\ntotal_stepz = 4\n");
        FAIL("expected ParameterError");
    } catch (const ParameterError& e) {
        CHECK(std::string(e.what()).find("total_stepz") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_config_text(cfg, "[nowhere]\nx = 1\n"), ParameterError);
    CHECK_THROWS_AS(apply_config_text(cfg, "[schedule]\ntotal_steps = many\n"), ParameterError);
    CHECK_THROWS_AS(apply_config_text(cfg, "[run]\nmethod = both\n"), ParameterError);
    CHECK_THROWS_AS(apply_config_file(cfg, "/nonexistent/csft.ini"), IoError);
}

} // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("usage and version") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    const Result v = run_cli({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find("csft ") == 0);
    const Result h = run_cli({"--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find("synth") != std::string::npos);
    CHECK(run_cli({"train", "--train"}).code == 2);
}

TEST_CASE("synth is deterministic and honours shape flags") {
    Scratch s("synth");
    const std::vector<std::string> args{"synth", "--classes", "4", "--dim", "64", "--train-rows", "400",
                                        "--test-rows", "80", "--seed", "2"};
    auto with_out = [&](const std::string& out) {
        auto a = args;
        a.push_back("--out");
        a.push_back(out);
        return a;
    };
    REQUIRE(run_cli(with_out(s / "a")).code == 0);
    REQUIRE(run_cli(with_out(s / "b")).code == 0);
    for (const char* f : {"train.embx", "test.embx", "synth_report.json", "config.ini"}) {
        CHECK(slurp(s.dir / "a" / f) == slurp(s.dir / "b" / f));
    }
    const EmbeddingDataset d = read_embx(s.dir / "a" / "train.embx");
    CHECK(d.num_classes == 4);
    CHECK(d.cls_dim == 64);
    CHECK(d.size() == 400);
    CHECK(fs::exists(s.dir / "a" / "VERSION"));
}

TEST_CASE("train writes a deterministic report and a checkpoint") {
    Scratch s("train");
    synth_small(s);
    auto train = [&](const std::string& out) {
        return run_cli({"train", "--config", s / "small.ini", "--train", s / "data/train.embx", "--test",
                        s / "data/test.embx", "--out", s / out});
    };
    const Result a = train("a");
    REQUIRE(a.code == 0);
    CHECK(a.out.find("best error") != std::string::npos);
    REQUIRE(train("b").code == 0);
    CHECK(slurp(s.dir / "a" / "report.json") == slurp(s.dir / "b" / "report.json"));
    CHECK(slurp(s.dir / "a" / "checkpoint.sfck") == slurp(s.dir / "b" / "checkpoint.sfck"));
    const TrainReport rep = report_from_json(slurp(s.dir / "a" / "report.json"));
    CHECK(rep.steps_run == 40);
    CHECK(rep.budget == 8);
    CHECK(fs::exists(s.dir / "a" / "timing.json"));

    const Result i = run_cli({"inspect", "--file", s / "a/checkpoint.sfck"});
    CHECK(i.code == 0);
    CHECK(i.out.find("SFCK") != std::string::npos);

    const Result e = run_cli({"export-features", "--checkpoint", s / "a/checkpoint.sfck", "--data",
                              s / "data/test.embx", "--out", s / "features.csv"});
    REQUIRE(e.code == 0);
    const FeatureTable t = read_features_csv(s / "features.csv");
    CHECK(t.labels.size() == 40);
    CHECK(t.projections.cols() == 5);
}

TEST_CASE("a budget above the training size is refused with both numbers") {
    Scratch s("budget");
    synth_small(s);
    const Result r = run_cli({"train", "--config", s / "small.ini", "--train", s / "data/train.embx", "--test",
                              s / "data/test.embx", "--out", s / "x", "--budget", "5000"});
    CHECK(r.code == 1);
    CHECK(r.err.find("ParameterError") != std::string::npos);
    CHECK(r.err.find("5000") != std::string::npos);
    CHECK(r.err.find("200") != std::string::npos);
}

TEST_CASE("sweep covers the ladder for both methods and every seed") {
    Scratch s("sweep");
    synth_small(s);
    const Result r = run_cli({"sweep", "--config", s / "small.ini", "--train", s / "data/train.embx", "--test",
                              s / "data/test.embx", "--out", s / "sw", "--seeds", "2", "--jobs", "2"});
    REQUIRE(r.code == 0);
    const SweepResult sw = SweepResult::from_csv(slurp(s.dir / "sw" / "sweep.csv"));
    const LabelBudget ladder = label_ladder(200, 4);
    CHECK(sw.rows.size() == ladder.ladder.size() * 2 * 2);
    CHECK(r.out.find("semi-supervised") != std::string::npos);
}

TEST_CASE("inspect reports corruption and missing files") {
    Scratch s("inspect");
    synth_small(s);
    const Result ok = run_cli({"inspect", "--file", s / "data/train.embx"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("200") != std::string::npos);

    std::string bytes = slurp(s.dir / "data" / "train.embx");
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x5a);
    std::ofstream(s / "bad.embx", std::ios::binary) << bytes;
    const Result bad = run_cli({"inspect", "--file", s / "bad.embx"});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("CRC") != std::string::npos);

    const Result missing = run_cli({"inspect", "--file", s / "nope.embx"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("IoError") != std::string::npos);
}

} // TEST_SUITE
