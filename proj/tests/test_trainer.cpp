#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "csft/error.hpp"
#include "csft/synthetic.hpp"
#include "csft/trainer.hpp"
#include "support.hpp"

using namespace csft;
namespace fs = std::filesystem;

namespace {

struct Task {
    EmbeddingDataset train = test::blobs(4, 12, 40, 1);
    EmbeddingDataset test = test::blobs(4, 12, 10, 2);
};

std::vector<double> values_of(std::vector<Parameter*> ps) {
    return test::flatten(ps);
}

} // namespace

TEST_SUITE("schedule") {

TEST_CASE("plan examples") {
    const TrainingSchedule s;
    for (std::uint64_t t = 1; t <= 20; ++t) {
        CHECK(plan(t, s) == Phase::Supervised);
    }
    CHECK(plan(21, s) == Phase::Supervised);
    CHECK(plan(22, s) == Phase::Supervised);
    CHECK(plan(23, s) == Phase::Unsupervised);
    CHECK(plan(24, s) == Phase::Supervised);
    CHECK(plan(25, s) == Phase::Supervised);
    CHECK(plan(26, s) == Phase::Unsupervised);
    CHECK_THROWS_AS(plan(0, s), ParameterError);
}

TEST_CASE("unsupervised count is floor((T - 20) / 3) for every horizon to 10000") {
    const TrainingSchedule s;
    std::uint64_t count = 0;
    std::uint64_t mismatches = 0;
    for (std::uint64_t t = 1; t <= 10000; ++t) {
        count += plan(t, s) == Phase::Unsupervised ? 1 : 0;
        const std::uint64_t expect = t < 20 ? 0 : (t - 20) / 3;
        mismatches += count == expect ? 0 : 1;
        // Past the warmstart the pattern is exactly S,S,U.
        if (t > 20) {
            const Phase want = (t - 20) % 3 == 0 ? Phase::Unsupervised : Phase::Supervised;
            mismatches += plan(t, s) == want ? 0 : 1;
        }
    }
    CHECK(mismatches == 0);
    CHECK(count == 3326);
}

TEST_CASE("phase offset and ratio are honoured") {
    TrainingSchedule s;
    s.phase_offset = 2;
    CHECK(plan(21, s) == Phase::Unsupervised);
    CHECK(plan(24, s) == Phase::Unsupervised);
    s = {};
    s.supervised_per_unsupervised = 1;
    s.warmstart_supervised_steps = 0;
    CHECK(plan(1, s) == Phase::Supervised);
    CHECK(plan(2, s) == Phase::Unsupervised);
    s.supervised_per_unsupervised = 0;
    CHECK_THROWS_AS(s.validate(), ParameterError);
}

TEST_CASE("method names") {
    CHECK(parse_method("sup") == Method::Supervised);
    CHECK(parse_method("semi") == Method::SemiSupervised);
    CHECK(parse_method("semi-supervised") == Method::SemiSupervised);
    CHECK(std::string(method_name(Method::Supervised)) == "supervised");
    CHECK_THROWS_AS(parse_method("both"), ParameterError);
}

} // TEST_SUITE

TEST_SUITE("trainer") {

TEST_CASE("supervised steps leave the other components bit-unchanged") {
    Task task;
    TrainConfig cfg = test::small_config();
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);
    Trainer tr(task.train, task.test, split, 8, cfg);
    ComponentBundle& b = tr.bundle();
    const auto style = values_of(b.style_head.parameters());
    const auto decoder = values_of(b.decoder.parameters());
    const auto discs = values_of(b.discriminator_parameters());
    const auto encoder = values_of(b.shared_encoder.parameters());
    const auto head = values_of(b.content_head.parameters());
    for (int i = 0; i < 20; ++i) {
        REQUIRE(tr.step());
        REQUIRE(tr.report().steps.back().phase == Phase::Supervised);
    }
    CHECK(values_of(b.style_head.parameters()) == style);
    CHECK(values_of(b.decoder.parameters()) == decoder);
    CHECK(values_of(b.discriminator_parameters()) == discs);
    CHECK(values_of(b.shared_encoder.parameters()) != encoder);
    CHECK(values_of(b.content_head.parameters()) != head);
}

TEST_CASE("an unsupervised step moves every group") {
    Task task;
    TrainConfig cfg = test::small_config();
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);
    Trainer tr(task.train, task.test, split, 8, cfg);
    ComponentBundle& b = tr.bundle();
    const auto comps = values_of(b.component_parameters());
    const auto discs = values_of(b.discriminator_parameters());
    const LossBreakdown l = tr.unsupervised_step();
    CHECK(l.all_finite());
    CHECK(values_of(b.component_parameters()) != comps);
    CHECK(values_of(b.discriminator_parameters()) != discs);
}

TEST_CASE("with every weight zero the component update is a no-op") {
    Task task;
    TrainConfig cfg = test::small_config();
    cfg.weights = {0, 0, 0, 0};
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);
    Trainer tr(task.train, task.test, split, 8, cfg);
    const auto comps = values_of(tr.bundle().component_parameters());
    const auto discs = values_of(tr.bundle().discriminator_parameters());
    const LossBreakdown l = tr.unsupervised_step();
    CHECK(l.total == 0.0);
    CHECK(values_of(tr.bundle().component_parameters()) == comps);
    CHECK(values_of(tr.bundle().discriminator_parameters()) != discs);
}

TEST_CASE("loss breakdowns stay finite over 1000 unsupervised steps") {
    Task task;
    TrainConfig cfg = test::small_config(3);
    cfg.schedule.batch_unsupervised = 16;
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);
    Trainer tr(task.train, task.test, split, 8, cfg);
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const LossBreakdown l = tr.unsupervised_step();
        bad += l.all_finite() && l.recon >= 0.0 && l.recon <= 2.0 && l.adv_c >= 0.0 && l.disc_y >= 0.0 ? 0 : 1;
    }
    CHECK(bad == 0);
}

TEST_CASE("overfit probe: 500 supervised steps on one batch") {
    Task task;
    TrainConfig cfg = test::small_config(4);
    cfg.architecture.width_scale = 0.05;
    cfg.schedule.batch_supervised = 8;
    cfg.component_optimizer.lr = 1e-3;
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);
    Trainer tr(task.train, task.test, split, 8, cfg);
    double ce = 0.0;
    for (int i = 0; i < 500; ++i) {
        ce = tr.supervised_step().ce;
    }
    CHECK(ce < 0.01);
}

TEST_CASE("the supervised method never runs an unsupervised step") {
    Task task;
    TrainConfig cfg = test::small_config();
    cfg.method = Method::Supervised;
    const FitResult r = fit(task.train, task.test, 8, cfg);
    REQUIRE(r.report.steps.size() == 60);
    for (const auto& s : r.report.steps) {
        REQUIRE(s.phase == Phase::Supervised);
    }
    TrainConfig semi = cfg;
    semi.method = Method::SemiSupervised;
    const FitResult rs = fit(task.train, task.test, 8, semi);
    std::size_t u = 0;
    for (const auto& s : rs.report.steps) {
        u += s.phase == Phase::Unsupervised ? 1 : 0;
    }
    CHECK(u == (60 - 20) / 3);
}

TEST_CASE("report bookkeeping") {
    Task task;
    TrainConfig cfg = test::small_config();
    const FitResult r = fit(task.train, task.test, 8, cfg);
    const TrainReport& rep = r.report;
    CHECK(rep.steps_run == 60);
    CHECK(rep.evals.front().step == 0);
    CHECK(rep.evals.size() == 7);
    double running = 1.0;
    for (std::size_t i = 0; i < rep.evals.size(); ++i) {
        CHECK(rep.evals[i].error >= 0.0);
        CHECK(rep.evals[i].error <= 1.0);
        if (i > 0) {
            CHECK(rep.evals[i].step > rep.evals[i - 1].step);
        }
        running = std::min(running, rep.evals[i].error);
    }
    CHECK(rep.best_error == running);
    for (std::size_t i = 1; i < rep.steps.size(); ++i) {
        CHECK(rep.steps[i].step == rep.steps[i - 1].step + 1);
    }
    const TrainReport back = report_from_json(report_to_json(rep));
    CHECK(report_to_json(back) == report_to_json(rep));
    CHECK_THROWS_AS(report_from_json("{not json"), FormatError);
}

TEST_CASE("zero total steps reports the initial error") {
    Task task;
    TrainConfig cfg = test::small_config();
    cfg.schedule.total_steps = 0;
    const FitResult r = fit(task.train, task.test, 8, cfg);
    CHECK(r.report.steps.empty());
    CHECK(r.report.steps_run == 0);
    REQUIRE(r.report.evals.size() == 1);
    CHECK(r.report.best_error == r.report.initial_error);
    CHECK(r.report.best_error == r.report.evals[0].error);
}

TEST_CASE("early stopping honours patience") {
    Task task;
    TrainConfig cfg = test::small_config();
    cfg.schedule.total_steps = 2000;
    cfg.schedule.eval_every = 1;
    cfg.schedule.patience = 3;
    cfg.component_optimizer.lr = 1e-9;
    cfg.discriminator_optimizer.lr = 1e-9;
    const FitResult r = fit(task.train, task.test, 8, cfg);
    CHECK(r.report.stopped_early);
    CHECK(r.report.steps_run < 2000);
}

TEST_CASE("divergence stops the run without advancing") {
    Task task;
    TrainConfig cfg = test::small_config();
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);
    Trainer tr(task.train, task.test, split, 8, cfg);
    REQUIRE(tr.step());
    tr.bundle().content_head.parameters()[0]->value(0, 0) = std::nan("");
    CHECK_FALSE(tr.step());
    CHECK(tr.report().diverged);
    CHECK(tr.report().divergence.find("step 2") != std::string::npos);
    CHECK(tr.current_step() == 1);
    CHECK(tr.finished());
}

TEST_CASE("fixed-seed fits give byte-identical reports") {
    Task task;
    const TrainConfig cfg = test::small_config(7);
    const std::string a = report_to_json(fit(task.train, task.test, 8, cfg).report);
    const std::string b = report_to_json(fit(task.train, task.test, 8, cfg).report);
    CHECK(a == b);
    TrainConfig other = cfg;
    other.seed = 8;
    CHECK(report_to_json(fit(task.train, task.test, 8, other).report) != a);
}

TEST_CASE("resume from a checkpoint matches an uninterrupted run") {
    Task task;
    TrainConfig cfg = test::small_config(9);
    cfg.schedule.total_steps = 110;
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);

    Trainer full(task.train, task.test, split, 8, cfg);
    full.run();

    const fs::path dir = fs::temp_directory_path() / "csft_test_resume";
    fs::create_directories(dir);
    {
        Trainer first(task.train, task.test, split, 8, cfg);
        first.run(100);
        REQUIRE(first.current_step() == 100);
        save_checkpoint(first.checkpoint(), dir / "at100.sfck");
    }
    Trainer resumed(task.train, task.test, split, 8, cfg);
    resumed.restore(load_checkpoint(dir / "at100.sfck"));
    CHECK(resumed.current_step() == 100);
    resumed.run();
    CHECK(report_to_json(resumed.report()) == report_to_json(full.report()));
    REQUIRE(resumed.report().steps.size() == 110);
    for (std::size_t i = 100; i < 110; ++i) {
        CHECK(resumed.report().steps[i].losses == full.report().steps[i].losses);
    }
    CHECK(test::flatten(resumed.bundle().all_parameters()) == test::flatten(full.bundle().all_parameters()));
    fs::remove_all(dir);
}

TEST_CASE("checkpoint encoding") {
    Task task;
    TrainConfig cfg = test::small_config();
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);
    Trainer tr(task.train, task.test, split, 8, cfg);
    tr.run(25);
    const std::string enc = encode_checkpoint(tr.checkpoint());
    auto bytes = [](const std::string& s) {
        return std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(s.data()), s.size());
    };
    const CheckpointState back = decode_checkpoint(bytes(enc));
    CHECK(encode_checkpoint(back) == enc);
    CHECK(back.step == 25);

    SUBCASE("corruption is caught by the CRC") {
        Rng rng(1, Stream::Test);
        int undetected = 0;
        for (int trial = 0; trial < 200; ++trial) {
            std::string bad = enc;
            const std::size_t pos = rng.below(bad.size());
            bad[pos] = static_cast<char>(bad[pos] ^ static_cast<char>(1 + rng.below(255)));
            try {
                decode_checkpoint(bytes(bad));
                ++undetected;
            } catch (const FormatError& e) {
                undetected += std::string(e.what()).find("CRC") == std::string::npos ? 1 : 0;
            }
        }
        CHECK(undetected == 0);
        CHECK_THROWS_AS(decode_checkpoint(bytes(enc.substr(0, 10))), FormatError);
    }
    SUBCASE("mismatched cls_dim names both dimensions") {
        Task wide;
        wide.train = test::blobs(4, 16, 40, 1);
        wide.test = test::blobs(4, 16, 10, 2);
        Trainer other(wide.train, wide.test, select_labeled(wide.train, 8, 1), 8, cfg);
        try {
            other.restore(back);
            FAIL("expected DimensionError");
        } catch (const DimensionError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("12") != std::string::npos);
            CHECK(msg.find("16") != std::string::npos);
        }
    }
    SUBCASE("bundle rebuilt from a checkpoint predicts identically") {
        auto rebuilt = bundle_from_checkpoint(back);
        const Tensor2 rows = task.test.all_rows();
        CHECK(rebuilt->content_logits(rows) == tr.bundle().content_logits(rows));
    }
    SUBCASE("a different architecture is refused") {
        TrainConfig narrow = cfg;
        narrow.architecture.width_scale = 0.02;
        Trainer other(task.train, task.test, split, 8, narrow);
        CHECK_THROWS_AS(other.restore(back), ContractError);
    }
}

TEST_CASE("trainer contracts") {
    Task task;
    TrainConfig cfg = test::small_config();
    const LabeledSplit split = select_labeled(task.train, 8, cfg.seed);
    EmbeddingDataset unlabeled = task.test;
    unlabeled.labels[3] = kUnlabeled;
    CHECK_THROWS_AS(Trainer(task.train, unlabeled, split, 8, cfg), ContractError);
    EmbeddingDataset narrow = test::blobs(4, 10, 5, 3);
    CHECK_THROWS_AS(Trainer(task.train, narrow, split, 8, cfg), DimensionError);
    CHECK_THROWS_AS(fit(task.train, task.test, 1000, cfg), ParameterError);
}

TEST_CASE("convergence: unsupervised training shapes the codes toward their priors") {
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.cls_dim = 16;
    spec.nuisance_dim = 2;
    spec.train_rows = 1200;
    spec.test_rows = 200;
    const SyntheticData data = generate_synthetic(spec);
    TrainConfig cfg = test::small_config(11);
    cfg.architecture.width_scale = 0.05;
    cfg.architecture.style_dim = 100;
    cfg.schedule.total_steps = 3000;
    cfg.schedule.batch_unsupervised = 64;
    cfg.component_optimizer.lr = 3e-4;
    cfg.discriminator_optimizer.lr = 3e-4;
    const LabeledSplit split = select_labeled(data.train, 8, cfg.seed);
    Trainer tr(data.train, data.test, split, 8, cfg);

    const Tensor2 rows = data.test.all_rows();
    auto softmax_entropy = [&] {
        Tape t;
        const Encoded e = tr.bundle().encode(t, t.input(rows), ForwardMode::inference());
        return mean_entropy(t.value(t.softmax(e.content_logits)));
    };
    const double before = softmax_entropy();
    tr.run();
    CHECK(softmax_entropy() < before);

    Tape t;
    const Encoded e = tr.bundle().encode(t, t.input(rows), ForwardMode::inference());
    const Tensor2& s = t.value(e.style);
    int out_of_band = 0;
    double worst_mean = 0.0, min_var = 1e300, max_var = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < s.rows(); ++i) {
            mean += s(i, j);
            sq += s(i, j) * s(i, j);
        }
        mean /= double(s.rows());
        const double var = sq / double(s.rows()) - mean * mean;
        worst_mean = std::max(worst_mean, std::abs(mean));
        min_var = std::min(min_var, var);
        max_var = std::max(max_var, var);
        out_of_band += (mean >= -0.5 && mean <= 0.5 && var >= 0.3 && var <= 3.0) ? 0 : 1;
    }
    INFO("worst |mean| " << worst_mean << ", variance range [" << min_var << ", " << max_var << "]");
    CHECK(out_of_band == 0);
}

} // TEST_SUITE
