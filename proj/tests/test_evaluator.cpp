#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "csft/error.hpp"
#include "csft/evaluator.hpp"
#include "support.hpp"

using namespace csft;
namespace fs = std::filesystem;

namespace {

std::vector<int> labels_of(const EmbeddingDataset& d) {
    return {d.labels.begin(), d.labels.end()};
}

double max_gram_deviation(const Tensor2& loadings) {
    double worst = 0.0;
    for (std::size_t a = 0; a < loadings.cols(); ++a) {
        for (std::size_t b = 0; b < loadings.cols(); ++b) {
            double dot = 0.0;
            for (std::size_t i = 0; i < loadings.rows(); ++i) {
                dot += loadings(i, a) * loadings(i, b);
            }
            worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
        }
    }
    return worst;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "csft_test_evaluator";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_SUITE("evaluator") {

TEST_CASE("oracle logits give zero error") {
    const std::vector<int> labels{0, 3, 1, 2, 2, 0, 3};
    Tensor2 logits(labels.size(), 4);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        logits(i, static_cast<std::size_t>(labels[i])) = 5.0;
    }
    CHECK(error_from_logits(logits, labels) == 0.0);
    logits(1, 3) = 0.0;
    CHECK(error_from_logits(logits, labels) == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("ties go to the first index") {
    const Tensor2 logits(3, 4);
    CHECK(error_from_logits(logits, std::vector<int>{0, 0, 0}) == 0.0);
    CHECK(error_from_logits(logits, std::vector<int>{1, 0, 0}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("constant head on a balanced ten-class split errs 0.9") {
    const EmbeddingDataset test = test::blobs(10, 12, 20, 3);
    Rng rng(1, Stream::Init);
    ComponentBundle b(12, 10, rng, test::small_config().architecture);
    auto head = b.content_head.parameters();
    head[head.size() - 2]->value.fill(0.0);
    head.back()->value.fill(0.0);
    head.back()->value(0, 0) = 1.0;
    CHECK(error_rate(b, test) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("error rate equals a brute-force recount") {
    const EmbeddingDataset test = test::blobs(10, 12, 37, 4);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed, Stream::Init);
        ComponentBundle b(12, 10, rng, test::small_config().architecture);
        const Tensor2 rows = test.all_rows();
        const Tensor2 logits = b.content_logits(rows);
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            std::size_t arg = 0;
            for (std::size_t k = 1; k < logits.cols(); ++k) {
                if (logits(i, k) > logits(i, arg)) {
                    arg = k;
                }
            }
            wrong += static_cast<int>(arg) == test.labels[i] ? 0 : 1;
        }
        CHECK(error_rate(b, test) == double(wrong) / double(logits.rows()));
    }
}

TEST_CASE("error rate contracts") {
    EmbeddingDataset test = test::blobs(4, 12, 5, 5);
    Rng rng(1, Stream::Init);
    ComponentBundle b(12, 4, rng, test::small_config().architecture);
    test.labels[7] = kUnlabeled;
    CHECK_THROWS_AS(error_rate(b, test), ContractError);
    const EmbeddingDataset wide = test::blobs(4, 13, 5, 5);
    CHECK_THROWS_AS(error_rate(b, wide), DimensionError);
}

} // TEST_SUITE

TEST_SUITE("pca") {

TEST_CASE("loadings are orthonormal and ratios descend") {
    Rng rng(2, Stream::Test);
    Tensor2 x = test::random_tensor(500, 12, rng);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            x(i, j) *= double(j + 1);
        }
    }
    const ProjectedFeatures p = pca_project(x, 5);
    CHECK(p.scores.rows() == 500);
    CHECK(p.scores.cols() == 5);
    CHECK(p.loadings.rows() == 12);
    CHECK(max_gram_deviation(p.loadings) < 1e-8);
    double sum = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
        sum += p.explained_variance_ratio[k];
        if (k > 0) {
            CHECK(p.explained_variance_ratio[k] <= p.explained_variance_ratio[k - 1]);
        }
        std::size_t big = 0;
        for (std::size_t i = 1; i < 12; ++i) {
            if (std::abs(p.loadings(i, k)) > std::abs(p.loadings(big, k))) {
                big = i;
            }
        }
        CHECK(p.loadings(big, k) > 0.0);
    }
    CHECK(sum <= 1.0 + 1e-12);
}

TEST_CASE("data in a five-dimensional affine subspace is fully explained") {
    Rng rng(3, Stream::Test);
    const Tensor2 basis = test::random_tensor(5, 30, rng);
    const Tensor2 coeffs = test::random_tensor(400, 5, rng, 3.0);
    Tensor2 x(400, 30);
    for (std::size_t i = 0; i < 400; ++i) {
        for (std::size_t j = 0; j < 30; ++j) {
            double v = 7.0 - 0.5 * double(j);
            for (std::size_t k = 0; k < 5; ++k) {
                v += coeffs(i, k) * basis(k, j);
            }
            x(i, j) = v;
        }
    }
    const ProjectedFeatures p = pca_project(x, 5);
    double sum = 0.0;
    for (double r : p.explained_variance_ratio) {
        sum += r;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
    const Tensor2 back = pca_reconstruct(p);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        worst = std::max(worst, std::abs(back.values()[i] - x.values()[i]));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("isotropic Gaussian ratios are near 1/d") {
    Rng rng(4, Stream::Test);
    const Tensor2 x = test::random_tensor(10000, 20, rng);
    const ProjectedFeatures p = pca_project(x, 20);
    REQUIRE(p.explained_variance_ratio.size() == 20);
    for (double r : p.explained_variance_ratio) {
        CHECK(std::abs(r - 1.0 / 20.0) < 0.02);
    }
    CHECK(max_gram_deviation(p.loadings) < 1e-8);
}

TEST_CASE("full-rank reconstruction reproduces the data") {
    Rng rng(5, Stream::Test);
    const Tensor2 x = test::random_tensor(50, 8, rng, 2.0);
    const Tensor2 back = pca_reconstruct(pca_project(x, 8));
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        worst = std::max(worst, std::abs(back.values()[i] - x.values()[i]));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("pca contracts") {
    Rng rng(6, Stream::Test);
    const Tensor2 x = test::random_tensor(10, 4, rng);
    CHECK_THROWS_AS(pca_project(x, 5), ParameterError);
    CHECK_THROWS_AS(pca_project(x, 0), ParameterError);
    CHECK_THROWS_AS(pca_project(test::random_tensor(3, 8, rng), 5), ParameterError);
}

} // TEST_SUITE

TEST_SUITE("sweep") {

TEST_CASE("cells enumerate every combination once in key order") {
    const std::vector<std::size_t> ladder{100, 20, 4};
    const std::vector<Method> methods{Method::Supervised, Method::SemiSupervised};
    const std::vector<std::uint64_t> seeds{5, 6, 7};
    const auto cells = sweep_cells(ladder, methods, seeds);
    REQUIRE(cells.size() == 18);
    CHECK(cells[0].budget == 100);
    CHECK(cells[0].method == Method::Supervised);
    CHECK(cells[0].seed == 5);
    CHECK(cells[3].method == Method::SemiSupervised);
    CHECK(cells[6].budget == 20);
    CHECK(cells[17].budget == 4);
    CHECK(cells[17].seed == 7);
}

TEST_CASE("a full-budget sweep with one seed has two rows") {
    const EmbeddingDataset train = test::blobs(4, 12, 20, 1);
    const EmbeddingDataset test = test::blobs(4, 12, 5, 2);
    TrainConfig cfg = test::small_config();
    cfg.schedule.total_steps = 30;
    const std::vector<std::size_t> ladder{train.size()};
    const std::vector<Method> methods{Method::Supervised, Method::SemiSupervised};
    const std::vector<std::uint64_t> seeds{3};
    const SweepResult r = run_sweep(train, test, ladder, methods, seeds, cfg);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].method == Method::Supervised);
    CHECK(r.rows[1].method == Method::SemiSupervised);
    for (const auto& row : r.rows) {
        CHECK(row.budget == train.size());
        CHECK(row.best_error >= 0.0);
        CHECK(row.best_error <= 1.0);
        CHECK(row.steps == 30);
    }
}

TEST_CASE("cells are paired on the labeled subset and match standalone fits") {
    const EmbeddingDataset train = test::blobs(4, 12, 30, 1);
    const EmbeddingDataset test = test::blobs(4, 12, 8, 2);
    TrainConfig cfg = test::small_config();
    cfg.schedule.total_steps = 40;
    const std::vector<std::size_t> ladder{40, 8};
    const std::vector<Method> methods{Method::Supervised, Method::SemiSupervised};
    const std::vector<std::uint64_t> seeds{2, 9};
    const SweepResult serial = run_sweep(train, test, ladder, methods, seeds, cfg, 1);
    const SweepResult parallel = run_sweep(train, test, ladder, methods, seeds, cfg, 3);
    REQUIRE(serial.rows.size() == 8);
    CHECK(serial.rows == parallel.rows);

    for (std::size_t budget : ladder) {
        for (std::uint64_t seed : seeds) {
            const LabeledSplit a = select_labeled(train, budget, seed);
            const LabeledSplit b = select_labeled(train, budget, seed);
            CHECK(a.paired == b.paired);
        }
    }
    for (const SweepRow& row : serial.rows) {
        TrainConfig c = cfg;
        c.seed = row.seed;
        c.method = row.method;
        const FitResult f = fit(train, test, row.budget, c);
        CHECK(f.report.best_error == row.best_error);
        CHECK(f.report.steps_run == row.steps);
    }
}

TEST_CASE("sweep CSV round trip and cell means") {
    SweepResult r;
    r.rows = {{10, Method::Supervised, 1, 0.5, 100},
              {10, Method::Supervised, 2, 0.25, 100},
              {10, Method::SemiSupervised, 1, 0.125, 90},
              {10, Method::SemiSupervised, 2, 0.1, 100}};
    const std::string csv = r.to_csv();
    CHECK(csv.rfind("budget,method,seed,best_error,steps\n", 0) == 0);
    CHECK(SweepResult::from_csv(csv).rows == r.rows);
    CHECK(r.mean_error(10, Method::Supervised) == doctest::Approx(0.375));
    CHECK(r.mean_error(10, Method::SemiSupervised) == doctest::Approx(0.1125));
    CHECK_THROWS_AS(SweepResult::from_csv("budget,method\n1,x\n"), FormatError);
}

} // TEST_SUITE

TEST_SUITE("features") {

TEST_CASE("export writes labels, hidden features and their projection") {
    const EmbeddingDataset data = test::blobs(4, 12, 15, 8);
    TrainConfig cfg = test::small_config();
    Rng rng(1, Stream::Init);
    ComponentBundle b(12, 4, rng, cfg.architecture);
    const fs::path path = scratch("features.csv");
    const ProjectedFeatures p = export_features(b, data, path);
    const FeatureTable t = read_features_csv(path);
    const std::size_t width = cfg.architecture.content_hidden_width();
    CHECK(t.labels.size() == data.size());
    CHECK(t.features.cols() == width);
    CHECK(t.projections.cols() == 5);
    CHECK(t.header.front() == "label");
    CHECK(t.header[1] == "f0");
    CHECK(t.header[width] == "f" + std::to_string(width - 1));
    CHECK(t.header.back() == "p4");
    CHECK(t.labels == labels_of(data));

    const Tensor2 direct = b.content_features(data.all_rows());
    const ProjectedFeatures again = pca_project(direct, 5);
    double worst_f = 0.0, worst_p = 0.0;
    for (std::size_t i = 0; i < direct.size(); ++i) {
        worst_f = std::max(worst_f, std::abs(direct.values()[i] - t.features.values()[i]));
    }
    for (std::size_t i = 0; i < again.scores.size(); ++i) {
        worst_p = std::max(worst_p, std::abs(again.scores.values()[i] - t.projections.values()[i]));
        CHECK(again.scores.values()[i] == p.scores.values()[i]);
    }
    CHECK(worst_f < 1e-12);
    CHECK(worst_p < 1e-12);
    fs::remove_all(path.parent_path());
}

TEST_CASE("feature width is 1024 at full width for any input size") {
    for (std::size_t dim : {16, 768}) {
        Rng rng(1, Stream::Init);
        ComponentBundle b(dim, 10, rng);
        Rng data_rng(2, Stream::Test);
        const Tensor2 rows = test::random_tensor(3, dim, data_rng);
        CHECK(b.content_features(rows).cols() == 1024);
    }
    CHECK(ArchitectureConfig{}.content_hidden_width() == 1024);
}

TEST_CASE("feature CSV errors") {
    CHECK_THROWS_AS(read_features_csv(scratch("missing.csv")), IoError);
    const fs::path bad = scratch("bad.csv");
    std::ofstream(bad) << "label,f0,p0\n1,abc,2\n";
    CHECK_THROWS_AS(read_features_csv(bad), FormatError);
    fs::remove_all(bad.parent_path());
}

} // TEST_SUITE
