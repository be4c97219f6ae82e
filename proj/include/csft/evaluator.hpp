#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "csft/components.hpp"
#include "csft/embx.hpp"
#include "csft/trainer.hpp"

namespace csft {

// Fraction of rows whose argmax logit (first index on ties) differs from
// the label.
double error_from_logits(const Tensor2& logits, std::span<const int> labels);

// Classification error of the content head, dropout off. Rows are pushed
// through in chunks so large test splits stay within memory.
double error_rate(ComponentBundle& bundle, const Tensor2& rows, std::span<const int> labels);
// Throws ContractError on an unlabeled test row.
double error_rate(ComponentBundle& bundle, const EmbeddingDataset& test);

struct SweepRow {
    std::size_t budget = 0;
    Method method = Method::SemiSupervised;
    std::uint64_t seed = 0;
    double best_error = 1.0;
    std::uint64_t steps = 0;
    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
    std::vector<SweepRow> rows;

    // Header `budget,method,seed,best_error,steps`.
    std::string to_csv() const;
    static SweepResult from_csv(const std::string& text);
    // Mean best error over seeds for one (budget, method) cell.
    double mean_error(std::size_t budget, Method method) const;
};

struct SweepCell {
    std::size_t budget = 0;
    Method method = Method::SemiSupervised;
    std::uint64_t seed = 0;
};

// Cells in key order: ladder order, then methods, then seeds.
std::vector<SweepCell> sweep_cells(std::span<const std::size_t> ladder, std::span<const Method> methods,
                                   std::span<const std::uint64_t> seeds);

// Every cell trains a fresh bundle with config.seed = seed and
// config.method = method. Cells with equal (budget, seed) share their
// labeled subset. Up to `jobs` cells run concurrently; the result is in
// key order regardless.
SweepResult run_sweep(const EmbeddingDataset& train, const EmbeddingDataset& test,
                      std::span<const std::size_t> ladder, std::span<const Method> methods,
                      std::span<const std::uint64_t> seeds, const TrainConfig& config, std::size_t jobs = 1);

struct ProjectedFeatures {
    Tensor2 scores;   // [rows x k]
    Tensor2 loadings; // [cols x k], orthonormal columns
    std::vector<double> explained_variance_ratio;
    std::vector<double> mean; // column means removed before projection
};

// Principal components of the rows of `features`. Throws ParameterError
// when k is zero, k > cols or rows < k. The largest-magnitude coordinate of
// each loading vector is made positive.
ProjectedFeatures pca_project(const Tensor2& features, std::size_t k = 5);
// scores * loadings^T + mean
Tensor2 pca_reconstruct(const ProjectedFeatures& projected);

// CSV `label,f0..f{w-1},p0..p4` of the content head's penultimate
// activations and their 5-component PCA. Returns the projection.
ProjectedFeatures export_features(ComponentBundle& bundle, const EmbeddingDataset& dataset,
                                  const std::filesystem::path& path, std::size_t components = 5);

struct FeatureTable {
    std::vector<std::string> header;
    std::vector<int> labels;
    Tensor2 features;
    Tensor2 projections;
};
FeatureTable read_features_csv(const std::filesystem::path& path);

} // namespace csft
