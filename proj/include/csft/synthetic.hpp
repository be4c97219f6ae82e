#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "csft/embx.hpp"

namespace csft {

// Desk-scale stand-in for foundation-model embeddings.
//
// Each row is  mu_k + noise_scale * z + sum_j nuisance_scale * w_j * u_j,
// where the class means mu_k = mean_scale * sqrt(2) * q_k sit on orthonormal
// directions (so every pairwise decision boundary is mean_scale away from
// each mean), z is isotropic Gaussian noise, and the u_j span a nuisance
// subspace orthogonal to the means, shared by all classes. The nuisance plays
// the role of label-irrelevant style.
struct SyntheticSpec {
    std::size_t num_classes = 10;
    std::size_t cls_dim = 64;
    double mean_scale = 4.0;
    double noise_scale = 1.0;
    std::size_t nuisance_dim = 8;
    double nuisance_scale = 1.0;
    std::size_t train_rows = 6000;
    std::size_t test_rows = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticData {
    EmbeddingDataset train;
    EmbeddingDataset test;
    // Test error of a full-label ridge linear probe, computed at generation.
    double probe_error = 0.0;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// One-vs-rest ridge regression probe fit on `train`, error on `test`.
double linear_probe_error(const EmbeddingDataset& train, const EmbeddingDataset& test, double ridge = 1e-3);

} // namespace csft
