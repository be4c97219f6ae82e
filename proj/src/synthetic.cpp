#include "csft/synthetic.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "csft/error.hpp"
#include "csft/rng.hpp"

namespace csft {

namespace {

// Random unit vectors; the first min(count, dim) are made orthonormal.
Eigen::MatrixXd random_directions(std::size_t dim, std::size_t count, Rng& rng) {
    Eigen::MatrixXd m(dim, count);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            m(r, c) = rng.normal();
        }
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (static_cast<std::size_t>(c) < dim) {
            for (Eigen::Index prev = 0; prev < c; ++prev) {
                m.col(c) -= m.col(prev).dot(m.col(c)) * m.col(prev);
            }
        }
        m.col(c).normalize();
    }
    return m;
}

EmbeddingDataset make_split(const SyntheticSpec& spec, const Eigen::MatrixXd& means, const Eigen::MatrixXd& nuisance,
                            std::size_t rows, const std::string& split, Rng& rng) {
    EmbeddingDataset d;
    d.cls_dim = static_cast<std::uint32_t>(spec.cls_dim);
    d.num_classes = static_cast<std::uint32_t>(spec.num_classes);
    d.labels.resize(rows);
    d.embeddings.resize(rows * spec.cls_dim);
    for (std::size_t i = 0; i < rows; ++i) {
        d.labels[i] = static_cast<std::int32_t>(i % spec.num_classes);
    }
    for (std::size_t i = rows; i > 1; --i) {
        std::swap(d.labels[i - 1], d.labels[rng.below(i)]);
    }
    Eigen::VectorXd y(spec.cls_dim);
    for (std::size_t i = 0; i < rows; ++i) {
        y = means.col(d.labels[i]);
        for (Eigen::Index j = 0; j < y.size(); ++j) {
            y(j) += spec.noise_scale * rng.normal();
        }
        for (Eigen::Index j = 0; j < nuisance.cols(); ++j) {
            y += spec.nuisance_scale * rng.normal() * nuisance.col(j);
        }
        for (std::size_t j = 0; j < spec.cls_dim; ++j) {
            d.embeddings[i * spec.cls_dim + j] = static_cast<float>(y(static_cast<Eigen::Index>(j)));
        }
    }
    d.set_metadata("source-model", "synthetic");
    d.set_metadata("dataset-name", "synthetic-k" + std::to_string(spec.num_classes) + "-d" +
                                       std::to_string(spec.cls_dim));
    d.set_metadata("split", split);
    d.set_metadata("seed", std::to_string(spec.seed));
    d.set_metadata("augmentation", "none");
    return d;
}

} // namespace

void SyntheticSpec::validate() const {
    if (num_classes < 2 || cls_dim == 0 || train_rows == 0 || test_rows == 0) {
        throw ParameterError("synthetic: need >= 2 classes and positive dims and row counts");
    }
    if (!(mean_scale >= 0.0) || !(noise_scale > 0.0) || !(nuisance_scale >= 0.0)) {
        throw ParameterError("synthetic: scales must be non-negative (noise positive)");
    }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed, Stream::Synthetic);
    // Means and nuisance directions are drawn jointly so the nuisance is
    // orthogonal to the class-mean span whenever the dimension allows.
    const Eigen::MatrixXd dirs = random_directions(spec.cls_dim, spec.num_classes + spec.nuisance_dim, rng);
    const Eigen::MatrixXd means = spec.mean_scale * std::sqrt(2.0) * dirs.leftCols(spec.num_classes);
    const Eigen::MatrixXd nuisance = dirs.rightCols(spec.nuisance_dim);
    SyntheticData out;
    out.train = make_split(spec, means, nuisance, spec.train_rows, "train", rng);
    out.test = make_split(spec, means, nuisance, spec.test_rows, "test", rng);
    out.probe_error = linear_probe_error(out.train, out.test);
    return out;
}

double linear_probe_error(const EmbeddingDataset& train, const EmbeddingDataset& test, double ridge) {
    if (train.cls_dim != test.cls_dim) {
        throw DimensionError("linear_probe: train width " + std::to_string(train.cls_dim) + " vs test width " +
                             std::to_string(test.cls_dim));
    }
    const Eigen::Index d = train.cls_dim + 1;
    const Eigen::Index k = train.num_classes;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(d, k);
    Eigen::VectorXd x(d);
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train.labels[i] == kUnlabeled) {
            continue;
        }
        const auto row = train.row(i);
        for (Eigen::Index j = 0; j + 1 < d; ++j) {
            x(j) = row[static_cast<std::size_t>(j)];
        }
        x(d - 1) = 1.0;
        gram.noalias() += x * x.transpose();
        rhs.col(train.labels[i]) += x;
    }
    gram += ridge * static_cast<double>(train.size()) * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd weights = gram.ldlt().solve(rhs);
    std::size_t wrong = 0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (test.labels[i] == kUnlabeled) {
            continue;
        }
        const auto row = test.row(i);
        for (Eigen::Index j = 0; j + 1 < d; ++j) {
            x(j) = row[static_cast<std::size_t>(j)];
        }
        x(d - 1) = 1.0;
        Eigen::Index best = 0;
        (weights.transpose() * x).maxCoeff(&best);
        wrong += best != test.labels[i] ? 1 : 0;
        ++counted;
    }
    return counted == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(counted);
}

} // namespace csft
