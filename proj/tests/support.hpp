#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "csft/embx.hpp"
#include "csft/rng.hpp"
#include "csft/tape.hpp"
#include "csft/tensor.hpp"
#include "csft/trainer.hpp"

namespace csft::test {

inline Tensor2 random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Tensor2 t(rows, cols);
    for (double& v : t.values()) {
        v = scale * rng.normal();
    }
    return t;
}

// Central-difference gradient check.
//
// Error is measured per tensor over the sampled coordinates as the
// norm-wise relative error ||analytic - numeric|| / max(||analytic||,
// ||numeric||). Single coordinates far below the tensor's scale are then
// judged against that scale instead of against their own roundoff.
struct GradCheck {
    double h = 1e-5;
    double max_rel = 0.0;
    std::size_t checked = 0;
    std::string worst;

    void record(const std::string& what, const std::vector<double>& analytic, const std::vector<double>& numeric) {
        double diff = 0.0, na = 0.0, nn = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
            na += analytic[i] * analytic[i];
            nn += numeric[i] * numeric[i];
        }
        checked += analytic.size();
        const double denom = std::sqrt(std::max(na, nn));
        const double rel = denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
        if (rel > max_rel) {
            max_rel = rel;
            worst = what + " rel=" + std::to_string(rel) + " |g|=" + std::to_string(denom);
        }
    }
};

// Builds a fresh scalar loss on `tape`. Must be a pure function of the
// current parameter values (reset any RNG inside).
using LossFn = std::function<Var(Tape&)>;

inline double eval_loss(const LossFn& f) {
    Tape tape;
    return tape.scalar(f(tape));
}

// Indices of up to `count` coordinates of a tensor of `size`, all when small.
inline std::vector<std::size_t> pick_coords(std::size_t size, std::size_t count, Rng& rng) {
    std::vector<std::size_t> out;
    if (size <= count) {
        for (std::size_t i = 0; i < size; ++i) {
            out.push_back(i);
        }
        return out;
    }
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(static_cast<std::size_t>(rng.below(size)));
    }
    return out;
}

// Checks d loss / d p for sampled coordinates of every parameter.
inline void check_parameters(GradCheck& gc, const LossFn& f, const std::vector<Parameter*>& params,
                             std::size_t per_tensor, Rng& pick) {
    for (Parameter* p : params) {
        p->zero_grad();
    }
    {
        Tape tape;
        tape.backward(f(tape));
    }
    for (Parameter* p : params) {
        std::vector<double> analytic, numeric;
        for (std::size_t idx : pick_coords(p->value.size(), per_tensor, pick)) {
            double& v = p->value.values()[idx];
            const double saved = v;
            v = saved + gc.h;
            const double plus = eval_loss(f);
            v = saved - gc.h;
            const double minus = eval_loss(f);
            v = saved;
            analytic.push_back(p->grad.values()[idx]);
            numeric.push_back((plus - minus) / (2.0 * gc.h));
        }
        gc.record(p->name, analytic, numeric);
    }
}

// Checks d loss / d x for sampled coordinates of an input tensor.
inline void check_input(GradCheck& gc, const std::function<Var(Tape&, Var)>& f, Tensor2 x, std::size_t count,
                        Rng& pick) {
    Tensor2 analytic;
    {
        Tape tape;
        const Var in = tape.input(x, true);
        tape.backward(f(tape, in));
        analytic = tape.grad(in);
    }
    auto at = [&](const Tensor2& v) {
        Tape tape;
        return tape.scalar(f(tape, tape.input(v)));
    };
    std::vector<double> an, nu;
    for (std::size_t idx : pick_coords(x.size(), count, pick)) {
        const double saved = x.values()[idx];
        x.values()[idx] = saved + gc.h;
        const double plus = at(x);
        x.values()[idx] = saved - gc.h;
        const double minus = at(x);
        x.values()[idx] = saved;
        an.push_back(analytic.empty() ? 0.0 : analytic.values()[idx]);
        nu.push_back((plus - minus) / (2.0 * gc.h));
    }
    gc.record("input", an, nu);
}

// Reduces any [b x m] value to a scalar through a fixed random projection and
// a BCE, so non-loss ops can be gradient-checked.
inline Var scalarize(Tape& tape, Var v, const Tensor2& projection) {
    const Var w = tape.input(projection);
    const Var b = tape.input(Tensor2(1, 1));
    return tape.sigmoid_bce(tape.linear(v, w, b), 1.0);
}

// Labeled Gaussian blobs, `per_class` rows per class.
inline EmbeddingDataset blobs(std::size_t classes, std::size_t dim, std::size_t per_class, std::uint64_t seed,
                              double separation = 4.0) {
    EmbeddingDataset d;
    d.cls_dim = static_cast<std::uint32_t>(dim);
    d.num_classes = static_cast<std::uint32_t>(classes);
    Rng rng(seed, Stream::Test);
    for (std::size_t i = 0; i < per_class * classes; ++i) {
        const std::size_t k = i % classes;
        d.labels.push_back(static_cast<std::int32_t>(k));
        for (std::size_t j = 0; j < dim; ++j) {
            const double mean = j % classes == k ? separation : 0.0;
            d.embeddings.push_back(static_cast<float>(mean + rng.normal()));
        }
    }
    return d;
}

// A narrow, fast configuration for trainer tests.
inline TrainConfig small_config(std::uint64_t seed = 1) {
    TrainConfig c;
    c.seed = seed;
    c.architecture.width_scale = 0.01;
    c.architecture.style_dim = 8;
    c.schedule.total_steps = 60;
    c.schedule.batch_supervised = 8;
    c.schedule.batch_unsupervised = 32;
    c.schedule.eval_every = 10;
    c.schedule.patience = 0;
    c.component_optimizer.lr = 1e-3;
    c.discriminator_optimizer.lr = 1e-3;
    return c;
}

inline std::vector<double> flatten(const std::vector<Parameter*>& params) {
    std::vector<double> out;
    for (const Parameter* p : params) {
        out.insert(out.end(), p->value.values().begin(), p->value.values().end());
    }
    return out;
}

} // namespace csft::test
