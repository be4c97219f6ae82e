#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csft/components.hpp"
#include "csft/embx.hpp"
#include "csft/rng.hpp"
#include "csft/tape.hpp"

namespace csft {

struct LossWeights {
    double lambda_c = 1.0;
    double lambda_s = 1.0;
    double lambda_y = 1.0;
    double lambda_yhat = 1.0;

    void validate() const;
    bool all_zero() const noexcept {
        return lambda_c == 0.0 && lambda_s == 0.0 && lambda_y == 0.0 && lambda_yhat == 0.0;
    }
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
    double ce = 0.0;
    double recon = 0.0;
    double adv_c = 0.0;
    double adv_s = 0.0;
    double adv_y = 0.0;
    double disc_c = 0.0;
    double disc_s = 0.0;
    double disc_y = 0.0;
    double total = 0.0;

    bool all_finite() const noexcept;
    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

// Samples "real" rows for the discriminators.
class PriorSampler {
public:
    enum class Kind { CategoricalOneHot, StandardGaussian, EmpiricalCls };

    static PriorSampler categorical(std::size_t num_classes);
    static PriorSampler gaussian(std::size_t dim);
    // Draws rows from `source` (kept by reference; must outlive the sampler).
    static PriorSampler empirical(const EmbeddingDataset& source, std::vector<std::size_t> rows);

    Kind kind() const noexcept { return kind_; }
    std::size_t width() const noexcept { return width_; }
    Tensor2 sample(std::size_t count, Rng& rng) const;

private:
    Kind kind_ = Kind::StandardGaussian;
    std::size_t width_ = 0;
    const EmbeddingDataset* source_ = nullptr;
    std::vector<std::size_t> rows_;
};

struct PriorSet {
    PriorSampler content;
    PriorSampler style;
    PriorSampler cls;
};

PriorSet default_priors(const ComponentBundle& bundle, const EmbeddingDataset& unpaired,
                        std::vector<std::size_t> unpaired_rows);

// Supervised pass: cross-entropy of the content logits. Gradient reaches the
// shared encoder and content head only.
struct SupervisedPass {
    Var loss;
    Var content_logits;
    LossBreakdown breakdown;
};
SupervisedPass supervised_loss(Tape& tape, ComponentBundle& bundle, const Tensor2& y, std::span<const int> labels,
                               const ForwardMode& mode);

// 0.5 * (BCE(D(real), 1) + BCE(D(fake), 0)). Both inputs enter as constants,
// so only the discriminator's parameters receive gradient.
Var discriminator_loss(Tape& tape, Mlp& disc, const Tensor2& real, const Tensor2& fake);

// Non-saturating generator objective BCE(D(fake), 1) with D frozen.
Var generator_adversarial_loss(Tape& tape, Mlp& disc, Var fake);

// Component-side forward of an unsupervised step, shared between the
// discriminator update and the generator update.
struct GeneratorForward {
    Var y;              // data batch (constant)
    Var content_logits;
    Var content;        // softmax(content_logits), a point on the simplex
    Var style;
    Var reconstruction; // decode(content, style)
    Tensor2 prior_content;
    Tensor2 prior_style;
    Var prior_decode;   // decode(prior_content, prior_style)
    Tensor2 real_cls;   // rows from the empirical CLS prior
};
GeneratorForward generator_forward(Tape& tape, ComponentBundle& bundle, const Tensor2& y, const PriorSet& priors,
                                   const ForwardMode& mode, Rng& prior_rng);

struct UnsupervisedPass {
    Var total;
    LossBreakdown breakdown;
};
// Adversarial + reconstruction terms against the current discriminators.
// total = lc*adv_c + ls*adv_s + ly*adv_y + lyy*recon
UnsupervisedPass unsupervised_losses(Tape& tape, ComponentBundle& bundle, const GeneratorForward& fwd,
                                     const LossWeights& weights);
// Convenience: forward plus losses in one call.
UnsupervisedPass unsupervised_losses(Tape& tape, ComponentBundle& bundle, const Tensor2& y, const PriorSet& priors,
                                     const LossWeights& weights, const ForwardMode& mode, Rng& prior_rng);

struct DiscriminatorLosses {
    double content = 0.0;
    double style = 0.0;
    double cls = 0.0;
};
// Accumulates gradient into the three discriminators for one update:
// D_c(real one-hots vs softmaxed content), D_s(N(0,I) vs style),
// D_y(empirical CLS rows vs prior-driven decodes). Leaves the tape-held generator
// values untouched; caller zeroes grads and steps the optimizer.
DiscriminatorLosses discriminator_gradients(ComponentBundle& bundle, const Tape& gen_tape,
                                            const GeneratorForward& fwd);

// Mean Shannon entropy (nats) of the rows of a probability matrix.
double mean_entropy(const Tensor2& probabilities);

} // namespace csft
