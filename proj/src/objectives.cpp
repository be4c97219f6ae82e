#include "csft/objectives.hpp"

#include <cmath>

#include "csft/error.hpp"

namespace csft {

void LossWeights::validate() const {
    if (!(lambda_c >= 0.0 && lambda_s >= 0.0 && lambda_y >= 0.0 && lambda_yhat >= 0.0)) {
        throw ParameterError("loss weights must be non-negative");
    }
}

bool LossBreakdown::all_finite() const noexcept {
    for (double v : {ce, recon, adv_c, adv_s, adv_y, disc_c, disc_s, disc_y, total}) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

PriorSampler PriorSampler::categorical(std::size_t num_classes) {
    PriorSampler p;
    p.kind_ = Kind::CategoricalOneHot;
    p.width_ = num_classes;
    return p;
}

PriorSampler PriorSampler::gaussian(std::size_t dim) {
    PriorSampler p;
    p.kind_ = Kind::StandardGaussian;
    p.width_ = dim;
    return p;
}

PriorSampler PriorSampler::empirical(const EmbeddingDataset& source, std::vector<std::size_t> rows) {
    if (rows.empty()) {
        throw ContractError("empirical prior: the unpaired set is empty");
    }
    PriorSampler p;
    p.kind_ = Kind::EmpiricalCls;
    p.width_ = source.cls_dim;
    p.source_ = &source;
    p.rows_ = std::move(rows);
    return p;
}

Tensor2 PriorSampler::sample(std::size_t count, Rng& rng) const {
    Tensor2 out(count, width_);
    switch (kind_) {
    case Kind::CategoricalOneHot:
        for (std::size_t i = 0; i < count; ++i) {
            out(i, rng.below(width_)) = 1.0;
        }
        break;
    case Kind::StandardGaussian:
        for (double& v : out.values()) {
            v = rng.normal();
        }
        break;
    case Kind::EmpiricalCls: {
        std::vector<std::size_t> picks(count);
        for (auto& idx : picks) {
            idx = rows_[rng.below(rows_.size())];
        }
        out = source_->gather(picks);
        break;
    }
    }
    return out;
}

PriorSet default_priors(const ComponentBundle& bundle, const EmbeddingDataset& unpaired,
                        std::vector<std::size_t> unpaired_rows) {
    return {PriorSampler::categorical(bundle.num_classes()), PriorSampler::gaussian(bundle.style_dim()),
            PriorSampler::empirical(unpaired, std::move(unpaired_rows))};
}

SupervisedPass supervised_loss(Tape& tape, ComponentBundle& bundle, const Tensor2& y, std::span<const int> labels,
                               const ForwardMode& mode) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) {
            throw ContractError("supervised_loss: row " + std::to_string(i) + " of the paired batch is unlabeled");
        }
    }
    const Var x = tape.input(y);
    // The style head is not part of this pass.
    const Var hidden = bundle.shared_encoder.forward(tape, x, mode);
    const Var logits = bundle.content_head.forward(tape, hidden, mode);
    SupervisedPass out;
    out.content_logits = logits;
    out.loss = tape.softmax_cross_entropy(logits, labels);
    out.breakdown.ce = tape.scalar(out.loss);
    out.breakdown.total = out.breakdown.ce;
    return out;
}

Var discriminator_loss(Tape& tape, Mlp& disc, const Tensor2& real, const Tensor2& fake) {
    if (real.cols() != fake.cols()) {
        throw DimensionError("discriminator_loss: real " + real.shape_string() + " vs fake " + fake.shape_string());
    }
    const Var real_logits = ComponentBundle::discriminate(tape, disc, tape.input(real), true);
    const Var fake_logits = ComponentBundle::discriminate(tape, disc, tape.input(fake), true);
    const Var sum = tape.add(tape.sigmoid_bce(real_logits, 1.0), tape.sigmoid_bce(fake_logits, 0.0));
    return tape.scale(sum, 0.5);
}

Var generator_adversarial_loss(Tape& tape, Mlp& disc, Var fake) {
    return tape.sigmoid_bce(ComponentBundle::discriminate(tape, disc, fake, false), 1.0);
}

GeneratorForward generator_forward(Tape& tape, ComponentBundle& bundle, const Tensor2& y, const PriorSet& priors,
                                   const ForwardMode& mode, Rng& prior_rng) {
    if (y.rows() == 0) {
        throw ContractError("unsupervised step: empty unpaired batch");
    }
    GeneratorForward f;
    f.y = tape.input(y);
    const Encoded enc = bundle.encode(tape, f.y, mode);
    f.content_logits = enc.content_logits;
    f.content = tape.softmax(enc.content_logits);
    f.style = enc.style;
    f.reconstruction = bundle.decode(tape, f.content, f.style, mode);
    f.prior_content = priors.content.sample(y.rows(), prior_rng);
    f.prior_style = priors.style.sample(y.rows(), prior_rng);
    f.prior_decode = bundle.decode(tape, tape.input(f.prior_content), tape.input(f.prior_style), mode);
    f.real_cls = priors.cls.sample(y.rows(), prior_rng);
    return f;
}

UnsupervisedPass unsupervised_losses(Tape& tape, ComponentBundle& bundle, const GeneratorForward& f,
                                     const LossWeights& w) {
    w.validate();
    const Var adv_c = generator_adversarial_loss(tape, bundle.disc_content, f.content);
    const Var adv_s = generator_adversarial_loss(tape, bundle.disc_style, f.style);
    const Var adv_y = generator_adversarial_loss(tape, bundle.disc_cls, f.prior_decode);
    const Var recon = tape.cosine_loss(f.y, f.reconstruction);
    Var total = tape.scale(adv_c, w.lambda_c);
    total = tape.add(total, tape.scale(adv_s, w.lambda_s));
    total = tape.add(total, tape.scale(adv_y, w.lambda_y));
    total = tape.add(total, tape.scale(recon, w.lambda_yhat));
    UnsupervisedPass out;
    out.total = total;
    out.breakdown.adv_c = tape.scalar(adv_c);
    out.breakdown.adv_s = tape.scalar(adv_s);
    out.breakdown.adv_y = tape.scalar(adv_y);
    out.breakdown.recon = tape.scalar(recon);
    out.breakdown.total = tape.scalar(total);
    return out;
}

UnsupervisedPass unsupervised_losses(Tape& tape, ComponentBundle& bundle, const Tensor2& y, const PriorSet& priors,
                                     const LossWeights& weights, const ForwardMode& mode, Rng& prior_rng) {
    const GeneratorForward f = generator_forward(tape, bundle, y, priors, mode, prior_rng);
    return unsupervised_losses(tape, bundle, f, weights);
}

DiscriminatorLosses discriminator_gradients(ComponentBundle& bundle, const Tape& gen_tape,
                                            const GeneratorForward& f) {
    DiscriminatorLosses out;
    {
        Tape tape;
        const Var loss = discriminator_loss(tape, bundle.disc_content, f.prior_content, gen_tape.value(f.content));
        out.content = tape.scalar(loss);
        tape.backward(loss);
    }
    {
        Tape tape;
        const Var loss = discriminator_loss(tape, bundle.disc_style, f.prior_style, gen_tape.value(f.style));
        out.style = tape.scalar(loss);
        tape.backward(loss);
    }
    {
        Tape tape;
        const Var loss = discriminator_loss(tape, bundle.disc_cls, f.real_cls, gen_tape.value(f.prior_decode));
        out.cls = tape.scalar(loss);
        tape.backward(loss);
    }
    return out;
}

double mean_entropy(const Tensor2& p) {
    if (p.rows() == 0) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (double v : p.row(i)) {
            if (v > 0.0) {
                total -= v * std::log(v);
            }
        }
    }
    return total / static_cast<double>(p.rows());
}

} // namespace csft
