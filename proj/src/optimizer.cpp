#include "csft/optimizer.hpp"

#include <cmath>

#include "csft/error.hpp"
#include "csft/kernel/kernels.hpp"

namespace csft {

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) {
        throw ParameterError("adamw: lr must be positive");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw ParameterError("adamw: betas must lie in (0,1)");
    }
    if (!(eps > 0.0) || !(weight_decay >= 0.0)) {
        throw ParameterError("adamw: eps must be positive and weight_decay non-negative");
    }
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
        throw ParameterError("adamw: warmup_fraction must lie in [0,1)");
    }
}

double lr_at(std::uint64_t step, std::uint64_t total_steps, const AdamWConfig& cfg) {
    const auto warmup = static_cast<std::uint64_t>(
        std::ceil(cfg.warmup_fraction * static_cast<double>(total_steps)));
    if (warmup == 0 || step >= warmup) {
        return cfg.lr;
    }
    return cfg.lr * static_cast<double>(step) / static_cast<double>(warmup);
}

void adamw_step(Tensor2& theta, const Tensor2& grad, MomentState& state, double lr, const AdamWConfig& cfg) {
    if (!theta.same_shape(grad)) {
        throw DimensionError("adamw: parameter " + theta.shape_string() + " vs gradient " + grad.shape_string());
    }
    if (!grad.all_finite()) {
        throw NumericError("adamw: non-finite gradient for parameter of shape " + theta.shape_string());
    }
    if (!state.m.same_shape(theta)) {
        state.m = Tensor2(theta.rows(), theta.cols());
        state.v = Tensor2(theta.rows(), theta.cols());
    }
    ++state.steps;
    kernel::AdamWArgs args;
    args.lr = lr;
    args.beta1 = cfg.beta1;
    args.beta2 = cfg.beta2;
    args.eps = cfg.eps;
    args.weight_decay = cfg.weight_decay;
    args.bias_correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.steps));
    args.bias_correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.steps));
    kernel::active().adamw(theta.data(), grad.data(), state.m.data(), state.v.data(), theta.size(), args);
}

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    states_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        states_[i].m = Tensor2(params_[i]->value.rows(), params_[i]->value.cols());
        states_[i].v = Tensor2(params_[i]->value.rows(), params_[i]->value.cols());
    }
}

std::size_t AdamW::index_of(const Parameter* p) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i] == p) {
            return i;
        }
    }
    throw ContractError("adamw: parameter '" + p->name + "' is not registered with this optimizer");
}

void AdamW::step(std::span<Parameter* const> subset, double lr) {
    // Validate every gradient first so a failure leaves all parameters untouched.
    for (const Parameter* p : subset) {
        if (!p->grad.all_finite()) {
            throw NumericError("adamw: non-finite gradient in parameter '" + p->name + "'");
        }
    }
    for (Parameter* p : subset) {
        adamw_step(p->value, p->grad, states_[index_of(p)], lr, cfg_);
    }
    ++global_step_;
}

void AdamW::step(double lr) { step(params_, lr); }

void zero_grads(std::span<Parameter* const> params) {
    for (Parameter* p : params) {
        p->zero_grad();
    }
}

} // namespace csft
