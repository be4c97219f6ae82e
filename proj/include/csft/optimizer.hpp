#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csft/tape.hpp"

namespace csft {

struct AdamWConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    // Fraction of total steps spent ramping linearly from 0 to lr.
    double warmup_fraction = 0.0;

    void validate() const;
    friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

// Learning rate at 1-based `step`: linear ramp over ceil(warmup_fraction *
// total_steps) steps, constant afterwards.
double lr_at(std::uint64_t step, std::uint64_t total_steps, const AdamWConfig& cfg);

struct MomentState {
    Tensor2 m;
    Tensor2 v;
    std::uint64_t steps = 0;
    friend bool operator==(const MomentState&, const MomentState&) = default;
};

// One AdamW update of a single tensor with decoupled weight decay:
//   theta <- theta * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
// Throws NumericError on a non-finite gradient, leaving theta untouched.
void adamw_step(Tensor2& theta, const Tensor2& grad, MomentState& state, double lr, const AdamWConfig& cfg);

// AdamW over a fixed, ordered parameter list. Each parameter keeps its own
// step count, so groups stepped at different rates get correct bias
// correction.
class AdamW {
public:
    AdamW() = default;
    AdamW(std::vector<Parameter*> params, AdamWConfig cfg);

    // Updates only `subset` (each must be registered) with learning rate lr.
    void step(std::span<Parameter* const> subset, double lr);
    // Updates every registered parameter.
    void step(double lr);

    const AdamWConfig& config() const noexcept { return cfg_; }
    const std::vector<Parameter*>& parameters() const noexcept { return params_; }
    std::vector<MomentState>& states() noexcept { return states_; }
    const std::vector<MomentState>& states() const noexcept { return states_; }
    std::uint64_t global_step() const noexcept { return global_step_; }
    void set_global_step(std::uint64_t s) noexcept { global_step_ = s; }

private:
    std::size_t index_of(const Parameter* p) const;

    std::vector<Parameter*> params_;
    std::vector<MomentState> states_;
    AdamWConfig cfg_;
    std::uint64_t global_step_ = 0;
};

void zero_grads(std::span<Parameter* const> params);

} // namespace csft
