#include "csft/nets.hpp"

#include <cmath>

#include "csft/error.hpp"

namespace csft {

namespace {
constexpr double kInitNegativeSlope = 0.01;
}

std::size_t NetSpec::output_dim() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        if (it->kind == LayerKind::Linear) {
            return it->width;
        }
    }
    return input_dim;
}

std::size_t NetSpec::linear_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += l.kind == LayerKind::Linear ? 1 : 0;
    }
    return n;
}

void NetSpec::validate() const {
    if (input_dim == 0) {
        throw ParameterError(name + ": input width must be positive");
    }
    if (layers.empty() || layers.front().kind != LayerKind::Linear) {
        throw ParameterError(name + ": network must start with a Linear layer");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string where = name + " layer " + std::to_string(i);
        switch (l.kind) {
        case LayerKind::Linear:
            if (l.width == 0) {
                throw ParameterError(where + ": Linear width must be positive");
            }
            break;
        case LayerKind::LeakyRelu:
            if (!(l.slope > 0.0 && l.slope < 1.0)) {
                throw ParameterError(where + ": slope must lie in (0,1)");
            }
            break;
        case LayerKind::Dropout:
            if (!(l.p >= 0.0 && l.p < 1.0)) {
                throw ParameterError(where + ": dropout probability must lie in [0,1)");
            }
            break;
        }
    }
}

double kaiming_bound(std::size_t fan_in) {
    return std::sqrt(6.0 / ((1.0 + kInitNegativeSlope * kInitNegativeSlope) * static_cast<double>(fan_in)));
}

Tensor2 kaiming_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = kaiming_bound(fan_in);
    Tensor2 w(fan_in, fan_out);
    for (double& v : w.values()) {
        v = rng.uniform(-bound, bound);
    }
    return w;
}

Mlp::Mlp(NetSpec spec, Rng& init_rng) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t width = spec_.input_dim;
    std::size_t index = 0;
    for (const auto& l : spec_.layers) {
        if (l.kind != LayerKind::Linear) {
            continue;
        }
        const std::string prefix = spec_.name + ".linear" + std::to_string(index++);
        weights_.emplace_back(prefix + ".weight", kaiming_uniform(width, l.width, init_rng));
        biases_.emplace_back(prefix + ".bias", Tensor2(1, l.width));
        width = l.width;
    }
}

Var Mlp::forward(Tape& tape, Var x, const ForwardMode& mode) {
    return forward_prefix(tape, x, mode, spec_.layers.size());
}

Var Mlp::forward_prefix(Tape& tape, Var x, const ForwardMode& mode, std::size_t layer_count) {
    const auto& in = tape.value(x);
    if (in.cols() != spec_.input_dim) {
        throw DimensionError(spec_.name + ": expected input width " + std::to_string(spec_.input_dim) +
                             ", got " + in.shape_string());
    }
    Var h = x;
    std::size_t linear = 0;
    for (std::size_t i = 0; i < layer_count && i < spec_.layers.size(); ++i) {
        const auto& l = spec_.layers[i];
        switch (l.kind) {
        case LayerKind::Linear: {
            const Var w = tape.parameter(weights_[linear], mode.trainable);
            const Var b = tape.parameter(biases_[linear], mode.trainable);
            h = tape.linear(h, w, b);
            ++linear;
            break;
        }
        case LayerKind::LeakyRelu:
            h = tape.leaky_relu(h, l.slope);
            break;
        case LayerKind::Dropout:
            if (mode.training && l.p > 0.0) {
                if (mode.dropout_rng == nullptr) {
                    throw ParameterError(spec_.name + ": training forward needs a dropout rng");
                }
                h = tape.dropout(h, l.p, true, *mode.dropout_rng);
            }
            break;
        }
    }
    return h;
}

std::vector<Parameter*> Mlp::parameters() {
    std::vector<Parameter*> out;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        out.push_back(&weights_[i]);
        out.push_back(&biases_[i]);
    }
    return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
    std::vector<const Parameter*> out;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        out.push_back(&weights_[i]);
        out.push_back(&biases_[i]);
    }
    return out;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) {
        n += p->value.size();
    }
    return n;
}

} // namespace csft
