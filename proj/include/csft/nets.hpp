#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "csft/rng.hpp"
#include "csft/tape.hpp"
#include "csft/tensor.hpp"

namespace csft {

enum class LayerKind { Linear, LeakyRelu, Dropout };

struct LayerSpec {
    LayerKind kind = LayerKind::Linear;
    std::size_t width = 0; // Linear only
    double slope = 0.0;    // LeakyRelu only
    double p = 0.0;        // Dropout only

    static LayerSpec linear(std::size_t width) { return {LayerKind::Linear, width, 0.0, 0.0}; }
    static LayerSpec leaky_relu(double slope) { return {LayerKind::LeakyRelu, 0, slope, 0.0}; }
    static LayerSpec dropout(double p) { return {LayerKind::Dropout, 0, 0.0, p}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetSpec {
    std::string name;
    std::size_t input_dim = 0;
    std::vector<LayerSpec> layers;

    // Width of the last Linear layer.
    std::size_t output_dim() const;
    std::size_t linear_count() const;
    // Throws ParameterError on zero widths, bad slopes or probabilities, or a
    // spec that does not start with a Linear layer.
    void validate() const;

    friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

// How a forward pass behaves: dropout on/off, and whether the net's
// parameters receive gradient.
struct ForwardMode {
    bool training = false;
    bool trainable = true;
    Rng* dropout_rng = nullptr;

    static ForwardMode inference() { return {false, false, nullptr}; }
};

// Multi-layer perceptron built from a NetSpec. Linear weights are [in x out],
// biases [1 x out].
class Mlp {
public:
    Mlp() = default;
    Mlp(NetSpec spec, Rng& init_rng);

    const NetSpec& spec() const noexcept { return spec_; }
    std::size_t input_dim() const noexcept { return spec_.input_dim; }
    std::size_t output_dim() const { return spec_.output_dim(); }

    Var forward(Tape& tape, Var x, const ForwardMode& mode);
    // Runs layers [0, layer_count) only; used to read intermediate features.
    Var forward_prefix(Tape& tape, Var x, const ForwardMode& mode, std::size_t layer_count);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const;

private:
    NetSpec spec_;
    std::vector<Parameter> weights_;
    std::vector<Parameter> biases_;
};

// Kaiming-uniform fan-in init with the leaky-ReLU (a = 0.01) gain:
// U(-b, b), b = sqrt(6 / ((1 + a^2) fan_in)). Biases are zero.
Tensor2 kaiming_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
double kaiming_bound(std::size_t fan_in);

} // namespace csft
