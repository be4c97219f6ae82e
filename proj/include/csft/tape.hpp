#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csft/rng.hpp"
#include "csft/tensor.hpp"

namespace csft {

// A trainable tensor plus the gradient accumulated into it by Tape::backward.
struct Parameter {
    Parameter() = default;
    Parameter(std::string name_, Tensor2 value_)
        : name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()) {}

    std::string name;
    Tensor2 value;
    Tensor2 grad;

    void zero_grad() { grad.fill(0.0); }
};

// Handle to a value recorded on a Tape. Handles from another tape, or from
// before the last clear(), are rejected.
struct Var {
    std::uint64_t tape_id = 0;
    std::uint64_t generation = 0;
    std::uint32_t index = 0;
};

// Records primitive applications in order and replays them in reverse to
// accumulate gradients. Every recorded output is checked for NaN/Inf; a
// non-finite value throws NumericError naming the op.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    // Leaf holding a copy of `value`. With requires_grad its gradient is kept
    // and readable through grad() after backward().
    Var input(Tensor2 value, bool requires_grad = false);
    // Leaf bound to a parameter. When trainable, backward() accumulates into
    // p.grad; otherwise the parameter acts as a constant.
    Var parameter(Parameter& p, bool trainable = true);

    // x[b x n] * w[n x m] + bias[1 x m]
    Var linear(Var x, Var w, Var bias);
    Var leaky_relu(Var x, double slope);
    // Inverted dropout. Identity (same handle) when !training or p == 0.
    Var dropout(Var x, double p, bool training, Rng& rng);
    Var softmax(Var logits);
    Var concat_cols(Var left, Var right);
    Var add(Var a, Var b);
    Var scale(Var a, double factor);

    // Scalar (1x1) losses, each a mean over the batch.
    Var softmax_cross_entropy(Var logits, std::span<const int> labels);
    Var sigmoid_bce(Var logits, double target);
    Var cosine_loss(Var y_true, Var y_hat);

    void backward(Var loss);
    void clear();

    const Tensor2& value(Var v) const;
    // Gradient of a leaf created with requires_grad (or any recorded node);
    // empty when nothing flowed into it.
    const Tensor2& grad(Var v) const;
    double scalar(Var v) const;
    bool requires_grad(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }
    bool backward_done() const noexcept { return backward_done_; }

private:
    struct Node {
        const char* op = "";
        Tensor2 owned;
        // Parameter leaves read the parameter in place instead of copying it.
        const Tensor2* external = nullptr;
        Tensor2 grad;
        bool requires_grad = false;
        Parameter* param = nullptr;
        std::function<void(std::vector<Node>&, const Tensor2& gout)> backprop;

        const Tensor2& val() const noexcept { return external != nullptr ? *external : owned; }
    };

    Var push(Node node);
    Node& node(Var v);
    const Node& node(Var v) const;
    static Tensor2& grad_target(Node& n);

    std::uint64_t id_;
    std::uint64_t generation_ = 0;
    bool backward_done_ = false;
    std::vector<Node> nodes_;
};

} // namespace csft
