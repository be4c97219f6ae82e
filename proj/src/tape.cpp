#include "csft/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "csft/error.hpp"
#include "csft/kernel/kernels.hpp"

namespace csft {

namespace {

std::uint64_t next_tape_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

void require_same_shape(const char* op, const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

double softplus_neg_abs(double z) { return std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

constexpr double kCosineEps = 1e-12;

} // namespace

Tape::Tape() : id_(next_tape_id()) {}

Var Tape::push(Node n) {
    if (n.external == nullptr && !n.owned.all_finite()) {
        throw NumericError(std::string("op '") + n.op + "' produced a non-finite value " +
                           n.owned.shape_string());
    }
    nodes_.push_back(std::move(n));
    return Var{id_, generation_, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tape::Node& Tape::node(Var v) {
    return const_cast<Node&>(static_cast<const Tape&>(*this).node(v));
}

const Tape::Node& Tape::node(Var v) const {
    if (v.tape_id != id_ || v.generation != generation_ || v.index >= nodes_.size()) {
        throw TapeError("handle does not belong to this tape (detached or cleared)");
    }
    return nodes_[v.index];
}

Tensor2& Tape::grad_target(Node& n) {
    if (n.param != nullptr) {
        return n.param->grad;
    }
    if (n.grad.empty() && !n.val().empty()) {
        n.grad = Tensor2(n.val().rows(), n.val().cols());
    }
    return n.grad;
}

Var Tape::input(Tensor2 value, bool requires_grad) {
    Node n;
    n.op = "input";
    n.owned = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Var Tape::parameter(Parameter& p, bool trainable) {
    if (trainable && !p.grad.same_shape(p.value)) {
        p.grad = Tensor2(p.value.rows(), p.value.cols());
    }
    if (!p.value.all_finite()) {
        throw NumericError("parameter '" + p.name + "' holds a non-finite value");
    }
    Node n;
    n.op = "parameter";
    n.external = &p.value;
    n.requires_grad = trainable;
    n.param = trainable ? &p : nullptr;
    return push(std::move(n));
}

Var Tape::linear(Var x, Var w, Var bias) {
    const Node& nx = node(x);
    const Node& nw = node(w);
    const Node& nb = node(bias);
    const std::size_t batch = nx.val().rows();
    const std::size_t in = nx.val().cols();
    const std::size_t out = nw.val().cols();
    if (nw.val().rows() != in) {
        throw DimensionError("linear: input " + nx.val().shape_string() + " does not chain with weight " +
                             nw.val().shape_string());
    }
    if (nb.val().rows() != 1 || nb.val().cols() != out) {
        throw DimensionError("linear: bias " + nb.val().shape_string() + " does not match weight " +
                             nw.val().shape_string());
    }
    if (!nx.val().all_finite()) {
        throw NumericError("linear: non-finite input " + nx.val().shape_string());
    }
    Node n;
    n.op = "linear";
    n.owned = Tensor2(batch, out);
    kernel::gemm({kernel::Trans::No, kernel::Trans::No, batch, out, in, nx.val().data(), in,
                  nw.val().data(), out, n.owned.data(), out, false});
    const double* b = nb.val().data();
    for (std::size_t i = 0; i < batch; ++i) {
        kernel::active().axpy(1.0, b, n.owned.data() + i * out, out);
    }
    n.requires_grad = nx.requires_grad || nw.requires_grad || nb.requires_grad;
    const auto xi = x.index;
    const auto wi = w.index;
    const auto bi = bias.index;
    n.backprop = [xi, wi, bi, batch, in, out](std::vector<Node>& nodes, const Tensor2& gout) {
        if (nodes[xi].requires_grad) {
            Tensor2& gx = grad_target(nodes[xi]);
            kernel::gemm({kernel::Trans::No, kernel::Trans::Yes, batch, in, out, gout.data(), out,
                          nodes[wi].val().data(), out, gx.data(), in, true});
        }
        if (nodes[wi].requires_grad) {
            Tensor2& gw = grad_target(nodes[wi]);
            kernel::gemm({kernel::Trans::Yes, kernel::Trans::No, in, out, batch, nodes[xi].val().data(),
                          in, gout.data(), out, gw.data(), out, true});
        }
        if (nodes[bi].requires_grad) {
            Tensor2& gb = grad_target(nodes[bi]);
            kernel::active().column_sum(gout.data(), batch, out, gb.data());
        }
    };
    return push(std::move(n));
}

Var Tape::leaky_relu(Var x, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) {
        throw ParameterError("leaky_relu: slope must lie in (0,1), got " + std::to_string(slope));
    }
    const Node& nx = node(x);
    Node n;
    n.op = "leaky_relu";
    n.owned = Tensor2(nx.val().rows(), nx.val().cols());
    kernel::active().leaky_relu_forward(nx.val().data(), n.owned.data(), nx.val().size(), slope);
    n.requires_grad = nx.requires_grad;
    const auto xi = x.index;
    n.backprop = [xi, slope](std::vector<Node>& nodes, const Tensor2& gout) {
        if (!nodes[xi].requires_grad) {
            return;
        }
        Tensor2& gx = grad_target(nodes[xi]);
        // x == 0 takes the negative-branch slope.
        kernel::active().leaky_relu_backward(nodes[xi].val().data(), gout.data(), gx.data(), gout.size(),
                                             slope);
    };
    return push(std::move(n));
}

Var Tape::dropout(Var x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ParameterError("dropout: probability must lie in [0,1), got " + std::to_string(p));
    }
    const Node& nx = node(x);
    if (!training || p == 0.0) {
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(nx.val().size());
    for (double& m : mask) {
        m = rng.uniform() < p ? 0.0 : keep_scale;
    }
    Node n;
    n.op = "dropout";
    n.owned = Tensor2(nx.val().rows(), nx.val().cols());
    const double* xv = nx.val().data();
    double* ov = n.owned.data();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        ov[i] = xv[i] * mask[i];
    }
    n.requires_grad = nx.requires_grad;
    const auto xi = x.index;
    n.backprop = [xi, mask = std::move(mask)](std::vector<Node>& nodes, const Tensor2& gout) {
        if (!nodes[xi].requires_grad) {
            return;
        }
        double* gx = grad_target(nodes[xi]).data();
        const double* g = gout.data();
        for (std::size_t i = 0; i < mask.size(); ++i) {
            gx[i] += g[i] * mask[i];
        }
    };
    return push(std::move(n));
}

Var Tape::softmax(Var logits) {
    const Node& nx = node(logits);
    const std::size_t rows = nx.val().rows();
    const std::size_t cols = nx.val().cols();
    Node n;
    n.op = "softmax";
    n.owned = Tensor2(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto in = nx.val().row(i);
        auto out = n.owned.row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            out[j] = std::exp(in[j] - mx);
            total += out[j];
        }
        for (double& v : out) {
            v /= total;
        }
    }
    n.requires_grad = nx.requires_grad;
    const auto xi = logits.index;
    const auto self = static_cast<std::uint32_t>(nodes_.size());
    n.backprop = [xi, self, rows, cols](std::vector<Node>& nodes, const Tensor2& gout) {
        if (!nodes[xi].requires_grad) {
            return;
        }
        const Tensor2& s = nodes[self].val();
        Tensor2& gx = grad_target(nodes[xi]);
        for (std::size_t i = 0; i < rows; ++i) {
            double inner = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                inner += gout(i, j) * s(i, j);
            }
            for (std::size_t j = 0; j < cols; ++j) {
                gx(i, j) += s(i, j) * (gout(i, j) - inner);
            }
        }
    };
    return push(std::move(n));
}

Var Tape::concat_cols(Var left, Var right) {
    const Node& na = node(left);
    const Node& nb = node(right);
    if (na.val().rows() != nb.val().rows()) {
        throw DimensionError("concat_cols: row mismatch " + na.val().shape_string() + " vs " +
                             nb.val().shape_string());
    }
    const std::size_t rows = na.val().rows();
    const std::size_t ca = na.val().cols();
    const std::size_t cb = nb.val().cols();
    Node n;
    n.op = "concat_cols";
    n.owned = Tensor2(rows, ca + cb);
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy_n(na.val().row(i).data(), ca, n.owned.row(i).data());
        std::copy_n(nb.val().row(i).data(), cb, n.owned.row(i).data() + ca);
    }
    n.requires_grad = na.requires_grad || nb.requires_grad;
    const auto ai = left.index;
    const auto bi = right.index;
    n.backprop = [ai, bi, rows, ca, cb](std::vector<Node>& nodes, const Tensor2& gout) {
        if (nodes[ai].requires_grad) {
            Tensor2& g = grad_target(nodes[ai]);
            for (std::size_t i = 0; i < rows; ++i) {
                kernel::active().axpy(1.0, gout.row(i).data(), g.row(i).data(), ca);
            }
        }
        if (nodes[bi].requires_grad) {
            Tensor2& g = grad_target(nodes[bi]);
            for (std::size_t i = 0; i < rows; ++i) {
                kernel::active().axpy(1.0, gout.row(i).data() + ca, g.row(i).data(), cb);
            }
        }
    };
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require_same_shape("add", na.val(), nb.val());
    Node n;
    n.op = "add";
    n.owned = na.val();
    kernel::active().axpy(1.0, nb.val().data(), n.owned.data(), n.owned.size());
    n.requires_grad = na.requires_grad || nb.requires_grad;
    const auto ai = a.index;
    const auto bi = b.index;
    n.backprop = [ai, bi](std::vector<Node>& nodes, const Tensor2& gout) {
        for (const auto idx : {ai, bi}) {
            if (nodes[idx].requires_grad) {
                kernel::active().axpy(1.0, gout.data(), grad_target(nodes[idx]).data(), gout.size());
            }
        }
    };
    return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
    const Node& na = node(a);
    Node n;
    n.op = "scale";
    n.owned = Tensor2(na.val().rows(), na.val().cols());
    kernel::active().axpy(factor, na.val().data(), n.owned.data(), n.owned.size());
    n.requires_grad = na.requires_grad;
    const auto ai = a.index;
    n.backprop = [ai, factor](std::vector<Node>& nodes, const Tensor2& gout) {
        if (nodes[ai].requires_grad) {
            kernel::active().axpy(factor, gout.data(), grad_target(nodes[ai]).data(), gout.size());
        }
    };
    return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> labels) {
    const Node& nx = node(logits);
    const std::size_t rows = nx.val().rows();
    const std::size_t classes = nx.val().cols();
    if (labels.size() != rows) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                             nx.val().shape_string());
    }
    if (rows == 0) {
        throw DimensionError("softmax_cross_entropy: empty batch");
    }
    for (std::size_t i = 0; i < rows; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw LabelError("softmax_cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                             std::to_string(i) + " outside [0," + std::to_string(classes) + ")");
        }
    }
    Tensor2 probs(rows, classes);
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const auto in = nx.val().row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
            sum += std::exp(in[j] - mx);
        }
        const double log_sum = std::log(sum);
        for (std::size_t j = 0; j < classes; ++j) {
            probs(i, j) = std::exp(in[j] - mx - log_sum);
        }
        total += -(in[labels[i]] - mx - log_sum);
    }
    Node n;
    n.op = "softmax_cross_entropy";
    n.owned = Tensor2(1, 1, total / static_cast<double>(rows));
    n.requires_grad = nx.requires_grad;
    const auto xi = logits.index;
    std::vector<int> owned(labels.begin(), labels.end());
    n.backprop = [xi, probs = std::move(probs), owned = std::move(owned)](std::vector<Node>& nodes,
                                                                          const Tensor2& gout) {
        if (!nodes[xi].requires_grad) {
            return;
        }
        Tensor2& gx = grad_target(nodes[xi]);
        const double g = gout(0, 0) / static_cast<double>(probs.rows());
        for (std::size_t i = 0; i < probs.rows(); ++i) {
            for (std::size_t j = 0; j < probs.cols(); ++j) {
                const double onehot = static_cast<int>(j) == owned[i] ? 1.0 : 0.0;
                gx(i, j) += g * (probs(i, j) - onehot);
            }
        }
    };
    return push(std::move(n));
}

Var Tape::sigmoid_bce(Var logits, double target) {
    if (target != 0.0 && target != 1.0) {
        throw ParameterError("sigmoid_bce: target must be 0 or 1, got " + std::to_string(target));
    }
    const Node& nx = node(logits);
    if (nx.val().cols() != 1 || nx.val().rows() == 0) {
        throw DimensionError("sigmoid_bce: expected [b x 1] logits, got " + nx.val().shape_string());
    }
    const std::size_t rows = nx.val().rows();
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double z = nx.val()(i, 0);
        total += std::max(z, 0.0) - z * target + softplus_neg_abs(z);
    }
    Node n;
    n.op = "sigmoid_bce";
    n.owned = Tensor2(1, 1, total / static_cast<double>(rows));
    n.requires_grad = nx.requires_grad;
    const auto xi = logits.index;
    n.backprop = [xi, target, rows](std::vector<Node>& nodes, const Tensor2& gout) {
        if (!nodes[xi].requires_grad) {
            return;
        }
        Tensor2& gx = grad_target(nodes[xi]);
        const double g = gout(0, 0) / static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            gx(i, 0) += g * (sigmoid(nodes[xi].val()(i, 0)) - target);
        }
    };
    return push(std::move(n));
}

Var Tape::cosine_loss(Var y_true, Var y_hat) {
    const Node& na = node(y_true);
    const Node& nb = node(y_hat);
    require_same_shape("cosine_loss", na.val(), nb.val());
    const std::size_t rows = na.val().rows();
    const std::size_t cols = na.val().cols();
    if (rows == 0) {
        throw DimensionError("cosine_loss: empty batch");
    }
    std::vector<double> dots(rows);
    std::vector<double> norm_a(rows);
    std::vector<double> norm_b(rows);
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double d = 0.0;
        double aa = 0.0;
        double bb = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double a = na.val()(i, j);
            const double b = nb.val()(i, j);
            d += a * b;
            aa += a * a;
            bb += b * b;
        }
        norm_a[i] = std::sqrt(aa);
        norm_b[i] = std::sqrt(bb);
        if (!(norm_a[i] > 0.0)) {
            throw DegenerateInputError("cosine_loss: target row " + std::to_string(i) + " has zero norm");
        }
        if (!(norm_b[i] > kCosineEps)) {
            throw DegenerateInputError("cosine_loss: prediction row " + std::to_string(i) +
                                       " has norm below 1e-12");
        }
        dots[i] = d;
        const double cosine = std::clamp(d / (norm_a[i] * norm_b[i]), -1.0, 1.0);
        total += 1.0 - cosine;
    }
    Node n;
    n.op = "cosine_loss";
    n.owned = Tensor2(1, 1, total / static_cast<double>(rows));
    n.requires_grad = na.requires_grad || nb.requires_grad;
    const auto ai = y_true.index;
    const auto bi = y_hat.index;
    n.backprop = [ai, bi, rows, cols, dots = std::move(dots), norm_a = std::move(norm_a),
                  norm_b = std::move(norm_b)](std::vector<Node>& nodes, const Tensor2& gout) {
        const double g = gout(0, 0) / static_cast<double>(rows);
        // d(1 - cos)/db = -(a / (|a||b|) - (a.b) b / (|a| |b|^3)), symmetric in a and b.
        auto accumulate = [&](std::uint32_t self, std::uint32_t other, const std::vector<double>& n_self,
                              const std::vector<double>& n_other) {
            if (!nodes[self].requires_grad) {
                return;
            }
            Tensor2& gs = grad_target(nodes[self]);
            const Tensor2& vs = nodes[self].val();
            const Tensor2& vo = nodes[other].val();
            for (std::size_t i = 0; i < rows; ++i) {
                const double inv = 1.0 / (n_self[i] * n_other[i]);
                const double proj = dots[i] / (n_self[i] * n_self[i] * n_self[i] * n_other[i]);
                for (std::size_t j = 0; j < cols; ++j) {
                    gs(i, j) += -g * (vo(i, j) * inv - vs(i, j) * proj);
                }
            }
        };
        accumulate(bi, ai, norm_b, norm_a);
        accumulate(ai, bi, norm_a, norm_b);
    };
    return push(std::move(n));
}

void Tape::backward(Var loss) {
    Node& root = node(loss);
    if (backward_done_) {
        throw TapeError("backward called twice on the same recording; clear() the tape first");
    }
    if (root.val().rows() != 1 || root.val().cols() != 1) {
        throw DimensionError("backward: loss must be a 1x1 scalar, got " + root.val().shape_string());
    }
    backward_done_ = true;
    if (!root.requires_grad) {
        return;
    }
    grad_target(root)(0, 0) += 1.0;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backprop || n.grad.empty()) {
            continue;
        }
        n.backprop(nodes_, n.grad);
    }
}

void Tape::clear() {
    nodes_.clear();
    ++generation_;
    backward_done_ = false;
}

const Tensor2& Tape::value(Var v) const { return node(v).val(); }

const Tensor2& Tape::grad(Var v) const { return node(v).grad; }

double Tape::scalar(Var v) const {
    const Tensor2& t = node(v).val();
    if (t.rows() != 1 || t.cols() != 1) {
        throw DimensionError("scalar: expected 1x1, got " + t.shape_string());
    }
    return t(0, 0);
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

} // namespace csft
