#include <cmath>
#include <vector>

#include "csft/kernel/kernels.hpp"

namespace csft::kernel::scalar {

namespace {

void gemm(const GemmArgs& g) {
    // Materialize op(B) row-major so the inner loop is unit stride.
    std::vector<double> bt;
    const double* b = g.b;
    std::size_t ldb = g.ldb;
    if (g.trans_b == Trans::Yes) {
        bt.resize(g.k * g.n);
        for (std::size_t p = 0; p < g.k; ++p) {
            for (std::size_t j = 0; j < g.n; ++j) {
                bt[p * g.n + j] = g.b[j * g.ldb + p];
            }
        }
        b = bt.data();
        ldb = g.n;
    }
    for (std::size_t i = 0; i < g.m; ++i) {
        double* crow = g.c + i * g.ldc;
        if (!g.accumulate) {
            for (std::size_t j = 0; j < g.n; ++j) {
                crow[j] = 0.0;
            }
        }
        for (std::size_t p = 0; p < g.k; ++p) {
            const double aip = g.trans_a == Trans::Yes ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < g.n; ++j) {
                crow[j] += aip * brow[j];
            }
        }
    }
}

void leaky_relu_forward(const double* x, double* out, std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
    }
}

void leaky_relu_backward(const double* x, const double* gout, double* gin, std::size_t n,
                         double slope) {
    for (std::size_t i = 0; i < n; ++i) {
        gin[i] += x[i] > 0.0 ? gout[i] : gout[i] * slope;
    }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void column_sum(const double* g, std::size_t rows, std::size_t cols, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = g + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            out[j] += row[j];
        }
    }
}

void adamw(double* theta, const double* grad, double* m, double* v, std::size_t n,
           const AdamWArgs& a) {
    const double one_minus_b1 = 1.0 - a.beta1;
    const double one_minus_b2 = 1.0 - a.beta2;
    const double keep = 1.0 - a.lr * a.weight_decay;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = a.beta1 * m[i] + one_minus_b1 * g;
        v[i] = a.beta2 * v[i] + one_minus_b2 * (g * g);
        const double m_hat = m[i] / a.bias_correction1;
        const double v_hat = v[i] / a.bias_correction2;
        const double update = a.lr * (m_hat / (std::sqrt(v_hat) + a.eps));
        theta[i] = theta[i] * keep - update;
    }
}

} // namespace

const KernelTable& table() noexcept {
    static const KernelTable t{&gemm, &leaky_relu_forward, &leaky_relu_backward, &axpy, &column_sum,
                               &adamw};
    return t;
}

} // namespace csft::kernel::scalar
