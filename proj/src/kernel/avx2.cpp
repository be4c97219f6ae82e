// AVX2/FMA kernels. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here may run before dispatch confirms CPU support.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "csft/kernel/kernels.hpp"

namespace csft::kernel::avx2 {

namespace {

constexpr std::size_t kMR = 6;
constexpr std::size_t kNR = 8;
constexpr std::size_t kKC = 256;
constexpr std::size_t kMC = 96;
constexpr std::size_t kNC = 1024;

inline double load_a(const GemmArgs& g, std::size_t i, std::size_t p) {
    return g.trans_a == Trans::Yes ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
}

// Packs rows [i0, i0+mc) x depth [p0, p0+kc) of op(A) into kMR-row panels,
// laid out panel-major then depth-major; rows beyond m are zero.
void pack_a(const GemmArgs& g, std::size_t i0, std::size_t mc, std::size_t p0, std::size_t kc,
            double* dst) {
    for (std::size_t ir = 0; ir < mc; ir += kMR) {
        const std::size_t rows = std::min(kMR, mc - ir);
        if (g.trans_a == Trans::No) {
            for (std::size_t p = 0; p < kc; ++p) {
                std::size_t r = 0;
                for (; r < rows; ++r) {
                    dst[p * kMR + r] = g.a[(i0 + ir + r) * g.lda + p0 + p];
                }
                for (; r < kMR; ++r) {
                    dst[p * kMR + r] = 0.0;
                }
            }
        } else {
            for (std::size_t p = 0; p < kc; ++p) {
                const double* src = g.a + (p0 + p) * g.lda + i0 + ir;
                std::size_t r = 0;
                for (; r < rows; ++r) {
                    dst[p * kMR + r] = src[r];
                }
                for (; r < kMR; ++r) {
                    dst[p * kMR + r] = 0.0;
                }
            }
        }
        dst += kc * kMR;
    }
}

// Packs depth [p0, p0+kc) x cols [j0, j0+nc) of op(B) into kNR-column panels.
void pack_b(const GemmArgs& g, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t nc,
            double* dst) {
    for (std::size_t jr = 0; jr < nc; jr += kNR) {
        const std::size_t cols = std::min(kNR, nc - jr);
        if (g.trans_b == Trans::No) {
            for (std::size_t p = 0; p < kc; ++p) {
                const double* src = g.b + (p0 + p) * g.ldb + j0 + jr;
                if (cols == kNR) {
                    _mm256_storeu_pd(dst + p * kNR, _mm256_loadu_pd(src));
                    _mm256_storeu_pd(dst + p * kNR + 4, _mm256_loadu_pd(src + 4));
                } else {
                    std::size_t c = 0;
                    for (; c < cols; ++c) {
                        dst[p * kNR + c] = src[c];
                    }
                    for (; c < kNR; ++c) {
                        dst[p * kNR + c] = 0.0;
                    }
                }
            }
        } else {
            for (std::size_t p = 0; p < kc; ++p) {
                std::size_t c = 0;
                for (; c < cols; ++c) {
                    dst[p * kNR + c] = g.b[(j0 + jr + c) * g.ldb + p0 + p];
                }
                for (; c < kNR; ++c) {
                    dst[p * kNR + c] = 0.0;
                }
            }
        }
        dst += kc * kNR;
    }
}

// 6x8 register tile. `overwrite` stores instead of accumulating into C.
void micro_kernel(std::size_t kc, const double* pa, const double* pb, double* c, std::size_t ldc,
                  std::size_t rows, std::size_t cols, bool overwrite) {
    __m256d acc[kMR][2];
    for (std::size_t r = 0; r < kMR; ++r) {
        acc[r][0] = _mm256_setzero_pd();
        acc[r][1] = _mm256_setzero_pd();
    }
    for (std::size_t p = 0; p < kc; ++p) {
        const __m256d b0 = _mm256_loadu_pd(pb);
        const __m256d b1 = _mm256_loadu_pd(pb + 4);
        for (std::size_t r = 0; r < kMR; ++r) {
            const __m256d a = _mm256_broadcast_sd(pa + r);
            acc[r][0] = _mm256_fmadd_pd(a, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_pd(a, b1, acc[r][1]);
        }
        pa += kMR;
        pb += kNR;
    }
    if (rows == kMR && cols == kNR) {
        for (std::size_t r = 0; r < kMR; ++r) {
            double* crow = c + r * ldc;
            if (overwrite) {
                _mm256_storeu_pd(crow, acc[r][0]);
                _mm256_storeu_pd(crow + 4, acc[r][1]);
            } else {
                _mm256_storeu_pd(crow, _mm256_add_pd(_mm256_loadu_pd(crow), acc[r][0]));
                _mm256_storeu_pd(crow + 4, _mm256_add_pd(_mm256_loadu_pd(crow + 4), acc[r][1]));
            }
        }
        return;
    }
    alignas(32) double tile[kMR * kNR];
    for (std::size_t r = 0; r < kMR; ++r) {
        _mm256_store_pd(tile + r * kNR, acc[r][0]);
        _mm256_store_pd(tile + r * kNR + 4, acc[r][1]);
    }
    for (std::size_t r = 0; r < rows; ++r) {
        double* crow = c + r * ldc;
        for (std::size_t j = 0; j < cols; ++j) {
            crow[j] = overwrite ? tile[r * kNR + j] : crow[j] + tile[r * kNR + j];
        }
    }
}

void gemm(const GemmArgs& g) {
    if (g.m == 0 || g.n == 0) {
        return;
    }
    if (g.k == 0) {
        if (!g.accumulate) {
            for (std::size_t i = 0; i < g.m; ++i) {
                std::fill_n(g.c + i * g.ldc, g.n, 0.0);
            }
        }
        return;
    }
    thread_local std::vector<double> packed_a;
    thread_local std::vector<double> packed_b;
    packed_a.resize(kMC * kKC);
    packed_b.resize(kKC * (kNC + kNR));

    for (std::size_t jc = 0; jc < g.n; jc += kNC) {
        const std::size_t nc = std::min(kNC, g.n - jc);
        for (std::size_t pc = 0; pc < g.k; pc += kKC) {
            const std::size_t kc = std::min(kKC, g.k - pc);
            const bool overwrite = pc == 0 && !g.accumulate;
            pack_b(g, pc, kc, jc, nc, packed_b.data());
            for (std::size_t ic = 0; ic < g.m; ic += kMC) {
                const std::size_t mc = std::min(kMC, g.m - ic);
                pack_a(g, ic, mc, pc, kc, packed_a.data());
                for (std::size_t jr = 0; jr < nc; jr += kNR) {
                    const std::size_t cols = std::min(kNR, nc - jr);
                    const double* pb = packed_b.data() + (jr / kNR) * kc * kNR;
                    for (std::size_t ir = 0; ir < mc; ir += kMR) {
                        const std::size_t rows = std::min(kMR, mc - ir);
                        const double* pa = packed_a.data() + (ir / kMR) * kc * kMR;
                        double* c = g.c + (ic + ir) * g.ldc + jc + jr;
                        micro_kernel(kc, pa, pb, c, g.ldc, rows, cols, overwrite);
                    }
                }
            }
        }
    }
}

void leaky_relu_forward(const double* x, double* out, std::size_t n, double slope) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d s = _mm256_set1_pd(slope);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d pos = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(_mm256_mul_pd(s, v), v, pos));
    }
    for (; i < n; ++i) {
        out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
    }
}

void leaky_relu_backward(const double* x, const double* gout, double* gin, std::size_t n,
                         double slope) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d s = _mm256_set1_pd(slope);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d pos = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d go = _mm256_loadu_pd(gout + i);
        const __m256d local = _mm256_blendv_pd(_mm256_mul_pd(go, s), go, pos);
        _mm256_storeu_pd(gin + i, _mm256_add_pd(_mm256_loadu_pd(gin + i), local));
    }
    for (; i < n; ++i) {
        gin[i] += x[i] > 0.0 ? gout[i] : gout[i] * slope;
    }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(a, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void column_sum(const double* g, std::size_t rows, std::size_t cols, double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = g + r * cols;
        std::size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            _mm256_storeu_pd(out + j, _mm256_add_pd(_mm256_loadu_pd(out + j), _mm256_loadu_pd(row + j)));
        }
        for (; j < cols; ++j) {
            out[j] += row[j];
        }
    }
}

void adamw(double* theta, const double* grad, double* m, double* v, std::size_t n,
           const AdamWArgs& a) {
    const double keep = 1.0 - a.lr * a.weight_decay;
    const __m256d b1 = _mm256_set1_pd(a.beta1);
    const __m256d b2 = _mm256_set1_pd(a.beta2);
    const __m256d omb1 = _mm256_set1_pd(1.0 - a.beta1);
    const __m256d omb2 = _mm256_set1_pd(1.0 - a.beta2);
    const __m256d bc1 = _mm256_set1_pd(a.bias_correction1);
    const __m256d bc2 = _mm256_set1_pd(a.bias_correction2);
    const __m256d lr = _mm256_set1_pd(a.lr);
    const __m256d eps = _mm256_set1_pd(a.eps);
    const __m256d keepv = _mm256_set1_pd(keep);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, g));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d m_hat = _mm256_div_pd(mi, bc1);
        const __m256d v_hat = _mm256_div_pd(vi, bc2);
        const __m256d update =
            _mm256_mul_pd(lr, _mm256_div_pd(m_hat, _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps)));
        const __m256d t = _mm256_loadu_pd(theta + i);
        _mm256_storeu_pd(theta + i, _mm256_sub_pd(_mm256_mul_pd(t, keepv), update));
    }
    const double one_minus_b1 = 1.0 - a.beta1;
    const double one_minus_b2 = 1.0 - a.beta2;
    for (; i < n; ++i) {
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

} // namespace csft::kernel::avx2
