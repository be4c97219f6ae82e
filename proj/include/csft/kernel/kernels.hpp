#pragma once

// Data-parallel inner loops behind the autodiff primitives.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant. The variant is picked once at startup from CPUID and can be
// pinned with the CSFT_SIMD environment variable (`scalar` or `avx2`) or
// with set_isa() from tests. Elementwise kernels produce bit-identical
// results across variants; gemm differs only by FMA rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace csft::kernel {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;
Isa active_isa() noexcept;
// Throws ParameterError when the requested variant is not available here.
void set_isa(Isa isa);

enum class Trans { No, Yes };

// C = op(A) * op(B)  (accumulate == false)
// C += op(A) * op(B) (accumulate == true)
// op(A) is m x k, op(B) is k x n, C is m x n; all row-major with leading dims.
struct GemmArgs {
    Trans trans_a = Trans::No;
    Trans trans_b = Trans::No;
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t k = 0;
    const double* a = nullptr;
    std::size_t lda = 0;
    const double* b = nullptr;
    std::size_t ldb = 0;
    double* c = nullptr;
    std::size_t ldc = 0;
    bool accumulate = false;
};

struct AdamWArgs {
    double lr = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    // 1 - beta^t for the current step.
    double bias_correction1 = 1.0;
    double bias_correction2 = 1.0;
};

struct KernelTable {
    void (*gemm)(const GemmArgs&);
    void (*leaky_relu_forward)(const double* x, double* out, std::size_t n, double slope);
    // gin += gout * (x > 0 ? 1 : slope)
    void (*leaky_relu_backward)(const double* x, const double* gout, double* gin, std::size_t n,
                                double slope);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out[j] += sum_i g[i * cols + j]
    void (*column_sum)(const double* g, std::size_t rows, std::size_t cols, double* out);
    void (*adamw)(double* theta, const double* grad, double* m, double* v, std::size_t n,
                  const AdamWArgs& args);
};

const KernelTable& table(Isa isa);
const KernelTable& active() noexcept;

inline void gemm(const GemmArgs& args) { active().gemm(args); }

namespace scalar {
const KernelTable& table() noexcept;
}
#if defined(CSFT_HAVE_AVX2)
namespace avx2 {
const KernelTable& table() noexcept;
}
#endif

} // namespace csft::kernel
