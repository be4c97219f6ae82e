#include <atomic>
#include <cstdlib>
#include <string>

#include "csft/error.hpp"
#include "csft/kernel/kernels.hpp"

namespace csft::kernel {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(CSFT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect() noexcept {
    const bool avx2 = cpu_has_avx2();
    if (const char* env = std::getenv("CSFT_SIMD")) {
        const std::string want(env);
        if (want == "scalar") {
            return Isa::Scalar;
        }
        if (want == "avx2" && avx2) {
            return Isa::Avx2;
        }
    }
    return avx2 ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<const KernelTable*>& current() noexcept {
    static std::atomic<const KernelTable*> ptr{&table(detect())};
    return ptr;
}

} // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
    case Isa::Scalar:
        return "scalar";
    case Isa::Avx2:
        return "avx2";
    }
    return "unknown";
}

bool isa_available(Isa isa) noexcept {
    return isa == Isa::Scalar || (isa == Isa::Avx2 && cpu_has_avx2());
}

const KernelTable& table(Isa isa) {
    if (!isa_available(isa)) {
        throw ParameterError("kernel variant '" + std::string(isa_name(isa)) +
                             "' is not supported on this CPU");
    }
#if defined(CSFT_HAVE_AVX2)
    if (isa == Isa::Avx2) {
        return avx2::table();
    }
#endif
    return scalar::table();
}

Isa active_isa() noexcept {
#if defined(CSFT_HAVE_AVX2)
    if (current().load() == &avx2::table()) {
        return Isa::Avx2;
    }
#endif
    return Isa::Scalar;
}

void set_isa(Isa isa) { current().store(&table(isa)); }

const KernelTable& active() noexcept { return *current().load(); }

} // namespace csft::kernel
