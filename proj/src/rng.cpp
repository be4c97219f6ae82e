#include "csft/rng.hpp"

#include <cmath>
#include <numbers>

namespace csft {

namespace {

std::uint64_t mix64(std::uint64_t z) noexcept {
    // SplitMix64 finalizer.
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t Rng::next_u64() noexcept {
    const std::uint64_t key = mix64(seed_ ^ mix64(stream_ + 0x9e3779b97f4a7c15ULL));
    return mix64(key + 0x9e3779b97f4a7c15ULL * ++counter_);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

void Rng::restore(const State& s) noexcept {
    seed_ = s.seed;
    stream_ = s.stream;
    counter_ = s.counter;
    has_spare_ = s.has_spare;
    spare_ = s.spare;
}

} // namespace csft
