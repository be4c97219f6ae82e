#pragma once

#include <cstdint>

namespace csft {

// Well-known stream ids so that every consumer draws from its own sequence.
enum class Stream : std::uint64_t {
    Init = 1,
    Dropout = 2,
    Prior = 3,
    PairedOrder = 4,
    UnpairedOrder = 5,
    Selection = 6,
    Synthetic = 7,
    Test = 99,
};

// Counter-based generator: output i is a pure function of (seed, stream, i),
// so the complete state is two words and a counter and trivially checkpointable.
class Rng {
public:
    Rng() = default;
    Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
    Rng(std::uint64_t seed, Stream stream) : Rng(seed, static_cast<std::uint64_t>(stream)) {}

    std::uint64_t next_u64() noexcept;
    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    // Standard normal (Box-Muller, both variates are used).
    double normal() noexcept;
    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t counter() const noexcept { return counter_; }

    struct State {
        std::uint64_t seed = 0;
        std::uint64_t stream = 0;
        std::uint64_t counter = 0;
        bool has_spare = false;
        double spare = 0.0;
        friend bool operator==(const State&, const State&) = default;
    };
    State state() const noexcept { return {seed_, stream_, counter_, has_spare_, spare_}; }
    void restore(const State& s) noexcept;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace csft
