#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "csft/embx.hpp"
#include "csft/rng.hpp"

namespace csft {

// Descending labeled-sample totals swept by an evaluation.
struct LabelBudget {
    std::vector<std::size_t> ladder;
    std::uint64_t seed = 0;
};

// {n} U {floor(n / 5^k) : k = 1..5, above the floor budget} U {floor budget},
// descending. The floor budget is 10 when K divides 10 and K otherwise,
// clipped to n. Throws ParameterError when n_train < K.
LabelBudget label_ladder(std::size_t n_train, std::size_t num_classes, std::uint64_t seed = 0);
std::size_t floor_budget(std::size_t n_train, std::size_t num_classes);

struct LabeledSplit {
    // Row indices of the paired (labeled) subset, ascending.
    std::vector<std::size_t> paired;
    // Every labeled-or-not training row; labels are not exposed to the
    // unsupervised side.
    std::vector<std::size_t> unpaired;
};

// Class-balanced pick: floor(budget / K) rows per class, the remainder going
// one each to the lowest class ids. Deterministic under `seed`.
// Throws StratificationError when a class is short of its quota.
LabeledSplit select_labeled(const EmbeddingDataset& train, std::size_t budget, std::uint64_t seed);

enum class BatchMode {
    // One shuffled pass per epoch; the final short batch is emitted.
    Partition,
    // Always full batches, continuing into the next shuffled epoch when the
    // view runs out. Used for paired views so supervised steps never starve.
    Wrap,
};

struct Batch {
    std::vector<std::size_t> indices;
    std::uint64_t epoch = 0;
    // True when the batch spans an epoch boundary (rows may repeat).
    bool wrapped = false;
};

// Deterministic shuffled batches over a fixed view of row indices.
class BatchStream {
public:
    BatchStream() = default;
    BatchStream(std::vector<std::size_t> view, std::size_t batch_size, std::uint64_t seed, BatchMode mode,
                Stream stream = Stream::PairedOrder);

    Batch next();

    struct State {
        std::uint64_t epoch = 0;
        std::size_t position = 0;
        friend bool operator==(const State&, const State&) = default;
    };
    State state() const noexcept { return {epoch_, position_}; }
    void restore(const State& s);

    const std::vector<std::size_t>& view() const noexcept { return view_; }
    std::size_t batch_size() const noexcept { return batch_size_; }

private:
    void shuffle_for_epoch();

    std::vector<std::size_t> view_;
    std::vector<std::size_t> order_;
    std::size_t batch_size_ = 0;
    std::uint64_t seed_ = 0;
    Stream stream_ = Stream::PairedOrder;
    BatchMode mode_ = BatchMode::Partition;
    std::uint64_t epoch_ = 0;
    std::size_t position_ = 0;
};

// All batches of a single epoch in Partition mode.
std::vector<Batch> epoch_batches(std::vector<std::size_t> view, std::size_t batch_size, std::uint64_t seed);

} // namespace csft
