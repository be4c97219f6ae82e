#include "csft/data.hpp"

#include <algorithm>
#include <numeric>

#include "csft/error.hpp"
#include "csft/rng.hpp"

namespace csft {

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.below(i)]);
    }
}

} // namespace

std::size_t floor_budget(std::size_t n_train, std::size_t num_classes) {
    const std::size_t base = 10 % num_classes == 0 ? 10 : num_classes;
    return std::min(base, n_train);
}

LabelBudget label_ladder(std::size_t n_train, std::size_t num_classes, std::uint64_t seed) {
    if (num_classes == 0) {
        throw ParameterError("label_ladder: need at least one class");
    }
    if (n_train < num_classes) {
        throw ParameterError("label_ladder: " + std::to_string(n_train) + " training rows cannot cover " +
                             std::to_string(num_classes) + " classes");
    }
    const std::size_t floor = floor_budget(n_train, num_classes);
    LabelBudget out;
    out.seed = seed;
    out.ladder.push_back(n_train);
    std::size_t divisor = 1;
    for (int k = 1; k <= 5; ++k) {
        divisor *= 5;
        const std::size_t v = n_train / divisor;
        if (v > floor && v < out.ladder.back()) {
            out.ladder.push_back(v);
        }
    }
    if (floor < out.ladder.back()) {
        out.ladder.push_back(floor);
    }
    return out;
}

LabeledSplit select_labeled(const EmbeddingDataset& train, std::size_t budget, std::uint64_t seed) {
    const std::size_t k = train.num_classes;
    if (budget == 0) {
        throw ParameterError("select_labeled: budget must be positive");
    }
    if (budget > train.size()) {
        throw ParameterError("select_labeled: budget " + std::to_string(budget) + " exceeds the " +
                             std::to_string(train.size()) + " training rows");
    }
    if (k == 0) {
        throw ParameterError("select_labeled: dataset declares zero classes");
    }
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train.labels[i] != kUnlabeled) {
            by_class[static_cast<std::size_t>(train.labels[i])].push_back(i);
        }
    }
    LabeledSplit split;
    Rng rng(seed, Stream::Selection);
    std::string short_classes;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t quota = budget / k + (c < budget % k ? 1 : 0);
        auto& rows = by_class[c];
        if (rows.size() < quota) {
            short_classes += (short_classes.empty() ? "" : ", ") + std::string("class ") + std::to_string(c) +
                             " has " + std::to_string(rows.size()) + " < " + std::to_string(quota);
            continue;
        }
        shuffle(rows, rng);
        split.paired.insert(split.paired.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota));
    }
    if (!short_classes.empty()) {
        throw StratificationError("select_labeled: budget " + std::to_string(budget) +
                                  " cannot be stratified: " + short_classes);
    }
    std::sort(split.paired.begin(), split.paired.end());
    split.unpaired.resize(train.size());
    std::iota(split.unpaired.begin(), split.unpaired.end(), std::size_t{0});
    return split;
}

BatchStream::BatchStream(std::vector<std::size_t> view, std::size_t batch_size, std::uint64_t seed,
                         BatchMode mode, Stream stream)
    : view_(std::move(view)), batch_size_(batch_size), seed_(seed), stream_(stream), mode_(mode) {
    if (view_.empty()) {
        throw ParameterError("batches: view is empty");
    }
    if (batch_size_ == 0) {
        throw ParameterError("batches: batch size must be positive");
    }
    shuffle_for_epoch();
}

void BatchStream::shuffle_for_epoch() {
    order_ = view_;
    Rng rng(seed_ ^ (0x9e3779b97f4a7c15ULL * (epoch_ + 1)), stream_);
    shuffle(order_, rng);
}

Batch BatchStream::next() {
    Batch b;
    b.epoch = epoch_;
    if (mode_ == BatchMode::Partition) {
        if (position_ >= order_.size()) {
            ++epoch_;
            position_ = 0;
            shuffle_for_epoch();
            b.epoch = epoch_;
        }
        const std::size_t end = std::min(order_.size(), position_ + batch_size_);
        b.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(position_),
                         order_.begin() + static_cast<std::ptrdiff_t>(end));
        position_ = end;
        return b;
    }
    while (b.indices.size() < batch_size_) {
        if (position_ >= order_.size()) {
            ++epoch_;
            position_ = 0;
            shuffle_for_epoch();
            if (!b.indices.empty()) {
                b.wrapped = true;
            } else {
                b.epoch = epoch_;
            }
        }
        b.indices.push_back(order_[position_++]);
    }
    return b;
}

void BatchStream::restore(const State& s) {
    epoch_ = s.epoch;
    position_ = s.position;
    shuffle_for_epoch();
}

std::vector<Batch> epoch_batches(std::vector<std::size_t> view, std::size_t batch_size, std::uint64_t seed) {
    BatchStream stream(std::move(view), batch_size, seed, BatchMode::Partition);
    std::vector<Batch> out;
    std::size_t covered = 0;
    const std::size_t total = stream.view().size();
    while (covered < total) {
        out.push_back(stream.next());
        covered += out.back().indices.size();
    }
    return out;
}

} // namespace csft
