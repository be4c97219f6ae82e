#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "csft/components.hpp"
#include "csft/data.hpp"
#include "csft/embx.hpp"
#include "csft/objectives.hpp"
#include "csft/optimizer.hpp"
#include "csft/rng.hpp"

namespace csft {

enum class Phase { Supervised, Unsupervised };
const char* phase_name(Phase p) noexcept;

enum class Method { Supervised, SemiSupervised };
// "supervised" / "semi-supervised"
const char* method_name(Method m) noexcept;
// Accepts the long names and the short forms "sup" / "semi".
Method parse_method(const std::string& text);

struct TrainingSchedule {
    std::size_t warmstart_supervised_steps = 20;
    std::size_t supervised_per_unsupervised = 2;
    // Rotates the [S,S,U] pattern that follows the warmstart. 0 puts the
    // first unsupervised step at warmstart + ratio + 1.
    std::size_t phase_offset = 0;
    std::size_t total_steps = 1500;
    std::size_t batch_supervised = 32;
    std::size_t batch_unsupervised = 512;
    std::size_t eval_every = 50;
    // Stop after this many evaluations without a new best. 0 disables.
    std::size_t patience = 20;
    // Within an unsupervised step, update the discriminators before the
    // components.
    bool discriminator_first = true;

    void validate() const;
    friend bool operator==(const TrainingSchedule&, const TrainingSchedule&) = default;
};

// Phase of 1-based `step`.
Phase plan(std::uint64_t step, const TrainingSchedule& schedule);

struct TrainConfig {
    TrainingSchedule schedule;
    AdamWConfig component_optimizer;
    AdamWConfig discriminator_optimizer;
    LossWeights weights;
    ArchitectureConfig architecture;
    Method method = Method::SemiSupervised;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StepRecord {
    std::uint64_t step = 0;
    Phase phase = Phase::Supervised;
    double lr = 0.0;
    LossBreakdown losses;
};

struct EvalRecord {
    std::uint64_t step = 0;
    double error = 0.0;
};

struct TrainReport {
    std::string method;
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps;
    std::vector<EvalRecord> evals;
    double initial_error = 1.0;
    double best_error = 1.0;
    std::uint64_t best_step = 0;
    std::uint64_t steps_run = 0;
    bool stopped_early = false;
    bool diverged = false;
    std::string divergence;
    // Not part of the deterministic JSON form.
    double wall_clock_seconds = 0.0;
};

// Deterministic JSON (no wall-clock) unless include_timing is set.
std::string report_to_json(const TrainReport& report, bool include_timing = false);
TrainReport report_from_json(const std::string& text);

struct NamedTensor {
    std::string name;
    Tensor2 value;
};

struct OptimizerState {
    std::uint64_t global_step = 0;
    std::vector<MomentState> moments;
};

struct CheckpointState {
    std::uint32_t cls_dim = 0;
    std::uint32_t num_classes = 0;
    ArchitectureConfig architecture;
    std::vector<NamedTensor> parameters;
    OptimizerState component_optimizer;
    OptimizerState discriminator_optimizer;
    std::uint64_t step = 0;
    Rng::State dropout_rng;
    Rng::State prior_rng;
    BatchStream::State paired_stream;
    BatchStream::State unpaired_stream;
    double best_error = 1.0;
    std::uint64_t evals_since_best = 0;
    // Report accumulated so far, as deterministic JSON.
    std::string report_json;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "SFCK" | u32 version | u64 payload length | payload | u32 CRC32 of every
// preceding byte. Little-endian throughout.
std::string encode_checkpoint(const CheckpointState& state);
CheckpointState decode_checkpoint(std::span<const unsigned char> bytes);
void save_checkpoint(const CheckpointState& state, const std::filesystem::path& path);
CheckpointState load_checkpoint(const std::filesystem::path& path);
// Rebuilds the bundle a checkpoint was taken from.
std::unique_ptr<ComponentBundle> bundle_from_checkpoint(const CheckpointState& state);

// One training run: a bundle, two optimizers and the data streams.
// Holds references to the datasets, which must outlive it.
class Trainer {
public:
    Trainer(const EmbeddingDataset& train, const EmbeddingDataset& test, const LabeledSplit& split,
            std::size_t budget, TrainConfig config);

    // Runs one scheduled step. Returns false once the run is over (step
    // budget spent, early stop, or divergence).
    bool step();
    // Steps until the run is over or `until_step` is reached (0 = no limit).
    void run(std::uint64_t until_step = 0);
    bool finished() const noexcept;

    double evaluate();

    LossBreakdown supervised_step();
    LossBreakdown unsupervised_step();

    CheckpointState checkpoint() const;
    // Throws DimensionError when the checkpoint's dimensions differ.
    void restore(const CheckpointState& state);

    std::uint64_t current_step() const noexcept { return step_; }
    const TrainReport& report() const noexcept { return report_; }
    TrainReport& report() noexcept { return report_; }
    ComponentBundle& bundle() noexcept { return *bundle_; }
    const TrainConfig& config() const noexcept { return config_; }
    // Moves the bundle out; the trainer is unusable afterwards.
    std::unique_ptr<ComponentBundle> release_bundle() noexcept { return std::move(bundle_); }

private:
    void record_eval();

    const EmbeddingDataset& train_;
    TrainConfig config_;
    Tensor2 test_rows_;
    std::vector<int> test_labels_;
    std::unique_ptr<ComponentBundle> bundle_;
    AdamW component_opt_;
    AdamW discriminator_opt_;
    PriorSet priors_;
    Rng dropout_rng_;
    Rng prior_rng_;
    BatchStream paired_;
    BatchStream unpaired_;
    std::uint64_t step_ = 0;
    std::uint64_t evals_since_best_ = 0;
    TrainReport report_;
};

struct FitResult {
    std::unique_ptr<ComponentBundle> bundle;
    TrainReport report;
};

// Selects `budget` labeled rows of `train` under config.seed and trains.
FitResult fit(const EmbeddingDataset& train, const EmbeddingDataset& test, std::size_t budget,
              const TrainConfig& config);

} // namespace csft
