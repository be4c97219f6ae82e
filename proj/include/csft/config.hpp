#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "csft/synthetic.hpp"
#include "csft/trainer.hpp"

namespace csft {

// Everything a CLI run can be configured with. Resolution order is
// defaults, then the config file, then command-line flags.
struct RunConfig {
    TrainConfig train;
    SyntheticSpec synthetic;
    std::size_t budget = 10;
    // Write a checkpoint every this many steps (0: only at the end).
    std::size_t checkpoint_every = 0;
    // auto | scalar | avx2
    std::string simd = "auto";
    std::size_t sweep_seeds = 1;
    std::size_t sweep_jobs = 1;
};

struct ConfigKey {
    std::string section;
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;

    std::string full_name() const { return section + "." + key; }
};

// Every configurable key, bound to `cfg`, in rendering order.
std::vector<ConfigKey> config_keys(RunConfig& cfg);

// Parses INI-style text:
//   [schedule]
//   total_steps = 800
// Unknown sections or keys and malformed values raise ParameterError.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
// Sets one "section.key" entry.
void set_config_value(RunConfig& cfg, const std::string& full_key, const std::string& value);

// The resolved configuration in the same INI form, every key present.
std::string render_config(const RunConfig& cfg);

// Applies the simd setting to the kernel dispatcher.
void apply_simd(const std::string& simd);

} // namespace csft
