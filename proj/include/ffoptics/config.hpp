#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ffo {

enum class Arch { ebp2, ffa3, ffa2_optics };

std::string arch_name(Arch a);
Arch parse_arch(const std::string& name);

enum class HookKind { fiber, identity };

struct ExperimentConfig {
    Arch arch = Arch::ffa3;

    std::uint64_t split_seed = 7;
    std::uint64_t init_seed = 1;
    std::uint64_t disorder_seed = 2025;
    std::uint64_t negatives_seed = 1234;

    int n_train = 4000;
    int n_val = 1000;
    int n_test = 1000;

    double theta = 2.0;
    double lr = 1e-3;
    int batch = 64;
    int epochs = 60;
    int dilation = 4;

    int optics_modes = 45;
    int optics_grid = 64;
    double optics_dz = 1e-3;
    double optics_gamma_knob = 1.0;
    double optics_power = 1.0;
    double optics_waist = 0.0;  // 0 = auto
    double optics_coupling = 0.5;  // in units of the group spacing
    double optics_prune = 1e-3;
    HookKind optics_hook = HookKind::fiber;

    std::vector<double> alpha_grid;  // empty = default 13-point grid
    std::vector<int> taps;           // empty = arch default
    std::string mnist_dir = "data/mnist";

    int layer_count() const;
    std::vector<int> effective_taps() const;
    std::vector<double> effective_alphas() const;
};

// flat key=value text, '#' comments; unknown keys are errors
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// canonical serialization: every key, sorted, one per line
std::string config_text(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// applies one "key=value" assignment (CLI flag mirror)
void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

}  // namespace ffo
