#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ffoptics/config.hpp"
#include "ffoptics/ffnet.hpp"
#include "ffoptics/ridge.hpp"

namespace ffo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    ExperimentConfig config;
    std::vector<FFLayerParams> layers;
    std::optional<Mat> fc_weights;  // EBP readout
    std::optional<Vec> fc_bias;
    std::optional<RidgeModel> ridge;
    std::uint64_t fiber_cache_key = 0;

    long trainable_params() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ffo
