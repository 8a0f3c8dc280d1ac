#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ffoptics/checkpoint.hpp"
#include "ffoptics/config.hpp"
#include "ffoptics/dataset.hpp"
#include "ffoptics/ffnet.hpp"
#include "ffoptics/fiber.hpp"
#include "ffoptics/report.hpp"

namespace ffo {

// 2 * kernel_taps * output_pixels per conv layer + 2 * D * 10 for the readout
long estimate_flops(int conv_layers, long readout_dim);
long estimate_flops(const ExperimentConfig& cfg);

struct PreparedSplits {
    Mat train, val, test;  // padded canvases, rows = samples
    std::vector<int> y_train, y_val, y_test;
};

PreparedSplits prepare_splits(const ExperimentConfig& cfg);

// Disk-backed per-stage representation store. Every file records the hash of
// the parameters that produced it; loading with a different upstream state
// raises CacheStale.
class StageCache {
public:
    StageCache(std::string dir, std::uint64_t config_hash);

    std::optional<Mat> load(int stage, const std::string& stream, std::uint64_t parent_hash) const;
    void store(int stage, const std::string& stream, std::uint64_t parent_hash, const Mat& reps) const;

    const std::string& dir() const { return dir_; }

private:
    std::string path(int stage, const std::string& stream) const;
    std::string dir_;
    std::uint64_t cfg_hash_;
};

// hash pinning the frozen state upstream of a stage: config + layers 0..stage-1
std::uint64_t layer_chain_hash(std::uint64_t config_hash, const std::vector<FFLayerParams>& layers,
                               int stage);

// rep -> hook(l2_normalize(relu(conv(rep)))) for a whole batch
Mat advance_stage(const Mat& reps, const FFLayerParams& layer, const ConvPlan& plan,
                  const OpticalTransform* optics);

Mat embed_batch(const Mat& canvases, const std::vector<int>& labels, Polarity polarity, Rng& rng);

struct RunResult {
    Report report;
    Checkpoint checkpoint;
};

RunResult run_experiment(const ExperimentConfig& cfg);

// Concatenated tapped stage representations of neutral-marked samples.
// `stream` names the split inside the cache ("train", "val", "test");
// pass cache = nullptr to bypass persistence.
Mat readout_features(const ExperimentConfig& cfg, const std::vector<FFLayerParams>& layers,
                     const ConvPlan& plan, const OpticalTransform* optics, const Mat& canvases,
                     const StageCache* cache, const std::string& stream);

std::uint64_t fiber_cache_key(const ExperimentConfig& cfg);

// nullptr unless the configuration calls for the fiber hook
std::unique_ptr<OpticalTransform> make_optics(const ExperimentConfig& cfg);

// config hash over the fields that determine stage representations (the
// readout alpha grid and tap selection are excluded)
std::uint64_t feature_hash(const ExperimentConfig& cfg);

StageCache open_stage_cache(const ExperimentConfig& cfg);

}  // namespace ffo
