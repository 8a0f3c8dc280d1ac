#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffoptics/ridge.hpp"

namespace ffo {

// Reference numbers from the published hardware experiment, reported verbatim
// next to this implementation's own measurements.
struct PublishedRow {
    double accuracy_pct;
    long params;
    const char* flops;
};

const PublishedRow* published_row(const std::string& arch);

struct Report {
    std::string arch;
    std::string eval_split;  // set when the report covers a single split
    std::uint64_t config_hash = 0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    Metrics eval_metrics;  // metrics of the evaluated set (test split on full runs)
    long trainable_params = 0;
    long flops_per_sample = 0;
    double best_alpha = 0.0;  // 0 when the run has no ridge stage
    std::vector<SweepPoint> sweep;
    std::vector<double> goodness_gaps;  // per trained layer: mean pos - mean neg
    long transform_calls_train = 0;
    long transform_calls_readout = 0;
    double wall_seconds = 0.0;
};

std::string report_json(const Report& r);
std::string sweep_csv(const std::vector<SweepPoint>& points);
std::string confusion_csv(const Metrics& m);

// Writes the JSON report plus <stem>_sweep.csv / <stem>_confusion.csv.
void write_report_files(const Report& r, const std::string& json_path);

}  // namespace ffo
