#pragma once

#include <array>
#include <vector>

#include "ffoptics/linalg.hpp"

namespace ffo {

struct RidgeModel {
    Mat weights;       // D x 10
    Vec feature_mean;  // D
    Vec intercepts;    // 10
    double alpha = 0.0;
};

// Thin-SVD solve of the {-1,+1}-target ridge problem with centered features.
RidgeModel fit_ridge(const Mat& X, const std::vector<int>& labels, double alpha);

std::vector<int> predict(const RidgeModel& model, const Mat& X);

struct Metrics {
    double accuracy = 0.0;
    std::array<std::array<long, 10>, 10> confusion{};  // [true][pred]
};

Metrics evaluate(const std::vector<int>& pred, const std::vector<int>& truth);

struct SweepPoint {
    double alpha;
    double train_acc;
    double val_acc;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    double best_alpha = 0.0;
    RidgeModel best_model;
};

// Fits every alpha from one SVD of the centered training features; best =
// argmax validation accuracy, ties to the smaller alpha.
SweepResult sweep_regularization(const Mat& Xtr, const std::vector<int>& ytr, const Mat& Xval,
                                 const std::vector<int>& yval, const std::vector<double>& alphas);

std::vector<double> default_alpha_grid();

}  // namespace ffo
