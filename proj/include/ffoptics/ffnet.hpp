#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "ffoptics/common.hpp"
#include "ffoptics/linalg.hpp"
#include "ffoptics/rng.hpp"

namespace ffo {

struct FFLayerParams {
    std::array<double, 25> kernel{};  // 5x5 row-major
    double bias = 0.0;
    int dilation = 4;
    double theta = 2.0;
};

struct OptimConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 64;
    int epochs = 60;
};

// Adaptive-moment state for one parameter vector
struct AdamState {
    explicit AdamState(int n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
    Vec m, v;
    long t = 0;
    void step(Eigen::Ref<Vec> param, const Vec& grad, const OptimConfig& oc);
};

// Gather table for the dilated 5x5 convolution on a 32x32 canvas with zero
// padding: taps[j*25+t] is the input index feeding tap t of output j, or -1
// when the tap falls outside the canvas.
struct ConvPlan {
    explicit ConvPlan(int dilation);
    std::vector<int> taps;
    int dilation;
};

// out[j] = bias + sum_t K[t] * in[taps[j,t]]
void conv2d_dilated(const double* in, const FFLayerParams& p, const ConvPlan& plan, double* out);
Mat conv2d_dilated(const Mat& X, const FFLayerParams& p, const ConvPlan& plan);

// gradient of sum(G * out) wrt kernel and bias
void conv_param_grad(const Mat& X, const Mat& G, const ConvPlan& plan,
                     std::array<double, 25>& dK, double& db);
// gradient wrt the input map (transposed convolution = flipped-kernel conv)
Mat conv_input_grad(const Mat& G, const FFLayerParams& p, const ConvPlan& plan);

Mat relu(Mat z);

// vec / ||vec||_2 ; throws DegenerateNorm below 1e-12
Vec l2_normalize(const Vec& v);
Mat l2_normalize_rows(const Mat& X);

double sigmoid(double x);
double softplus(double x);

// sigma(sum_j y_j^2 - theta)
double goodness(const Vec& acts, double theta);

// softplus(theta - S_pos) + softplus(S_neg - theta)
double ff_pair_loss(const Vec& pos_acts, const Vec& neg_acts, double theta);

struct FFTrainStats {
    double mean_goodness_pos = 0.0;
    double mean_goodness_neg = 0.0;
    double final_loss = 0.0;
};

// Greedy layer-local training on cached paired batches. Rows of pos/neg are
// paired samples; rng drives init (when init=true) and epoch shuffling.
FFTrainStats train_ff_layer(FFLayerParams& layer, const Mat& pos, const Mat& neg,
                            const OptimConfig& oc, Rng& rng, const ConvPlan& plan,
                            bool init = true);

using TransformHook = std::function<Vec(const Vec&)>;

// Stage representations: [input, hook_0(l2n(relu(conv_0))), ...]
std::vector<Vec> forward_stack(const Vec& sample, const std::vector<FFLayerParams>& layers,
                               const std::vector<TransformHook>& hooks, const ConvPlan& plan);

// ---- EBP baseline: two dilated conv layers + joint FC softmax readout ----

struct EBPNet {
    FFLayerParams conv1, conv2;
    Mat fc_w;  // D x 10, D = 2048 (both stage maps concatenated)
    Vec fc_b;  // 10
};

EBPNet make_ebp_net(Rng& rng);

struct EBPBatchResult {
    double loss = 0.0;
    int correct = 0;
};

// forward+backward over one batch; grads returned through the args
EBPBatchResult ebp_batch_grads(const EBPNet& net, const Mat& X, const std::vector<int>& y,
                               const ConvPlan& plan, std::array<double, 25>& dK1, double& db1,
                               std::array<double, 25>& dK2, double& db2, Mat& dW, Vec& dc);

void train_baseline_ebp(EBPNet& net, const Mat& X, const std::vector<int>& y,
                        const OptimConfig& oc, Rng& rng, const ConvPlan& plan);

std::vector<int> ebp_predict(const EBPNet& net, const Mat& X, const ConvPlan& plan);

}  // namespace ffo
