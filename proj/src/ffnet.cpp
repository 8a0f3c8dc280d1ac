#include "ffoptics/ffnet.hpp"

#include <cmath>

#include "ffoptics/common.hpp"

namespace ffo {

void AdamState::step(Eigen::Ref<Vec> param, const Vec& grad, const OptimConfig& oc) {
    ++t;
    m = oc.beta1 * m + (1.0 - oc.beta1) * grad;
    v = oc.beta2 * v + (1.0 - oc.beta2) * grad.cwiseProduct(grad);
    double c1 = 1.0 - std::pow(oc.beta1, double(t));
    double c2 = 1.0 - std::pow(oc.beta2, double(t));
    param -= (oc.lr / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + oc.eps).matrix());
}

ConvPlan::ConvPlan(int d) : taps(kCanvasSize * 25, -1), dilation(d) {
    for (int i = 0; i < kCanvasSide; ++i)
        for (int j = 0; j < kCanvasSide; ++j)
            for (int u = 0; u < 5; ++u)
                for (int v = 0; v < 5; ++v) {
                    int si = i + d * (u - 2), sj = j + d * (v - 2);
                    if (si < 0 || si >= kCanvasSide || sj < 0 || sj >= kCanvasSide) continue;
                    taps[(i * kCanvasSide + j) * 25 + (u * 5 + v)] = si * kCanvasSide + sj;
                }
}

void conv2d_dilated(const double* in, const FFLayerParams& p, const ConvPlan& plan, double* out) {
    for (int j = 0; j < kCanvasSize; ++j) {
        const int* tp = &plan.taps[j * 25];
        double acc = p.bias;
        for (int t = 0; t < 25; ++t)
            if (tp[t] >= 0) acc += p.kernel[t] * in[tp[t]];
        out[j] = acc;
    }
}

Mat conv2d_dilated(const Mat& X, const FFLayerParams& p, const ConvPlan& plan) {
    Mat out(X.rows(), kCanvasSize);
    for (Eigen::Index n = 0; n < X.rows(); ++n)
        conv2d_dilated(X.row(n).data(), p, plan, out.row(n).data());
    return out;
}

void conv_param_grad(const Mat& X, const Mat& G, const ConvPlan& plan,
                     std::array<double, 25>& dK, double& db) {
    dK.fill(0.0);
    db = 0.0;
    for (Eigen::Index n = 0; n < X.rows(); ++n) {
        const double* x = X.row(n).data();
        const double* g = G.row(n).data();
        for (int j = 0; j < kCanvasSize; ++j) {
            if (g[j] == 0.0) continue;
            const int* tp = &plan.taps[j * 25];
            for (int t = 0; t < 25; ++t)
                if (tp[t] >= 0) dK[t] += g[j] * x[tp[t]];
            db += g[j];
        }
    }
}

Mat conv_input_grad(const Mat& G, const FFLayerParams& p, const ConvPlan& plan) {
    FFLayerParams flipped = p;
    flipped.bias = 0.0;
    for (int t = 0; t < 25; ++t) flipped.kernel[t] = p.kernel[24 - t];
    return conv2d_dilated(G, flipped, plan);
}

Mat relu(Mat z) {
    return z.cwiseMax(0.0);
}

Vec l2_normalize(const Vec& v) {
    double n = v.norm();
    if (n < 1e-12) throw DegenerateNorm("norm " + std::to_string(n));
    return v / n;
}

Mat l2_normalize_rows(const Mat& X) {
    Mat out(X.rows(), X.cols());
    for (Eigen::Index n = 0; n < X.rows(); ++n)
        out.row(n) = l2_normalize(X.row(n).transpose()).transpose();
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(std::min(x, 30.0)));
}

double goodness(const Vec& acts, double theta) {
    return sigmoid(acts.squaredNorm() - theta);
}

double ff_pair_loss(const Vec& pos_acts, const Vec& neg_acts, double theta) {
    return softplus(theta - pos_acts.squaredNorm()) + softplus(neg_acts.squaredNorm() - theta);
}

namespace {

std::vector<int> shuffled_order(int n, Rng& rng) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(std::uint64_t(i) + 1)]);
    return order;
}

Mat gather_rows(const Mat& X, const std::vector<int>& order, int begin, int end) {
    Mat out(end - begin, X.cols());
    for (int i = begin; i < end; ++i) out.row(i - begin) = X.row(order[i]);
    return out;
}

// dLoss/dz for one stream of the pair loss: factor * 2y on active units
Mat stream_grad(const Mat& z, const Vec& dS) {
    Mat g = z.cwiseMax(0.0) * 2.0;
    for (Eigen::Index n = 0; n < g.rows(); ++n) g.row(n) *= dS[n];
    return g;
}

}  // namespace

FFTrainStats train_ff_layer(FFLayerParams& layer, const Mat& pos, const Mat& neg,
                            const OptimConfig& oc, Rng& rng, const ConvPlan& plan, bool init) {
    if (pos.rows() != neg.rows()) throw DimensionMismatch("pos/neg pair counts differ");
    if (init) {
        for (auto& k : layer.kernel) k = 0.1 * rng.normal();
        layer.bias = 0.0;
    }
    const int n = int(pos.rows());
    Vec params(26);
    for (int t = 0; t < 25; ++t) params[t] = layer.kernel[t];
    params[25] = layer.bias;
    AdamState adam(26);
    FFTrainStats stats;
    for (int ep = 0; ep < oc.epochs; ++ep) {
        auto order = shuffled_order(n, rng);
        for (int s = 0; s < n; s += oc.batch) {
            int e = std::min(n, s + oc.batch);
            Mat xp = gather_rows(pos, order, s, e);
            Mat xn = gather_rows(neg, order, s, e);
            Mat zp = conv2d_dilated(xp, layer, plan);
            Mat zn = conv2d_dilated(xn, layer, plan);
            Vec sp = zp.cwiseMax(0.0).rowwise().squaredNorm();
            Vec sn = zn.cwiseMax(0.0).rowwise().squaredNorm();
            double loss = 0.0;
            Vec dsp(e - s), dsn(e - s);
            for (int i = 0; i < e - s; ++i) {
                loss += softplus(layer.theta - sp[i]) + softplus(sn[i] - layer.theta);
                dsp[i] = -sigmoid(layer.theta - sp[i]) / (e - s);
                dsn[i] = sigmoid(sn[i] - layer.theta) / (e - s);
            }
            loss /= (e - s);
            if (!std::isfinite(loss))
                throw NonFiniteLoss("epoch " + std::to_string(ep) + " batch at " + std::to_string(s));
            std::array<double, 25> dk1{}, dk2{};
            double db1 = 0.0, db2 = 0.0;
            conv_param_grad(xp, stream_grad(zp, dsp), plan, dk1, db1);
            conv_param_grad(xn, stream_grad(zn, dsn), plan, dk2, db2);
            Vec grad(26);
            for (int t = 0; t < 25; ++t) grad[t] = dk1[t] + dk2[t];
            grad[25] = db1 + db2;
            adam.step(params, grad, oc);
            for (int t = 0; t < 25; ++t) layer.kernel[t] = params[t];
            layer.bias = params[25];
            stats.final_loss = loss;
        }
    }
    Mat yp = relu(conv2d_dilated(pos, layer, plan));
    Mat yn = relu(conv2d_dilated(neg, layer, plan));
    for (int i = 0; i < n; ++i) {
        stats.mean_goodness_pos += sigmoid(yp.row(i).squaredNorm() - layer.theta) / n;
        stats.mean_goodness_neg += sigmoid(yn.row(i).squaredNorm() - layer.theta) / n;
    }
    return stats;
}

std::vector<Vec> forward_stack(const Vec& sample, const std::vector<FFLayerParams>& layers,
                               const std::vector<TransformHook>& hooks, const ConvPlan& plan) {
    if (hooks.size() != layers.size()) throw DimensionMismatch("hook count != layer count");
    std::vector<Vec> stages;
    stages.push_back(sample);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Vec z(kCanvasSize);
        conv2d_dilated(stages.back().data(), layers[i], plan, z.data());
        Vec rep = l2_normalize(z.cwiseMax(0.0));
        stages.push_back(hooks[i] ? hooks[i](rep) : rep);
    }
    return stages;
}

EBPNet make_ebp_net(Rng& rng) {
    EBPNet net;
    for (auto& k : net.conv1.kernel) k = 0.1 * rng.normal();
    for (auto& k : net.conv2.kernel) k = 0.1 * rng.normal();
    net.fc_w = Mat(2 * kCanvasSize, 10);
    for (Eigen::Index i = 0; i < net.fc_w.rows(); ++i)
        for (Eigen::Index j = 0; j < 10; ++j) net.fc_w(i, j) = 0.01 * rng.normal();
    net.fc_b = Vec::Zero(10);
    return net;
}

EBPBatchResult ebp_batch_grads(const EBPNet& net, const Mat& X, const std::vector<int>& y,
                               const ConvPlan& plan, std::array<double, 25>& dK1, double& db1,
                               std::array<double, 25>& dK2, double& db2, Mat& dW, Vec& dc) {
    const int n = int(X.rows());
    Mat z1 = conv2d_dilated(X, net.conv1, plan);
    Mat a1 = relu(z1);
    Mat z2 = conv2d_dilated(a1, net.conv2, plan);
    Mat a2 = relu(z2);
    Mat f(n, 2 * kCanvasSize);
    f << a1, a2;
    Mat logits = (f * net.fc_w).rowwise() + net.fc_b.transpose();
    EBPBatchResult res;
    Mat g(n, 10);
    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd row = logits.row(i);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd p = (row.array() - mx).exp();
        p /= p.sum();
        res.loss += -std::log(std::max(p[y[i]], 1e-300)) / n;
        int arg = 0;
        row.maxCoeff(&arg);
        res.correct += (arg == y[i]);
        g.row(i) = p;
        g(i, y[i]) -= 1.0;
    }
    g /= double(n);
    if (!std::isfinite(res.loss)) throw NonFiniteLoss("ebp batch");
    dW = f.transpose() * g;
    dc = g.colwise().sum().transpose();
    Mat df = g * net.fc_w.transpose();
    Mat dz2 = df.rightCols(kCanvasSize).cwiseProduct((z2.array() > 0.0).cast<double>().matrix());
    conv_param_grad(a1, dz2, plan, dK2, db2);
    Mat da1 = df.leftCols(kCanvasSize) + conv_input_grad(dz2, net.conv2, plan);
    Mat dz1 = da1.cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
    conv_param_grad(X, dz1, plan, dK1, db1);
    return res;
}

void train_baseline_ebp(EBPNet& net, const Mat& X, const std::vector<int>& y,
                        const OptimConfig& oc, Rng& rng, const ConvPlan& plan) {
    const int n = int(X.rows());
    const int D = 2 * kCanvasSize;
    Vec params(26 + 26 + D * 10 + 10);
    auto pack = [&] {
        for (int t = 0; t < 25; ++t) params[t] = net.conv1.kernel[t];
        params[25] = net.conv1.bias;
        for (int t = 0; t < 25; ++t) params[26 + t] = net.conv2.kernel[t];
        params[51] = net.conv2.bias;
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < 10; ++j) params[52 + i * 10 + j] = net.fc_w(i, j);
        for (int j = 0; j < 10; ++j) params[52 + D * 10 + j] = net.fc_b[j];
    };
    auto unpack = [&] {
        for (int t = 0; t < 25; ++t) net.conv1.kernel[t] = params[t];
        net.conv1.bias = params[25];
        for (int t = 0; t < 25; ++t) net.conv2.kernel[t] = params[26 + t];
        net.conv2.bias = params[51];
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < 10; ++j) net.fc_w(i, j) = params[52 + i * 10 + j];
        for (int j = 0; j < 10; ++j) net.fc_b[j] = params[52 + D * 10 + j];
    };
    pack();
    AdamState adam(int(params.size()));
    std::array<double, 25> dK1{}, dK2{};
    double db1 = 0.0, db2 = 0.0;
    Mat dW;
    Vec dc;
    for (int ep = 0; ep < oc.epochs; ++ep) {
        auto order = shuffled_order(n, rng);
        for (int s = 0; s < n; s += oc.batch) {
            int e = std::min(n, s + oc.batch);
            Mat xb = gather_rows(X, order, s, e);
            std::vector<int> yb(e - s);
            for (int i = s; i < e; ++i) yb[i - s] = y[order[i]];
            ebp_batch_grads(net, xb, yb, plan, dK1, db1, dK2, db2, dW, dc);
            Vec grad(params.size());
            for (int t = 0; t < 25; ++t) grad[t] = dK1[t];
            grad[25] = db1;
            for (int t = 0; t < 25; ++t) grad[26 + t] = dK2[t];
            grad[51] = db2;
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < 10; ++j) grad[52 + i * 10 + j] = dW(i, j);
            for (int j = 0; j < 10; ++j) grad[52 + D * 10 + j] = dc[j];
            adam.step(params, grad, oc);
            unpack();
        }
    }
}

std::vector<int> ebp_predict(const EBPNet& net, const Mat& X, const ConvPlan& plan) {
    Mat a1 = relu(conv2d_dilated(X, net.conv1, plan));
    Mat a2 = relu(conv2d_dilated(a1, net.conv2, plan));
    Mat f(X.rows(), 2 * kCanvasSize);
    f << a1, a2;
    Mat logits = (f * net.fc_w).rowwise() + net.fc_b.transpose();
    std::vector<int> out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        int arg = 0;
        logits.row(i).maxCoeff(&arg);
        out[i] = arg;
    }
    return out;
}

}  // namespace ffo
