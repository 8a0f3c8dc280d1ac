#include "ffoptics/ridge.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "ffoptics/common.hpp"

namespace ffo {

namespace {

Mat target_matrix(const std::vector<int>& labels) {
    Mat Y = Mat::Constant(labels.size(), 10, -1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) Y(i, labels[i]) = 1.0;
    return Y;
}

struct CenteredSvd {
    Vec xmean;
    Vec ymean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd;
    Mat uty;  // U^T Y_c, shared across alphas
};

CenteredSvd decompose(const Mat& X, const std::vector<int>& labels) {
    if (X.rows() < 2) throw InsufficientData("need at least 2 samples");
    if (std::size_t(X.rows()) != labels.size()) throw LengthMismatch("rows != labels");
    CenteredSvd d;
    d.xmean = X.colwise().mean().transpose();
    Eigen::MatrixXd Xc = X.rowwise() - d.xmean.transpose();
    Mat Y = target_matrix(labels);
    d.ymean = Y.colwise().mean().transpose();
    Mat Yc = Y.rowwise() - d.ymean.transpose();
    d.svd.compute(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    d.uty = d.svd.matrixU().transpose() * Yc;
    return d;
}

RidgeModel model_for_alpha(const CenteredSvd& d, double alpha) {
    const Vec& s = d.svd.singularValues();
    double smax = s.size() ? s[0] : 0.0;
    Vec shrink(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        double denom = s[i] * s[i] + alpha;
        if (alpha == 0.0) {
            if (s[i] <= 1e-10 * std::max(smax, 1.0))
                throw SingularSystem("rank-deficient features at alpha 0");
            shrink[i] = 1.0 / s[i];
        } else {
            shrink[i] = s[i] / denom;
        }
    }
    RidgeModel m;
    m.alpha = alpha;
    m.feature_mean = d.xmean;
    m.weights = d.svd.matrixV() * shrink.asDiagonal() * d.uty;
    m.intercepts = d.ymean;
    return m;
}

}  // namespace

RidgeModel fit_ridge(const Mat& X, const std::vector<int>& labels, double alpha) {
    return model_for_alpha(decompose(X, labels), alpha);
}

std::vector<int> predict(const RidgeModel& model, const Mat& X) {
    if (X.cols() != model.weights.rows())
        throw DimensionMismatch("feature width " + std::to_string(X.cols()));
    Mat scores = (X.rowwise() - model.feature_mean.transpose()) * model.weights;
    scores.rowwise() += model.intercepts.transpose();
    std::vector<int> out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < 10; ++j)
            if (scores(i, j) > scores(i, best)) best = j;  // ties keep the lower class
        out[i] = best;
    }
    return out;
}

Metrics evaluate(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw LengthMismatch("pred/truth lengths differ");
    Metrics m;
    long hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        m.confusion[truth[i]][pred[i]]++;
        hit += pred[i] == truth[i];
    }
    m.accuracy = pred.empty() ? 0.0 : double(hit) / double(pred.size());
    return m;
}

SweepResult sweep_regularization(const Mat& Xtr, const std::vector<int>& ytr, const Mat& Xval,
                                 const std::vector<int>& yval, const std::vector<double>& alphas) {
    CenteredSvd d = decompose(Xtr, ytr);
    SweepResult res;
    double best_val = -1.0;
    for (double a : alphas) {
        RidgeModel m = model_for_alpha(d, a);
        double tr = evaluate(predict(m, Xtr), ytr).accuracy;
        double va = evaluate(predict(m, Xval), yval).accuracy;
        res.points.push_back({a, tr, va});
        if (va > best_val) {  // strict: ties keep the earlier (smaller) alpha
            best_val = va;
            res.best_alpha = a;
            res.best_model = m;
        }
    }
    return res;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> g;
    for (int i = 0; i < 13; ++i) g.push_back(std::pow(10.0, -3.0 + 0.5 * i));
    return g;
}

}  // namespace ffo
