#include <cmath>

#include "doctest.h"
#include "ffoptics/ffnet.hpp"
#include "ffoptics/pipeline.hpp"
#include "ffoptics/ridge.hpp"

using namespace ffo;

namespace {

Mat random_batch(int rows, Rng& rng, double scale = 1.0) {
    Mat X(rows, kCanvasSize);
    for (long i = 0; i < X.rows(); ++i)
        for (long j = 0; j < X.cols(); ++j) X(i, j) = scale * rng.uniform();
    return X;
}

FFLayerParams random_layer(Rng& rng) {
    FFLayerParams p;
    for (double& k : p.kernel) k = 0.3 * rng.normal();
    p.bias = 0.05;
    return p;
}

// total pair loss over a batch, as a function of the layer parameters
double batch_pair_loss(const FFLayerParams& p, const ConvPlan& plan, const Mat& pos,
                       const Mat& neg) {
    Mat ap = relu(conv2d_dilated(pos, p, plan));
    Mat an = relu(conv2d_dilated(neg, p, plan));
    double total = 0.0;
    for (long i = 0; i < pos.rows(); ++i)
        total += ff_pair_loss(ap.row(i).transpose(), an.row(i).transpose(), p.theta);
    return total;
}

}  // namespace

TEST_CASE("center-delta kernel is the identity") {
    FFLayerParams p;
    p.kernel[2 * 5 + 2] = 1.0;
    ConvPlan plan(p.dilation);
    Rng rng(1);
    Mat X = random_batch(3, rng);
    Mat Y = conv2d_dilated(X, p, plan);
    CHECK((Y - X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all-ones kernel counts in-bounds taps") {
    FFLayerParams p;
    p.kernel.fill(1.0);
    REQUIRE(p.dilation == 4);
    ConvPlan plan(4);
    Mat X = Mat::Ones(1, kCanvasSize);
    Mat Y = conv2d_dilated(X, p, plan);
    CHECK(Y(0, 16 * 32 + 16) == 25.0);  // interior: full 5x5 support
    CHECK(Y(0, 0) == 9.0);              // corner: 3x3 of the taps land in-bounds
}

TEST_CASE("receptive span at dilation 4 is 17 pixels") {
    // a bright pixel 8 off-center is reached; 9 off-center is not
    FFLayerParams p;
    p.kernel.fill(1.0);
    ConvPlan plan(4);
    Mat X = Mat::Zero(1, kCanvasSize);
    X(0, 16 * 32 + 24) = 1.0;  // (16,24): 8 right of (16,16)
    CHECK(conv2d_dilated(X, p, plan)(0, 16 * 32 + 16) == 1.0);
    X.setZero();
    X(0, 16 * 32 + 25) = 1.0;
    CHECK(conv2d_dilated(X, p, plan)(0, 16 * 32 + 16) == 0.0);
}

TEST_CASE("convolution is linear in its input at zero bias") {
    Rng rng(2);
    FFLayerParams p = random_layer(rng);
    p.bias = 0.0;
    ConvPlan plan(p.dilation);
    Mat X = random_batch(1, rng), Y = random_batch(1, rng);
    Mat lhs = conv2d_dilated(Mat(2.0 * X - 3.0 * Y), p, plan);
    Mat rhs = 2.0 * conv2d_dilated(X, p, plan) - 3.0 * conv2d_dilated(Y, p, plan);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("relu clamps negatives only") {
    Mat X(1, 3);
    X << -3.0, 0.0, 5.0;
    Mat Y = relu(X);
    CHECK(Y(0, 0) == 0.0);
    CHECK(Y(0, 1) == 0.0);
    CHECK(Y(0, 2) == 5.0);
    CHECK(relu(Mat::Constant(2, 4, -1.0)).maxCoeff() == 0.0);
    Mat Z = Mat::Constant(2, 4, 2.0);
    CHECK((relu(Z) - Z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("l2 normalization") {
    SUBCASE("3-4-5 example") {
        Vec v = Vec::Zero(8);
        v[0] = 3.0;
        v[1] = 4.0;
        Vec u = l2_normalize(v);
        CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-15));
    }
    SUBCASE("zero vector throws") {
        CHECK_THROWS_AS(l2_normalize(Vec::Zero(4)), DegenerateNorm);
    }
    SUBCASE("unit norm within 1e-9 on random inputs") {
        Rng rng(3);
        for (int t = 0; t < 200; ++t) {
            Vec v(32);
            for (int i = 0; i < 32; ++i) v[i] = rng.normal() * std::pow(10.0, t % 7 - 3);
            CHECK(std::abs(l2_normalize(v).norm() - 1.0) < 1e-9);
        }
    }
    SUBCASE("scale invariance to 1e-12") {
        Rng rng(4);
        for (double c : {1e-6, 0.5, 3.0, 1e7}) {
            Vec v(64);
            for (int i = 0; i < 64; ++i) v[i] = rng.normal();
            CHECK((l2_normalize(c * v) - l2_normalize(v)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("goodness analytic values") {
    Vec zero = Vec::Zero(4);
    CHECK(goodness(zero, 2.0) == doctest::Approx(0.119203).epsilon(1e-5));
    Vec ones = Vec::Ones(4);  // S = 4, theta 2 -> sigma(2)
    CHECK(goodness(ones, 2.0) == doctest::Approx(0.880797).epsilon(1e-5));
    Vec at_theta(1);
    at_theta[0] = std::sqrt(2.0);
    CHECK(goodness(at_theta, 2.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("goodness is strictly increasing in the activation energy") {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        double s1 = 5.0 * rng.uniform(), s2 = 5.0 * rng.uniform();
        if (s1 == s2) continue;
        Vec a(1), b(1);
        a[0] = std::sqrt(s1);
        b[0] = std::sqrt(s2);
        double theta = 4.0 * rng.uniform();
        CHECK((s1 < s2) == (goodness(a, theta) < goodness(b, theta)));
    }
}

TEST_CASE("pair loss analytic values") {
    Vec at_theta(1), zero = Vec::Zero(1), big(1);
    at_theta[0] = std::sqrt(2.0);
    big[0] = 40.0;
    CHECK(ff_pair_loss(at_theta, at_theta, 2.0) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(ff_pair_loss(big, zero, 2.0) == doctest::Approx(0.126928).epsilon(1e-5));
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        Vec a(3), b(3);
        for (int i = 0; i < 3; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
        }
        CHECK(ff_pair_loss(a, b, 2.0) >= 0.0);
    }
}

TEST_CASE("layer-loss gradient matches finite differences") {
    Rng rng(7);
    ConvPlan plan(4);
    Mat pos = random_batch(5, rng, 0.4);
    Mat neg = random_batch(5, rng, 0.4);
    FFLayerParams p = random_layer(rng);

    // analytic gradient assembled from the public primitives
    Mat zp = conv2d_dilated(pos, p, plan), zn = conv2d_dilated(neg, p, plan);
    Mat ap = relu(zp), an = relu(zn);
    Mat gp(ap.rows(), ap.cols()), gn(an.rows(), an.cols());
    for (long i = 0; i < ap.rows(); ++i) {
        double sp = ap.row(i).squaredNorm(), sn = an.row(i).squaredNorm();
        double dp = -sigmoid(p.theta - sp), dn = sigmoid(sn - p.theta);
        for (long j = 0; j < ap.cols(); ++j) {
            gp(i, j) = dp * 2.0 * ap(i, j) * (zp(i, j) > 0.0 ? 1.0 : 0.0);
            gn(i, j) = dn * 2.0 * an(i, j) * (zn(i, j) > 0.0 ? 1.0 : 0.0);
        }
    }
    std::array<double, 25> dK{};
    double db = 0.0;
    conv_param_grad(pos, gp, plan, dK, db);
    std::array<double, 25> dKn{};
    double dbn = 0.0;
    conv_param_grad(neg, gn, plan, dKn, dbn);
    for (int t = 0; t < 25; ++t) dK[t] += dKn[t];
    db += dbn;

    const double h = 1e-5;
    for (int t = 0; t <= 25; ++t) {
        FFLayerParams lo = p, hi = p;
        if (t < 25) {
            lo.kernel[t] -= h;
            hi.kernel[t] += h;
        } else {
            lo.bias -= h;
            hi.bias += h;
        }
        double fd =
            (batch_pair_loss(hi, plan, pos, neg) - batch_pair_loss(lo, plan, pos, neg)) / (2.0 * h);
        double an_g = t < 25 ? dK[t] : db;
        double denom = std::max({std::abs(fd), std::abs(an_g), 1e-8});
        CHECK(std::abs(fd - an_g) / denom < 1e-4);
    }
}

TEST_CASE("ebp network gradient matches finite differences") {
    Rng rng(8);
    EBPNet net = make_ebp_net(rng);
    ConvPlan plan(net.conv1.dilation);
    Mat X = random_batch(5, rng, 0.5);
    std::vector<int> y{3, 1, 4, 1, 5};

    std::array<double, 25> dK1{}, dK2{};
    double db1 = 0.0, db2 = 0.0;
    Mat dW(net.fc_w.rows(), net.fc_w.cols());
    Vec dc(10);
    double base = ebp_batch_grads(net, X, y, plan, dK1, db1, dK2, db2, dW, dc).loss;
    CHECK(std::isfinite(base));

    auto loss_at = [&](const EBPNet& n) {
        std::array<double, 25> k1{}, k2{};
        double b1 = 0.0, b2 = 0.0;
        Mat w(n.fc_w.rows(), n.fc_w.cols());
        Vec c(10);
        return ebp_batch_grads(n, X, y, plan, k1, b1, k2, b2, w, c).loss;
    };

    const double h = 1e-5;
    auto check_one = [&](double analytic, auto&& mutate) {
        EBPNet lo = net, hi = net;
        mutate(lo, -h);
        mutate(hi, +h);
        double fd = (loss_at(hi) - loss_at(lo)) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
        CHECK(std::abs(fd - analytic) / denom < 1e-4);
    };

    for (int t : {0, 7, 12, 24}) {
        check_one(dK1[t], [&](EBPNet& n, double d) { n.conv1.kernel[std::size_t(t)] += d; });
        check_one(dK2[t], [&](EBPNet& n, double d) { n.conv2.kernel[std::size_t(t)] += d; });
    }
    check_one(db1, [&](EBPNet& n, double d) { n.conv1.bias += d; });
    check_one(db2, [&](EBPNet& n, double d) { n.conv2.bias += d; });
    for (auto [r, c] : {std::pair{0L, 0L}, {100L, 3L}, {2047L, 9L}})
        check_one(dW(r, c), [&, r = r, c = c](EBPNet& n, double d) { n.fc_w(r, c) += d; });
    check_one(dc[4], [&](EBPNet& n, double d) { n.fc_b[4] += d; });
}

TEST_CASE("separable bright-pixel toy task trains past a 0.2 gap") {
    // positive: bright interior pixel; negative: bright pixel in the marking
    // row corner. The corner's clipped tap support makes the two classes
    // separable by a single shared kernel.
    const int n = 64;
    Mat pos = Mat::Zero(n, kCanvasSize), neg = Mat::Zero(n, kCanvasSize);
    Rng jitter(9);
    for (int i = 0; i < n; ++i) {
        pos(i, 16 * 32 + 16) = 0.9 + 0.1 * jitter.uniform();
        neg(i, 0 * 32 + 4) = 0.9 + 0.1 * jitter.uniform();
    }
    FFLayerParams layer;
    OptimConfig oc;
    oc.epochs = 200;  // batch 64 -> one step per epoch -> 200 steps
    Rng rng(10);
    ConvPlan plan(4);
    FFTrainStats st = train_ff_layer(layer, pos, neg, oc, rng, plan);
    CHECK(st.mean_goodness_pos - st.mean_goodness_neg > 0.2);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
    Rng rng(11);
    Mat pos = random_batch(8, rng), neg = random_batch(8, rng);
    FFLayerParams layer;
    OptimConfig oc;
    oc.epochs = 3;
    Rng train_rng(12);
    train_ff_layer(layer, pos, neg, oc, train_rng, ConvPlan(4));
    FFLayerParams before = layer;
    oc.lr = 0.0;
    Rng again(13);
    train_ff_layer(layer, pos, neg, oc, again, ConvPlan(4), /*init=*/false);
    CHECK(layer.kernel == before.kernel);
    CHECK(layer.bias == before.bias);
}

TEST_CASE("training is deterministic per seed") {
    Rng rng(14);
    Mat pos = random_batch(16, rng), neg = random_batch(16, rng);
    OptimConfig oc;
    oc.epochs = 5;
    FFLayerParams a, b;
    Rng ra(99), rb(99);
    train_ff_layer(a, pos, neg, oc, ra, ConvPlan(4));
    train_ff_layer(b, pos, neg, oc, rb, ConvPlan(4));
    CHECK(a.kernel == b.kernel);
    CHECK(a.bias == b.bias);
}

TEST_CASE("forward stack returns every stage in order") {
    Rng rng(15);
    Vec sample(kCanvasSize);
    for (int i = 0; i < kCanvasSize; ++i) sample[i] = rng.uniform();
    ConvPlan plan(4);

    SUBCASE("zero layers pass the input through") {
        auto stages = forward_stack(sample, {}, {}, plan);
        REQUIRE(stages.size() == 1);
        CHECK((stages[0] - sample).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("two identity-hook layers yield unit-norm stages") {
        std::vector<FFLayerParams> layers(2);
        for (auto& l : layers) l = random_layer(rng);
        std::vector<TransformHook> hooks(2, [](const Vec& v) { return v; });
        auto stages = forward_stack(sample, layers, hooks, plan);
        REQUIRE(stages.size() == 3);
        CHECK(std::abs(stages[1].norm() - 1.0) < 1e-9);
        CHECK(std::abs(stages[2].norm() - 1.0) < 1e-9);
    }
    SUBCASE("hooks run after normalization") {
        std::vector<FFLayerParams> layers(1);
        layers[0] = random_layer(rng);
        std::vector<TransformHook> hooks{[](const Vec& v) { return Vec(2.0 * v); }};
        auto stages = forward_stack(sample, layers, hooks, plan);
        REQUIRE(stages.size() == 2);
        // if the hook ran before normalization the norm would be 1, not 2
        CHECK(std::abs(stages[1].norm() - 2.0) < 1e-9);
    }
}

TEST_CASE("ebp loss decreases over the first epochs of the standard split") {
    PreparedSplits data = prepare_splits(ExperimentConfig{});
    ConvPlan plan(4);
    OptimConfig oc;

    auto dataset_loss = [&](const EBPNet& net) {
        std::array<double, 25> k1{}, k2{};
        double b1 = 0.0, b2 = 0.0;
        Mat dW;
        Vec dc;
        double total = 0.0;
        long n = data.train.rows();
        for (long s = 0; s < n; s += 500) {
            long e = std::min(n, s + 500);
            Mat xb = data.train.middleRows(s, e - s);
            std::vector<int> yb(data.y_train.begin() + s, data.y_train.begin() + e);
            total += ebp_batch_grads(net, xb, yb, plan, k1, b1, k2, b2, dW, dc).loss *
                     double(e - s);
        }
        return total / double(n);
    };

    // identical seeds make the k-epoch run share its first k-1 epochs with
    // the previous run, so this sequence is the per-epoch loss trajectory
    std::vector<double> after;
    for (int epochs = 1; epochs <= 5; ++epochs) {
        Rng rng(21);
        EBPNet net = make_ebp_net(rng);
        oc.epochs = epochs;
        Rng train_rng(22);
        train_baseline_ebp(net, data.train, data.y_train, oc, train_rng, plan);
        after.push_back(dataset_loss(net));
    }
    for (std::size_t i = 1; i < after.size(); ++i) CHECK(after[i] <= after[i - 1]);
}

TEST_CASE("ebp overfits ten samples") {
    Rng rng(16);
    Mat X = random_batch(10, rng);
    std::vector<int> y{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    EBPNet net = make_ebp_net(rng);
    OptimConfig oc;
    oc.batch = 10;
    oc.epochs = 500;  // one step per epoch at batch 10
    Rng train_rng(17);
    train_baseline_ebp(net, X, y, oc, train_rng, ConvPlan(4));
    CHECK(evaluate(ebp_predict(net, X, ConvPlan(4)), y).accuracy == 1.0);
}
