#include "ffoptics/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "ffoptics/cache.hpp"

namespace ffo {

long estimate_flops(int conv_layers, long readout_dim) {
    return long(conv_layers) * 2 * 25 * kCanvasSize + 2 * readout_dim * 10;
}

long estimate_flops(const ExperimentConfig& cfg) {
    long readout_dim = cfg.arch == Arch::ebp2 ? 2 * kCanvasSize
                                              : long(cfg.effective_taps().size()) * kCanvasSize;
    return estimate_flops(cfg.layer_count(), readout_dim);
}

PreparedSplits prepare_splits(const ExperimentConfig& cfg) {
    Dataset ds = load_mnist_dir(cfg.mnist_dir);
    SplitSpec spec;
    spec.seed = cfg.split_seed;
    spec.n_train = cfg.n_train;
    spec.n_val = cfg.n_val;
    spec.n_test = cfg.n_test;
    Splits idx = make_splits(int(ds.images.size()), spec);

    PreparedSplits out;
    auto fill = [&](const std::vector<int>& rows, Mat& X, std::vector<int>& y) {
        X.resize(long(rows.size()), kCanvasSize);
        y.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Canvas c = pad_to_canvas(ds.images[rows[i]]);
            for (int j = 0; j < kCanvasSize; ++j) X(long(i), j) = c[j];
            y.push_back(ds.labels[rows[i]]);
        }
    };
    fill(idx.train, out.train, out.y_train);
    fill(idx.val, out.val, out.y_val);
    fill(idx.test, out.test, out.y_test);
    return out;
}

StageCache::StageCache(std::string dir, std::uint64_t config_hash)
    : dir_(std::move(dir)), cfg_hash_(config_hash) {}

std::string StageCache::path(int stage, const std::string& stream) const {
    return dir_ + "/stage" + std::to_string(stage) + "_" + stream + ".ffon";
}

std::optional<Mat> StageCache::load(int stage, const std::string& stream,
                                    std::uint64_t parent_hash) const {
    std::string p = path(stage, stream);
    if (!std::filesystem::exists(p)) return std::nullopt;
    ArrayStore store = ArrayStore::load(p);
    auto cfg_it = store.meta.find("config");
    if (cfg_it == store.meta.end() || cfg_it->second != cfg_hash_) return std::nullopt;
    auto par_it = store.meta.find("parent");
    if (par_it == store.meta.end() || par_it->second != parent_hash)
        throw CacheStale("stage " + std::to_string(stage) + " " + stream +
                         " cache was produced by different upstream parameters");
    return store.real.at("reps");
}

void StageCache::store(int stage, const std::string& stream, std::uint64_t parent_hash,
                       const Mat& reps) const {
    std::filesystem::create_directories(dir_);
    ArrayStore store;
    store.real["reps"] = reps;
    store.meta["config"] = cfg_hash_;
    store.meta["parent"] = parent_hash;
    store.save(path(stage, stream));
}

std::uint64_t layer_chain_hash(std::uint64_t config_hash, const std::vector<FFLayerParams>& layers,
                               int stage) {
    std::uint64_t h = fnv1a(&config_hash, sizeof(config_hash));
    for (int i = 0; i < stage && i < int(layers.size()); ++i) {
        const FFLayerParams& l = layers[i];
        h = fnv1a(l.kernel.data(), sizeof(double) * l.kernel.size(), h);
        h = fnv1a(&l.bias, sizeof(l.bias), h);
        h = fnv1a(&l.dilation, sizeof(l.dilation), h);
        h = fnv1a(&l.theta, sizeof(l.theta), h);
    }
    return h;
}

Mat advance_stage(const Mat& reps, const FFLayerParams& layer, const ConvPlan& plan,
                  const OpticalTransform* optics) {
    Mat z = l2_normalize_rows(relu(conv2d_dilated(reps, layer, plan)));
    return optics ? optics->apply_batch(z) : z;
}

Mat embed_batch(const Mat& canvases, const std::vector<int>& labels, Polarity polarity, Rng& rng) {
    Mat out(canvases.rows(), kCanvasSize);
    Canvas c(kCanvasSize);
    for (long i = 0; i < canvases.rows(); ++i) {
        for (int j = 0; j < kCanvasSize; ++j) c[j] = canvases(i, j);
        EmbeddedSample s = embed_label(c, labels[std::size_t(i)], polarity, rng);
        for (int j = 0; j < kCanvasSize; ++j) out(i, j) = s.pixels[j];
    }
    return out;
}

std::uint64_t fiber_cache_key(const ExperimentConfig& cfg) {
    std::uint64_t h = fnv1a(&cfg.disorder_seed, sizeof(cfg.disorder_seed));
    h = fnv1a(&cfg.optics_modes, sizeof(cfg.optics_modes), h);
    h = fnv1a(&cfg.optics_grid, sizeof(cfg.optics_grid), h);
    h = fnv1a(&cfg.optics_coupling, sizeof(cfg.optics_coupling), h);
    h = fnv1a(&cfg.optics_prune, sizeof(cfg.optics_prune), h);
    return h;
}

std::unique_ptr<OpticalTransform> make_optics(const ExperimentConfig& cfg) {
    if (cfg.arch != Arch::ffa2_optics || cfg.optics_hook != HookKind::fiber) return nullptr;
    FiberGeometry geom;
    OpticsConfig ocfg;
    ocfg.grid_n = cfg.optics_grid;
    ocfg.dz = cfg.optics_dz;
    ocfg.mode_count = cfg.optics_modes;
    ocfg.seed = cfg.disorder_seed;
    ocfg.power_scale = cfg.optics_power;
    ocfg.beam_waist = cfg.optics_waist;
    return std::make_unique<OpticalTransform>(geom, ocfg,
                                              cfg.optics_coupling * geom.group_spacing(),
                                              cfg.optics_prune, cfg.optics_gamma_knob);
}

std::uint64_t feature_hash(const ExperimentConfig& cfg) {
    ExperimentConfig stripped = cfg;
    stripped.alpha_grid.clear();
    stripped.taps.clear();
    return config_hash(stripped);
}

StageCache open_stage_cache(const ExperimentConfig& cfg) {
    std::uint64_t h = feature_hash(cfg);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return StageCache(cache_dir() + "/" + buf, h);
}

namespace {

Mat cached_advance(const StageCache* cache, int stage, const std::string& stream,
                   std::uint64_t parent, const Mat& prev, const FFLayerParams& layer,
                   const ConvPlan& plan, const OpticalTransform* optics) {
    if (cache) {
        if (auto hit = cache->load(stage, stream, parent)) return std::move(*hit);
    }
    Mat next = advance_stage(prev, layer, plan, optics);
    if (cache) cache->store(stage, stream, parent, next);
    return next;
}

}  // namespace

Mat readout_features(const ExperimentConfig& cfg, const std::vector<FFLayerParams>& layers,
                     const ConvPlan& plan, const OpticalTransform* optics, const Mat& canvases,
                     const StageCache* cache, const std::string& stream) {
    std::vector<int> taps = cfg.effective_taps();
    int last = taps.back();
    std::uint64_t cfg_hash = feature_hash(cfg);

    Rng unused(0);
    std::vector<int> zeros(std::size_t(canvases.rows()), 0);
    Mat rep = embed_batch(canvases, zeros, Polarity::neutral, unused);

    Mat out(canvases.rows(), long(taps.size()) * kCanvasSize);
    std::size_t slot = 0;
    for (int stage = 1; stage <= last; ++stage) {
        rep = cached_advance(cache, stage, stream, layer_chain_hash(cfg_hash, layers, stage), rep,
                             layers[std::size_t(stage - 1)], plan, optics);
        if (slot < taps.size() && taps[slot] == stage) {
            out.middleCols(long(slot) * kCanvasSize, kCanvasSize) = rep;
            ++slot;
        }
    }
    return out;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    PreparedSplits data = prepare_splits(cfg);
    ConvPlan plan(cfg.dilation);

    RunResult res;
    Report& rep = res.report;
    Checkpoint& ck = res.checkpoint;
    rep.arch = arch_name(cfg.arch);
    rep.config_hash = config_hash(cfg);
    rep.flops_per_sample = estimate_flops(cfg);
    ck.version = kCheckpointVersion;
    ck.config = cfg;

    OptimConfig oc;
    oc.lr = cfg.lr;
    oc.batch = cfg.batch;
    oc.epochs = cfg.epochs;

    if (cfg.arch == Arch::ebp2) {
        Rng rng(cfg.init_seed);
        EBPNet net = make_ebp_net(rng);
        net.conv1.dilation = cfg.dilation;
        net.conv2.dilation = cfg.dilation;
        train_baseline_ebp(net, data.train, data.y_train, oc, rng, plan);
        rep.train_accuracy = evaluate(ebp_predict(net, data.train, plan), data.y_train).accuracy;
        rep.val_accuracy = evaluate(ebp_predict(net, data.val, plan), data.y_val).accuracy;
        rep.eval_metrics = evaluate(ebp_predict(net, data.test, plan), data.y_test);
        rep.test_accuracy = rep.eval_metrics.accuracy;
        ck.layers = {net.conv1, net.conv2};
        ck.fc_weights = net.fc_w;
        ck.fc_bias = net.fc_b;
    } else {
        const int n_layers = cfg.layer_count();
        std::unique_ptr<OpticalTransform> optics = make_optics(cfg);
        if (optics) ck.fiber_cache_key = fiber_cache_key(cfg);

        StageCache cache = open_stage_cache(cfg);

        Rng pos_rng(0), neg_rng(cfg.negatives_seed);
        Mat pos_rep = embed_batch(data.train, data.y_train, Polarity::positive, pos_rng);
        Mat neg_rep = embed_batch(data.train, data.y_train, Polarity::negative, neg_rng);

        std::vector<FFLayerParams> layers;
        layers.resize(std::size_t(n_layers));
        Rng init_rng(cfg.init_seed);
        for (auto& l : layers) {
            l.dilation = cfg.dilation;
            l.theta = cfg.theta;
        }
        for (int i = 0; i < n_layers; ++i) {
            FFTrainStats st =
                train_ff_layer(layers[std::size_t(i)], pos_rep, neg_rep, oc, init_rng, plan);
            rep.goodness_gaps.push_back(st.mean_goodness_pos - st.mean_goodness_neg);
            if (i + 1 < n_layers) {
                std::uint64_t parent = layer_chain_hash(feature_hash(cfg), layers, i + 1);
                pos_rep = cached_advance(&cache, i + 1, "pos", parent, pos_rep,
                                         layers[std::size_t(i)], plan, optics.get());
                neg_rep = cached_advance(&cache, i + 1, "neg", parent, neg_rep,
                                         layers[std::size_t(i)], plan, optics.get());
            }
        }

        Mat Xtr = readout_features(cfg, layers, plan, optics.get(), data.train, &cache, "train");
        rep.transform_calls_train = optics ? optics->calls() : 0;
        Mat Xval = readout_features(cfg, layers, plan, optics.get(), data.val, &cache, "val");
        Mat Xte = readout_features(cfg, layers, plan, optics.get(), data.test, &cache, "test");
        rep.transform_calls_readout = (optics ? optics->calls() : 0) - rep.transform_calls_train;

        SweepResult sw =
            sweep_regularization(Xtr, data.y_train, Xval, data.y_val, cfg.effective_alphas());
        rep.sweep = sw.points;
        rep.best_alpha = sw.best_alpha;
        for (const auto& p : sw.points) {
            if (p.alpha == sw.best_alpha) {
                rep.train_accuracy = p.train_acc;
                rep.val_accuracy = p.val_acc;
            }
        }
        rep.eval_metrics = evaluate(predict(sw.best_model, Xte), data.y_test);
        rep.test_accuracy = rep.eval_metrics.accuracy;
        ck.layers = layers;
        ck.ridge = sw.best_model;
    }

    rep.trainable_params = ck.trainable_params();
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace ffo
