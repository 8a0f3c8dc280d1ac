#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "ffoptics/checkpoint.hpp"
#include "ffoptics/common.hpp"
#include "ffoptics/config.hpp"
#include "ffoptics/pipeline.hpp"
#include "ffoptics/report.hpp"
#include "ffoptics/selfcheck.hpp"

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

int run_prepare(const std::string& dir, std::uint64_t seed) {
    ffo::Dataset ds = ffo::load_mnist_dir(dir);
    ffo::SplitSpec spec;
    spec.seed = seed;
    ffo::Splits splits = ffo::make_splits(int(ds.images.size()), spec);
    std::array<long, 10> counts{};
    for (int i : splits.train) counts[std::size_t(ds.labels[std::size_t(i)])]++;
    std::cout << "{\"pool\":" << ds.images.size() << ",\"seed\":" << seed
              << ",\"train\":" << splits.train.size() << ",\"val\":" << splits.val.size()
              << ",\"test\":" << splits.test.size() << ",\"train_class_counts\":[";
    for (std::size_t c = 0; c < counts.size(); ++c) std::cout << (c ? "," : "") << counts[c];
    std::cout << "]}\n";
    return 0;
}

int run_train(const std::string& config_path, const std::vector<std::pair<std::string, std::string>>& overrides,
              const std::string& out_path, const std::string& report_path) {
    ffo::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ffo::load_config(config_path);
    for (const auto& [k, v] : overrides) ffo::apply_config_kv(cfg, k, v);
    ffo::RunResult rr = ffo::run_experiment(cfg);
    ffo::save_checkpoint(out_path, rr.checkpoint);
    if (!report_path.empty()) ffo::write_report_files(rr.report, report_path);
    std::cout << "{\"arch\":\"" << rr.report.arch << "\",\"test_accuracy\":" << rr.report.test_accuracy
              << ",\"trainable_params\":" << rr.report.trainable_params << ",\"checkpoint\":\""
              << json_escape(out_path) << "\"}\n";
    return 0;
}

struct SplitView {
    const ffo::Mat* X;
    const std::vector<int>* y;
};

SplitView pick_split(const ffo::PreparedSplits& data, const std::string& split) {
    if (split == "train") return {&data.train, &data.y_train};
    if (split == "val") return {&data.val, &data.y_val};
    if (split == "test") return {&data.test, &data.y_test};
    throw ffo::ConfigError("unknown split '" + split + "'");
}

int run_eval(const std::string& ckpt_path, const std::string& split, const std::string& report_path) {
    ffo::Checkpoint ck = ffo::load_checkpoint(ckpt_path);
    const ffo::ExperimentConfig& cfg = ck.config;
    ffo::PreparedSplits data = ffo::prepare_splits(cfg);
    SplitView view = pick_split(data, split);
    ffo::ConvPlan plan(cfg.dilation);

    ffo::Report rep;
    rep.arch = ffo::arch_name(cfg.arch);
    rep.eval_split = split;
    rep.config_hash = ffo::config_hash(cfg);
    rep.flops_per_sample = ffo::estimate_flops(cfg);
    rep.trainable_params = ck.trainable_params();

    std::vector<int> preds;
    if (cfg.arch == ffo::Arch::ebp2) {
        ffo::EBPNet net{ck.layers.at(0), ck.layers.at(1), *ck.fc_weights, *ck.fc_bias};
        preds = ffo::ebp_predict(net, *view.X, plan);
    } else {
        auto optics = ffo::make_optics(cfg);
        ffo::StageCache cache = ffo::open_stage_cache(cfg);
        ffo::Mat feats =
            ffo::readout_features(cfg, ck.layers, plan, optics.get(), *view.X, &cache, split);
        rep.transform_calls_readout = optics ? optics->calls() : 0;
        preds = ffo::predict(*ck.ridge, feats);
    }
    rep.eval_metrics = ffo::evaluate(preds, *view.y);
    if (split == "train") rep.train_accuracy = rep.eval_metrics.accuracy;
    if (split == "val") rep.val_accuracy = rep.eval_metrics.accuracy;
    if (split == "test") rep.test_accuracy = rep.eval_metrics.accuracy;
    if (!report_path.empty()) ffo::write_report_files(rep, report_path);
    std::cout << "{\"split\":\"" << split << "\",\"accuracy\":" << rep.eval_metrics.accuracy << "}\n";
    return 0;
}

int run_sweep(const std::string& ckpt_path, const std::string& alphas, const std::string& report_path) {
    ffo::Checkpoint ck = ffo::load_checkpoint(ckpt_path);
    ffo::ExperimentConfig cfg = ck.config;
    if (cfg.arch == ffo::Arch::ebp2)
        throw ffo::ConfigError("sweep requires a checkpoint with a ridge readout");
    if (!alphas.empty()) ffo::apply_config_kv(cfg, "alphas", alphas);
    ffo::PreparedSplits data = ffo::prepare_splits(cfg);
    ffo::ConvPlan plan(cfg.dilation);
    auto optics = ffo::make_optics(cfg);
    ffo::StageCache cache = ffo::open_stage_cache(cfg);
    ffo::Mat Xtr = ffo::readout_features(cfg, ck.layers, plan, optics.get(), data.train, &cache, "train");
    ffo::Mat Xval = ffo::readout_features(cfg, ck.layers, plan, optics.get(), data.val, &cache, "val");
    ffo::Mat Xte = ffo::readout_features(cfg, ck.layers, plan, optics.get(), data.test, &cache, "test");
    ffo::SweepResult sw =
        ffo::sweep_regularization(Xtr, data.y_train, Xval, data.y_val, cfg.effective_alphas());

    ffo::Report rep;
    rep.arch = ffo::arch_name(cfg.arch);
    rep.config_hash = ffo::config_hash(cfg);
    rep.flops_per_sample = ffo::estimate_flops(cfg);
    rep.trainable_params = ck.trainable_params();
    rep.transform_calls_readout = optics ? optics->calls() : 0;
    rep.sweep = sw.points;
    rep.best_alpha = sw.best_alpha;
    for (const auto& p : sw.points) {
        if (p.alpha == sw.best_alpha) {
            rep.train_accuracy = p.train_acc;
            rep.val_accuracy = p.val_acc;
        }
    }
    rep.eval_metrics = ffo::evaluate(ffo::predict(sw.best_model, Xte), data.y_test);
    rep.test_accuracy = rep.eval_metrics.accuracy;
    if (!report_path.empty()) ffo::write_report_files(rep, report_path);
    std::cout << "{\"best_alpha\":" << rep.best_alpha << ",\"val_accuracy\":" << rep.val_accuracy
              << ",\"test_accuracy\":" << rep.test_accuracy << "}\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forward-forward training with a simulated optical feature transform"};
    app.require_subcommand(1);

    auto* prep = app.add_subcommand("prepare", "parse the MNIST files and print the split summary");
    std::string prep_dir = "data/mnist";
    std::uint64_t prep_seed = 7;
    prep->add_option("--mnist-dir", prep_dir, "directory with the IDX files");
    prep->add_option("--seed", prep_seed, "split shuffle seed");

    auto* train = app.add_subcommand("train", "run one experiment end to end");
    std::string train_config, train_out = "checkpoint.ffoc", train_report;
    train->add_option("--config", train_config, "key=value config file");
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--report", train_report, "report JSON output path");
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& key : ffo::config_keys()) {
        train->add_option_function<std::string>(
            "--" + key, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
            "config override");
    }

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
    std::string eval_ckpt, eval_split = "test", eval_report;
    eval->add_option("--ckpt", eval_ckpt)->required();
    eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_option("--report", eval_report, "report JSON output path");

    auto* sweep = app.add_subcommand("sweep", "regularization sweep for a checkpoint's readout");
    std::string sweep_ckpt, sweep_alphas, sweep_report;
    sweep->add_option("--ckpt", sweep_ckpt)->required();
    sweep->add_option("--alphas", sweep_alphas, "comma-separated grid");
    sweep->add_option("--report", sweep_report, "report JSON output path");

    auto* fiber = app.add_subcommand("fiber", "physics checks");
    auto* self = fiber->add_subcommand("selfcheck", "conservation / linear-limit / grid-convergence");
    ffo::SelfcheckOptions self_opt;
    self->add_option("--modes", self_opt.modes);
    self->add_option("--grid", self_opt.grid);
    self->add_option("--dz", self_opt.dz);
    fiber->require_subcommand(1);

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(prep)) return run_prepare(prep_dir, prep_seed);
        if (app.got_subcommand(train)) return run_train(train_config, overrides, train_out, train_report);
        if (app.got_subcommand(eval)) return run_eval(eval_ckpt, eval_split, eval_report);
        if (app.got_subcommand(sweep)) return run_sweep(sweep_ckpt, sweep_alphas, sweep_report);
        if (app.got_subcommand(fiber)) return ffo::fiber_selfcheck(self_opt, std::cout);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0)
            std::cerr << "{\"error\":\"ConfigError\",\"message\":\"" << json_escape(e.what())
                      << "\"}\n";
        return app.exit(e);
    } catch (const ffo::Error& e) {
        std::cerr << "{\"error\":\"" << e.code << "\",\"message\":\"" << json_escape(e.what())
                  << "\"}\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"Internal\",\"message\":\"" << json_escape(e.what()) << "\"}\n";
        return 1;
    }
    return 0;
}
