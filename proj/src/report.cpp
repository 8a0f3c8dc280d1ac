#include "ffoptics/report.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ffoptics/common.hpp"

namespace ffo {

namespace {

struct NamedRow {
    const char* arch;
    PublishedRow row;
};

constexpr NamedRow kPublished[] = {
    {"ebp2", {91.8, 14398, "143 K"}},
    {"ffa3", {90.8, 26712, "204 K"}},
    {"ffa2_optics", {94.4, 24638, "150 K"}},
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

const PublishedRow* published_row(const std::string& arch) {
    for (const auto& r : kPublished)
        if (arch == r.arch) return &r.row;
    return nullptr;
}

std::string report_json(const Report& r) {
    nlohmann::ordered_json j;
    j["arch"] = r.arch;
    if (!r.eval_split.empty()) j["eval_split"] = r.eval_split;
    j["config_hash"] = r.config_hash;
    j["accuracy"] = {{"train", r.train_accuracy}, {"val", r.val_accuracy}, {"test", r.test_accuracy}};
    auto conf = nlohmann::ordered_json::array();
    for (const auto& row : r.eval_metrics.confusion) {
        auto jr = nlohmann::ordered_json::array();
        for (long c : row) jr.push_back(c);
        conf.push_back(jr);
    }
    j["confusion"] = conf;
    j["trainable_params"] = r.trainable_params;
    j["flops_per_sample"] = r.flops_per_sample;
    j["flops_formula"] = "2*kernel_taps*output_pixels per conv layer + 2*D*10 readout";
    if (!r.sweep.empty()) {
        j["best_alpha"] = r.best_alpha;
        auto sw = nlohmann::ordered_json::array();
        for (const auto& p : r.sweep)
            sw.push_back({{"alpha", p.alpha}, {"train_acc", p.train_acc}, {"val_acc", p.val_acc}});
        j["sweep"] = sw;
    }
    if (!r.goodness_gaps.empty()) j["goodness_gaps"] = r.goodness_gaps;
    j["transform_calls"] = {{"train_cache", r.transform_calls_train},
                            {"readout", r.transform_calls_readout}};
    if (const PublishedRow* p = published_row(r.arch)) {
        j["published"] = {{"test_accuracy_pct", p->accuracy_pct},
                          {"params", p->params},
                          {"flops", p->flops}};
    }
    j["wall_seconds"] = r.wall_seconds;
    return j.dump(2) + "\n";
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::string out = "alpha,train_acc,val_acc\n";
    for (const auto& p : points)
        out += fmt(p.alpha) + "," + fmt(p.train_acc) + "," + fmt(p.val_acc) + "\n";
    return out;
}

std::string confusion_csv(const Metrics& m) {
    std::string out;
    for (const auto& row : m.confusion) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ",";
            out += std::to_string(row[c]);
        }
        out += "\n";
    }
    return out;
}

void write_report_files(const Report& r, const std::string& json_path) {
    auto put = [](const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + path);
        f << text;
    };
    put(json_path, report_json(r));
    std::string stem = json_path;
    if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json") stem.resize(stem.size() - 5);
    if (!r.sweep.empty()) put(stem + "_sweep.csv", sweep_csv(r.sweep));
    put(stem + "_confusion.csv", confusion_csv(r.eval_metrics));
}

}  // namespace ffo
