#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ffoptics/checkpoint.hpp"
#include "ffoptics/config.hpp"
#include "ffoptics/dataset.hpp"
#include "ffoptics/ffnet.hpp"
#include "ffoptics/fiber.hpp"
#include "ffoptics/pipeline.hpp"
#include "ffoptics/report.hpp"
#include "ffoptics/ridge.hpp"
#include "ffoptics/rng.hpp"

namespace py = pybind11;
using namespace ffo;

namespace {

Polarity polarity_from(const std::string& s) {
    if (s == "positive" || s == "pos") return Polarity::positive;
    if (s == "negative" || s == "neg") return Polarity::negative;
    if (s == "neutral") return Polarity::neutral;
    throw ConfigError("unknown polarity '" + s + "'");
}

FFLayerParams layer_from(const Vec& kernel, double bias, int dilation, double theta) {
    if (kernel.size() != 25) throw DimensionMismatch("kernel must have 25 taps");
    FFLayerParams p;
    for (int t = 0; t < 25; ++t) p.kernel[std::size_t(t)] = kernel[t];
    p.bias = bias;
    p.dilation = dilation;
    p.theta = theta;
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "forward-forward training with a simulated optical feature transform";

    py::register_exception<Error>(m, "FFOpticsError");

    m.def(
        "embed_label",
        [](const Vec& canvas, int true_class, const std::string& polarity, std::uint64_t seed) {
            Canvas c(canvas.data(), canvas.data() + canvas.size());
            Rng rng(seed);
            EmbeddedSample s = embed_label(c, true_class, polarity_from(polarity), rng);
            return std::tuple(Vec(Eigen::Map<const Vec>(s.pixels.data(),
                                                        Eigen::Index(s.pixels.size()))),
                              s.marked_class);
        },
        py::arg("canvas"), py::arg("true_class"), py::arg("polarity"), py::arg("seed") = 0,
        "returns (embedded canvas, marked class)");

    m.def(
        "conv2d",
        [](const Mat& X, const Vec& kernel, double bias, int dilation) {
            FFLayerParams p = layer_from(kernel, bias, dilation, 0.0);
            return conv2d_dilated(X, p, ConvPlan(dilation));
        },
        py::arg("x"), py::arg("kernel"), py::arg("bias") = 0.0, py::arg("dilation") = 4,
        "dilated 5x5 convolution over rows of 32x32 canvases");

    m.def("relu", [](Mat z) { return relu(std::move(z)); }, py::arg("z"));
    m.def("l2_normalize_rows", &l2_normalize_rows, py::arg("x"));
    m.def("sigmoid", py::vectorize(sigmoid), py::arg("x"));
    m.def("softplus", py::vectorize(softplus), py::arg("x"));
    m.def("goodness", &goodness, py::arg("acts"), py::arg("theta"));
    m.def("ff_pair_loss", &ff_pair_loss, py::arg("pos_acts"), py::arg("neg_acts"), py::arg("theta"));

    m.def(
        "train_ff_layer",
        [](const Mat& pos, const Mat& neg, double theta, double lr, int batch, int epochs,
           int dilation, std::uint64_t seed) {
            FFLayerParams layer;
            layer.theta = theta;
            layer.dilation = dilation;
            OptimConfig oc;
            oc.lr = lr;
            oc.batch = batch;
            oc.epochs = epochs;
            Rng rng(seed);
            FFTrainStats st = train_ff_layer(layer, pos, neg, oc, rng, ConvPlan(dilation));
            Vec kernel(25);
            for (int t = 0; t < 25; ++t) kernel[t] = layer.kernel[std::size_t(t)];
            return std::tuple(kernel, layer.bias, st.mean_goodness_pos - st.mean_goodness_neg);
        },
        py::arg("pos"), py::arg("neg"), py::arg("theta") = 2.0, py::arg("lr") = 1e-3,
        py::arg("batch") = 64, py::arg("epochs") = 60, py::arg("dilation") = 4, py::arg("seed") = 1,
        "returns (kernel, bias, train goodness gap)");

    py::class_<RidgeModel>(m, "RidgeModel")
        .def_readonly("alpha", &RidgeModel::alpha)
        .def_readonly("weights", &RidgeModel::weights)
        .def("predict", [](const RidgeModel& mod, const Mat& X) { return predict(mod, X); },
             py::arg("x"));

    m.def("fit_ridge", &fit_ridge, py::arg("x"), py::arg("labels"), py::arg("alpha"));
    m.def(
        "sweep_regularization",
        [](const Mat& Xtr, const std::vector<int>& ytr, const Mat& Xval,
           const std::vector<int>& yval, const std::vector<double>& alphas) {
            SweepResult sw = sweep_regularization(Xtr, ytr, Xval, yval, alphas);
            py::list pts;
            for (const auto& p : sw.points)
                pts.append(py::dict(py::arg("alpha") = p.alpha, py::arg("train_acc") = p.train_acc,
                                    py::arg("val_acc") = p.val_acc));
            return std::tuple(pts, sw.best_alpha, sw.best_model);
        },
        py::arg("x_train"), py::arg("y_train"), py::arg("x_val"), py::arg("y_val"),
        py::arg("alphas"), "returns (points, best alpha, best model)");

    m.def("default_alpha_grid", &default_alpha_grid);
    m.def("estimate_flops",
          py::overload_cast<int, long>(&estimate_flops), py::arg("conv_layers"),
          py::arg("readout_dim"));

    py::class_<OpticalTransform>(m, "OpticalTransform")
        .def(py::init([](int modes, int grid, double dz, double gamma_knob, double power,
                         double waist, double coupling, double prune, std::uint64_t seed) {
                 FiberGeometry geom;
                 OpticsConfig cfg;
                 cfg.mode_count = modes;
                 cfg.grid_n = grid;
                 cfg.dz = dz;
                 cfg.power_scale = power;
                 cfg.beam_waist = waist;
                 cfg.seed = seed;
                 return std::make_unique<OpticalTransform>(
                     geom, cfg, coupling * geom.group_spacing(), prune, gamma_knob);
             }),
             py::arg("modes") = 45, py::arg("grid") = 64, py::arg("dz") = 1e-3,
             py::arg("gamma_knob") = 1.0, py::arg("power") = 1.0, py::arg("waist") = 0.0,
             py::arg("coupling") = 0.5, py::arg("prune") = 1e-3, py::arg("seed") = 2025)
        .def("__call__", &OpticalTransform::operator(), py::arg("features"))
        .def("apply_batch", &OpticalTransform::apply_batch, py::arg("features"))
        .def_property_readonly("calls", &OpticalTransform::calls)
        .def_property_readonly("mode_count",
                               [](const OpticalTransform& t) { return t.basis().mode_count; })
        .def_property_readonly("kerr_entries",
                               [](const OpticalTransform& t) { return t.kerr().entries.size(); });

    m.def(
        "run_experiment",
        [](const std::string& config_text) {
            ExperimentConfig cfg = parse_config_text(config_text);
            RunResult rr = run_experiment(cfg);
            return report_json(rr.report);
        },
        py::arg("config_text"), "full training run; returns the report as a JSON string");

    m.def("config_keys", &config_keys);
}
