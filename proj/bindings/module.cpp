#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "tempattn/checkpoint.hpp"
#include "tempattn/explain.hpp"
#include "tempattn/pipeline.hpp"
#include "tempattn/temporal.hpp"

namespace py = pybind11;
using namespace tempattn;

namespace {

Video video_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 4) throw Error("frames must be [T, C, H, W]");
    Video v(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
            static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(3)));
    std::memcpy(v.data.data(), arr.data(), v.data.size() * sizeof(float));
    return v;
}

py::array_t<float> array_from_video(const Video& v) {
    py::array_t<float> arr({v.t, v.c, v.h, v.w});
    std::memcpy(arr.mutable_data(), v.data.data(), v.data.size() * sizeof(float));
    return arr;
}

py::dict trajectory_to_dict(const Trajectory& traj) {
    py::dict d;
    d["frames"] = array_from_video(traj.frames);
    if (traj.has_masks()) {
        py::array_t<uint8_t> masks({traj.frames.t, traj.frames.h, traj.frames.w});
        std::memcpy(masks.mutable_data(), traj.masks.data(), traj.masks.size());
        d["masks"] = masks;
    } else {
        d["masks"] = py::none();
    }
    d["label"] = to_string(traj.label);
    d["traj_id"] = traj.traj_id;
    d["source_id"] = traj.source_id;
    d["min_length"] = traj.min_length;
    d["generator_seed"] = traj.generator_seed;
    return d;
}

Trajectory trajectory_from_args(const py::array_t<float, py::array::c_style | py::array::forcecast>& frames,
                                const py::object& masks, const std::string& label,
                                const std::string& traj_id, const std::string& source_id,
                                int min_length, uint64_t generator_seed) {
    Trajectory traj;
    traj.frames = video_from_array(frames);
    if (!masks.is_none()) {
        auto m = py::cast<py::array_t<uint8_t, py::array::c_style | py::array::forcecast>>(masks);
        if (m.ndim() != 3) throw Error("masks must be [T, H, W]");
        traj.masks.resize(static_cast<size_t>(m.size()));
        std::memcpy(traj.masks.data(), m.data(), traj.masks.size());
    }
    traj.label = label_from_string(label);
    traj.traj_id = traj_id;
    traj.source_id = source_id;
    traj.min_length = min_length;
    traj.generator_seed = generator_seed;
    traj.valid_length = traj.frames.t;
    return traj;
}

class PyModel {
public:
    PyModel(const std::string& checkpoint_path, const std::string& manifest_path)
        : model_(checkpoint::load_model(checkpoint_path, manifest_path)) {}

    py::dict predict(const py::array_t<float, py::array::c_style | py::array::forcecast>& frames) {
        Trajectory traj;
        traj.frames = video_from_array(frames);
        traj.valid_length = traj.frames.t;
        traj.min_length = 1;
        auto pred = model_.predict(traj);
        py::dict d;
        d["logit"] = pred.logit;
        d["probability"] = pred.probability;
        d["label"] = to_string(pred.label);
        py::array_t<double> attn(static_cast<py::ssize_t>(pred.attention.weights.size()));
        std::memcpy(attn.mutable_data(), pred.attention.weights.data(),
                    pred.attention.weights.size() * sizeof(double));
        d["attention"] = attn;
        return d;
    }

private:
    model::FateModel<float> model_;
};

config::RunConfig config_from_py(const std::string& config_file,
                                 const std::map<std::string, std::string>& overrides,
                                 const std::string& out_dir, int64_t seed, int threads) {
    config::RunConfig cfg = config_file.empty() ? config::RunConfig()
                                                : config::RunConfig::from_file(config_file);
    for (const auto& [k, v] : overrides) cfg.apply_override(k, v);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed >= 0) cfg.master_seed = static_cast<uint64_t>(seed);
    if (threads >= 0) cfg.threads = threads;
    cfg.finalize();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Temporal-attention cell fate toolkit (C++ core)";
    m.attr("__version__") = std::string(kVersion);

    py::register_exception<Error>(m, "TempattnError");

    py::class_<trajgen::SyntheticSpec>(m, "SyntheticSpec")
        .def(py::init<>())
        .def_readwrite("n_sequences", &trajgen::SyntheticSpec::n_sequences)
        .def_readwrite("class_fraction_apoptosis",
                       &trajgen::SyntheticSpec::class_fraction_apoptosis)
        .def_readwrite("t_min", &trajgen::SyntheticSpec::t_min)
        .def_readwrite("t_max", &trajgen::SyntheticSpec::t_max)
        .def_readwrite("height", &trajgen::SyntheticSpec::height)
        .def_readwrite("width", &trajgen::SyntheticSpec::width)
        .def_readwrite("channels", &trajgen::SyntheticSpec::channels)
        .def_readwrite("late_window", &trajgen::SyntheticSpec::late_window)
        .def_readwrite("growth_factor", &trajgen::SyntheticSpec::growth_factor)
        .def_readwrite("circularization", &trajgen::SyntheticSpec::circularization)
        .def_readwrite("apoptosis_size_factor",
                       &trajgen::SyntheticSpec::apoptosis_size_factor)
        .def_readwrite("intensity_gain", &trajgen::SyntheticSpec::intensity_gain)
        .def_readwrite("designated_channel", &trajgen::SyntheticSpec::designated_channel)
        .def_readwrite("noise_std", &trajgen::SyntheticSpec::noise_std)
        .def_readwrite("clutter_prob", &trajgen::SyntheticSpec::clutter_prob)
        .def_readwrite("master_seed", &trajgen::SyntheticSpec::master_seed);

    m.def(
        "generate_trajectory",
        [](const trajgen::SyntheticSpec& spec, const std::string& label, int index) {
            return trajectory_to_dict(
                trajgen::generate_trajectory(spec, label_from_string(label), index));
        },
        py::arg("spec"), py::arg("label"), py::arg("index"),
        "Generate one synthetic trajectory (deterministic in spec, label, index)");

    m.def(
        "save_trajectory",
        [](const std::string& path, const py::array_t<float, py::array::c_style | py::array::forcecast>& frames,
           const py::object& masks, const std::string& label, const std::string& traj_id,
           const std::string& source_id, int min_length, uint64_t generator_seed) {
            trajgen::save_trajectory(
                trajectory_from_args(frames, masks, label, traj_id, source_id, min_length,
                                     generator_seed),
                path);
        },
        py::arg("path"), py::arg("frames"), py::arg("masks") = py::none(),
        py::arg("label") = "mitosis", py::arg("traj_id") = "", py::arg("source_id") = "",
        py::arg("min_length") = 11, py::arg("generator_seed") = 0);

    m.def("load_trajectory",
          [](const std::string& path) { return trajectory_to_dict(trajgen::load_trajectory(path)); });

    m.def(
        "split_dataset",
        [](const std::vector<std::pair<std::string, std::string>>& labels,
           std::array<double, 3> ratios, uint64_t seed) {
            std::vector<std::pair<std::string, Label>> typed;
            typed.reserve(labels.size());
            for (const auto& [id, lab] : labels) typed.emplace_back(id, label_from_string(lab));
            auto split = trajgen::split_dataset(typed, ratios, seed);
            py::dict d;
            d["train"] = split.train;
            d["val"] = split.val;
            d["test"] = split.test;
            return d;
        },
        py::arg("labels"), py::arg("ratios") = std::array<double, 3>{0.8, 0.1, 0.1},
        py::arg("seed") = 0);

    m.def(
        "positional_encoding",
        [](int n, int d) {
            auto pe = temporal::positional_encoding(n, d);
            py::array_t<double> arr({n, d});
            auto r = arr.mutable_unchecked<2>();
            for (int pos = 0; pos < n; ++pos)
                for (int i = 0; i < d; ++i) r(pos, i) = pe(i, pos);
            return arr;
        },
        py::arg("n_positions"), py::arg("dim"),
        "Sinusoidal positional encoding, [n_positions, dim]; position 0 is the CLS slot");

    m.def("balanced_accuracy", [](long long tp, long long fn, long long fp, long long tn) {
        return eval::balanced_accuracy({tp, fn, fp, tn});
    });
    m.def("f1_macro", [](long long tp, long long fn, long long fp, long long tn) {
        return eval::f1_macro({tp, fn, fp, tn});
    });

    m.def("cliffs_delta", [](const std::vector<double>& x, const std::vector<double>& y) {
        return explain::cliffs_delta(x, y);
    });
    m.def(
        "permutation_test",
        [](const std::vector<double>& x, const std::vector<double>& y, int iterations,
           uint64_t seed) { return explain::permutation_test(x, y, iterations, seed); },
        py::arg("x"), py::arg("y"), py::arg("iterations") = 50000, py::arg("seed") = 0);
    m.def(
        "median_ci",
        [](const std::vector<double>& values, double level, int resamples, uint64_t seed) {
            auto ci = explain::median_ci(values, level, resamples, seed);
            return py::make_tuple(ci.median, ci.lo, ci.hi);
        },
        py::arg("values"), py::arg("level") = 0.95, py::arg("resamples") = 10000,
        py::arg("seed") = 0);
    m.def(
        "partition_frames",
        [](const std::vector<double>& weights, double q) {
            auto part = explain::partition_frames(weights, q);
            py::dict d;
            d["tau"] = part.tau;
            d["high"] = part.high;
            d["low"] = part.low;
            d["degenerate"] = part.degenerate;
            return d;
        },
        py::arg("weights"), py::arg("quantile") = 0.9);

    m.def("compute_features",
          [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& mask,
             const py::array_t<float, py::array::c_style | py::array::forcecast>& frame) {
              if (mask.ndim() != 2 || frame.ndim() != 3)
                  throw Error("compute_features: mask must be [H,W], frame [C,H,W]");
              morphfeat::Bitmap bm(static_cast<int>(mask.shape(0)),
                                   static_cast<int>(mask.shape(1)));
              std::memcpy(bm.px.data(), mask.data(), bm.px.size());
              auto fv = morphfeat::compute_features(
                  bm, frame.data(), static_cast<int>(frame.shape(0)),
                  static_cast<int>(frame.shape(1)), static_cast<int>(frame.shape(2)));
              py::dict d;
              d["area"] = fv.area;
              d["perimeter"] = fv.perimeter;
              d["equiv_diameter"] = fv.equiv_diameter;
              d["eccentricity"] = fv.eccentricity;
              d["solidity"] = fv.solidity;
              d["circularity"] = fv.circularity;
              d["mean_intensity"] = fv.mean_intensity;
              d["degenerate"] = fv.degenerate;
              return d;
          });

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::string&, const std::string&>(), py::arg("checkpoint"),
             py::arg("manifest"))
        .def("predict", &PyModel::predict, py::arg("frames"),
             "Run inference on [T, C, H, W] float32 frames");

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_file,
           const std::map<std::string, std::string>& overrides, const std::string& out_dir,
           int64_t seed, int threads) {
            config::RunConfig cfg = config_from_py(config_file, overrides, out_dir, seed,
                                                   threads);
            if (command == "generate") pipeline::cmd_generate(cfg);
            else if (command == "train") pipeline::cmd_train(cfg);
            else if (command == "eval") pipeline::cmd_eval(cfg);
            else if (command == "sweep_truncate")
                pipeline::cmd_sweep(cfg, eval::Protocol::TruncateTail, cfg.k_list);
            else if (command == "sweep_keep_last")
                pipeline::cmd_sweep(cfg, eval::Protocol::KeepLast, cfg.k_list);
            else if (command == "explain") pipeline::cmd_explain(cfg);
            else if (command == "features") pipeline::cmd_features(cfg);
            else throw Error("unknown command: " + command);
        },
        py::arg("command"), py::arg("config_file") = "",
        py::arg("overrides") = std::map<std::string, std::string>{},
        py::arg("out_dir") = "", py::arg("seed") = -1, py::arg("threads") = -1,
        "Run a pipeline command (generate | train | eval | sweep_* | explain | features)");
}
