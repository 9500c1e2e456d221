#include "wigait/classifier.hpp"
#include "wigait/config.hpp"
#include "wigait/dsp.hpp"
#include "wigait/features.hpp"
#include "wigait/manifest.hpp"
#include "wigait/mesh.hpp"
#include "wigait/pipeline.hpp"
#include "wigait/rfsim.hpp"

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace wigait;

namespace {

// Flat "section.key" -> value overrides on top of the built-in defaults;
// values are stringified, matching the config file syntax.
Config config_from(const py::dict& overrides) {
    KeyValueFile kv;
    for (auto item : overrides)
        kv.set(py::cast<std::string>(item.first),
               py::cast<std::string>(py::str(item.second)));
    return Config::from_kv(kv);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "WiFi gait analysis core: synthesis, channel simulation, Doppler "
              "feature extraction, and the gait-health classifier";

    py::class_<MeshSequence>(m, "MeshSequence")
        .def_readwrite("subject_id", &MeshSequence::subject_id)
        .def_readonly("fps", &MeshSequence::fps)
        .def_readonly("units", &MeshSequence::units)
        .def_property(
            "label",
            [](const MeshSequence& s) { return label_name(s.label); },
            [](MeshSequence& s, const std::string& v) {
                s.label = label_from_name(v);
            })
        .def_property_readonly(
            "frames", [](const MeshSequence& s) { return s.frames.size(); })
        .def("duration", &MeshSequence::duration)
        .def("validate", &MeshSequence::validate);

    py::class_<ChannelRecording>(m, "ChannelRecording")
        .def_readonly("sample_rate", &ChannelRecording::sample_rate)
        .def_readonly("wavelength", &ChannelRecording::wavelength)
        .def_readonly("origin", &ChannelRecording::origin)
        .def_property_readonly(
            "streams", [](const ChannelRecording& r) { return r.streams.size(); })
        .def("samples", &ChannelRecording::samples)
        .def("stream",
             [](const ChannelRecording& r, std::size_t i) {
                 check(i < r.streams.size(), "stream index out of range");
                 return r.streams[i];
             },
             py::arg("index") = 0)
        .def("validate", &ChannelRecording::validate);

    py::class_<Spectrogram>(m, "Spectrogram")
        .def_readwrite("source_id", &Spectrogram::source_id)
        .def_readonly("time_step", &Spectrogram::time_step)
        .def_readonly("frequency_bins", &Spectrogram::frequency_bins)
        .def_readonly("magnitudes", &Spectrogram::magnitudes)
        .def_property_readonly(
            "frames", [](const Spectrogram& s) { return s.frames(); })
        .def_property_readonly("bins",
                               [](const Spectrogram& s) { return s.bins(); })
        .def("validate", &Spectrogram::validate);

    py::class_<GaitFeatureVector>(m, "GaitFeatureVector")
        .def_readonly("avg_speed", &GaitFeatureVector::avg_speed)
        .def_readonly("min_speed", &GaitFeatureVector::min_speed)
        .def_readonly("max_speed", &GaitFeatureVector::max_speed)
        .def_readonly("gait_cycle", &GaitFeatureVector::gait_cycle)
        .def_readonly("step_length", &GaitFeatureVector::step_length)
        .def_readonly("speed_variation", &GaitFeatureVector::speed_variation)
        .def_readonly("cycle_missing", &GaitFeatureVector::cycle_missing)
        .def_readwrite("subject_id", &GaitFeatureVector::subject_id)
        .def_readwrite("sample_id", &GaitFeatureVector::sample_id)
        .def_readonly("modality", &GaitFeatureVector::modality)
        .def_property(
            "label",
            [](const GaitFeatureVector& f) { return label_name(f.label); },
            [](GaitFeatureVector& f, const std::string& v) {
                f.label = label_from_name(v);
            })
        .def("values", &GaitFeatureVector::values);

    py::class_<LabeledSample>(m, "LabeledSample")
        .def(py::init([](const std::array<double, 6>& x, int label,
                         const std::string& subject_id,
                         const std::string& sample_id,
                         const std::string& condition) {
                 LabeledSample s;
                 s.x = x;
                 s.label = label;
                 s.subject_id = subject_id;
                 s.sample_id = sample_id;
                 s.condition = condition.empty()
                                   ? (label == 1 ? "unhealthy" : "healthy")
                                   : condition;
                 return s;
             }),
             py::arg("x"), py::arg("label"), py::arg("subject_id"),
             py::arg("sample_id") = "", py::arg("condition") = "")
        .def_readonly("x", &LabeledSample::x)
        .def_readonly("label", &LabeledSample::label)
        .def_readonly("subject_id", &LabeledSample::subject_id);

    py::class_<MlpModel>(m, "MlpModel")
        .def_readonly("seed", &MlpModel::seed)
        .def("predict",
             [](const MlpModel& model, const std::array<double, 6>& x) {
                 auto [cls, p] = predict(model, x);
                 return py::make_tuple(cls, p);
             })
        .def("save", [](const MlpModel& model, const std::string& path) {
            write_model(model, path);
        })
        .def_static("load", &read_model);

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("samples", &EvalReport::samples)
        .def_readonly("subject_accuracy", &EvalReport::subject_accuracy)
        .def_readonly("majority_accuracy", &EvalReport::majority_accuracy)
        .def_readonly("healthy_accuracy", &EvalReport::healthy_accuracy)
        .def_readonly("unhealthy_accuracy", &EvalReport::unhealthy_accuracy)
        .def_readonly("class_mean", &EvalReport::class_mean)
        .def_readonly("confusion", &EvalReport::confusion)
        .def("condition_accuracy", &EvalReport::condition_accuracy)
        .def("to_text", &EvalReport::to_text);

    py::class_<ProtocolRound>(m, "ProtocolRound")
        .def_readonly("weight", &ProtocolRound::weight)
        .def_readonly("adaptation_subjects", &ProtocolRound::adaptation_subjects)
        .def_readonly("report", &ProtocolRound::report)
        .def_readonly("model", &ProtocolRound::model);

    py::class_<ProtocolResult>(m, "ProtocolResult")
        .def_readonly("pooled", &ProtocolResult::pooled)
        .def_readonly("round_mean_class_accuracy",
                      &ProtocolResult::round_mean_class_accuracy)
        .def_readonly("rounds", &ProtocolResult::rounds);

    // ---- synthesis and simulation ----
    m.def(
        "synthesize_walker",
        [](double mean_speed, double gait_cycle, double duration, double fps,
           std::uint64_t seed, double modulation_depth, double asymmetry) {
            SyntheticGaitParams p;
            p.mean_speed = mean_speed;
            p.gait_cycle = gait_cycle;
            p.modulation_depth = modulation_depth;
            p.asymmetry = asymmetry;
            return synthesize_walker(p, duration, fps, seed);
        },
        py::arg("mean_speed") = 1.0, py::arg("gait_cycle") = 1.2,
        py::arg("duration") = 4.0, py::arg("fps") = 30.0, py::arg("seed") = 0,
        py::arg("modulation_depth") = 0.08, py::arg("asymmetry") = 0.0,
        "Parametric walker walking along +y from y=0");
    m.def(
        "synth_walker",
        [](const std::string& id, std::uint64_t seed, const py::dict& config) {
            return synth_walker(config_from(config), id, seed);
        },
        py::arg("id"), py::arg("seed") = 0, py::arg("config") = py::dict(),
        "Cohort member named '[train-]healthy-NN' or '[train-]impaired-NN', "
        "placed at the scene start line");
    m.def(
        "simulate",
        [](const MeshSequence& seq, std::uint64_t seed, const py::dict& config) {
            Config c = config_from(config);
            return simulate_walk(seq, c.scene, c.scattering, seed,
                                 AlphaConfig::from_config(c.geometry));
        },
        py::arg("sequence"), py::arg("seed") = 0, py::arg("config") = py::dict(),
        "Born-approximation channel recording of a walk");

    // ---- processing ----
    m.def(
        "spectrogram",
        [](const ChannelRecording& rec, const py::dict& config) {
            return spectrogram_pipeline(rec, config_from(config).dsp);
        },
        py::arg("recording"), py::arg("config") = py::dict(),
        "Multitaper Doppler spectrogram (PCA-averaged for measured input)");
    m.def(
        "rf_features",
        [](const Spectrogram& sg, const py::dict& config) {
            Config c = config_from(config);
            GaitFeatureVector f = extract_rf_features(sg, c.scene, c.features);
            f.subject_id = f.sample_id;
            f.label = label_from_id(f.sample_id);
            return f;
        },
        py::arg("spectrogram"), py::arg("config") = py::dict());
    m.def(
        "video_features",
        [](const MeshSequence& seq, const py::dict& config) {
            return extract_video_features(seq, config_from(config).features);
        },
        py::arg("sequence"), py::arg("config") = py::dict());

    // ---- classifier ----
    m.def("to_samples", &to_samples, py::arg("features"));
    m.def(
        "train",
        [](const std::vector<LabeledSample>& data, double class_weight,
           std::uint64_t seed, const py::dict& config) {
            return train(data, config_from(config).train, class_weight, seed);
        },
        py::arg("data"), py::arg("class_weight") = 1.0, py::arg("seed") = 0,
        py::arg("config") = py::dict());
    m.def(
        "evaluate",
        [](const MlpModel& model, const std::vector<LabeledSample>& test) {
            return evaluate(model, test);
        },
        py::arg("model"), py::arg("test"));
    m.def(
        "domain_adapt",
        [](const std::vector<LabeledSample>& train_set,
           const std::vector<LabeledSample>& adapt_set, std::uint64_t seed,
           const py::dict& config) {
            AdaptResult r =
                domain_adapt(train_set, adapt_set, config_from(config).train, seed);
            return py::make_tuple(r.weight, r.per_repeat);
        },
        py::arg("train_set"), py::arg("adapt_set"), py::arg("seed") = 0,
        py::arg("config") = py::dict());
    m.def(
        "protocol_run",
        [](const std::vector<LabeledSample>& train_set,
           const std::vector<LabeledSample>& eval_pool, std::uint64_t seed,
           const py::dict& config) {
            return protocol_run(train_set, eval_pool, config_from(config).train,
                                seed);
        },
        py::arg("train_set"), py::arg("eval_pool"), py::arg("seed") = 0,
        py::arg("config") = py::dict());

    // ---- end to end ----
    m.def(
        "run_pipeline",
        [](std::uint64_t seed, const std::string& out_dir, const py::dict& config) {
            PipelineSummary s = run_pipeline(config_from(config), seed, out_dir);
            py::dict d;
            d["class_mean"] = s.protocol.pooled.class_mean;
            d["healthy_accuracy"] = s.protocol.pooled.healthy_accuracy;
            d["unhealthy_accuracy"] = s.protocol.pooled.unhealthy_accuracy;
            d["separation_avg_speed"] = s.separation_avg_speed;
            d["eval_rows"] = s.eval_rows;
            d["train_rows"] = s.train_rows;
            d["report_path"] = s.report_path;
            d["rounds"] = s.protocol.rounds.size();
            return d;
        },
        py::arg("seed"), py::arg("out_dir"), py::arg("config") = py::dict(),
        "Full synth -> simulate -> spectrogram -> features -> protocol run; "
        "all intermediates persisted under out_dir");

    // ---- container IO ----
    m.def("write_mesh_sequence", &write_mesh_sequence);
    m.def("ingest_mesh_sequence", &ingest_mesh_sequence);
    m.def("write_recording", &write_recording, py::arg("recording"),
          py::arg("path"), py::arg("sidecar_json") = "{}\n");
    m.def("read_recording", &read_recording);
    m.def("write_spectrogram", &write_spectrogram);
    m.def("read_spectrogram", &read_spectrogram);
    m.def("render_pgm", &render_pgm);
    m.def("write_feature_table", &write_feature_table);
    m.def("read_feature_table", &read_feature_table);

    m.def("label_from_id", [](const std::string& id) {
        return label_name(label_from_id(id));
    });
    m.def("derive_seed", &derive_seed, py::arg("root"), py::arg("tag"));

    py::register_exception<error>(m, "WigaitError", PyExc_RuntimeError);
}
