#include "wigait/pipeline.hpp"

#include "wigait/dsp.hpp"
#include "wigait/features.hpp"
#include "wigait/manifest.hpp"
#include "wigait/rfsim.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace fs = std::filesystem;

namespace wigait {

namespace {

std::string stem_of(const std::string& path) {
    fs::path p(path);
    // strip one extension; recordings keep their ".rec" stem intact
    return p.stem().string();
}

std::string class_segment(const std::string& id) {
    std::string rest = id;
    if (rest.rfind("train-", 0) == 0) rest = rest.substr(6);
    auto dash = rest.find('-');
    return dash == std::string::npos ? rest : rest.substr(0, dash);
}

}  // namespace

Label label_from_id(const std::string& id) {
    std::string cls = class_segment(id);
    if (cls == "healthy") return Label::healthy;
    if (cls == "impaired" || cls == "unhealthy") return Label::unhealthy;
    return Label::unknown;
}

std::vector<std::string> cohort_ids(int per_class, bool train_pool) {
    check(per_class >= 1, "cohort: per-class count must be positive");
    std::vector<std::string> ids;
    ids.reserve(2 * static_cast<std::size_t>(per_class));
    const std::string prefix = train_pool ? "train-" : "";
    char buf[64];
    for (const char* cls : {"healthy", "impaired"}) {
        for (int i = 0; i < per_class; ++i) {
            std::snprintf(buf, sizeof buf, "%s%s-%02d", prefix.c_str(), cls, i);
            ids.emplace_back(buf);
        }
    }
    return ids;
}

MeshSequence synth_walker(const Config& cfg, const std::string& id,
                          std::uint64_t root_seed) {
    Label lab = label_from_id(id);
    check(lab != Label::unknown,
          "synth: id '" + id + "' does not name a class");
    const bool impaired = lab == Label::unhealthy;
    const PipelineConfig& p = cfg.pipeline;

    Rng draw(derive_seed(root_seed, "gait-" + id));
    const double speed =
        impaired ? draw.uniform(p.impaired_speed - p.impaired_speed_spread,
                                p.impaired_speed + p.impaired_speed_spread)
                 : draw.uniform(p.healthy_speed - p.healthy_speed_spread,
                                p.healthy_speed + p.healthy_speed_spread);
    const double cycle =
        impaired ? draw.uniform(p.impaired_cycle - p.impaired_cycle_spread,
                                p.impaired_cycle + p.impaired_cycle_spread)
                 : draw.uniform(p.healthy_cycle - p.healthy_cycle_spread,
                                p.healthy_cycle + p.healthy_cycle_spread);
    check(speed > 0.05, "synth: non-positive walking speed for " + id);
    check(cycle > 0.1, "synth: implausible gait cycle for " + id);

    SyntheticGaitParams g = SyntheticGaitParams::from_config(cfg.walker);
    g.mean_speed = speed;
    g.gait_cycle = cycle;
    g.modulation_depth = impaired ? p.impaired_modulation : p.healthy_modulation;

    const double duration = cfg.scene.walk_length / speed;
    MeshSequence seq =
        synthesize_walker(g, duration, cfg.walker.frame_rate,
                          derive_seed(root_seed, "mesh-" + id));
    for (auto& frame : seq.frames)
        for (auto& part : frame.points)
            for (auto& q : part) q.y() += cfg.scene.start_distance;
    seq.subject_id = id;
    seq.label = lab;
    return seq;
}

std::string stage_simulate(const Config& cfg, const std::string& mesh_path,
                           const std::string& out_dir, std::uint64_t seed) {
    MeshSequence seq = ingest_mesh_sequence(mesh_path);
    ChannelRecording rec =
        simulate_walk(seq, cfg.scene, cfg.scattering, seed,
                      AlphaConfig::from_config(cfg.geometry));

    nlohmann::json side;
    side["label"] = label_name(seq.label);
    side["origin"] = rec.origin;
    side["sample_rate"] = rec.sample_rate;
    side["source_mesh"] = fs::path(mesh_path).filename().string();
    side["subject_id"] = seq.subject_id;
    side["tool"] = kToolVersion;

    const std::string out =
        (fs::path(out_dir) / (stem_of(mesh_path) + ".rec")).string();
    write_recording(rec, out, side.dump(2) + "\n");
    read_recording(out).validate();
    return out;
}

std::string stage_spectrogram(const Config& cfg, const std::string& rec_path,
                              const std::string& out_dir, bool render) {
    ChannelRecording rec = read_recording(rec_path);
    Spectrogram sg = spectrogram_pipeline(rec, cfg.dsp);
    sg.source_id = stem_of(rec_path);
    const std::string out =
        (fs::path(out_dir) / (sg.source_id + ".spg")).string();
    write_spectrogram(sg, out);
    read_spectrogram(out).validate();
    if (render)
        render_pgm(sg, (fs::path(out_dir) / (sg.source_id + ".pgm")).string());
    return out;
}

GaitFeatureVector stage_features(const Config& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(static_cast<bool>(in), path + ": cannot open input");
    char magic[8] = {};
    in.read(magic, 8);
    in.close();
    Spectrogram sg;
    if (std::string(magic, 8) == "WGSPGRM1") {
        sg = read_spectrogram(path);
    } else if (std::string(magic, 8) == "WGCHREC1") {
        sg = spectrogram_pipeline(read_recording(path), cfg.dsp);
        sg.source_id = stem_of(path);
    } else {
        throw error(path + ": neither a spectrogram nor a recording");
    }
    GaitFeatureVector f = extract_rf_features(sg, cfg.scene, cfg.features);
    f.subject_id = f.sample_id;
    f.label = label_from_id(f.sample_id);
    return f;
}

double class_separation(const std::vector<LabeledSample>& rows, int feature) {
    check(feature >= 0 && feature < 6, "separation: feature index out of range");
    double sum[2] = {0, 0}, sq[2] = {0, 0};
    long n[2] = {0, 0};
    for (const auto& s : rows) {
        check(s.label == 0 || s.label == 1, "separation: label out of range");
        double v = s.x[static_cast<std::size_t>(feature)];
        sum[s.label] += v;
        sq[s.label] += v * v;
        n[s.label] += 1;
    }
    check(n[0] > 0 && n[1] > 0, "separation: need both classes");
    double mu[2], sd[2];
    for (int c = 0; c < 2; ++c) {
        mu[c] = sum[c] / n[c];
        sd[c] = std::sqrt(std::max(0.0, sq[c] / n[c] - mu[c] * mu[c]));
    }
    const double gap = std::abs(mu[0] - mu[1]);
    const double spread = std::max(sd[0], sd[1]);
    if (spread <= 1e-12)
        return gap > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    return gap / spread;
}

std::string protocol_report_text(const PipelineSummary& s) {
    std::ostringstream os;
    os << s.protocol.pooled.to_text();
    char buf[160];
    std::snprintf(buf, sizeof buf, "separation_avg_speed = %.6f\n",
                  s.separation_avg_speed);
    os << buf;
    std::snprintf(buf, sizeof buf, "round_mean_class_accuracy = %.6f\n",
                  s.protocol.round_mean_class_accuracy);
    os << buf;
    os << "rounds = " << s.protocol.rounds.size() << "\n";
    for (std::size_t i = 0; i < s.protocol.rounds.size(); ++i) {
        const auto& r = s.protocol.rounds[i];
        std::snprintf(buf, sizeof buf,
                      "round %zu: weight = %.6f class_mean = %.6f samples = %ld\n",
                      i, r.weight, r.report.class_mean, r.report.samples);
        os << buf;
    }
    return os.str();
}

PipelineSummary run_pipeline(const Config& cfg, std::uint64_t seed,
                             const std::string& out_dir) {
    const fs::path root(out_dir);
    const fs::path meshes = root / "meshes";
    const fs::path recordings = root / "recordings";
    const fs::path spectrograms = root / "spectrograms";
    const fs::path features_dir = root / "features";
    const fs::path models = root / "models";
    for (const auto& d :
         {root, meshes, recordings, spectrograms, features_dir, models})
        fs::create_directories(d);

    RunManifest man;
    man.command = "pipeline";
    man.seed = seed;
    man.config_text = cfg.to_kv().canonical_text();

    std::vector<std::string> ids = cohort_ids(cfg.pipeline.count_per_class, false);
    {
        auto train_ids = cohort_ids(cfg.pipeline.train_per_class, true);
        ids.insert(ids.end(), train_ids.begin(), train_ids.end());
    }

    std::vector<GaitFeatureVector> eval_rows, train_rows;
    for (const auto& id : ids) {
        MeshSequence seq = synth_walker(cfg, id, seed);
        const std::string mesh_path = (meshes / (id + ".json")).string();
        write_mesh_sequence(seq, mesh_path);
        man.add_output(mesh_path);

        const std::string rec_path = stage_simulate(
            cfg, mesh_path, recordings.string(), derive_seed(seed, "sim-" + id));
        man.add_output(rec_path);
        man.add_output(rec_path + ".meta.json");

        const std::string spg_path =
            stage_spectrogram(cfg, rec_path, spectrograms.string(), false);
        man.add_output(spg_path);

        GaitFeatureVector f = stage_features(cfg, spg_path);
        f.validate();
        check(f.label != Label::unknown, "pipeline: unlabeled sample " + id);
        (id.rfind("train-", 0) == 0 ? train_rows : eval_rows).push_back(f);
    }

    const std::string eval_csv = (features_dir / "eval.csv").string();
    const std::string train_csv = (features_dir / "train.csv").string();
    write_feature_table(eval_rows, eval_csv);
    write_feature_table(train_rows, train_csv);
    man.add_output(eval_csv);
    man.add_output(train_csv);

    PipelineSummary summary;
    summary.eval_rows = eval_rows.size();
    summary.train_rows = train_rows.size();

    std::vector<LabeledSample> eval_pool = to_samples(eval_rows);
    std::vector<LabeledSample> train_set = to_samples(train_rows);
    summary.separation_avg_speed = class_separation(eval_pool, 0);

    summary.protocol = protocol_run(train_set, eval_pool, cfg.train,
                                    derive_seed(seed, "protocol"));
    for (std::size_t r = 0; r < summary.protocol.rounds.size(); ++r) {
        const std::string model_path =
            (models / ("round-" + std::to_string(r) + ".bin")).string();
        write_model(summary.protocol.rounds[r].model, model_path);
        man.add_output(model_path);
    }

    summary.report_path = (root / "report.txt").string();
    atomic_write(summary.report_path, protocol_report_text(summary));
    man.add_output(summary.report_path);

    man.write(out_dir);  // last, so the manifest covers every artifact
    for (const auto& [path, digest] : man.outputs) summary.outputs.push_back(path);
    summary.outputs.push_back((root / "manifest.json").string());
    return summary;
}

}  // namespace wigait
