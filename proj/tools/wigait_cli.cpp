#include "wigait/classifier.hpp"
#include "wigait/config.hpp"
#include "wigait/dsp.hpp"
#include "wigait/features.hpp"
#include "wigait/manifest.hpp"
#include "wigait/mesh.hpp"
#include "wigait/pipeline.hpp"
#include "wigait/rfsim.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace wigait;

namespace {

constexpr const char* kUsage = R"(usage: wigait <command> [options] [inputs...]

commands:
  synth        write a synthetic walker cohort (mesh sequences)
  simulate     mesh sequences -> channel recordings
  spectrogram  recordings -> Doppler spectrograms (--render adds PGM images)
  features     spectrograms or recordings -> gait feature table
  train        feature table -> classifier model (--weight sets the class weight)
  adapt        train.csv adapt.csv -> weight search + adapted model
  evaluate     model.bin test.csv -> accuracy report
  pipeline     full synth -> simulate -> spectrogram -> features -> protocol run

options:
  --config FILE   key-value configuration file
  --set K=V       override one config key (repeatable), e.g. --set dsp.tapers=3
  --seed N        root seed (default 0)
  --out DIR       output directory (default .)
  --count N       walkers per class for synth (mirrors pipeline.count_per_class)
  --weight W      class weight for train (default 1.0)
  --render        spectrogram only: also write PGM renders
)";

struct Args {
    std::string command;
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool render = false;
    double weight = 1.0;
    int count = -1;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::vector<std::string> inputs;
};

Args parse_args(int argc, char** argv) {
    Args a;
    check(argc >= 2, std::string("missing command\n") + kUsage);
    a.command = argv[1];
    auto need_value = [&](int i, const std::string& flag) {
        check(i + 1 < argc, flag + " needs a value");
        return std::string(argv[i + 1]);
    };
    for (int i = 2; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--config") {
            a.config_path = need_value(i++, arg);
        } else if (arg == "--seed") {
            a.seed = std::stoull(need_value(i++, arg));
        } else if (arg == "--out") {
            a.out_dir = need_value(i++, arg);
        } else if (arg == "--render") {
            a.render = true;
        } else if (arg == "--weight") {
            a.weight = std::stod(need_value(i++, arg));
        } else if (arg == "--count") {
            a.count = std::stoi(need_value(i++, arg));
        } else if (arg == "--set") {
            std::string kv = need_value(i++, arg);
            auto eq = kv.find('=');
            check(eq != std::string::npos && eq > 0,
                  "--set expects section.key=value, got '" + kv + "'");
            a.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        } else if (arg.rfind("--", 0) == 0) {
            throw error("unknown flag '" + arg + "'\n" + kUsage);
        } else {
            a.inputs.push_back(arg);
        }
    }
    return a;
}

Config load_config(const Args& a) {
    KeyValueFile kv = a.config_path.empty()
                          ? KeyValueFile{}
                          : KeyValueFile::parse_file(a.config_path);
    for (const auto& [key, value] : a.overrides) kv.set(key, value);
    if (a.count >= 0)
        kv.set("pipeline.count_per_class", std::to_string(a.count));
    return Config::from_kv(kv);
}

RunManifest base_manifest(const Args& a, const Config& cfg) {
    RunManifest man;
    man.command = a.command;
    man.seed = a.seed;
    man.config_text = cfg.to_kv().canonical_text();
    return man;
}

std::string stem_of(const std::string& path) {
    return fs::path(path).stem().string();
}

std::vector<LabeledSample> samples_from_table(const std::string& path) {
    return to_samples(read_feature_table(path));
}

int cmd_synth(const Args& a) {
    Config cfg = load_config(a);
    fs::create_directories(a.out_dir);
    RunManifest man = base_manifest(a, cfg);
    auto ids = cohort_ids(cfg.pipeline.count_per_class, false);
    for (const auto& id : ids) {
        MeshSequence seq = synth_walker(cfg, id, a.seed);
        std::string path = (fs::path(a.out_dir) / (id + ".json")).string();
        write_mesh_sequence(seq, path);
        man.add_output(path);
    }
    man.write(a.out_dir);
    std::printf("wrote %zu mesh sequences to %s\n", ids.size(),
                a.out_dir.c_str());
    return 0;
}

int cmd_simulate(const Args& a) {
    check(!a.inputs.empty(), "simulate: no mesh files given");
    Config cfg = load_config(a);
    fs::create_directories(a.out_dir);
    RunManifest man = base_manifest(a, cfg);
    for (const auto& mesh : a.inputs) {
        man.add_input(mesh);
        std::string rec = stage_simulate(
            cfg, mesh, a.out_dir, derive_seed(a.seed, "sim-" + stem_of(mesh)));
        man.add_output(rec);
        man.add_output(rec + ".meta.json");
    }
    man.write(a.out_dir);
    std::printf("wrote %zu recordings to %s\n", a.inputs.size(),
                a.out_dir.c_str());
    return 0;
}

int cmd_spectrogram(const Args& a) {
    check(!a.inputs.empty(), "spectrogram: no recording files given");
    Config cfg = load_config(a);
    fs::create_directories(a.out_dir);
    RunManifest man = base_manifest(a, cfg);
    for (const auto& rec : a.inputs) {
        man.add_input(rec);
        std::string spg = stage_spectrogram(cfg, rec, a.out_dir, a.render);
        man.add_output(spg);
        if (a.render)
            man.add_output(
                (fs::path(a.out_dir) / (stem_of(rec) + ".pgm")).string());
    }
    man.write(a.out_dir);
    std::printf("wrote %zu spectrograms to %s\n", a.inputs.size(),
                a.out_dir.c_str());
    return 0;
}

int cmd_features(const Args& a) {
    check(!a.inputs.empty(), "features: no spectrogram or recording files given");
    Config cfg = load_config(a);
    fs::create_directories(a.out_dir);
    RunManifest man = base_manifest(a, cfg);
    std::vector<GaitFeatureVector> rows;
    for (const auto& input : a.inputs) {
        man.add_input(input);
        // measured-origin recordings carry provenance in their sidecar;
        // record it so the manifest shows what was consumed
        if (fs::exists(input + ".meta.json")) man.add_input(input + ".meta.json");
        rows.push_back(stage_features(cfg, input));
    }
    std::string table = (fs::path(a.out_dir) / "features.csv").string();
    write_feature_table(rows, table);
    man.add_output(table);
    man.write(a.out_dir);
    std::printf("wrote %zu feature rows to %s\n", rows.size(), table.c_str());
    return 0;
}

int cmd_train(const Args& a) {
    check(a.inputs.size() == 1, "train: expected exactly one feature table");
    Config cfg = load_config(a);
    fs::create_directories(a.out_dir);
    RunManifest man = base_manifest(a, cfg);
    man.add_input(a.inputs[0]);
    auto data = samples_from_table(a.inputs[0]);
    MlpModel model = train(data, cfg.train, a.weight, a.seed);
    std::string path = (fs::path(a.out_dir) / "model.bin").string();
    write_model(model, path);
    man.add_output(path);
    man.write(a.out_dir);
    std::printf("trained on %zu samples (weight %g) -> %s\n", data.size(),
                a.weight, path.c_str());
    return 0;
}

int cmd_adapt(const Args& a) {
    check(a.inputs.size() == 2,
          "adapt: expected a training table and an adaptation table");
    Config cfg = load_config(a);
    fs::create_directories(a.out_dir);
    RunManifest man = base_manifest(a, cfg);
    man.add_input(a.inputs[0]);
    man.add_input(a.inputs[1]);
    auto train_set = samples_from_table(a.inputs[0]);
    auto adapt_set = samples_from_table(a.inputs[1]);
    AdaptResult ar = domain_adapt(train_set, adapt_set, cfg.train, a.seed);
    MlpModel model =
        train(train_set, cfg.train, ar.weight, derive_seed(a.seed, "final"));

    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "weight = %.6f\n", ar.weight);
    os << buf << "per_repeat =";
    for (double w : ar.per_repeat) {
        std::snprintf(buf, sizeof buf, " %.6f", w);
        os << buf;
    }
    os << "\n";
    std::string txt = (fs::path(a.out_dir) / "adapt.txt").string();
    atomic_write(txt, os.str());
    std::string path = (fs::path(a.out_dir) / "model.bin").string();
    write_model(model, path);
    man.add_output(txt);
    man.add_output(path);
    man.write(a.out_dir);
    std::printf("chose class weight %.6f -> %s\n", ar.weight, path.c_str());
    return 0;
}

int cmd_evaluate(const Args& a) {
    check(a.inputs.size() == 2, "evaluate: expected a model and a feature table");
    Config cfg = load_config(a);
    fs::create_directories(a.out_dir);
    RunManifest man = base_manifest(a, cfg);
    man.add_input(a.inputs[0]);
    man.add_input(a.inputs[1]);
    MlpModel model = read_model(a.inputs[0]);
    EvalReport report = evaluate(model, samples_from_table(a.inputs[1]));
    std::string path = (fs::path(a.out_dir) / "report.txt").string();
    write_report(report, path);
    man.add_output(path);
    man.write(a.out_dir);
    std::fputs(report.to_text().c_str(), stdout);
    return 0;
}

int cmd_pipeline(const Args& a) {
    Config cfg = load_config(a);
    PipelineSummary s = run_pipeline(cfg, a.seed, a.out_dir);
    std::printf("evaluation rows: %zu, training rows: %zu\n", s.eval_rows,
                s.train_rows);
    std::printf("avg-speed separation: %.2f sigma\n", s.separation_avg_speed);
    std::printf("pooled per-class accuracy: %.4f (healthy %.4f, unhealthy %.4f)\n",
                s.protocol.pooled.class_mean,
                s.protocol.pooled.healthy_accuracy,
                s.protocol.pooled.unhealthy_accuracy);
    std::printf("report: %s\n", s.report_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::string command = argc >= 2 ? argv[1] : "";
    try {
        if (command == "--help" || command == "-h" || command == "help") {
            std::fputs(kUsage, stdout);
            return 0;
        }
        Args a = parse_args(argc, argv);
        if (a.command == "synth") return cmd_synth(a);
        if (a.command == "simulate") return cmd_simulate(a);
        if (a.command == "spectrogram") return cmd_spectrogram(a);
        if (a.command == "features") return cmd_features(a);
        if (a.command == "train") return cmd_train(a);
        if (a.command == "adapt") return cmd_adapt(a);
        if (a.command == "evaluate") return cmd_evaluate(a);
        if (a.command == "pipeline") return cmd_pipeline(a);
        throw error("unknown command '" + a.command + "'\n" + kUsage);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "wigait%s%s: %s\n", command.empty() ? "" : " ",
                     command.c_str(), e.what());
        return 1;
    }
}
