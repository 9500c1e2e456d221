#pragma once

#include "wigait/classifier.hpp"
#include "wigait/config.hpp"
#include "wigait/mesh.hpp"

#include <string>
#include <vector>

namespace wigait {

// Sample ids follow "[train-]<class>-<nn>" with class healthy | impaired
// (synonyms unhealthy/impaired map to the unhealthy label). Anything else is
// unknown and rejected by the training stages.
Label label_from_id(const std::string& id);

// Walker ids for one cohort, zero-padded, healthy block first.
std::vector<std::string> cohort_ids(int per_class, bool train_pool);

// One synthetic cohort member: gait parameters drawn uniformly inside the
// class spread, surface noise seeded per id, sequence placed at the scene
// start line. The id decides the class.
MeshSequence synth_walker(const Config& cfg, const std::string& id,
                          std::uint64_t root_seed);

// Staged single-file operations shared by the CLI subcommands and the
// end-to-end pipeline. Each returns the path it wrote.
std::string stage_simulate(const Config& cfg, const std::string& mesh_path,
                           const std::string& out_dir, std::uint64_t seed);
std::string stage_spectrogram(const Config& cfg, const std::string& rec_path,
                              const std::string& out_dir, bool render);
// Accepts a spectrogram or a recording (which then runs the spectrogram stage
// in memory first); subject and label come from the id convention.
GaitFeatureVector stage_features(const Config& cfg, const std::string& path);

// Gap between the class means in units of the larger in-class deviation.
double class_separation(const std::vector<LabeledSample>& rows, int feature);

struct PipelineSummary {
    ProtocolResult protocol;
    double separation_avg_speed = 0.0;
    std::size_t eval_rows = 0, train_rows = 0;
    std::string report_path;
    std::vector<std::string> outputs;
};

// synth -> simulate -> spectrogram -> features for the evaluation and training
// cohorts, then the adaptation protocol. All intermediates are persisted under
// out_dir; the manifest is written last. Byte-identical across reruns with the
// same config and seed.
PipelineSummary run_pipeline(const Config& cfg, std::uint64_t seed,
                             const std::string& out_dir);

std::string protocol_report_text(const PipelineSummary& s);

}  // namespace wigait
