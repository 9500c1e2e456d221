#pragma once

#include "wigait/common.hpp"
#include "wigait/config.hpp"
#include "wigait/features.hpp"

#include <Eigen/Dense>

#include <array>
#include <map>
#include <string>
#include <vector>

namespace wigait {

// Per-feature z-scoring fitted on the training set and stored with the model,
// so prediction is self-contained. Zero-variance features pass through
// unscaled and get flagged.
struct Standardizer {
    std::array<double, 6> mean{};
    std::array<double, 6> scale{};
    std::array<bool, 6> flat{};

    static Standardizer identity();
    static Standardizer fit(const std::vector<std::array<double, 6>>& rows);
    std::array<double, 6> apply(const std::array<double, 6>& x) const;
};

struct LabeledSample {
    std::array<double, 6> x{};
    int label = 0;  // 0 healthy, 1 unhealthy
    std::string subject_id, sample_id, condition;
};
LabeledSample to_sample(const GaitFeatureVector& f);
std::vector<LabeledSample> to_samples(const std::vector<GaitFeatureVector>& fs);

// 6 -> hidden1 -> hidden2 -> 2 perceptron, ReLU activations, softmax output.
struct MlpModel {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
    Standardizer scaler;
    std::uint64_t seed = 0;
    std::string config_digest;

    void validate() const;
};

struct Gradients {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
};

// Fresh model with symmetric uniform fan-in initialization from the seed.
MlpModel init_model(const TrainConfig& cfg, const Standardizer& scaler,
                    std::uint64_t seed);

// Class-weighted cross-entropy of one batch, dropout off; the unhealthy term
// is multiplied by class_weight. Exposed for gradient verification.
double batch_loss(const MlpModel& m, const std::vector<LabeledSample>& batch,
                  double class_weight);
Gradients batch_gradients(const MlpModel& m,
                          const std::vector<LabeledSample>& batch,
                          double class_weight);

// Adam + inverted dropout + per-epoch shuffling, all seeded; bit-identical
// for identical inputs. epoch_loss (optional) logs the mean batch loss.
MlpModel train(const std::vector<LabeledSample>& data, const TrainConfig& cfg,
               double class_weight, std::uint64_t seed,
               std::vector<double>* epoch_loss = nullptr);

// argmax class with ties toward class 0, plus the softmax probabilities.
std::pair<int, std::array<double, 2>> predict(const MlpModel& m,
                                              const std::array<double, 6>& x);

// selection helpers with pinned tie rules
int argmax_first(const std::vector<double>& scores);
double lower_median(std::vector<double> values);

// Exhaustive class-weight search: per repeat, train once per grid weight and
// score average per-class accuracy on the adaptation set; the repeat keeps the
// argmax (first on ties). Final weight = lower median over repeats.
struct AdaptResult {
    double weight = 1.0;
    std::vector<double> per_repeat;
};
AdaptResult domain_adapt(const std::vector<LabeledSample>& train_set,
                         const std::vector<LabeledSample>& adapt_set,
                         const TrainConfig& cfg, std::uint64_t seed);

struct EvalReport {
    long samples = 0;
    std::array<std::array<long, 2>, 2> confusion{};  // [true][predicted]
    double subject_accuracy = 0;   // mean over subjects of sample accuracy
    double majority_accuracy = 0;  // majority-vote-per-subject alternative
    double healthy_accuracy = 0;
    double unhealthy_accuracy = 0;
    double class_mean = 0;
    // per condition: correct / total sample counts, accuracy derived
    std::map<std::string, std::pair<long, long>> condition_counts;

    double condition_accuracy(const std::string& c) const;
    std::string to_text() const;
};
EvalReport evaluate(const MlpModel& m, const std::vector<LabeledSample>& test);

// 8 rounds of: sample the adaptation subjects (per-class quota), search the
// weight, retrain on the training pool, evaluate the held-out subjects.
struct ProtocolRound {
    double weight = 1.0;
    std::vector<std::string> adaptation_subjects;
    EvalReport report;
    MlpModel model;  // final model for the round, trained at `weight`
};
struct ProtocolResult {
    EvalReport pooled;  // confusion summed over rounds, accuracies recomputed
    double round_mean_class_accuracy = 0;
    std::vector<ProtocolRound> rounds;
};
ProtocolResult protocol_run(const std::vector<LabeledSample>& train_set,
                            const std::vector<LabeledSample>& eval_pool,
                            const TrainConfig& cfg, std::uint64_t seed);

// Binary model container (layer sizes, scaler, seed, config digest, weights);
// round-trips bit-exactly.
void write_model(const MlpModel& m, const std::string& path);
MlpModel read_model(const std::string& path);

void write_report(const EvalReport& r, const std::string& path);

}  // namespace wigait
