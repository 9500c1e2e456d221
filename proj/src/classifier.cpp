#include "wigait/classifier.hpp"

#include "wigait/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace wigait {

namespace {

void check_features(const std::array<double, 6>& x, const std::string& who) {
    for (double v : x) check(std::isfinite(v), who + ": non-finite feature");
}

}  // namespace

Standardizer Standardizer::identity() {
    Standardizer s;
    s.mean.fill(0.0);
    s.scale.fill(1.0);
    s.flat.fill(false);
    return s;
}

Standardizer Standardizer::fit(const std::vector<std::array<double, 6>>& rows) {
    check(!rows.empty(), "standardizer: no samples");
    Standardizer s = identity();
    const double n = static_cast<double>(rows.size());
    for (int f = 0; f < 6; ++f) {
        double m = 0;
        for (const auto& r : rows) m += r[f];
        m /= n;
        double var = 0;
        for (const auto& r : rows) var += (r[f] - m) * (r[f] - m);
        double sd = std::sqrt(var / n);
        s.mean[f] = m;
        if (sd > 1e-12) {
            s.scale[f] = sd;
        } else {
            // constant feature: pass through centered, flag it
            s.scale[f] = 1.0;
            s.flat[f] = true;
        }
    }
    return s;
}

std::array<double, 6> Standardizer::apply(const std::array<double, 6>& x) const {
    check_features(x, "standardizer");
    std::array<double, 6> z;
    for (int f = 0; f < 6; ++f) z[f] = (x[f] - mean[f]) / scale[f];
    return z;
}

LabeledSample to_sample(const GaitFeatureVector& f) {
    check(f.label != Label::unknown, "to_sample: unlabeled feature vector");
    LabeledSample s;
    s.x = f.values();
    s.label = f.label == Label::unhealthy ? 1 : 0;
    s.subject_id = f.subject_id;
    s.sample_id = f.sample_id;
    s.condition = label_name(f.label);
    return s;
}

std::vector<LabeledSample> to_samples(const std::vector<GaitFeatureVector>& fs) {
    std::vector<LabeledSample> out;
    out.reserve(fs.size());
    for (const auto& f : fs) out.push_back(to_sample(f));
    return out;
}

void MlpModel::validate() const {
    check(w1.cols() == 6 && w3.rows() == 2, "model: wrong outer layer sizes");
    check(w1.rows() >= 1 && w2.rows() >= 1, "model: empty hidden layer");
    check(w2.cols() == w1.rows() && w3.cols() == w2.rows(),
          "model: mismatched hidden layer sizes");
    check(b1.size() == w1.rows() && b2.size() == w2.rows() && b3.size() == 2,
          "model: bias size mismatch");
    check(w1.allFinite() && w2.allFinite() && w3.allFinite() &&
              b1.allFinite() && b2.allFinite() && b3.allFinite(),
          "model: non-finite parameter");
    for (int f = 0; f < 6; ++f) {
        check(std::isfinite(scaler.mean[f]) && std::isfinite(scaler.scale[f]) &&
                  scaler.scale[f] > 0,
              "model: bad scaler");
    }
}

MlpModel init_model(const TrainConfig& cfg, const Standardizer& scaler,
                    std::uint64_t seed) {
    check(cfg.hidden1 >= 1 && cfg.hidden2 >= 1, "init: empty hidden layer");
    MlpModel m;
    m.scaler = scaler;
    m.seed = seed;
    Rng rng(derive_seed(seed, "init"));
    auto fill = [&rng](Eigen::MatrixXd& w, Eigen::VectorXd& b, int rows,
                       int cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        w.resize(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
        b.resize(rows);
        for (int r = 0; r < rows; ++r) b[r] = rng.uniform(-bound, bound);
    };
    fill(m.w1, m.b1, cfg.hidden1, 6);
    fill(m.w2, m.b2, cfg.hidden2, cfg.hidden1);
    fill(m.w3, m.b3, 2, cfg.hidden2);
    return m;
}

namespace {

struct Cache {
    Eigen::MatrixXd x;        // 6 x B, standardized
    Eigen::MatrixXd z1, h1;   // h1 after ReLU (and dropout when training)
    Eigen::MatrixXd z2, h2;
    Eigen::MatrixXd probs;    // 2 x B softmax
    Eigen::VectorXd logz;     // per-column log(sum exp(logits))
    Eigen::MatrixXd logits;
};

// Masks hold 0 or 1/keep (inverted dropout); empty matrices mean "off".
Cache forward(const MlpModel& m, const Eigen::MatrixXd& x,
              const Eigen::MatrixXd& mask1, const Eigen::MatrixXd& mask2) {
    Cache c;
    c.x = x;
    c.z1 = (m.w1 * x).colwise() + m.b1;
    c.h1 = c.z1.cwiseMax(0.0);
    if (mask1.size()) c.h1 = c.h1.cwiseProduct(mask1);
    c.z2 = (m.w2 * c.h1).colwise() + m.b2;
    c.h2 = c.z2.cwiseMax(0.0);
    if (mask2.size()) c.h2 = c.h2.cwiseProduct(mask2);
    c.logits = (m.w3 * c.h2).colwise() + m.b3;
    const auto n = c.logits.cols();
    c.probs.resize(2, n);
    c.logz.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double hi = std::max(c.logits(0, j), c.logits(1, j));
        double e0 = std::exp(c.logits(0, j) - hi);
        double e1 = std::exp(c.logits(1, j) - hi);
        c.probs(0, j) = e0 / (e0 + e1);
        c.probs(1, j) = e1 / (e0 + e1);
        c.logz[j] = hi + std::log(e0 + e1);
    }
    return c;
}

// Mean class-weighted cross-entropy over the batch; unhealthy (label 1)
// samples contribute with weight cw.
double weighted_loss(const Cache& c, const std::vector<int>& labels,
                     double cw) {
    double sum = 0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        double w = labels[j] == 1 ? cw : 1.0;
        sum += w * (c.logz[static_cast<Eigen::Index>(j)] -
                    c.logits(labels[j], static_cast<Eigen::Index>(j)));
    }
    return sum / static_cast<double>(labels.size());
}

Gradients backward(const MlpModel& m, const Cache& c,
                   const std::vector<int>& labels, double cw,
                   const Eigen::MatrixXd& mask1, const Eigen::MatrixXd& mask2) {
    const double inv_b = 1.0 / static_cast<double>(labels.size());
    Eigen::MatrixXd d = c.probs;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        auto jj = static_cast<Eigen::Index>(j);
        d(labels[j], jj) -= 1.0;
        d.col(jj) *= (labels[j] == 1 ? cw : 1.0) * inv_b;
    }
    Gradients g;
    g.w3 = d * c.h2.transpose();
    g.b3 = d.rowwise().sum();
    Eigen::MatrixXd dh2 = m.w3.transpose() * d;
    if (mask2.size()) dh2 = dh2.cwiseProduct(mask2);
    Eigen::MatrixXd dz2 =
        dh2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
    g.w2 = dz2 * c.h1.transpose();
    g.b2 = dz2.rowwise().sum();
    Eigen::MatrixXd dh1 = m.w2.transpose() * dz2;
    if (mask1.size()) dh1 = dh1.cwiseProduct(mask1);
    Eigen::MatrixXd dz1 =
        dh1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
    g.w1 = dz1 * c.x.transpose();
    g.b1 = dz1.rowwise().sum();
    return g;
}

Eigen::MatrixXd standardized_batch(const MlpModel& m,
                                   const std::vector<LabeledSample>& batch) {
    Eigen::MatrixXd x(6, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        check_features(batch[j].x, "classifier");
        auto z = m.scaler.apply(batch[j].x);
        for (int f = 0; f < 6; ++f) x(f, static_cast<Eigen::Index>(j)) = z[f];
    }
    return x;
}

std::vector<int> batch_labels(const std::vector<LabeledSample>& batch) {
    std::vector<int> y;
    y.reserve(batch.size());
    for (const auto& s : batch) {
        check(s.label == 0 || s.label == 1, "classifier: label out of range");
        y.push_back(s.label);
    }
    return y;
}

std::string train_digest(const TrainConfig& cfg, double cw) {
    char buf[256];
    int len = std::snprintf(buf, sizeof buf, "%d|%d|%.17g|%.17g|%d|%d|%.17g",
                            cfg.hidden1, cfg.hidden2, cfg.dropout,
                            cfg.learning_rate, cfg.epochs, cfg.batch, cw);
    return sha256_bytes(buf, static_cast<std::size_t>(len));
}

struct AdamState {
    Eigen::MatrixXd mw1, vw1, mw2, vw2, mw3, vw3;
    Eigen::VectorXd mb1, vb1, mb2, vb2, mb3, vb3;
    long t = 0;

    explicit AdamState(const MlpModel& m) {
        mw1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
        vw1 = mw1;
        mw2 = Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols());
        vw2 = mw2;
        mw3 = Eigen::MatrixXd::Zero(m.w3.rows(), m.w3.cols());
        vw3 = mw3;
        mb1 = Eigen::VectorXd::Zero(m.b1.size());
        vb1 = mb1;
        mb2 = Eigen::VectorXd::Zero(m.b2.size());
        vb2 = mb2;
        mb3 = Eigen::VectorXd::Zero(m.b3.size());
        vb3 = mb3;
    }
};

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

template <typename T>
void adam_update(T& theta, T& mo, T& ve, const T& g, double lr, double bc1,
                 double bc2) {
    mo = kBeta1 * mo + (1.0 - kBeta1) * g;
    ve = kBeta2 * ve + (1.0 - kBeta2) * g.cwiseProduct(g);
    theta -= lr * (mo / bc1)
                 .cwiseQuotient(((ve / bc2).cwiseSqrt().array() + kAdamEps)
                                    .matrix());
}

}  // namespace

double batch_loss(const MlpModel& m, const std::vector<LabeledSample>& batch,
                  double class_weight) {
    check(!batch.empty(), "batch_loss: empty batch");
    check(class_weight > 0, "batch_loss: class weight must be positive");
    Eigen::MatrixXd none;
    Cache c = forward(m, standardized_batch(m, batch), none, none);
    return weighted_loss(c, batch_labels(batch), class_weight);
}

Gradients batch_gradients(const MlpModel& m,
                          const std::vector<LabeledSample>& batch,
                          double class_weight) {
    check(!batch.empty(), "batch_gradients: empty batch");
    check(class_weight > 0, "batch_gradients: class weight must be positive");
    Eigen::MatrixXd none;
    Cache c = forward(m, standardized_batch(m, batch), none, none);
    return backward(m, c, batch_labels(batch), class_weight, none, none);
}

MlpModel train(const std::vector<LabeledSample>& data, const TrainConfig& cfg,
               double class_weight, std::uint64_t seed,
               std::vector<double>* epoch_loss) {
    check(!data.empty(), "train: empty dataset");
    check(class_weight > 0, "train: class weight must be positive");
    check(cfg.dropout >= 0 && cfg.dropout < 1, "train: dropout outside [0,1)");
    check(cfg.learning_rate > 0, "train: non-positive learning rate");
    check(cfg.epochs >= 0, "train: negative epoch count");
    check(cfg.batch >= 1, "train: batch size must be positive");
    bool has0 = false, has1 = false;
    std::vector<std::array<double, 6>> rows;
    rows.reserve(data.size());
    for (const auto& s : data) {
        check(s.label == 0 || s.label == 1, "train: label out of range");
        check_features(s.x, "train");
        (s.label == 0 ? has0 : has1) = true;
        rows.push_back(s.x);
    }
    check(has0 && has1, "train: need samples from both classes");

    MlpModel m = init_model(cfg, Standardizer::fit(rows), seed);
    m.config_digest = train_digest(cfg, class_weight);

    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd x_all(6, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        auto z = m.scaler.apply(data[static_cast<std::size_t>(j)].x);
        for (int f = 0; f < 6; ++f) x_all(f, j) = z[f];
    }

    Rng shuffle_rng(derive_seed(seed, "shuffle"));
    Rng drop_rng(derive_seed(seed, "dropout"));
    AdamState adam(m);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const double keep = 1.0 - cfg.dropout;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            std::size_t stop = std::min(order.size(),
                                        start + static_cast<std::size_t>(cfg.batch));
            const auto b = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd xb(6, b);
            std::vector<int> yb(static_cast<std::size_t>(b));
            for (Eigen::Index j = 0; j < b; ++j) {
                std::size_t src = order[start + static_cast<std::size_t>(j)];
                xb.col(j) = x_all.col(static_cast<Eigen::Index>(src));
                yb[static_cast<std::size_t>(j)] = data[src].label;
            }
            Eigen::MatrixXd mask1, mask2;
            if (cfg.dropout > 0) {
                // fixed draw order: layer 1 then layer 2, sample-major
                mask1.resize(m.w1.rows(), b);
                for (Eigen::Index j = 0; j < b; ++j)
                    for (Eigen::Index i = 0; i < mask1.rows(); ++i)
                        mask1(i, j) =
                            drop_rng.uniform() < cfg.dropout ? 0.0 : 1.0 / keep;
                mask2.resize(m.w2.rows(), b);
                for (Eigen::Index j = 0; j < b; ++j)
                    for (Eigen::Index i = 0; i < mask2.rows(); ++i)
                        mask2(i, j) =
                            drop_rng.uniform() < cfg.dropout ? 0.0 : 1.0 / keep;
            }
            Cache c = forward(m, xb, mask1, mask2);
            double loss = weighted_loss(c, yb, class_weight);
            check(std::isfinite(loss), "train: loss diverged");
            Gradients g = backward(m, c, yb, class_weight, mask1, mask2);

            adam.t += 1;
            const double bc1 = 1.0 - std::pow(kBeta1, adam.t);
            const double bc2 = 1.0 - std::pow(kBeta2, adam.t);
            adam_update(m.w1, adam.mw1, adam.vw1, g.w1, cfg.learning_rate, bc1,
                        bc2);
            adam_update(m.b1, adam.mb1, adam.vb1, g.b1, cfg.learning_rate, bc1,
                        bc2);
            adam_update(m.w2, adam.mw2, adam.vw2, g.w2, cfg.learning_rate, bc1,
                        bc2);
            adam_update(m.b2, adam.mb2, adam.vb2, g.b2, cfg.learning_rate, bc1,
                        bc2);
            adam_update(m.w3, adam.mw3, adam.vw3, g.w3, cfg.learning_rate, bc1,
                        bc2);
            adam_update(m.b3, adam.mb3, adam.vb3, g.b3, cfg.learning_rate, bc1,
                        bc2);
            loss_sum += loss;
            ++batches;
        }
        if (epoch_loss) epoch_loss->push_back(loss_sum / batches);
    }
    return m;
}

std::pair<int, std::array<double, 2>> predict(const MlpModel& m,
                                              const std::array<double, 6>& x) {
    m.validate();
    check_features(x, "predict");
    Eigen::MatrixXd xb(6, 1);
    auto z = m.scaler.apply(x);
    for (int f = 0; f < 6; ++f) xb(f, 0) = z[f];
    Eigen::MatrixXd none;
    Cache c = forward(m, xb, none, none);
    int cls = c.probs(1, 0) > c.probs(0, 0) ? 1 : 0;
    return {cls, {c.probs(0, 0), c.probs(1, 0)}};
}

int argmax_first(const std::vector<double>& scores) {
    check(!scores.empty(), "argmax: empty input");
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

double lower_median(std::vector<double> values) {
    check(!values.empty(), "median: empty input");
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

AdaptResult domain_adapt(const std::vector<LabeledSample>& train_set,
                         const std::vector<LabeledSample>& adapt_set,
                         const TrainConfig& cfg, std::uint64_t seed) {
    check(!cfg.class_weights.empty(), "adapt: empty weight grid");
    for (double w : cfg.class_weights)
        check(w > 0, "adapt: class weight must be positive");
    check(!adapt_set.empty(), "adapt: empty adaptation set");
    check(cfg.repeats >= 1, "adapt: need at least one repeat");

    AdaptResult res;
    for (int r = 0; r < cfg.repeats; ++r) {
        std::uint64_t rs =
            derive_seed(seed, "adapt-repeat-" + std::to_string(r));
        std::vector<double> scores;
        scores.reserve(cfg.class_weights.size());
        for (std::size_t k = 0; k < cfg.class_weights.size(); ++k) {
            MlpModel m = train(train_set, cfg, cfg.class_weights[k],
                               derive_seed(rs, "weight-" + std::to_string(k)));
            scores.push_back(evaluate(m, adapt_set).class_mean);
        }
        res.per_repeat.push_back(
            cfg.class_weights[static_cast<std::size_t>(argmax_first(scores))]);
    }
    res.weight = lower_median(res.per_repeat);
    return res;
}

double EvalReport::condition_accuracy(const std::string& c) const {
    auto it = condition_counts.find(c);
    check(it != condition_counts.end(), "report: unknown condition " + c);
    return it->second.second == 0
               ? 0.0
               : static_cast<double>(it->second.first) /
                     static_cast<double>(it->second.second);
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    char buf[128];
    auto line = [&os, &buf](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s = %.6f\n", key, v);
        os << buf;
    };
    os << "samples = " << samples << "\n";
    line("subject_accuracy", subject_accuracy);
    line("majority_accuracy", majority_accuracy);
    line("healthy_accuracy", healthy_accuracy);
    line("unhealthy_accuracy", unhealthy_accuracy);
    line("class_mean_accuracy", class_mean);
    os << "confusion_healthy = " << confusion[0][0] << " " << confusion[0][1]
       << "\n";
    os << "confusion_unhealthy = " << confusion[1][0] << " " << confusion[1][1]
       << "\n";
    for (const auto& [name, counts] : condition_counts) {
        std::snprintf(buf, sizeof buf, "condition %s = %.6f (%ld/%ld)\n",
                      name.c_str(), condition_accuracy(name), counts.first,
                      counts.second);
        os << buf;
    }
    return os.str();
}

namespace {

// derive the accuracy summary fields from confusion + condition counts
void finish_report(EvalReport& r) {
    const long h = r.confusion[0][0] + r.confusion[0][1];
    const long u = r.confusion[1][0] + r.confusion[1][1];
    r.healthy_accuracy =
        h == 0 ? 0.0 : static_cast<double>(r.confusion[0][0]) / h;
    r.unhealthy_accuracy =
        u == 0 ? 0.0 : static_cast<double>(r.confusion[1][1]) / u;
    if (h > 0 && u > 0) {
        r.class_mean = 0.5 * (r.healthy_accuracy + r.unhealthy_accuracy);
    } else {
        // single-class test set: the mean collapses to the present class
        r.class_mean = h > 0 ? r.healthy_accuracy : r.unhealthy_accuracy;
    }
}

}  // namespace

EvalReport evaluate(const MlpModel& m, const std::vector<LabeledSample>& test) {
    check(!test.empty(), "evaluate: empty test set");
    EvalReport r;
    struct Subject {
        int label = 0;
        long correct = 0, total = 0;
        long votes[2] = {0, 0};
    };
    std::map<std::string, Subject> subjects;
    for (const auto& s : test) {
        check(s.label == 0 || s.label == 1, "evaluate: label out of range");
        int pred = predict(m, s.x).first;
        r.confusion[s.label][pred] += 1;
        r.samples += 1;
        auto [it, fresh] = subjects.try_emplace(s.subject_id);
        if (fresh) {
            it->second.label = s.label;
        } else {
            check(it->second.label == s.label,
                  "evaluate: subject " + s.subject_id + " has mixed labels");
        }
        it->second.total += 1;
        it->second.correct += pred == s.label ? 1 : 0;
        it->second.votes[pred] += 1;
        auto& cc = r.condition_counts[s.condition];
        cc.first += pred == s.label ? 1 : 0;
        cc.second += 1;
    }
    double acc_sum = 0, maj_sum = 0;
    for (const auto& [id, sub] : subjects) {
        acc_sum += static_cast<double>(sub.correct) / sub.total;
        // majority vote, ties toward healthy
        int vote = sub.votes[1] > sub.votes[0] ? 1 : 0;
        maj_sum += vote == sub.label ? 1.0 : 0.0;
    }
    r.subject_accuracy = acc_sum / static_cast<double>(subjects.size());
    r.majority_accuracy = maj_sum / static_cast<double>(subjects.size());
    finish_report(r);
    return r;
}

ProtocolResult protocol_run(const std::vector<LabeledSample>& train_set,
                            const std::vector<LabeledSample>& eval_pool,
                            const TrainConfig& cfg, std::uint64_t seed) {
    check(cfg.rounds >= 1, "protocol: need at least one round");
    check(cfg.adapt_per_class >= 1, "protocol: adaptation quota must be >= 1");
    check(!eval_pool.empty(), "protocol: empty evaluation pool");

    std::map<std::string, int> subject_label;
    for (const auto& s : eval_pool) {
        check(s.label == 0 || s.label == 1, "protocol: label out of range");
        auto [it, fresh] = subject_label.try_emplace(s.subject_id, s.label);
        check(fresh || it->second == s.label,
              "protocol: subject " + s.subject_id + " has mixed labels");
    }
    std::vector<std::string> healthy_ids, unhealthy_ids;
    for (const auto& [id, lab] : subject_label)
        (lab == 0 ? healthy_ids : unhealthy_ids).push_back(id);
    const auto quota = static_cast<std::size_t>(cfg.adapt_per_class);
    check(healthy_ids.size() >= quota && unhealthy_ids.size() >= quota,
          "protocol: too few subjects per class for the adaptation quota");
    check(healthy_ids.size() + unhealthy_ids.size() >= 2 * quota + 1,
          "protocol: no subjects left to evaluate");

    ProtocolResult out;
    double class_mean_sum = 0, subj_sum = 0, maj_sum = 0;
    for (int round = 0; round < cfg.rounds; ++round) {
        Rng rng(derive_seed(seed, "protocol-round-" + std::to_string(round)));
        auto pick = [&rng, quota](std::vector<std::string> ids) {
            rng.shuffle(ids);
            ids.resize(quota);
            return ids;
        };
        std::vector<std::string> chosen = pick(healthy_ids);
        std::vector<std::string> chosen_u = pick(unhealthy_ids);
        chosen.insert(chosen.end(), chosen_u.begin(), chosen_u.end());
        std::set<std::string> adapt_ids(chosen.begin(), chosen.end());

        std::vector<LabeledSample> adapt_set, test_set;
        for (const auto& s : eval_pool)
            (adapt_ids.count(s.subject_id) ? adapt_set : test_set).push_back(s);
        check(!test_set.empty(), "protocol: empty held-out set");

        ProtocolRound rec;
        rec.adaptation_subjects = chosen;
        AdaptResult ar =
            domain_adapt(train_set, adapt_set, cfg,
                         derive_seed(seed, "adapt-" + std::to_string(round)));
        rec.weight = ar.weight;
        MlpModel m =
            train(train_set, cfg, ar.weight,
                  derive_seed(seed, "final-" + std::to_string(round)));
        rec.report = evaluate(m, test_set);
        rec.model = std::move(m);

        out.pooled.samples += rec.report.samples;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                out.pooled.confusion[a][b] += rec.report.confusion[a][b];
        for (const auto& [name, counts] : rec.report.condition_counts) {
            auto& cc = out.pooled.condition_counts[name];
            cc.first += counts.first;
            cc.second += counts.second;
        }
        class_mean_sum += rec.report.class_mean;
        subj_sum += rec.report.subject_accuracy;
        maj_sum += rec.report.majority_accuracy;
        out.rounds.push_back(std::move(rec));
    }
    out.pooled.subject_accuracy = subj_sum / cfg.rounds;
    out.pooled.majority_accuracy = maj_sum / cfg.rounds;
    finish_report(out.pooled);
    out.round_mean_class_accuracy = class_mean_sum / cfg.rounds;
    return out;
}

namespace {

constexpr char kModelMagic[9] = "WGMLPMD1";

template <typename T>
void put(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_mat(std::string& buf, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put(buf, m(r, c));
}

void put_vec(std::string& buf, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put(buf, v[i]);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    check(static_cast<bool>(in), path + ": truncated model file");
    return v;
}

void get_mat(std::istream& in, Eigen::MatrixXd& m, Eigen::Index rows,
             Eigen::Index cols, const std::string& path) {
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = get<double>(in, path);
}

void get_vec(std::istream& in, Eigen::VectorXd& v, Eigen::Index n,
             const std::string& path) {
    v.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = get<double>(in, path);
}

}  // namespace

void write_model(const MlpModel& m, const std::string& path) {
    m.validate();
    std::string buf(kModelMagic, 8);
    put(buf, static_cast<std::uint32_t>(6));
    put(buf, static_cast<std::uint32_t>(m.w1.rows()));
    put(buf, static_cast<std::uint32_t>(m.w2.rows()));
    put(buf, static_cast<std::uint32_t>(2));
    put(buf, m.seed);
    for (int f = 0; f < 6; ++f) put(buf, m.scaler.mean[f]);
    for (int f = 0; f < 6; ++f) put(buf, m.scaler.scale[f]);
    for (int f = 0; f < 6; ++f)
        put(buf, static_cast<std::uint8_t>(m.scaler.flat[f] ? 1 : 0));
    put(buf, static_cast<std::uint32_t>(m.config_digest.size()));
    buf += m.config_digest;
    put_mat(buf, m.w1);
    put_vec(buf, m.b1);
    put_mat(buf, m.w2);
    put_vec(buf, m.b2);
    put_mat(buf, m.w3);
    put_vec(buf, m.b3);
    atomic_write(path, buf);
}

MlpModel read_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(static_cast<bool>(in), path + ": cannot open model file");
    char magic[8];
    in.read(magic, 8);
    check(static_cast<bool>(in) && std::memcmp(magic, kModelMagic, 8) == 0,
          path + ": not a model file");
    auto n_in = get<std::uint32_t>(in, path);
    auto h1 = get<std::uint32_t>(in, path);
    auto h2 = get<std::uint32_t>(in, path);
    auto n_out = get<std::uint32_t>(in, path);
    check(n_in == 6 && n_out == 2, path + ": unsupported layer sizes");
    check(h1 >= 1 && h2 >= 1 && h1 <= (1u << 20) && h2 <= (1u << 20),
          path + ": implausible hidden layer size");
    MlpModel m;
    m.seed = get<std::uint64_t>(in, path);
    for (int f = 0; f < 6; ++f) m.scaler.mean[f] = get<double>(in, path);
    for (int f = 0; f < 6; ++f) m.scaler.scale[f] = get<double>(in, path);
    for (int f = 0; f < 6; ++f)
        m.scaler.flat[f] = get<std::uint8_t>(in, path) != 0;
    auto dlen = get<std::uint32_t>(in, path);
    check(dlen <= 4096, path + ": implausible digest length");
    m.config_digest.resize(dlen);
    in.read(m.config_digest.data(), dlen);
    check(static_cast<bool>(in), path + ": truncated model file");
    get_mat(in, m.w1, h1, 6, path);
    get_vec(in, m.b1, h1, path);
    get_mat(in, m.w2, h2, h1, path);
    get_vec(in, m.b2, h2, path);
    get_mat(in, m.w3, 2, h2, path);
    get_vec(in, m.b3, 2, path);
    in.peek();
    check(in.eof(), path + ": trailing bytes after model");
    m.validate();
    return m;
}

void write_report(const EvalReport& r, const std::string& path) {
    atomic_write(path, r.to_text());
}

}  // namespace wigait
