#include "wigait/config.hpp"

#include "wigait/mesh.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace wigait {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

KeyValueFile KeyValueFile::parse_text(const std::string& text) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            check(line.back() == ']',
                  "config: malformed section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            check(!section.empty(),
                  "config: empty section name at line " + std::to_string(lineno));
            continue;
        }
        auto eq = line.find('=');
        check(eq != std::string::npos,
              "config: expected key = value at line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        check(!key.empty(), "config: empty key at line " + std::to_string(lineno));
        std::string flat = section.empty() ? key : section + "." + key;
        kv.values_[flat] = value;
    }
    return kv;
}

void KeyValueFile::set(const std::string& flat_key, const std::string& value) {
    values_[flat_key] = value;
}

bool KeyValueFile::has(const std::string& flat_key) const {
    return values_.count(flat_key) != 0;
}

std::string KeyValueFile::get_string(const std::string& key,
                                     const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
}

double KeyValueFile::get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        check(trim(it->second.substr(pos)).empty(), "trailing characters");
        return v;
    } catch (const std::exception&) {
        throw error("config: key " + key + " is not a number: '" + it->second + "'");
    }
}

int KeyValueFile::get_int(const std::string& key, int dflt) const {
    double v = get_double(key, double(dflt));
    int i = int(std::lround(v));
    check(std::abs(v - double(i)) < 1e-9, "config: key " + key + " is not an integer");
    return i;
}

bool KeyValueFile::get_bool(const std::string& key, bool dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw error("config: key " + key + " is not a boolean: '" + s + "'");
}

Vec3 KeyValueFile::get_vec3(const std::string& key, const Vec3& dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    std::istringstream in(it->second);
    Vec3 v;
    if (!(in >> v.x() >> v.y() >> v.z()))
        throw error("config: key " + key + " is not a 3-vector: '" + it->second + "'");
    return v;
}

std::vector<double> KeyValueFile::get_list(const std::string& key,
                                           const std::vector<double>& dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    std::istringstream in(it->second);
    std::vector<double> out;
    double x;
    while (in >> x) out.push_back(x);
    check(in.eof(), "config: key " + key + " is not a number list: '" + it->second + "'");
    check(!out.empty(), "config: key " + key + " is an empty list");
    return out;
}

std::string KeyValueFile::canonical_text() const {
    // values_ is an ordered map over flat keys, so iteration groups sections
    // alphabetically already; emit section headers on change.
    std::ostringstream out;
    std::string section;
    for (const auto& [flat, value] : values_) {
        auto dot = flat.find('.');
        std::string sec = dot == std::string::npos ? "" : flat.substr(0, dot);
        std::string key = dot == std::string::npos ? flat : flat.substr(dot + 1);
        if (sec != section) {
            section = sec;
            out << "[" << section << "]\n";
        }
        out << key << " = " << value << "\n";
    }
    return out.str();
}

double SceneConfig::wavelength() const {
    return 299792458.0 / (carrier_ghz * 1e9);
}

double SceneConfig::psi_at(const Vec3& pos) const {
    Vec3 dir(0.0, 1.0, 0.0);  // walk direction
    Vec3 to_tx = (tx - pos).normalized();
    Vec3 to_rx = (rx - pos).normalized();
    // Angles measured between the line of motion and the rays toward the
    // transceivers; receding motion gives negative dot products, so take
    // magnitudes (the Doppler magnitude convention).
    return std::abs(dir.dot(to_tx)) + std::abs(dir.dot(to_rx));
}

double SceneConfig::psi_midpoint() const {
    if (psi_mode == "constant") return psi_value;
    check(psi_mode == "geometric", "scene: psi_mode must be geometric or constant");
    Vec3 mid = (tx + rx) / 2.0;
    Vec3 pos = mid + Vec3(0.0, start_distance + walk_length / 2.0, 0.0);
    // Evaluate at transceiver height so only the horizontal geometry enters.
    pos.z() = (tx.z() + rx.z()) / 2.0;
    return psi_at(pos);
}

std::vector<double> default_weight_grid() {
    std::vector<double> w(25);
    for (int i = 0; i < 25; ++i) w[i] = 0.2 * std::pow(25.0, i / 24.0);
    return w;
}

Config Config::from_kv(const KeyValueFile& kv) {
    Config c;
    auto& sc = c.scene;
    sc.tx = kv.get_vec3("scene.tx", sc.tx);
    sc.rx = kv.get_vec3("scene.rx", sc.rx);
    sc.start_distance = kv.get_double("scene.start_distance", sc.start_distance);
    sc.walk_length = kv.get_double("scene.walk_length", sc.walk_length);
    sc.packet_rate = kv.get_double("scene.packet_rate", sc.packet_rate);
    sc.carrier_ghz = kv.get_double("scene.carrier_ghz", sc.carrier_ghz);
    sc.psi_mode = kv.get_string("scene.psi_mode", sc.psi_mode);
    sc.psi_value = kv.get_double("scene.psi_value", sc.psi_value);
    check(sc.packet_rate > 0, "scene.packet_rate must be positive");
    check(sc.walk_length > 0, "scene.walk_length must be positive");

    auto& w = c.walker;
    w.frame_rate = kv.get_double("walker.frame_rate", w.frame_rate);
    w.points_per_part = kv.get_int("walker.points_per_part", w.points_per_part);
    w.speed = kv.get_double("walker.speed", w.speed);
    w.gait_cycle = kv.get_double("walker.gait_cycle", w.gait_cycle);
    w.step_length = kv.get_double("walker.step_length", w.step_length);
    w.modulation_depth = kv.get_double("walker.modulation_depth", w.modulation_depth);
    w.asymmetry = kv.get_double("walker.asymmetry", w.asymmetry);
    w.arm_swing = kv.get_double("walker.arm_swing", w.arm_swing);
    w.step_height = kv.get_double("walker.step_height", w.step_height);
    w.jitter_mm = kv.get_double("walker.jitter_mm", w.jitter_mm);
    w.height = kv.get_double("walker.height", w.height);
    check(w.speed > 0, "walker.speed must be positive");
    check(w.gait_cycle > 0, "walker.gait_cycle must be positive");
    check(w.points_per_part >= 4, "walker.points_per_part must be at least 4");

    auto& sp = c.scattering;
    sp.alpha = kv.get_double("scattering.alpha", sp.alpha);
    sp.beta = kv.get_double("scattering.beta", sp.beta);
    sp.m = kv.get_double("scattering.m", sp.m);
    check(sp.alpha >= 0 && sp.beta >= 0,
          "scattering.alpha and scattering.beta must be non-negative");
    check(sp.m >= 1, "scattering.m must be at least 1");

    c.geometry.alpha_scale =
        kv.get_double("geometry.alpha_scale", c.geometry.alpha_scale);
    check(c.geometry.alpha_scale > 0, "geometry.alpha_scale must be positive");
    for (const auto& name : part_names()) {
        std::string key = "geometry.alpha_" + name;
        if (!kv.has(key)) continue;
        double r = kv.get_double(key, 0.0);
        check(r > 0, key + " must be positive");
        c.geometry.alpha_overrides.emplace_back(name, r);
    }

    auto& d = c.dsp;
    d.window_s = kv.get_double("dsp.window_s", d.window_s);
    d.shift_s = kv.get_double("dsp.shift_s", d.shift_s);
    d.tapers = kv.get_int("dsp.tapers", d.tapers);
    d.zero_pad = kv.get_int("dsp.zero_pad", d.zero_pad);
    d.taper_tmax = kv.get_double("dsp.taper_tmax", d.taper_tmax);
    d.pca_streams = kv.get_int("dsp.pca_streams", d.pca_streams);
    check(d.tapers >= 1, "dsp.tapers must be at least 1");
    check(d.zero_pad >= 1, "dsp.zero_pad must be at least 1");

    auto& f = c.features;
    f.crop_fraction = kv.get_double("features.crop_fraction", f.crop_fraction);
    f.gesd_alpha = kv.get_double("features.gesd_alpha", f.gesd_alpha);
    f.gesd_max_fraction =
        kv.get_double("features.gesd_max_fraction", f.gesd_max_fraction);
    f.smooth_span = kv.get_int("features.smooth_span", f.smooth_span);
    f.min_peak_separation_s =
        kv.get_double("features.min_peak_separation_s", f.min_peak_separation_s);
    f.video_lowpass_hz = kv.get_double("features.video_lowpass_hz", f.video_lowpass_hz);
    f.video_min_extremum_sep_s =
        kv.get_double("features.video_min_extremum_sep_s", f.video_min_extremum_sep_s);
    check(f.crop_fraction > 0 && f.crop_fraction <= 1.0,
          "features.crop_fraction must be in (0,1]");

    auto& t = c.train;
    t.hidden1 = kv.get_int("train.hidden1", t.hidden1);
    t.hidden2 = kv.get_int("train.hidden2", t.hidden2);
    t.dropout = kv.get_double("train.dropout", t.dropout);
    t.learning_rate = kv.get_double("train.learning_rate", t.learning_rate);
    t.epochs = kv.get_int("train.epochs", t.epochs);
    t.batch = kv.get_int("train.batch", t.batch);
    t.class_weights = kv.get_list("train.class_weights", t.class_weights);
    t.repeats = kv.get_int("train.repeats", t.repeats);
    t.rounds = kv.get_int("train.rounds", t.rounds);
    t.adapt_per_class = kv.get_int("train.adapt_per_class", t.adapt_per_class);
    check(t.batch >= 1, "train.batch must be at least 1");
    check(!t.class_weights.empty(), "train.class_weights must be non-empty");

    auto& p = c.pipeline;
    p.count_per_class = kv.get_int("pipeline.count_per_class", p.count_per_class);
    p.train_per_class = kv.get_int("pipeline.train_per_class", p.train_per_class);
    p.healthy_speed = kv.get_double("pipeline.healthy_speed", p.healthy_speed);
    p.healthy_speed_spread =
        kv.get_double("pipeline.healthy_speed_spread", p.healthy_speed_spread);
    p.healthy_cycle = kv.get_double("pipeline.healthy_cycle", p.healthy_cycle);
    p.healthy_cycle_spread =
        kv.get_double("pipeline.healthy_cycle_spread", p.healthy_cycle_spread);
    p.healthy_modulation =
        kv.get_double("pipeline.healthy_modulation", p.healthy_modulation);
    p.impaired_speed = kv.get_double("pipeline.impaired_speed", p.impaired_speed);
    p.impaired_speed_spread =
        kv.get_double("pipeline.impaired_speed_spread", p.impaired_speed_spread);
    p.impaired_cycle = kv.get_double("pipeline.impaired_cycle", p.impaired_cycle);
    p.impaired_cycle_spread =
        kv.get_double("pipeline.impaired_cycle_spread", p.impaired_cycle_spread);
    p.impaired_modulation =
        kv.get_double("pipeline.impaired_modulation", p.impaired_modulation);
    return c;
}

namespace {

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
}

std::string fmt(const Vec3& v) {
    return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z());
}

std::string fmt(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += " ";
        s += fmt(v[i]);
    }
    return s;
}

}  // namespace

KeyValueFile Config::to_kv() const {
    KeyValueFile kv;
    kv.set("scene.tx", fmt(scene.tx));
    kv.set("scene.rx", fmt(scene.rx));
    kv.set("scene.start_distance", fmt(scene.start_distance));
    kv.set("scene.walk_length", fmt(scene.walk_length));
    kv.set("scene.packet_rate", fmt(scene.packet_rate));
    kv.set("scene.carrier_ghz", fmt(scene.carrier_ghz));
    kv.set("scene.psi_mode", scene.psi_mode);
    kv.set("scene.psi_value", fmt(scene.psi_value));
    kv.set("walker.frame_rate", fmt(walker.frame_rate));
    kv.set("walker.points_per_part", std::to_string(walker.points_per_part));
    kv.set("walker.speed", fmt(walker.speed));
    kv.set("walker.gait_cycle", fmt(walker.gait_cycle));
    kv.set("walker.step_length", fmt(walker.step_length));
    kv.set("walker.modulation_depth", fmt(walker.modulation_depth));
    kv.set("walker.asymmetry", fmt(walker.asymmetry));
    kv.set("walker.arm_swing", fmt(walker.arm_swing));
    kv.set("walker.step_height", fmt(walker.step_height));
    kv.set("walker.jitter_mm", fmt(walker.jitter_mm));
    kv.set("walker.height", fmt(walker.height));
    kv.set("scattering.alpha", fmt(scattering.alpha));
    kv.set("scattering.beta", fmt(scattering.beta));
    kv.set("scattering.m", fmt(scattering.m));
    kv.set("geometry.alpha_scale", fmt(geometry.alpha_scale));
    for (const auto& [name, r] : geometry.alpha_overrides)
        kv.set("geometry.alpha_" + name, fmt(r));
    kv.set("dsp.window_s", fmt(dsp.window_s));
    kv.set("dsp.shift_s", fmt(dsp.shift_s));
    kv.set("dsp.tapers", std::to_string(dsp.tapers));
    kv.set("dsp.zero_pad", std::to_string(dsp.zero_pad));
    kv.set("dsp.taper_tmax", fmt(dsp.taper_tmax));
    kv.set("dsp.pca_streams", std::to_string(dsp.pca_streams));
    kv.set("features.crop_fraction", fmt(features.crop_fraction));
    kv.set("features.gesd_alpha", fmt(features.gesd_alpha));
    kv.set("features.gesd_max_fraction", fmt(features.gesd_max_fraction));
    kv.set("features.smooth_span", std::to_string(features.smooth_span));
    kv.set("features.min_peak_separation_s", fmt(features.min_peak_separation_s));
    kv.set("features.video_lowpass_hz", fmt(features.video_lowpass_hz));
    kv.set("features.video_min_extremum_sep_s",
           fmt(features.video_min_extremum_sep_s));
    kv.set("train.hidden1", std::to_string(train.hidden1));
    kv.set("train.hidden2", std::to_string(train.hidden2));
    kv.set("train.dropout", fmt(train.dropout));
    kv.set("train.learning_rate", fmt(train.learning_rate));
    kv.set("train.epochs", std::to_string(train.epochs));
    kv.set("train.batch", std::to_string(train.batch));
    kv.set("train.class_weights", fmt(train.class_weights));
    kv.set("train.repeats", std::to_string(train.repeats));
    kv.set("train.rounds", std::to_string(train.rounds));
    kv.set("train.adapt_per_class", std::to_string(train.adapt_per_class));
    kv.set("pipeline.count_per_class", std::to_string(pipeline.count_per_class));
    kv.set("pipeline.train_per_class", std::to_string(pipeline.train_per_class));
    kv.set("pipeline.healthy_speed", fmt(pipeline.healthy_speed));
    kv.set("pipeline.healthy_speed_spread", fmt(pipeline.healthy_speed_spread));
    kv.set("pipeline.healthy_cycle", fmt(pipeline.healthy_cycle));
    kv.set("pipeline.healthy_cycle_spread", fmt(pipeline.healthy_cycle_spread));
    kv.set("pipeline.healthy_modulation", fmt(pipeline.healthy_modulation));
    kv.set("pipeline.impaired_speed", fmt(pipeline.impaired_speed));
    kv.set("pipeline.impaired_speed_spread", fmt(pipeline.impaired_speed_spread));
    kv.set("pipeline.impaired_cycle", fmt(pipeline.impaired_cycle));
    kv.set("pipeline.impaired_cycle_spread", fmt(pipeline.impaired_cycle_spread));
    kv.set("pipeline.impaired_modulation", fmt(pipeline.impaired_modulation));
    return kv;
}

}  // namespace wigait
