#include "scatterad/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "scatterad/errors.hpp"

namespace scatterad {

const std::vector<ConfigKey>& RunConfig::keys() {
    static const std::vector<ConfigKey> kKeys = {
        {"seed", "42", "global RNG seed; every command is reproducible from it"},
        {"out_dir", ".", "directory for generated files"},
        {"data.train_csv", "", "training data CSV (header of channel names)"},
        {"data.test_csv", "", "test data CSV (same header as the training file)"},
        {"data.labels_csv", "", "test labels, one 0/1 per line, no header"},
        {"io.checkpoint", "checkpoint.txt", "checkpoint file name under out_dir"},
        {"synth.train_points", "8000", "synthetic: training points"},
        {"synth.test_points", "4000", "synthetic: test points"},
        {"synth.channels", "8", "synthetic: channel count"},
        {"synth.sources", "3", "synthetic: shared sinusoid sources"},
        {"synth.base_noise", "0.01", "synthetic: clean-signal noise level"},
        {"synth.anomaly_rate", "0.05", "synthetic: target anomalous fraction in (0, 0.5)"},
        {"synth.anomaly_types", "point,contextual,shapelet",
         "synthetic: comma list of anomaly types to inject"},
        {"train.window", "110", "sliding window length T"},
        {"train.stride", "0", "window stride; 0 means non-overlapping (= window)"},
        {"train.batch", "128", "windows per optimizer step"},
        {"train.lr", "0.0001", "Adam learning rate"},
        {"train.epochs", "30", "training epochs"},
        {"train.ema_m", "0.99", "EMA momentum m in (0, 1)"},
        {"train.ema_cadence", "per_epoch", "EMA cadence: per_epoch or per_step"},
        {"train.contrast", "sigmoid_edge",
         "contrastive term: sigmoid_edge or infonce (adds a linear predictor)"},
        {"train.infonce_tau", "0.1", "InfoNCE temperature"},
        {"train.scatter_path", "online",
         "representation fed to the scattering loss: online (trainable) or target"},
        {"train.w_time", "1", "weight of the time-consistency term"},
        {"train.w_scatter", "1", "weight of the scattering term"},
        {"train.w_contrast", "1", "weight of the contrastive term"},
        {"model.d_out", "32", "encoder output width"},
        {"model.heads", "4", "attention heads per layer"},
        {"model.gat_layers", "2", "attention layers in the stack"},
        {"model.kernels", "2,4,8", "causal convolution branch lengths"},
        {"center.strategy", "random_in_ball",
         "scattering center init: random_in_ball, zero, fixed_radius, multi_center"},
        {"center.radius", "0.3", "radius for the fixed_radius strategy, in (0, 1]"},
        {"center.count", "3", "centers for the multi_center strategy"},
        {"topology.kind", "lookback", "temporal graph: lookback, random, or knn"},
        {"topology.tau", "2", "look-back depth"},
        {"topology.edge_prob", "0.3", "random topology inclusion probability"},
        {"topology.knn_k", "3", "neighbors per node for the knn topology"},
        {"score.delta", "1.0", "anomaly threshold"},
        {"score.mode", "distance",
         "scattering deviation: distance (1 - cos) or reciprocal_similarity"},
        {"score.threshold", "absolute", "threshold mode: absolute or percentile"},
        {"score.percentile", "95", "percentile for the percentile threshold mode"},
        {"eval.range_buffer", "auto",
         "range-AUC boundary buffer; auto = median truth-segment length"},
        {"eval.vus_max_l", "auto",
         "VUS buffer sweep width; auto = 4 x median segment length, capped"},
        {"sweep.deltas", "0.2,0.4,0.6,0.8,1.0", "delta values for simulate delta"},
        {"sweep.shifts", "0,1,2,5,10", "shift steps for simulate sensitivity"},
        {"sweep.sigmas", "0,0.5,1,2", "noise levels for simulate scatter"},
        {"sweep.seeds", "5", "reruns for simulate stability"},
        {"ablate", "none",
         "evaluate: retrain with a component disabled "
         "(no_time,no_scatter,no_contrast,no_ema,no_gat,no_conv,all)"},
    };
    return kKeys;
}

RunConfig::RunConfig() {
    for (const auto& k : keys()) values_[k.key] = k.default_value;
}

bool RunConfig::is_known(const std::string& key) const { return values_.count(key) > 0; }

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

void RunConfig::set_pair(const std::string& pair) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos)
        throw ConfigError("expected key=value, got '" + pair + "'");
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t");
        if (first == std::string::npos) return std::string();
        const auto last = s.find_last_not_of(" \t");
        return s.substr(first, last - first + 1);
    };
    set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        line = line.substr(first, last - first + 1);
        try {
            set_pair(line);
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

namespace {

long long parse_int(const std::string& value, const std::string& key) {
    char* end = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    return v;
}

double parse_double(const std::string& value, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(value);
    while (std::getline(is, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

long long RunConfig::get_int(const std::string& key) const { return parse_int(get(key), key); }
double RunConfig::get_double(const std::string& key) const { return parse_double(get(key), key); }

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(get(key))) out.push_back(parse_double(item, key));
    return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : split_list(get(key)))
        out.push_back(static_cast<int>(parse_int(item, key)));
    return out;
}

std::uint64_t RunConfig::seed() const {
    return static_cast<std::uint64_t>(get_int("seed"));
}

EncoderConfig RunConfig::encoder_config(int in_channels) const {
    EncoderConfig e;
    e.in_channels = in_channels;
    e.d_out = static_cast<int>(get_int("model.d_out"));
    e.heads = static_cast<int>(get_int("model.heads"));
    e.gat_layers = static_cast<int>(get_int("model.gat_layers"));
    e.kernels = get_int_list("model.kernels");
    e.validate();
    return e;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.window = static_cast<int>(get_int("train.window"));
    t.stride = static_cast<int>(get_int("train.stride"));
    t.batch_size = static_cast<int>(get_int("train.batch"));
    t.lr = get_double("train.lr");
    t.epochs = static_cast<int>(get_int("train.epochs"));
    t.ema.m = get_double("train.ema_m");
    const std::string& cadence = get("train.ema_cadence");
    if (cadence == "per_epoch") t.ema.cadence = EmaCadence::PerEpoch;
    else if (cadence == "per_step") t.ema.cadence = EmaCadence::PerStep;
    else throw ConfigError("config key 'train.ema_cadence': expected per_epoch or per_step");
    t.seed = seed();
    const std::string& contrast = get("train.contrast");
    if (contrast == "sigmoid_edge") t.contrast_mode = ContrastMode::SigmoidEdge;
    else if (contrast == "infonce") t.contrast_mode = ContrastMode::InfoNce;
    else throw ConfigError("config key 'train.contrast': expected sigmoid_edge or infonce");
    t.infonce_temperature = get_double("train.infonce_tau");
    const std::string& spath = get("train.scatter_path");
    if (spath == "target") t.scatter_path = ScatterPath::Target;
    else if (spath == "online") t.scatter_path = ScatterPath::Online;
    else throw ConfigError("config key 'train.scatter_path': expected target or online");
    t.w_time = get_double("train.w_time");
    t.w_scatter = get_double("train.w_scatter");
    t.w_contrast = get_double("train.w_contrast");

    const std::string& topo = get("topology.kind");
    if (topo == "lookback") t.topology.kind = Topology::Lookback;
    else if (topo == "random") t.topology.kind = Topology::Random;
    else if (topo == "knn") t.topology.kind = Topology::Knn;
    else throw ConfigError("config key 'topology.kind': expected lookback, random, or knn");
    t.topology.tau = static_cast<int>(get_int("topology.tau"));
    t.topology.edge_prob = get_double("topology.edge_prob");
    t.topology.knn_k = static_cast<int>(get_int("topology.knn_k"));
    t.validate();
    return t;
}

ScoreConfig RunConfig::score_config() const {
    ScoreConfig s;
    s.delta = get_double("score.delta");
    const std::string& mode = get("score.mode");
    if (mode == "distance") s.mode = ScoreMode::Distance;
    else if (mode == "reciprocal_similarity") s.mode = ScoreMode::ReciprocalSimilarity;
    else throw ConfigError("config key 'score.mode': expected distance or reciprocal_similarity");
    const std::string& tmode = get("score.threshold");
    if (tmode == "absolute") s.threshold_mode = ThresholdMode::AbsoluteDelta;
    else if (tmode == "percentile") s.threshold_mode = ThresholdMode::Percentile;
    else throw ConfigError("config key 'score.threshold': expected absolute or percentile");
    s.percentile = get_double("score.percentile");
    if (s.delta <= 0.0) throw ConfigError("config key 'score.delta': must be positive");
    return s;
}

CenterConfig RunConfig::center_config() const {
    CenterConfig c;
    c.strategy = center_strategy_from_name(get("center.strategy"));
    c.radius = get_double("center.radius");
    c.count = static_cast<int>(get_int("center.count"));
    return c;
}

SyntheticSpec RunConfig::synthetic_spec() const {
    SyntheticSpec s;
    s.train_length = static_cast<int>(get_int("synth.train_points"));
    s.test_length = static_cast<int>(get_int("synth.test_points"));
    s.channels = static_cast<int>(get_int("synth.channels"));
    s.sources = static_cast<int>(get_int("synth.sources"));
    s.base_noise = get_double("synth.base_noise");
    s.anomaly_rate = get_double("synth.anomaly_rate");
    s.anomaly_types.clear();
    for (const auto& name : split_list(get("synth.anomaly_types"))) {
        if (name == "point") s.anomaly_types.push_back(AnomalyType::Point);
        else if (name == "contextual") s.anomaly_types.push_back(AnomalyType::Contextual);
        else if (name == "shapelet") s.anomaly_types.push_back(AnomalyType::Shapelet);
        else throw ConfigError("config key 'synth.anomaly_types': unknown type '" + name + "'");
    }
    s.seed = seed();
    return s;
}

EvalOptions RunConfig::eval_options() const {
    EvalOptions o;
    const std::string& rb = get("eval.range_buffer");
    if (rb != "auto") o.range_buffer = static_cast<int>(parse_int(rb, "eval.range_buffer"));
    const std::string& vm = get("eval.vus_max_l");
    if (vm != "auto") o.vus_max_buffer = static_cast<int>(parse_int(vm, "eval.vus_max_l"));
    return o;
}

const std::vector<std::string>& RunConfig::ablation_arms() {
    static const std::vector<std::string> kArms = {"no_time",     "no_scatter", "no_contrast",
                                                   "no_ema",      "no_gat",     "no_conv"};
    return kArms;
}

void RunConfig::apply_ablation(const std::string& arm, EncoderConfig& enc, TrainConfig& train) {
    if (arm == "no_time") train.w_time = 0.0;
    else if (arm == "no_scatter") train.w_scatter = 0.0;
    else if (arm == "no_contrast") train.w_contrast = 0.0;
    else if (arm == "no_ema") train.ema_enabled = false;
    else if (arm == "no_gat") enc.gat_layers = 0;
    else if (arm == "no_conv") enc.kernels = {1};  // plain per-step projection
    else throw ConfigError("unknown ablation arm '" + arm + "'");
}

}  // namespace scatterad
