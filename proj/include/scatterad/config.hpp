#pragma once

#include <map>
#include <string>
#include <vector>

#include "scatterad/data.hpp"
#include "scatterad/encoder.hpp"
#include "scatterad/metrics.hpp"
#include "scatterad/trainer.hpp"

namespace scatterad {

struct ConfigKey {
    std::string key;
    std::string default_value;
    std::string doc;
};

// Flat key=value run configuration. Every key has a documented default;
// unknown keys are rejected at set time.
class RunConfig {
public:
    RunConfig();

    static const std::vector<ConfigKey>& keys();

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    bool is_known(const std::string& key) const;
    // Parses a file of key=value lines ('#' comments allowed).
    void load_file(const std::string& path);
    // Parses a single "key=value" token.
    void set_pair(const std::string& pair);

    // typed getters (throw ConfigError naming the key on bad values)
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    // assembled module configurations
    EncoderConfig encoder_config(int in_channels) const;
    TrainConfig train_config() const;
    ScoreConfig score_config() const;
    CenterConfig center_config() const;
    SyntheticSpec synthetic_spec() const;
    EvalOptions eval_options() const;
    std::uint64_t seed() const;

    // Applies one ablation arm to the assembled configs. Arm names:
    // no_time, no_scatter, no_contrast, no_ema, no_gat, no_conv.
    static void apply_ablation(const std::string& arm, EncoderConfig& enc, TrainConfig& train);
    static const std::vector<std::string>& ablation_arms();

private:
    std::map<std::string, std::string> values_;
};

}  // namespace scatterad
