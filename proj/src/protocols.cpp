#include "scatterad/protocols.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "scatterad/errors.hpp"

namespace scatterad {

ModelState make_model(const RunConfig& cfg, int channels) {
    EncoderConfig enc = cfg.encoder_config(channels);
    TrainConfig train = cfg.train_config();
    const std::string& arm = cfg.get("ablate");
    if (arm != "none" && arm != "all") RunConfig::apply_ablation(arm, enc, train);
    return ModelState::init(enc, cfg.center_config(), train, cfg.seed());
}

TrainedModel train_model(const RunConfig& cfg, const TimeSeriesDataset& data,
                         std::uint64_t seed_override) {
    EncoderConfig enc = cfg.encoder_config(data.channels());
    TrainConfig tcfg = cfg.train_config();
    const std::string& arm = cfg.get("ablate");
    if (arm != "none" && arm != "all") RunConfig::apply_ablation(arm, enc, tcfg);
    TrainedModel out{ModelState::init(enc, cfg.center_config(), tcfg, seed_override), {}};
    out.log = train(out.model, data);
    return out;
}

std::string delta_sweep_csv(ModelState& model, const TimeSeriesDataset& data,
                            const RunConfig& cfg) {
    const auto rows = delta_sweep(model, data, cfg.get_double_list("sweep.deltas"),
                                  cfg.score_config());
    std::ostringstream os;
    os << "delta,aff_f1,auc_roc\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.3g,%.6f,%.6f\n", r.delta, r.aff_f, r.auc_roc);
        os << buf;
    }
    return os.str();
}

std::string shift_sensitivity_csv(const std::vector<int>& truth, const RunConfig& cfg) {
    const auto rows = shift_sensitivity(truth, cfg.get_int_list("sweep.shifts"));
    std::ostringstream os;
    os << "shift_steps,aff_f1,pointwise_f1\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f\n", r.shift, r.aff_f, r.pointwise_f1);
        os << buf;
    }
    return os.str();
}

std::string scatter_sweep_csv(ModelState& model, const TimeSeriesDataset& data,
                              const RunConfig& cfg) {
    std::ostringstream os;
    os << "sigma,score_normal,score_anomalous,separation_ratio,"
          "pairwise_normal,pairwise_anomalous\n";
    char buf[192];
    std::uint64_t tag = 0;
    for (double sigma : cfg.get_double_list("sweep.sigmas")) {
        TimeSeriesDataset noisy =
            data.with_test_noise(sigma, Rng::derive(cfg.seed(), 0xA0 + tag++));
        Matrix embeddings = embed_test(model, noisy);
        std::vector<int> labels(noisy.test_labels.begin(),
                                noisy.test_labels.begin() + embeddings.rows);
        ScatterReport r = scattering_analysis(embeddings, labels, sigma);
        std::snprintf(buf, sizeof(buf), "%.3g,%.6f,%.6f,%.6f,%.6f,%.6f\n", sigma,
                      r.score_normal, r.score_anomalous, r.separation_ratio,
                      r.pairwise_normal, r.pairwise_anomalous);
        os << buf;
    }
    return os.str();
}

StabilitySummary stability_protocol(const TimeSeriesDataset& data, const RunConfig& cfg) {
    const int runs = static_cast<int>(cfg.get_int("sweep.seeds"));
    if (runs < 2) throw ConfigError("config key 'sweep.seeds': needs at least 2 runs");
    std::vector<double> affs, aucs;
    std::ostringstream os;
    os << "seed,aff_f1,auc_roc\n";
    char buf[96];
    for (int i = 0; i < runs; ++i) {
        const std::uint64_t seed = cfg.seed() + static_cast<std::uint64_t>(i);
        TrainedModel tm = train_model(cfg, data, seed);
        EvalReport rep = evaluate_detection(tm.model, data, cfg.score_config(),
                                            cfg.eval_options());
        affs.push_back(rep.metrics.aff_f);
        aucs.push_back(rep.metrics.auc_roc);
        std::snprintf(buf, sizeof(buf), "%llu,%.6f,%.6f\n",
                      static_cast<unsigned long long>(seed), rep.metrics.aff_f,
                      rep.metrics.auc_roc);
        os << buf;
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto stdev = [&](const std::vector<double>& v, double m) {
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size()));
    };
    StabilitySummary out;
    out.mean_aff = mean(affs);
    out.std_aff = stdev(affs, out.mean_aff);
    out.mean_auc = mean(aucs);
    out.std_auc = stdev(aucs, out.mean_auc);
    std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f\n", out.mean_aff, out.mean_auc);
    os << buf;
    std::snprintf(buf, sizeof(buf), "std,%.6f,%.6f\n", out.std_aff, out.std_auc);
    os << buf;
    out.csv = os.str();
    return out;
}

std::string ablation_csv(const TimeSeriesDataset& data, const RunConfig& cfg,
                         const std::vector<std::string>& arms) {
    std::ostringstream os;
    os << "arm,";
    const auto& names = MetricReport::names();
    for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
    os << '\n';
    for (const std::string& arm : arms) {
        EncoderConfig enc = cfg.encoder_config(data.channels());
        TrainConfig tcfg = cfg.train_config();
        if (arm != "full") RunConfig::apply_ablation(arm, enc, tcfg);
        ModelState model = ModelState::init(enc, cfg.center_config(), tcfg, cfg.seed());
        train(model, data);
        EvalReport rep = evaluate_detection(model, data, cfg.score_config(),
                                            cfg.eval_options());
        os << arm << ',';
        const auto values = rep.metrics.values();
        char buf[32];
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) os << ',';
            if (std::isnan(values[i])) os << "nan";
            else {
                std::snprintf(buf, sizeof(buf), "%.6f", values[i]);
                os << buf;
            }
        }
        os << '\n';
    }
    return os.str();
}

std::string detect_csv(ModelState& model, const TimeSeriesDataset& data,
                       const RunConfig& cfg) {
    const ScoreConfig score_cfg = cfg.score_config();
    const auto scores = anomaly_scores(model, data, score_cfg);
    const auto pred = threshold(scores, score_cfg);
    std::ostringstream os;
    os << "index,score,label_pred\n";
    char buf[96];
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10g,%d\n", i, scores[i], pred[i]);
        os << buf;
    }
    return os.str();
}

}  // namespace scatterad
