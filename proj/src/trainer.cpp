#include "scatterad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "scatterad/errors.hpp"
#include "scatterad/rng.hpp"

namespace scatterad {

void TrainConfig::validate() const {
    if (window < 2) throw ConfigError("train: window must be >= 2");
    if (stride < 0) throw ConfigError("train: stride must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (lr < 0.0) throw ConfigError("train: learning rate must be >= 0");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (ema.m <= 0.0 || ema.m >= 1.0) throw ConfigError("train: ema momentum must lie in (0, 1)");
    if (window <= topology.tau && topology.kind == Topology::Lookback)
        throw ConfigError("train: window must exceed the look-back depth tau");
    if (infonce_temperature <= 0.0)
        throw ConfigError("train: infonce temperature must be positive");
}

std::vector<std::pair<std::string, Tensor>> ModelState::learnable() {
    auto params = online.learnable();
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(params.size() + 1);
    for (auto& [name, t] : params) out.emplace_back("online." + name, t);
    if (predictor.defined()) out.emplace_back("predictor", predictor);
    return out;
}

ModelState ModelState::init(const EncoderConfig& enc, const CenterConfig& center_cfg,
                            const TrainConfig& train_cfg, std::uint64_t seed) {
    train_cfg.validate();
    ModelState m;
    Rng rng(Rng::derive(seed, 0x1));
    m.online = EncoderParams::init(enc, rng, true);
    m.target = m.online.clone(false);
    m.center = init_center(center_cfg.strategy, enc.d_out, Rng::derive(seed, 0x2),
                           center_cfg.radius, center_cfg.count);
    if (train_cfg.contrast_mode == ContrastMode::InfoNce) {
        Rng prng(Rng::derive(seed, 0x3));
        m.predictor = Tensor::randn({enc.d_out, enc.d_out}, prng,
                                    1.0 / std::sqrt(static_cast<double>(enc.d_out)), true);
    }
    m.train_cfg = train_cfg;
    m.train_cfg.seed = seed;
    return m;
}

BatchLoss compute_batch_loss(ModelState& model, const std::vector<Window>& windows,
                             const std::vector<TemporalGraph>& graphs, ForwardMode mode) {
    if (windows.empty()) throw DataError("train: empty batch");
    if (windows.size() != graphs.size())
        throw NumericError("train: window/graph counts differ");
    const TrainConfig& cfg = model.train_cfg;
    ForwardMode target_mode{mode.training, false};  // target state is EMA-only

    Tensor time_sum, scatter_sum, contrast_sum;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const Tensor& x = windows[i].values;
        const TemporalGraph& g = graphs[i];
        Tensor z_on = encode(x, g, model.online, mode);
        Tensor z_tg = encode(x, g, model.target, target_mode);  // detached by construction

        Tensor lt = loss_time(z_on);
        Tensor ls = loss_scatter(cfg.scatter_path == ScatterPath::Online ? z_on : z_tg,
                                 model.center);
        Tensor lc = cfg.contrast_mode == ContrastMode::InfoNce
                        ? loss_infonce(z_on, z_tg, g, cfg.infonce_temperature,
                                       model.predictor).loss
                        : loss_contrast(z_on, z_tg, g);
        time_sum = time_sum.defined() ? time_sum + lt : lt;
        scatter_sum = scatter_sum.defined() ? scatter_sum + ls : ls;
        contrast_sum = contrast_sum.defined() ? contrast_sum + lc : lc;
    }
    const double inv = 1.0 / static_cast<double>(windows.size());
    Tensor lt = mul_scalar(time_sum, inv * cfg.w_time);
    Tensor ls = mul_scalar(scatter_sum, inv * cfg.w_scatter);
    Tensor lc = mul_scalar(contrast_sum, inv * cfg.w_contrast);

    BatchLoss out;
    out.objective = total_loss(lt, ls, lc);
    out.parts.time = lt.value();
    out.parts.scatter = ls.value();
    out.parts.contrast = lc.value();
    out.parts.total = out.objective.value();
    return out;
}

namespace {

void check_finite(const LossBreakdown& parts, long long step) {
    auto bad = [](double v) { return !std::isfinite(v); };
    if (bad(parts.time))
        throw NumericError("loss_time non-finite at step " + std::to_string(step));
    if (bad(parts.scatter))
        throw NumericError("loss_scatter non-finite at step " + std::to_string(step));
    if (bad(parts.contrast))
        throw NumericError("loss_contrast non-finite at step " + std::to_string(step));
    if (bad(parts.total))
        throw NumericError("loss_total non-finite at step " + std::to_string(step));
}

void adam_step(ModelState& model) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    auto params = model.learnable();
    if (model.adam_m.empty()) {
        model.adam_m.resize(params.size());
        model.adam_v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            model.adam_m[i].assign(static_cast<std::size_t>(params[i].second.size()), 0.0);
            model.adam_v[i].assign(static_cast<std::size_t>(params[i].second.size()), 0.0);
        }
    }
    model.step += 1;
    const double t = static_cast<double>(model.step);
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    const double lr = model.train_cfg.lr;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i].second;
        auto grad = p.grad();
        if (grad.empty()) continue;  // parameter unused by this mode
        auto data = p.mutable_data();
        auto& m = model.adam_m[i];
        auto& v = model.adam_v[i];
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double g = grad[j];
            m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g;
            v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g * g;
            data[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + kEps);
        }
    }
}

void apply_ema(ModelState& model, const TrainHooks& hooks) {
    if (!model.train_cfg.ema_enabled) return;
    if (hooks.before_ema) hooks.before_ema(model);
    auto target = model.target.learnable();
    auto online = model.online.learnable();
    ema_update(target, online, model.train_cfg.ema.m);
}

TemporalGraph graph_for_window(const TrainConfig& cfg, const Window& w, int window_len,
                               std::uint64_t draw_tag) {
    TopologyConfig topo = cfg.topology;
    if (topo.kind == Topology::Random)
        topo.seed = Rng::derive(Rng::derive(cfg.seed, 0x70D0), draw_tag);
    return build_topology(window_len, w.values, topo);
}

}  // namespace

std::vector<TrainStepLog> train(ModelState& model, const TimeSeriesDataset& data,
                                const TrainHooks& hooks) {
    const TrainConfig& cfg = model.train_cfg;
    cfg.validate();
    const Matrix train_norm = data.normalized_train();
    auto windows = make_windows(train_norm, cfg.window, cfg.effective_stride());
    if (windows.empty()) throw DataError("train: dataset provides no full window");

    // Static look-back topology is shared by every window.
    TemporalGraph lookback;
    if (cfg.topology.kind == Topology::Lookback) {
        TopologyConfig topo = cfg.topology;
        lookback = build_lookback(cfg.window, topo);
    }

    std::vector<TrainStepLog> log;
    Rng shuffle_rng(Rng::derive(cfg.seed, 0x5FFF));
    std::vector<int> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    std::uint64_t draw_counter = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Window> batch;
            std::vector<TemporalGraph> graphs;
            for (std::size_t i = begin; i < end; ++i) {
                const Window& w = windows[static_cast<std::size_t>(order[i])];
                batch.push_back(w);
                graphs.push_back(cfg.topology.kind == Topology::Lookback
                                     ? lookback
                                     : graph_for_window(cfg, w, cfg.window, draw_counter++));
            }

            for (auto& [name, p] : model.learnable()) p.zero_grad();
            BatchLoss loss =
                compute_batch_loss(model, batch, graphs, ForwardMode{true, true});
            check_finite(loss.parts, model.step + 1);
            backward(loss.objective);
            adam_step(model);
            log.push_back({model.step, loss.parts});
            if (hooks.after_step) hooks.after_step(model.step, model);
            if (cfg.ema_enabled && cfg.ema.cadence == EmaCadence::PerStep)
                apply_ema(model, hooks);
        }
        if (cfg.ema_enabled && cfg.ema.cadence == EmaCadence::PerEpoch)
            apply_ema(model, hooks);
    }
    return log;
}

std::string loss_log_csv(const std::vector<TrainStepLog>& log) {
    std::ostringstream os;
    os << "step,time,scatter,contrast,total\n";
    char buf[160];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g,%.10g,%.10g\n", row.step,
                      row.loss.time, row.loss.scatter, row.loss.contrast, row.loss.total);
        os << buf;
    }
    return os.str();
}

std::vector<double> anomaly_score_window(const Tensor& z, const ScatterCenter& center,
                                         ScoreMode mode) {
    constexpr double kEps = 1e-12;
    const int t_len = z.rows();
    const int d = z.cols();
    std::vector<double> scores(static_cast<std::size_t>(t_len), 0.0);

    for (int t = 0; t < t_len; ++t) {
        double znorm = 0.0;
        for (int j = 0; j < d; ++j) znorm += z.at(t, j) * z.at(t, j);
        znorm = std::sqrt(znorm);

        double best_cos = -2.0;   // nearest center = max cosine
        double worst_cos = 2.0;   // literal reciprocal reading uses min over k
        for (const auto& c : center.centers) {
            double dot = 0.0, cnorm = 0.0;
            for (int j = 0; j < d; ++j) {
                dot += z.at(t, j) * c[static_cast<std::size_t>(j)];
                cnorm += c[static_cast<std::size_t>(j)] * c[static_cast<std::size_t>(j)];
            }
            cnorm = std::sqrt(cnorm);
            const double cos = dot / ((znorm + kEps) * (cnorm + kEps));
            best_cos = std::max(best_cos, cos);
            worst_cos = std::min(worst_cos, cos);
        }
        double scatter_dev = 0.0;
        if (mode == ScoreMode::Distance) {
            scatter_dev = 1.0 - best_cos;
        } else {
            scatter_dev = 1.0 / std::max(kEps, worst_cos);
            scatter_dev = std::min(scatter_dev, 1.0 / kEps);
            scatter_dev = std::max(scatter_dev, 0.0);
        }
        scores[static_cast<std::size_t>(t)] = scatter_dev;
    }
    for (int t = 0; t < t_len; ++t) {
        const int cur = t == 0 ? 1 : t;  // boundary step inherits t = 1's value
        double acc = 0.0;
        if (t_len > 1) {
            for (int j = 0; j < d; ++j) {
                const double diff = z.at(cur, j) - z.at(cur - 1, j);
                acc += diff * diff;
            }
        }
        scores[static_cast<std::size_t>(t)] += acc / d;
    }
    return scores;
}

namespace {

// Embeds one window with the online encoder in inference mode.
Tensor embed_window(ModelState& model, const Window& w, std::uint64_t draw_tag) {
    const TrainConfig& cfg = model.train_cfg;
    TemporalGraph g = cfg.topology.kind == Topology::Lookback
                          ? build_lookback(w.values.rows(), cfg.topology)
                          : graph_for_window(cfg, w, w.values.rows(),
                                             Rng::derive(0xEAA1, draw_tag));
    return encode(w.values, g, model.online, ForwardMode{false, false});
}

}  // namespace

std::vector<double> anomaly_scores(ModelState& model, const TimeSeriesDataset& data,
                                   const ScoreConfig& score_cfg) {
    const Matrix test_norm = data.normalized_test();
    const int window = model.train_cfg.window;
    auto windows = make_windows(test_norm, window, window);
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(windows.size()) * window);
    std::uint64_t tag = 0;
    for (const Window& w : windows) {
        Tensor z = embed_window(model, w, tag++);
        auto s = anomaly_score_window(z, model.center, score_cfg.mode);
        scores.insert(scores.end(), s.begin(), s.end());
    }
    return scores;
}

Matrix embed_test(ModelState& model, const TimeSeriesDataset& data) {
    const Matrix test_norm = data.normalized_test();
    const int window = model.train_cfg.window;
    auto windows = make_windows(test_norm, window, window);
    Matrix out = Matrix::zeros(static_cast<int>(windows.size()) * window,
                               model.online.cfg.d_out);
    int row = 0;
    std::uint64_t tag = 0;
    for (const Window& w : windows) {
        Tensor z = embed_window(model, w, tag++);
        for (int t = 0; t < z.rows(); ++t, ++row)
            for (int j = 0; j < z.cols(); ++j) out.at(row, j) = z.at(t, j);
    }
    return out;
}

std::vector<int> threshold(const std::vector<double>& scores, const ScoreConfig& cfg) {
    if (scores.empty()) return {};
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericError("threshold: non-finite score");
    double delta = cfg.delta;
    if (cfg.threshold_mode == ThresholdMode::Percentile) {
        if (cfg.percentile <= 0.0 || cfg.percentile >= 100.0)
            throw ConfigError("threshold: percentile must lie in (0, 100)");
        std::vector<double> sorted = scores;
        std::sort(sorted.begin(), sorted.end());
        // nearest-rank percentile
        const std::size_t rank = static_cast<std::size_t>(
            std::ceil(cfg.percentile / 100.0 * static_cast<double>(sorted.size())));
        delta = sorted[std::max<std::size_t>(rank, 1) - 1];
    } else if (cfg.delta <= 0.0) {
        throw ConfigError("threshold: delta must be positive");
    }
    std::vector<int> labels(scores.size(), 0);
    for (std::size_t i = 0; i < scores.size(); ++i)
        labels[i] = scores[i] > delta ? 1 : 0;
    return labels;
}

std::vector<DeltaRow> delta_sweep(ModelState& model, const TimeSeriesDataset& data,
                                  const std::vector<double>& deltas,
                                  const ScoreConfig& base_cfg) {
    const auto scores = anomaly_scores(model, data, base_cfg);
    std::vector<int> truth(data.test_labels.begin(),
                           data.test_labels.begin() +
                               static_cast<std::ptrdiff_t>(scores.size()));
    const double roc = auc(scores, truth, Curve::Roc);  // threshold-free
    std::vector<DeltaRow> rows;
    for (double d : deltas) {
        ScoreConfig cfg = base_cfg;
        cfg.threshold_mode = ThresholdMode::AbsoluteDelta;
        cfg.delta = d;
        const auto pred = threshold(scores, cfg);
        rows.push_back({d, affiliation(pred, truth).f1, roc});
    }
    return rows;
}

EvalReport evaluate_detection(ModelState& model, const TimeSeriesDataset& data,
                              const ScoreConfig& score_cfg, const EvalOptions& opts) {
    EvalReport report;
    report.scores = anomaly_scores(model, data, score_cfg);
    if (report.scores.size() > data.test_labels.size())
        throw DataError("evaluate: more scores than labels");
    report.truth.assign(data.test_labels.begin(),
                        data.test_labels.begin() +
                            static_cast<std::ptrdiff_t>(report.scores.size()));
    report.predictions = threshold(report.scores, score_cfg);
    report.metrics = evaluate_streams(report.scores, report.predictions, report.truth, opts);
    report.macro = macro_stats(report.predictions, report.truth);
    return report;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "scatterad-checkpoint v1";

void write_values(std::FILE* f, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        std::fprintf(f, "%s%a", i ? " " : "", values[i]);
    std::fputc('\n', f);
}

std::vector<double> read_values(std::istream& in, std::size_t n) {
    std::vector<double> out;
    out.reserve(n);
    std::string line;
    if (!std::getline(in, line)) throw DataError("checkpoint: truncated value block");
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || !std::isfinite(v))
            throw DataError("checkpoint: bad value '" + tok + "'");
        out.push_back(v);
    }
    if (out.size() != n)
        throw DataError("checkpoint: expected " + std::to_string(n) + " values, got " +
                        std::to_string(out.size()));
    return out;
}

std::string topology_name(Topology t) {
    switch (t) {
        case Topology::Lookback: return "lookback";
        case Topology::Random: return "random";
        case Topology::Knn: return "knn";
    }
    return "?";
}

Topology topology_from_name(const std::string& s) {
    if (s == "lookback") return Topology::Lookback;
    if (s == "random") return Topology::Random;
    if (s == "knn") return Topology::Knn;
    throw ConfigError("unknown topology '" + s + "'");
}

}  // namespace

void save_checkpoint(const ModelState& model, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write checkpoint '" + path + "'");
    const EncoderConfig& e = model.online.cfg;
    const TrainConfig& t = model.train_cfg;
    std::fprintf(f, "%s\n", kCheckpointMagic);
    // header scalars in 17-digit decimal (istream-parsable, exact round trip)
    std::fprintf(f, "encoder %d %d %d %d %.17g %.17g %.17g", e.in_channels, e.d_out, e.heads,
                 e.gat_layers, e.leaky_slope, e.bn_eps, e.bn_momentum);
    std::fprintf(f, " %zu", e.kernels.size());
    for (int k : e.kernels) std::fprintf(f, " %d", k);
    std::fputc('\n', f);
    std::fprintf(f,
                 "train %d %d %d %.17g %d %.17g %s %d %llu %s %.17g %s %s %d %.17g %d "
                 "%.17g %.17g %.17g\n",
                 t.window, t.stride, t.batch_size, t.lr, t.epochs, t.ema.m,
                 t.ema.cadence == EmaCadence::PerStep ? "per_step" : "per_epoch",
                 t.ema_enabled ? 1 : 0, static_cast<unsigned long long>(t.seed),
                 t.contrast_mode == ContrastMode::InfoNce ? "infonce" : "sigmoid_edge",
                 t.infonce_temperature,
                 t.scatter_path == ScatterPath::Online ? "online" : "target",
                 topology_name(t.topology.kind).c_str(), t.topology.tau,
                 t.topology.edge_prob, t.topology.knn_k, t.w_time, t.w_scatter, t.w_contrast);
    std::fprintf(f, "center %s %llu %d %d\n", center_strategy_name(model.center.strategy),
                 static_cast<unsigned long long>(model.center.seed), model.center.count(),
                 model.center.dim());
    for (const auto& c : model.center.centers) write_values(f, {c.data(), c.size()});
    std::fprintf(f, "step %lld\n", model.step);
    std::fprintf(f, "predictor %d\n", model.predictor.defined() ? 1 : 0);
    if (model.predictor.defined()) write_values(f, model.predictor.data());

    auto dump_encoder = [&](const char* tag, EncoderParams& p) {
        auto params = p.learnable();
        auto buffers = p.buffers();
        std::fprintf(f, "%s %zu %zu\n", tag, params.size(), buffers.size());
        for (auto& [name, tensor] : params) {
            std::fprintf(f, "t %s %d", name.c_str(), tensor.ndim());
            for (int d : tensor.shape()) std::fprintf(f, " %d", d);
            std::fputc('\n', f);
            write_values(f, tensor.data());
        }
        for (auto& [name, vec] : buffers) {
            std::fprintf(f, "b %s %zu\n", name.c_str(), vec->size());
            write_values(f, {vec->data(), vec->size()});
        }
    };
    // learnable()/buffers() are non-const walks over shared handles
    dump_encoder("online", const_cast<EncoderParams&>(model.online));
    dump_encoder("target", const_cast<EncoderParams&>(model.target));

    std::fprintf(f, "adam %zu\n", model.adam_m.size());
    for (std::size_t i = 0; i < model.adam_m.size(); ++i) {
        std::fprintf(f, "m %zu %zu\n", i, model.adam_m[i].size());
        write_values(f, {model.adam_m[i].data(), model.adam_m[i].size()});
        std::fprintf(f, "v %zu %zu\n", i, model.adam_v[i].size());
        write_values(f, {model.adam_v[i].data(), model.adam_v[i].size()});
    }
    std::fprintf(f, "end\n");
    std::fclose(f);
}

ModelState load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic)
        throw DataError("checkpoint: bad magic line in '" + path + "'");

    auto expect_word = [&](std::istream& is, const char* what) {
        std::string w;
        if (!(is >> w)) throw DataError(std::string("checkpoint: missing ") + what);
        return w;
    };

    EncoderConfig e;
    {
        if (!std::getline(in, line)) throw DataError("checkpoint: missing encoder line");
        std::istringstream is(line);
        if (expect_word(is, "encoder tag") != "encoder")
            throw DataError("checkpoint: malformed encoder line");
        std::size_t nk = 0;
        is >> e.in_channels >> e.d_out >> e.heads >> e.gat_layers >> e.leaky_slope >>
            e.bn_eps >> e.bn_momentum >> nk;
        e.kernels.assign(nk, 0);
        for (std::size_t i = 0; i < nk; ++i) is >> e.kernels[i];
        if (!is) throw DataError("checkpoint: malformed encoder line");
    }
    TrainConfig t;
    {
        if (!std::getline(in, line)) throw DataError("checkpoint: missing train line");
        std::istringstream is(line);
        if (expect_word(is, "train tag") != "train")
            throw DataError("checkpoint: malformed train line");
        std::string cadence, contrast, spath, topo;
        int ema_enabled = 1;
        unsigned long long seed = 0;
        is >> t.window >> t.stride >> t.batch_size >> t.lr >> t.epochs >> t.ema.m >>
            cadence >> ema_enabled >> seed >> contrast >> t.infonce_temperature >> spath >>
            topo >> t.topology.tau >> t.topology.edge_prob >> t.topology.knn_k >> t.w_time >>
            t.w_scatter >> t.w_contrast;
        if (!is) throw DataError("checkpoint: malformed train line");
        t.ema.cadence = cadence == "per_step" ? EmaCadence::PerStep : EmaCadence::PerEpoch;
        t.ema_enabled = ema_enabled != 0;
        t.seed = seed;
        t.contrast_mode =
            contrast == "infonce" ? ContrastMode::InfoNce : ContrastMode::SigmoidEdge;
        t.scatter_path = spath == "online" ? ScatterPath::Online : ScatterPath::Target;
        t.topology.kind = topology_from_name(topo);
    }

    ModelState m;
    m.train_cfg = t;
    {
        if (!std::getline(in, line)) throw DataError("checkpoint: missing center line");
        std::istringstream is(line);
        if (expect_word(is, "center tag") != "center")
            throw DataError("checkpoint: malformed center line");
        std::string strategy;
        unsigned long long seed = 0;
        int count = 0, dim = 0;
        is >> strategy >> seed >> count >> dim;
        if (!is) throw DataError("checkpoint: malformed center line");
        m.center.strategy = center_strategy_from_name(strategy);
        m.center.seed = seed;
        for (int i = 0; i < count; ++i)
            m.center.centers.push_back(read_values(in, static_cast<std::size_t>(dim)));
    }
    {
        if (!std::getline(in, line)) throw DataError("checkpoint: missing step line");
        std::istringstream is(line);
        if (expect_word(is, "step tag") != "step")
            throw DataError("checkpoint: malformed step line");
        is >> m.step;
    }
    {
        if (!std::getline(in, line)) throw DataError("checkpoint: missing predictor line");
        std::istringstream is(line);
        if (expect_word(is, "predictor tag") != "predictor")
            throw DataError("checkpoint: malformed predictor line");
        int has = 0;
        is >> has;
        if (has) {
            auto values = read_values(in, static_cast<std::size_t>(e.d_out) * e.d_out);
            m.predictor = Tensor::from_data({e.d_out, e.d_out}, std::move(values), true);
        }
    }

    Rng dummy(1);
    m.online = EncoderParams::init(e, dummy, true);
    m.target = EncoderParams::init(e, dummy, false);
    auto load_encoder = [&](const char* tag, EncoderParams& p) {
        if (!std::getline(in, line)) throw DataError("checkpoint: missing encoder block");
        std::istringstream is(line);
        if (expect_word(is, tag) != tag)
            throw DataError(std::string("checkpoint: expected block '") + tag + "'");
        std::size_t nparams = 0, nbuffers = 0;
        is >> nparams >> nbuffers;
        auto params = p.learnable();
        auto buffers = p.buffers();
        if (nparams != params.size() || nbuffers != buffers.size())
            throw DataError("checkpoint: parameter layout mismatch");
        for (std::size_t i = 0; i < nparams; ++i) {
            if (!std::getline(in, line)) throw DataError("checkpoint: truncated tensor");
            std::istringstream head(line);
            std::string kind, name;
            int ndim = 0;
            head >> kind >> name >> ndim;
            if (kind != "t" || name != params[i].first)
                throw DataError("checkpoint: expected tensor '" + params[i].first +
                                "', got '" + name + "'");
            std::vector<int> shape(static_cast<std::size_t>(ndim), 0);
            for (int d = 0; d < ndim; ++d) head >> shape[static_cast<std::size_t>(d)];
            if (shape != params[i].second.shape())
                throw DataError("checkpoint: shape mismatch for '" + name + "'");
            auto values = read_values(in, static_cast<std::size_t>(params[i].second.size()));
            auto dst = params[i].second.mutable_data();
            std::copy(values.begin(), values.end(), dst.begin());
        }
        for (std::size_t i = 0; i < nbuffers; ++i) {
            if (!std::getline(in, line)) throw DataError("checkpoint: truncated buffer");
            std::istringstream head(line);
            std::string kind, name;
            std::size_t len = 0;
            head >> kind >> name >> len;
            if (kind != "b" || name != buffers[i].first)
                throw DataError("checkpoint: expected buffer '" + buffers[i].first + "'");
            *buffers[i].second = read_values(in, len);
        }
    };
    load_encoder("online", m.online);
    load_encoder("target", m.target);

    {
        if (!std::getline(in, line)) throw DataError("checkpoint: missing adam block");
        std::istringstream is(line);
        if (expect_word(is, "adam tag") != "adam")
            throw DataError("checkpoint: malformed adam line");
        std::size_t n = 0;
        is >> n;
        m.adam_m.resize(n);
        m.adam_v.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (int which = 0; which < 2; ++which) {
                if (!std::getline(in, line)) throw DataError("checkpoint: truncated adam");
                std::istringstream head(line);
                std::string kind;
                std::size_t idx = 0, len = 0;
                head >> kind >> idx >> len;
                auto& slot = kind == "m" ? m.adam_m : m.adam_v;
                if (idx != i) throw DataError("checkpoint: adam blocks out of order");
                slot[i] = read_values(in, len);
            }
        }
    }
    return m;
}

}  // namespace scatterad
