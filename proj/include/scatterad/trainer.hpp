#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scatterad/data.hpp"
#include "scatterad/encoder.hpp"
#include "scatterad/graph.hpp"
#include "scatterad/metrics.hpp"
#include "scatterad/objective.hpp"

namespace scatterad {

enum class ContrastMode { SigmoidEdge, InfoNce };
enum class ScatterPath { Target, Online };

struct TrainConfig {
    int window = 110;
    int stride = 0;  // 0 -> non-overlapping (stride = window)
    int batch_size = 128;
    double lr = 1e-4;
    int epochs = 30;
    EmaConfig ema;
    bool ema_enabled = true;
    std::uint64_t seed = 42;
    ContrastMode contrast_mode = ContrastMode::SigmoidEdge;
    double infonce_temperature = 0.1;
    // The scattering loss needs a gradient path to the trained encoder; the
    // target encoder is EMA-only, so by default the online projection feeds
    // it. `Target` keeps the spelled-out target wiring (no gradient).
    ScatterPath scatter_path = ScatterPath::Online;
    TopologyConfig topology;
    // Per-term weights; 1 everywhere keeps the plain unweighted sum.
    double w_time = 1.0;
    double w_scatter = 1.0;
    double w_contrast = 1.0;

    int effective_stride() const { return stride > 0 ? stride : window; }
    void validate() const;
};

enum class ScoreMode { Distance, ReciprocalSimilarity };
enum class ThresholdMode { AbsoluteDelta, Percentile };

struct ScoreConfig {
    double delta = 1.0;
    ScoreMode mode = ScoreMode::Distance;
    ThresholdMode threshold_mode = ThresholdMode::AbsoluteDelta;
    double percentile = 95.0;
};

struct CenterConfig {
    CenterStrategy strategy = CenterStrategy::RandomInBall;
    double radius = 0.3;
    int count = 3;
};

// Everything a trained detector carries: both encoders, the frozen scattering
// center, the optional InfoNCE predictor, and the optimizer state.
struct ModelState {
    EncoderParams online;
    EncoderParams target;  // EMA copy; never gradient-updated
    ScatterCenter center;
    Tensor predictor;  // defined only in InfoNCE mode
    TrainConfig train_cfg;
    // Adam accumulators aligned with the learnable-parameter walk order.
    std::vector<std::vector<double>> adam_m;
    std::vector<std::vector<double>> adam_v;
    long long step = 0;

    std::vector<std::pair<std::string, Tensor>> learnable();
    static ModelState init(const EncoderConfig& enc, const CenterConfig& center,
                           const TrainConfig& train, std::uint64_t seed);
};

struct TrainStepLog {
    long long step = 0;
    LossBreakdown loss;
};

struct TrainHooks {
    // Invoked immediately before each EMA application (online params final
    // for that step/epoch).
    std::function<void(const ModelState&)> before_ema;
    // Invoked after each optimizer step.
    std::function<void(long long step, const ModelState&)> after_step;
};

// Differentiable composite loss over a batch of windows with pre-built
// graphs. Pure given the parameters unless mode.update_running is set.
struct BatchLoss {
    Tensor objective;  // scalar actually minimized (weighted sum)
    LossBreakdown parts;
};
BatchLoss compute_batch_loss(ModelState& model, const std::vector<Window>& windows,
                             const std::vector<TemporalGraph>& graphs, ForwardMode mode);

// Full training loop: seeded shuffling, Adam on the online parameters (and
// predictor), EMA per the configured cadence. Aborts with a diagnostic naming
// the offending term if a loss turns non-finite.
std::vector<TrainStepLog> train(ModelState& model, const TimeSeriesDataset& data,
                                const TrainHooks& hooks = {});

std::string loss_log_csv(const std::vector<TrainStepLog>& log);

// Per-timestep anomaly scores for one embedded window: nearest-center
// scattering deviation plus time inconsistency (t = 0 inherits t = 1).
std::vector<double> anomaly_score_window(const Tensor& z, const ScatterCenter& center,
                                         ScoreMode mode);

// Scores over the covered prefix of the test split (non-overlapping windows).
std::vector<double> anomaly_scores(ModelState& model, const TimeSeriesDataset& data,
                                   const ScoreConfig& score_cfg);

// Online-encoder embeddings for every covered test point (rows) — the input
// to the scattering analysis.
Matrix embed_test(ModelState& model, const TimeSeriesDataset& data);

std::vector<int> threshold(const std::vector<double>& scores, const ScoreConfig& cfg);

struct DeltaRow {
    double delta = 0.0;
    double aff_f = 0.0;
    double auc_roc = 0.0;
};
std::vector<DeltaRow> delta_sweep(ModelState& model, const TimeSeriesDataset& data,
                                  const std::vector<double>& deltas,
                                  const ScoreConfig& base_cfg);

// Full evaluation: scores, thresholded predictions, the twelve metrics, and
// the macro prediction statistics.
struct EvalReport {
    MetricReport metrics;
    std::vector<double> scores;
    std::vector<int> predictions;
    std::vector<int> truth;
    MacroStats macro;
};
EvalReport evaluate_detection(ModelState& model, const TimeSeriesDataset& data,
                              const ScoreConfig& score_cfg, const EvalOptions& opts = {});

// Versioned flat-text checkpoint (hex floats; exact round trip).
void save_checkpoint(const ModelState& model, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace scatterad
