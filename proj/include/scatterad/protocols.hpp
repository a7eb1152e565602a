#pragma once

#include <string>

#include "scatterad/config.hpp"
#include "scatterad/data.hpp"
#include "scatterad/trainer.hpp"

namespace scatterad {

// Builds a fresh (untrained) model for the dataset under the run config.
ModelState make_model(const RunConfig& cfg, int channels);

// Trains a fresh model and returns it with its per-step loss log.
struct TrainedModel {
    ModelState model;
    std::vector<TrainStepLog> log;
};
TrainedModel train_model(const RunConfig& cfg, const TimeSeriesDataset& data,
                         std::uint64_t seed_override);

// Threshold-sensitivity table: one row per delta, AUC column threshold-free.
// CSV schema: delta,aff_f1,auc_roc
std::string delta_sweep_csv(ModelState& model, const TimeSeriesDataset& data,
                            const RunConfig& cfg);

// Localization-error table built by shifting the truth stream against itself.
// CSV schema: shift_steps,aff_f1,pointwise_f1
std::string shift_sensitivity_csv(const std::vector<int>& truth, const RunConfig& cfg);

// Noise study: per-class scattering scores under increasing test noise.
// CSV schema: sigma,score_normal,score_anomalous,separation_ratio,
//             pairwise_normal,pairwise_anomalous
std::string scatter_sweep_csv(ModelState& model, const TimeSeriesDataset& data,
                              const RunConfig& cfg);

// Seed-stability study: retrains per seed and reports mean/std rows.
// CSV schema: seed,aff_f1,auc_roc with trailing mean/std rows
struct StabilitySummary {
    std::string csv;
    double mean_aff = 0.0, std_aff = 0.0;
    double mean_auc = 0.0, std_auc = 0.0;
};
StabilitySummary stability_protocol(const TimeSeriesDataset& data, const RunConfig& cfg);

// Ablation arms: retrains with one component disabled per row.
// CSV schema: arm followed by the twelve metric columns.
std::string ablation_csv(const TimeSeriesDataset& data, const RunConfig& cfg,
                         const std::vector<std::string>& arms);

// Scores for the covered test prefix as "index,score,label_pred" rows.
std::string detect_csv(ModelState& model, const TimeSeriesDataset& data,
                       const RunConfig& cfg);

}  // namespace scatterad
