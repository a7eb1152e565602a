#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scatterad/graph.hpp"
#include "scatterad/tensor.hpp"

namespace scatterad {

enum class CenterStrategy { RandomInBall, Zero, FixedRadius, MultiCenter };

// Fixed anchor vector(s) strictly inside the unit ball. Initialized once per
// run and never updated afterwards.
struct ScatterCenter {
    CenterStrategy strategy = CenterStrategy::RandomInBall;
    std::vector<std::vector<double>> centers;  // each of length d
    std::uint64_t seed = 0;

    int dim() const { return centers.empty() ? 0 : static_cast<int>(centers.front().size()); }
    int count() const { return static_cast<int>(centers.size()); }
    bool all_zero() const;
};

// RandomInBall: direction uniform on the sphere, radius uniform in (0, 1).
// Zero: the origin. FixedRadius: random direction scaled to radius exactly.
// MultiCenter: `count` independent RandomInBall draws.
ScatterCenter init_center(CenterStrategy strategy, int dim, std::uint64_t seed,
                          double radius = 0.3, int count = 3);

const char* center_strategy_name(CenterStrategy s);
CenterStrategy center_strategy_from_name(const std::string& name);

// Row-wise L2 normalization onto the unit hypersphere (eps-guarded).
Tensor project_to_sphere(const Tensor& z, double eps = 1e-12);

// Mean squared step between consecutive rows: penalizes abrupt representation
// shifts in time.
Tensor loss_time(const Tensor& z);

// Negative mean cosine between sphere-projected rows and the nearest center.
// Degenerates to a constant 0 for the all-zero center strategy.
Tensor loss_scatter(const Tensor& z, const ScatterCenter& center);

// Positive-pair alignment over graph edges: -mean log sigmoid(cos(online_s,
// target_d)). The target side carries no gradient when detached by the caller.
Tensor loss_contrast(const Tensor& z_online, const Tensor& z_target,
                     const TemporalGraph& graph);

struct InfoNceResult {
    Tensor loss;
    double mi_estimate = 0.0;  // log(|B| - 1) - loss, by construction
    int batch_size = 0;        // |B|, the number of edges
};

// Softmax-over-negatives contrastive loss with a learnable linear predictor
// on the online side; negatives are the batch's edge destinations.
InfoNceResult loss_infonce(const Tensor& z_online, const Tensor& z_target,
                           const TemporalGraph& graph, double temperature,
                           const Tensor& predictor);

struct LossBreakdown {
    double time = 0.0;
    double scatter = 0.0;
    double contrast = 0.0;
    double total = 0.0;
};

// Unweighted sum of the three components.
double total_loss(const LossBreakdown& parts);
Tensor total_loss(const Tensor& time, const Tensor& scatter, const Tensor& contrast);

enum class EmaCadence { PerEpoch, PerStep };

struct EmaConfig {
    double m = 0.99;
    EmaCadence cadence = EmaCadence::PerEpoch;
};

// target <- m * target + (1 - m) * online, elementwise over paired tensors.
void ema_update(std::vector<std::pair<std::string, Tensor>>& target,
                std::vector<std::pair<std::string, Tensor>>& online, double m);

}  // namespace scatterad
