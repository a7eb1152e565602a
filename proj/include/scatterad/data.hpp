#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scatterad/tensor.hpp"

namespace scatterad {

// Row-major matrix of raw samples, one row per time step.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    static Matrix zeros(int r, int c) {
        return Matrix{r, c, std::vector<double>(static_cast<std::size_t>(r) * c, 0.0)};
    }
};

struct ChannelStats {
    double mean = 0.0;
    double std = 1.0;  // guarded: constant channels use std = 1
};

// Raw train/test matrices plus the per-channel z-score statistics computed
// from the training split only.
struct TimeSeriesDataset {
    Matrix train;
    Matrix test;
    std::vector<int> test_labels;
    std::vector<std::string> channel_names;
    std::vector<ChannelStats> norm_stats;

    int channels() const { return train.cols; }
    void compute_norm_stats();
    Matrix normalized_train() const;
    Matrix normalized_test() const;
    Matrix denormalize(const Matrix& normalized) const;

    // Additive Gaussian noise of strength sigma (in normalized units) applied
    // to the test split; sigma = 0 returns the dataset unchanged.
    TimeSeriesDataset with_test_noise(double sigma, std::uint64_t seed) const;
};

// CSV layout: data files carry a header of channel names then one row of
// decimal floats per time step; the label file is one 0/1 per line, no header.
TimeSeriesDataset load_csv(const std::string& train_path, const std::string& test_path,
                           const std::string& labels_path);
void save_csv(const TimeSeriesDataset& ds, const std::string& train_path,
              const std::string& test_path, const std::string& labels_path);

// One sliding window: a leaf T x N tensor plus its start offset.
struct Window {
    int start = 0;
    Tensor values;
};

struct WindowPlan {
    int count = 0;
    int covered = 0;  // indices [0, covered) appear in some window
    int dropped = 0;  // trailing points shorter than one window
};

WindowPlan plan_windows(int length, int window, int stride);
std::vector<Window> make_windows(const Matrix& data, int window, int stride);

enum class AnomalyType { Point, Contextual, Shapelet };

struct SyntheticSpec {
    int train_length = 8000;
    int test_length = 4000;
    int channels = 8;
    int sources = 3;            // shared sinusoid sources mixed across channels
    double base_noise = 0.01;   // additive noise on the clean signal
    double anomaly_rate = 0.05; // target fraction of anomalous test points
    std::vector<AnomalyType> anomaly_types = {AnomalyType::Point, AnomalyType::Contextual,
                                              AnomalyType::Shapelet};
    std::uint64_t seed = 0;
};

// Mixed-sinusoid base signal with typed anomalies injected into the test
// split only; labels mark the injected spans exactly.
TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec);

struct ScatterReport {
    double score_normal = 0.0;      // mean distance to the normal-class center
    double score_anomalous = 0.0;   // same for the anomalous class
    double separation_ratio = 0.0;  // anomalous / normal
    double pairwise_normal = 0.0;   // mean pairwise distance within each class
    double pairwise_anomalous = 0.0;
    double noise_sigma = 0.0;
};

// Per-class dispersion of embeddings: distance to the class mean plus the
// mean pairwise distance. Both classes must be present.
ScatterReport scattering_analysis(const Matrix& embeddings, const std::vector<int>& labels,
                                  double noise_sigma);

}  // namespace scatterad
