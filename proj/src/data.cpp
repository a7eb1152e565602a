#include "scatterad/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "scatterad/errors.hpp"
#include "scatterad/rng.hpp"

namespace scatterad {

namespace {

constexpr double kStdGuard = 1e-8;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, int row, int col, const std::string& path) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || (end && *end != '\0' && *end != '\r')) {
        throw DataError(path + ": non-numeric cell at row " + std::to_string(row) +
                        ", column " + std::to_string(col) + " ('" + cell + "')");
    }
    return v;
}

Matrix read_data_csv(const std::string& path, std::vector<std::string>& names_out) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    names_out = split_csv_line(line);
    const int cols = static_cast<int>(names_out.size());
    if (cols == 0) throw DataError(path + ": header has no channels");

    Matrix m;
    m.cols = cols;
    int row = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != cols)
            throw DataError(path + ": row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(cols));
        for (int c = 0; c < cols; ++c)
            m.values.push_back(parse_cell(cells[static_cast<std::size_t>(c)], row, c, path));
        ++m.rows;
        ++row;
    }
    if (m.rows == 0) throw DataError(path + ": no data rows");
    return m;
}

std::vector<int> read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open label file '" + path + "'");
    std::vector<int> labels;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line != "0" && line != "1")
            throw DataError(path + ": row " + std::to_string(row) +
                            " is not a 0/1 label ('" + line + "')");
        labels.push_back(line == "1" ? 1 : 0);
        ++row;
    }
    return labels;
}

void write_value(std::FILE* f, double v) {
    // 17 significant digits round-trip any double exactly through decimal.
    std::fprintf(f, "%.17g", v);
}

void write_data_csv(const std::string& path, const Matrix& m,
                    const std::vector<std::string>& names) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write data file '" + path + "'");
    for (int c = 0; c < m.cols; ++c)
        std::fprintf(f, "%s%s", c ? "," : "", names[static_cast<std::size_t>(c)].c_str());
    std::fprintf(f, "\n");
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (c) std::fputc(',', f);
            write_value(f, m.at(r, c));
        }
        std::fputc('\n', f);
    }
    std::fclose(f);
}

}  // namespace

void TimeSeriesDataset::compute_norm_stats() {
    norm_stats.assign(static_cast<std::size_t>(train.cols), ChannelStats{});
    for (int c = 0; c < train.cols; ++c) {
        double sum = 0.0;
        for (int r = 0; r < train.rows; ++r) sum += train.at(r, c);
        const double mean = sum / train.rows;
        double var = 0.0;
        for (int r = 0; r < train.rows; ++r) {
            const double d = train.at(r, c) - mean;
            var += d * d;
        }
        var /= train.rows;  // population std
        const double std = std::sqrt(var);
        norm_stats[static_cast<std::size_t>(c)] = {mean, std < kStdGuard ? 1.0 : std};
    }
}

namespace {
Matrix apply_norm(const Matrix& m, const std::vector<ChannelStats>& stats) {
    Matrix out = m;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            out.at(r, c) = (m.at(r, c) - stats[static_cast<std::size_t>(c)].mean) /
                           stats[static_cast<std::size_t>(c)].std;
    return out;
}
}  // namespace

Matrix TimeSeriesDataset::normalized_train() const { return apply_norm(train, norm_stats); }
Matrix TimeSeriesDataset::normalized_test() const { return apply_norm(test, norm_stats); }

Matrix TimeSeriesDataset::denormalize(const Matrix& normalized) const {
    Matrix out = normalized;
    for (int r = 0; r < normalized.rows; ++r)
        for (int c = 0; c < normalized.cols; ++c)
            out.at(r, c) = normalized.at(r, c) * norm_stats[static_cast<std::size_t>(c)].std +
                           norm_stats[static_cast<std::size_t>(c)].mean;
    return out;
}

TimeSeriesDataset TimeSeriesDataset::with_test_noise(double sigma, std::uint64_t seed) const {
    if (sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
    TimeSeriesDataset out = *this;
    if (sigma == 0.0) return out;
    // Noise of strength sigma in normalized units equals sigma * channel std
    // in raw units, so the normalized view sees exactly N(0, sigma^2).
    Rng rng(seed);
    for (int r = 0; r < out.test.rows; ++r)
        for (int c = 0; c < out.test.cols; ++c)
            out.test.at(r, c) +=
                rng.normal() * sigma * norm_stats[static_cast<std::size_t>(c)].std;
    return out;
}

TimeSeriesDataset load_csv(const std::string& train_path, const std::string& test_path,
                           const std::string& labels_path) {
    TimeSeriesDataset ds;
    std::vector<std::string> train_names, test_names;
    ds.train = read_data_csv(train_path, train_names);
    ds.test = read_data_csv(test_path, test_names);
    if (train_names != test_names)
        throw DataError("train and test headers disagree between '" + train_path +
                        "' and '" + test_path + "'");
    ds.channel_names = train_names;
    ds.test_labels = read_labels_csv(labels_path);
    if (static_cast<int>(ds.test_labels.size()) != ds.test.rows)
        throw DataError(labels_path + ": " + std::to_string(ds.test_labels.size()) +
                        " labels for " + std::to_string(ds.test.rows) + " test rows");
    ds.compute_norm_stats();
    return ds;
}

void save_csv(const TimeSeriesDataset& ds, const std::string& train_path,
              const std::string& test_path, const std::string& labels_path) {
    write_data_csv(train_path, ds.train, ds.channel_names);
    write_data_csv(test_path, ds.test, ds.channel_names);
    std::FILE* f = std::fopen(labels_path.c_str(), "w");
    if (!f) throw DataError("cannot write label file '" + labels_path + "'");
    for (int v : ds.test_labels) std::fprintf(f, "%d\n", v);
    std::fclose(f);
}

WindowPlan plan_windows(int length, int window, int stride) {
    if (window <= 0) throw ConfigError("window length must be positive");
    if (stride <= 0) throw ConfigError("window stride must be positive");
    if (window > length)
        throw DataError("window length " + std::to_string(window) +
                        " exceeds stream length " + std::to_string(length));
    WindowPlan plan;
    plan.count = (length - window) / stride + 1;
    plan.covered = (plan.count - 1) * stride + window;
    plan.dropped = length - plan.covered;
    return plan;
}

std::vector<Window> make_windows(const Matrix& data, int window, int stride) {
    WindowPlan plan = plan_windows(data.rows, window, stride);
    std::vector<Window> out;
    out.reserve(static_cast<std::size_t>(plan.count));
    for (int w = 0; w < plan.count; ++w) {
        const int start = w * stride;
        std::vector<double> values(static_cast<std::size_t>(window) * data.cols);
        std::copy(data.values.begin() + static_cast<std::ptrdiff_t>(start) * data.cols,
                  data.values.begin() + static_cast<std::ptrdiff_t>(start + window) * data.cols,
                  values.begin());
        out.push_back(Window{start, Tensor::from_data({window, data.cols}, std::move(values))});
    }
    return out;
}

namespace {

struct SourceBank {
    std::vector<double> freq;   // cycles per step
    std::vector<double> phase;
    std::vector<double> mix;    // channels x sources
};

double base_value(const SourceBank& bank, int channels, int sources, int ch, long t) {
    double v = 0.0;
    for (int s = 0; s < sources; ++s) {
        v += bank.mix[static_cast<std::size_t>(ch) * sources + s] *
             std::sin(2.0 * 3.14159265358979323846 *
                          bank.freq[static_cast<std::size_t>(s)] * static_cast<double>(t) +
                      bank.phase[static_cast<std::size_t>(s)]);
    }
    (void)channels;
    return v;
}

}  // namespace

TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.train_length < 2 || spec.test_length < 2)
        throw ConfigError("synthetic: lengths must be >= 2");
    if (spec.channels < 1) throw ConfigError("synthetic: needs at least one channel");
    if (spec.anomaly_rate <= 0.0 || spec.anomaly_rate >= 0.5)
        throw ConfigError("synthetic: anomaly_rate must lie in (0, 0.5)");
    if (spec.anomaly_types.empty())
        throw ConfigError("synthetic: at least one anomaly type required");

    Rng rng(spec.seed);
    SourceBank bank;
    for (int s = 0; s < spec.sources; ++s) {
        bank.freq.push_back(rng.uniform(1.0 / 200.0, 1.0 / 40.0));
        bank.phase.push_back(rng.uniform(0.0, 2.0 * 3.14159265358979323846));
    }
    for (int c = 0; c < spec.channels; ++c)
        for (int s = 0; s < spec.sources; ++s)
            bank.mix.push_back(rng.uniform(-1.0, 1.0));

    TimeSeriesDataset ds;
    ds.train = Matrix::zeros(spec.train_length, spec.channels);
    ds.test = Matrix::zeros(spec.test_length, spec.channels);
    for (int c = 0; c < spec.channels; ++c)
        ds.channel_names.push_back("ch" + std::to_string(c));

    for (int t = 0; t < spec.train_length; ++t)
        for (int c = 0; c < spec.channels; ++c)
            ds.train.at(t, c) = base_value(bank, spec.channels, spec.sources, c, t) +
                                rng.normal() * spec.base_noise;
    for (int t = 0; t < spec.test_length; ++t)
        for (int c = 0; c < spec.channels; ++c)
            ds.test.at(t, c) =
                base_value(bank, spec.channels, spec.sources, c, t + spec.train_length) +
                rng.normal() * spec.base_noise;

    // Per-channel std of the clean signal scales the injected deviations.
    std::vector<double> channel_std(static_cast<std::size_t>(spec.channels), 0.0);
    for (int c = 0; c < spec.channels; ++c) {
        double mean = 0.0;
        for (int t = 0; t < spec.train_length; ++t) mean += ds.train.at(t, c);
        mean /= spec.train_length;
        double var = 0.0;
        for (int t = 0; t < spec.train_length; ++t) {
            const double d = ds.train.at(t, c) - mean;
            var += d * d;
        }
        channel_std[static_cast<std::size_t>(c)] =
            std::max(std::sqrt(var / spec.train_length), 1e-6);
    }

    ds.test_labels.assign(static_cast<std::size_t>(spec.test_length), 0);
    const int target = static_cast<int>(std::lround(spec.anomaly_rate * spec.test_length));
    int injected = 0;
    int attempts = 0;
    auto span_free = [&](int start, int len) {
        // one-step margin keeps injected segments from merging
        for (int t = std::max(0, start - 1); t < std::min(spec.test_length, start + len + 1); ++t)
            if (ds.test_labels[static_cast<std::size_t>(t)]) return false;
        return true;
    };
    while (injected < target && attempts < 100000) {
        ++attempts;
        AnomalyType type =
            spec.anomaly_types[static_cast<std::size_t>(rng.uniform_int(
                static_cast<int>(spec.anomaly_types.size())))];
        int len = type == AnomalyType::Point ? 1 : 10 + rng.uniform_int(21);
        if (target - injected < 10) {
            type = AnomalyType::Point;  // top up the rate with single spikes
            len = 1;
        }
        len = std::min(len, target - injected);
        if (len < 1) break;
        if (len > spec.test_length) continue;
        const int start = rng.uniform_int(spec.test_length - len + 1);
        if (!span_free(start, len)) continue;
        // each event touches a random subset of channels (1 .. N/2)
        std::vector<int> channels(static_cast<std::size_t>(spec.channels));
        for (int c = 0; c < spec.channels; ++c) channels[static_cast<std::size_t>(c)] = c;
        rng.shuffle(channels);
        const int touched = 1 + rng.uniform_int(std::max(1, spec.channels / 2));
        channels.resize(static_cast<std::size_t>(touched));
        for (int ch : channels) {
            const double sd = channel_std[static_cast<std::size_t>(ch)];
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            switch (type) {
                case AnomalyType::Point:
                    for (int t = start; t < start + len; ++t)
                        ds.test.at(t, ch) += sign * 6.0 * sd;
                    break;
                case AnomalyType::Contextual:
                    for (int t = start; t < start + len; ++t)
                        ds.test.at(t, ch) += sign * 3.0 * sd;
                    break;
                case AnomalyType::Shapelet:
                    // Re-synthesize the span from the channel's own source
                    // bank with tripled frequencies: same amplitude, wrong
                    // waveform.
                    for (int t = start; t < start + len; ++t) {
                        const long abs_t = t + spec.train_length;
                        double v = 0.0;
                        for (int s = 0; s < spec.sources; ++s)
                            v += bank.mix[static_cast<std::size_t>(ch) * spec.sources + s] *
                                 std::sin(2.0 * 3.14159265358979323846 * 3.0 *
                                              bank.freq[static_cast<std::size_t>(s)] *
                                              static_cast<double>(abs_t) +
                                          bank.phase[static_cast<std::size_t>(s)]);
                        ds.test.at(t, ch) = v;
                    }
                    break;
            }
        }
        for (int t = start; t < start + len; ++t)
            ds.test_labels[static_cast<std::size_t>(t)] = 1;
        injected += len;
    }
    ds.compute_norm_stats();
    return ds;
}

ScatterReport scattering_analysis(const Matrix& embeddings, const std::vector<int>& labels,
                                  double noise_sigma) {
    if (static_cast<int>(labels.size()) != embeddings.rows)
        throw DataError("scattering_analysis: label count does not match embedding rows");
    std::vector<int> normal_idx, anomalous_idx;
    for (int i = 0; i < embeddings.rows; ++i)
        (labels[static_cast<std::size_t>(i)] ? anomalous_idx : normal_idx).push_back(i);
    if (normal_idx.empty() || anomalous_idx.empty())
        throw DataError("scattering_analysis: both classes must be present");

    const int d = embeddings.cols;
    auto class_center = [&](const std::vector<int>& idx) {
        std::vector<double> c(static_cast<std::size_t>(d), 0.0);
        for (int i : idx)
            for (int j = 0; j < d; ++j) c[static_cast<std::size_t>(j)] += embeddings.at(i, j);
        for (double& v : c) v /= static_cast<double>(idx.size());
        return c;
    };
    auto mean_dist_to = [&](const std::vector<int>& idx, const std::vector<double>& c) {
        double acc = 0.0;
        for (int i : idx) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) {
                const double dv = embeddings.at(i, j) - c[static_cast<std::size_t>(j)];
                s += dv * dv;
            }
            acc += std::sqrt(s);
        }
        return acc / static_cast<double>(idx.size());
    };
    auto mean_pairwise = [&](const std::vector<int>& idx) {
        if (idx.size() < 2) return 0.0;
        double acc = 0.0;
        long long pairs = 0;
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = a + 1; b < idx.size(); ++b) {
                double s = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dv = embeddings.at(idx[a], j) - embeddings.at(idx[b], j);
                    s += dv * dv;
                }
                acc += std::sqrt(s);
                ++pairs;
            }
        return acc / static_cast<double>(pairs);
    };

    ScatterReport r;
    r.noise_sigma = noise_sigma;
    r.score_normal = mean_dist_to(normal_idx, class_center(normal_idx));
    r.score_anomalous = mean_dist_to(anomalous_idx, class_center(anomalous_idx));
    r.separation_ratio = r.score_anomalous / std::max(r.score_normal, 1e-12);
    r.pairwise_normal = mean_pairwise(normal_idx);
    r.pairwise_anomalous = mean_pairwise(anomalous_idx);
    return r;
}

}  // namespace scatterad
