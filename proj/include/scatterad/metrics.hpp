#pragma once

#include <optional>
#include <string>
#include <vector>

namespace scatterad {

// Maximal runs of 1s as inclusive [first, last] index pairs.
struct Segment {
    int first = 0;
    int last = 0;
    int length() const { return last - first + 1; }
};
std::vector<Segment> label_segments(const std::vector<int>& labels);

// Point adjustment: a truth segment containing any predicted positive is
// marked fully detected; predictions outside truth segments are untouched.
std::vector<int> point_adjust(const std::vector<int>& pred, const std::vector<int>& truth);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Point-wise confusion-matrix scores. Both streams all-zero scores (1,1,1);
// otherwise 0/0 ratios resolve to 0.
Prf prf(const std::vector<int>& pred, const std::vector<int>& truth);

// Affiliation scores: the timeline is split into one zone per truth segment
// (boundaries at midpoints between consecutive segments); directed distances
// between predictions and the segment are converted to probabilities against
// a uniformly random prediction in the zone.
Prf affiliation(const std::vector<int>& pred, const std::vector<int>& truth);

enum class Curve { Roc, Pr };

// Threshold-sweep AUC with merged tie groups (trapezoid for ROC, average
// precision for PR). Requires both classes present.
double auc(const std::vector<double>& scores, const std::vector<int>& truth, Curve curve);
// Independent route: pairwise concordance with 0.5 tie credit (ROC only).
double auc_concordance(const std::vector<double>& scores, const std::vector<int>& truth);

// Continuous labels for range-aware AUC: 1 inside segments, decaying as
// sqrt(1 - d/buffer) within `buffer` steps of a boundary.
std::vector<double> smooth_labels(const std::vector<int>& truth, int buffer);
struct RangeAuc {
    double roc = 0.0;
    double pr = 0.0;
};
RangeAuc range_auc(const std::vector<double>& scores, const std::vector<int>& truth,
                   int buffer);
// Average of range_auc over integer buffers 0..max_buffer (trapezoid rule).
RangeAuc vus(const std::vector<double>& scores, const std::vector<int>& truth,
             int max_buffer);
int median_segment_length(const std::vector<int>& truth);
// Default sweep width: 4 x median truth-segment length, capped at length / 4.
int default_vus_buffer(const std::vector<int>& truth);

struct ShiftRow {
    int shift = 0;
    double aff_f = 0.0;
    double pointwise_f1 = 0.0;
};
// Shift the truth right by each delta (zero fill) and score the shifted copy
// against the original, exposing a metric's sensitivity to localization error.
std::vector<ShiftRow> shift_sensitivity(const std::vector<int>& truth,
                                        const std::vector<int>& shifts);

struct MacroStats {
    double anomaly_ratio_pred = 0.0;
    double anomaly_ratio_truth = 0.0;
    int num_segments_pred = 0;
    int num_segments_truth = 0;
};
MacroStats macro_stats(const std::vector<int>& pred, const std::vector<int>& truth);

// The twelve-metric report. Metrics that cannot be computed for a stream
// (single-class truth, no segments) carry NaN and an explanatory note.
struct MetricReport {
    double aff_p = 0.0, aff_r = 0.0, aff_f = 0.0;
    double pa_p = 0.0, pa_r = 0.0, pa_f = 0.0;
    double auc_roc = 0.0, auc_pr = 0.0;
    double r_a_r = 0.0, r_a_p = 0.0;
    double v_roc = 0.0, v_pr = 0.0;
    std::vector<std::string> notes;

    static const std::vector<std::string>& names();  // Aff-P ... V-PR
    std::vector<double> values() const;
    std::string to_csv_row(bool with_header) const;
    std::string to_table() const;
};

struct EvalOptions {
    std::optional<int> range_buffer;  // default: median truth-segment length
    std::optional<int> vus_max_buffer;
};

// Assembles the full report from a score stream, binary predictions, and
// ground-truth labels (all the same length).
MetricReport evaluate_streams(const std::vector<double>& scores,
                              const std::vector<int>& pred, const std::vector<int>& truth,
                              const EvalOptions& opts = {});

}  // namespace scatterad
