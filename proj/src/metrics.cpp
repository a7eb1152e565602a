#include "scatterad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "scatterad/errors.hpp"

namespace scatterad {

std::vector<Segment> label_segments(const std::vector<int>& labels) {
    std::vector<Segment> out;
    const int n = static_cast<int>(labels.size());
    int i = 0;
    while (i < n) {
        if (labels[static_cast<std::size_t>(i)]) {
            int j = i;
            while (j + 1 < n && labels[static_cast<std::size_t>(j + 1)]) ++j;
            out.push_back({i, j});
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

std::vector<int> point_adjust(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw DataError("point_adjust: stream lengths differ (" +
                        std::to_string(pred.size()) + " vs " + std::to_string(truth.size()) +
                        ")");
    std::vector<int> adjusted = pred;
    for (const Segment& seg : label_segments(truth)) {
        bool hit = false;
        for (int t = seg.first; t <= seg.last && !hit; ++t)
            hit = pred[static_cast<std::size_t>(t)] != 0;
        if (hit)
            for (int t = seg.first; t <= seg.last; ++t)
                adjusted[static_cast<std::size_t>(t)] = 1;
    }
    return adjusted;
}

Prf prf(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw DataError("prf: stream lengths differ");
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && truth[i]) ++tp;
        else if (pred[i] && !truth[i]) ++fp;
        else if (!pred[i] && truth[i]) ++fn;
    }
    if (tp + fp + fn == 0) return {1.0, 1.0, 1.0};  // both streams empty of positives
    Prf r;
    r.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

int dist_to_segment(int x, const Segment& s) {
    if (x < s.first) return s.first - x;
    if (x > s.last) return x - s.last;
    return 0;
}

}  // namespace

Prf affiliation(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw DataError("affiliation: stream lengths differ");
    const auto segments = label_segments(truth);
    if (segments.empty()) throw DataError("affiliation: truth stream has no segments");
    const int n = static_cast<int>(truth.size());

    // Zone j owns truth segment j; interior boundaries sit at the midpoint of
    // the gap between consecutive segments, and the stream ends close the
    // outer zones.
    std::vector<int> zone_begin(segments.size()), zone_end(segments.size());
    for (std::size_t j = 0; j < segments.size(); ++j) {
        zone_begin[j] = j == 0 ? 0 : (segments[j - 1].last + segments[j].first + 1) / 2;
        zone_end[j] = j + 1 == segments.size()
                          ? n
                          : (segments[j].last + segments[j + 1].first + 1) / 2;
    }

    double precision_sum = 0.0;
    int precision_zones = 0;
    double recall_sum = 0.0;

    for (std::size_t j = 0; j < segments.size(); ++j) {
        const Segment& seg = segments[j];
        std::vector<int> zone_pred;
        for (int t = zone_begin[j]; t < zone_end[j]; ++t)
            if (pred[static_cast<std::size_t>(t)]) zone_pred.push_back(t);

        // Expected distance of one uniformly random point in the zone to the
        // segment; the yardstick both probabilities normalize against.
        double expected_point_dist = 0.0;
        const int zone_len = zone_end[j] - zone_begin[j];
        for (int t = zone_begin[j]; t < zone_end[j]; ++t)
            expected_point_dist += dist_to_segment(t, seg);
        expected_point_dist /= zone_len;

        if (!zone_pred.empty()) {
            double d = 0.0;
            for (int t : zone_pred) d += dist_to_segment(t, seg);
            d /= static_cast<double>(zone_pred.size());
            const double p = expected_point_dist > 0.0
                                 ? clamp01(1.0 - d / expected_point_dist)
                                 : (d == 0.0 ? 1.0 : 0.0);
            precision_sum += p;
            ++precision_zones;

            // Directed distance truth -> predictions, against the expected
            // distance truth -> a random zone point.
            double d_r = 0.0;
            double expected_r = 0.0;
            for (int t = seg.first; t <= seg.last; ++t) {
                int best = std::numeric_limits<int>::max();
                for (int p_t : zone_pred) best = std::min(best, std::abs(t - p_t));
                d_r += best;
                double acc = 0.0;
                for (int x = zone_begin[j]; x < zone_end[j]; ++x) acc += std::abs(t - x);
                expected_r += acc / zone_len;
            }
            d_r /= seg.length();
            expected_r /= seg.length();
            recall_sum += expected_r > 0.0 ? clamp01(1.0 - d_r / expected_r)
                                           : (d_r == 0.0 ? 1.0 : 0.0);
        }
        // zones without predictions contribute 0 recall
    }

    Prf r;
    r.precision = precision_zones > 0 ? precision_sum / precision_zones : 0.0;
    r.recall = recall_sum / static_cast<double>(segments.size());
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// AUC family
// ---------------------------------------------------------------------------

namespace {

struct WeightedCounts {
    double pos = 0.0;
    double neg = 0.0;
};

// Threshold sweep over descending unique scores with continuous positive
// weights; w[i] in [0,1] is point i's positive mass, 1-w[i] its negative mass.
double sweep_auc(const std::vector<double>& scores, const std::vector<double>& w,
                 Curve curve) {
    const std::size_t n = scores.size();
    double total_pos = 0.0, total_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total_pos += w[i];
        total_neg += 1.0 - w[i];
    }
    if (total_pos <= 0.0 || total_neg <= 0.0)
        throw DataError("auc: needs both positive and negative mass in the truth");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    double tp = 0.0, fp = 0.0;
    double prev_tpr = 0.0, prev_fpr = 0.0, prev_recall = 0.0;
    double area = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            tp += w[order[j]];
            fp += 1.0 - w[order[j]];
            ++j;
        }
        const double tpr = tp / total_pos;
        const double fpr = fp / total_neg;
        if (curve == Curve::Roc) {
            area += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
            prev_fpr = fpr;
            prev_tpr = tpr;
        } else {
            const double precision = tp + fp > 0.0 ? tp / (tp + fp) : 1.0;
            area += (tpr - prev_recall) * precision;  // average-precision step
            prev_recall = tpr;
        }
        i = j;
    }
    return area;
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& truth, Curve curve) {
    if (scores.size() != truth.size()) throw DataError("auc: stream lengths differ");
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericError("auc: non-finite score");
    std::vector<double> w(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) w[i] = truth[i] ? 1.0 : 0.0;
    return sweep_auc(scores, w, curve);
}

double auc_concordance(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) throw DataError("auc: stream lengths differ");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < truth.size(); ++i)
        (truth[i] ? pos : neg).push_back(scores[i]);
    if (pos.empty() || neg.empty())
        throw DataError("auc: needs both classes in the truth");
    double acc = 0.0;
    for (double p : pos)
        for (double q : neg) acc += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    return acc / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

std::vector<double> smooth_labels(const std::vector<int>& truth, int buffer) {
    if (buffer < 0) throw ConfigError("range_auc: buffer must be >= 0");
    const int n = static_cast<int>(truth.size());
    std::vector<double> w(truth.size(), 0.0);
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = truth[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    if (buffer == 0) return w;
    const auto segments = label_segments(truth);
    for (int i = 0; i < n; ++i) {
        if (truth[static_cast<std::size_t>(i)]) continue;
        int best = std::numeric_limits<int>::max();
        for (const Segment& s : segments) best = std::min(best, dist_to_segment(i, s));
        if (best <= buffer) {
            const double v = std::sqrt(1.0 - static_cast<double>(best) / buffer);
            w[static_cast<std::size_t>(i)] = std::max(w[static_cast<std::size_t>(i)], v);
        }
    }
    return w;
}

RangeAuc range_auc(const std::vector<double>& scores, const std::vector<int>& truth,
                   int buffer) {
    if (scores.size() != truth.size()) throw DataError("range_auc: stream lengths differ");
    const std::vector<double> w = smooth_labels(truth, buffer);
    return {sweep_auc(scores, w, Curve::Roc), sweep_auc(scores, w, Curve::Pr)};
}

RangeAuc vus(const std::vector<double>& scores, const std::vector<int>& truth,
             int max_buffer) {
    if (max_buffer < 0) throw ConfigError("vus: max buffer must be >= 0");
    if (max_buffer == 0) return range_auc(scores, truth, 0);
    double roc = 0.0, pr = 0.0;
    for (int l = 0; l <= max_buffer; ++l) {
        const RangeAuc r = range_auc(scores, truth, l);
        const double weight = (l == 0 || l == max_buffer) ? 0.5 : 1.0;  // trapezoid
        roc += weight * r.roc;
        pr += weight * r.pr;
    }
    return {roc / max_buffer, pr / max_buffer};
}

int median_segment_length(const std::vector<int>& truth) {
    const auto segments = label_segments(truth);
    if (segments.empty()) return 0;
    std::vector<int> lengths;
    lengths.reserve(segments.size());
    for (const Segment& s : segments) lengths.push_back(s.length());
    std::sort(lengths.begin(), lengths.end());
    return lengths[lengths.size() / 2];
}

int default_vus_buffer(const std::vector<int>& truth) {
    const int median = median_segment_length(truth);
    if (median == 0) return 0;
    const int cap = static_cast<int>(truth.size()) / 4;
    return std::max(0, std::min(4 * median, cap));
}

std::vector<ShiftRow> shift_sensitivity(const std::vector<int>& truth,
                                        const std::vector<int>& shifts) {
    if (truth.empty()) throw DataError("shift_sensitivity: empty truth stream");
    const int n = static_cast<int>(truth.size());
    std::vector<ShiftRow> rows;
    for (int delta : shifts) {
        if (std::abs(delta) >= n)
            throw ConfigError("shift_sensitivity: shift " + std::to_string(delta) +
                              " exceeds stream length");
        std::vector<int> shifted(truth.size(), 0);
        for (int t = 0; t < n; ++t) {
            const int s = t - delta;
            if (s >= 0 && s < n) shifted[static_cast<std::size_t>(t)] = truth[static_cast<std::size_t>(s)];
        }
        ShiftRow row;
        row.shift = delta;
        row.aff_f = affiliation(shifted, truth).f1;
        row.pointwise_f1 = prf(shifted, truth).f1;
        rows.push_back(row);
    }
    return rows;
}

MacroStats macro_stats(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw DataError("macro_stats: stream lengths differ");
    MacroStats m;
    if (pred.empty()) return m;
    long long pp = 0, tp = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pp += pred[i] ? 1 : 0;
        tp += truth[i] ? 1 : 0;
    }
    m.anomaly_ratio_pred = static_cast<double>(pp) / static_cast<double>(pred.size());
    m.anomaly_ratio_truth = static_cast<double>(tp) / static_cast<double>(truth.size());
    m.num_segments_pred = static_cast<int>(label_segments(pred).size());
    m.num_segments_truth = static_cast<int>(label_segments(truth).size());
    return m;
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

const std::vector<std::string>& MetricReport::names() {
    static const std::vector<std::string> kNames = {
        "Aff-P", "Aff-R", "Aff-F", "PA-P",  "PA-R", "PA-F",
        "A-ROC", "A-PR",  "R-A-R", "R-A-P", "V-ROC", "V-PR"};
    return kNames;
}

std::vector<double> MetricReport::values() const {
    return {aff_p, aff_r, aff_f, pa_p, pa_r, pa_f, auc_roc, auc_pr, r_a_r, r_a_p, v_roc, v_pr};
}

std::string MetricReport::to_csv_row(bool with_header) const {
    std::ostringstream os;
    if (with_header) {
        const auto& n = names();
        for (std::size_t i = 0; i < n.size(); ++i) os << (i ? "," : "") << n[i];
        os << '\n';
    }
    const auto v = values();
    os.precision(6);
    os << std::fixed;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        if (std::isnan(v[i])) os << "nan";
        else os << v[i];
    }
    os << '\n';
    return os.str();
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    const auto& n = names();
    const auto v = values();
    os << "Metric   Value\n";
    os << "-------  ------\n";
    for (std::size_t i = 0; i < n.size(); ++i) {
        os << n[i];
        for (std::size_t pad = n[i].size(); pad < 9; ++pad) os << ' ';
        if (std::isnan(v[i])) {
            os << "   n/a";
        } else {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", v[i]);
            os << buf;
        }
        os << '\n';
    }
    for (const auto& note : notes) os << "note: " << note << '\n';
    return os.str();
}

MetricReport evaluate_streams(const std::vector<double>& scores,
                              const std::vector<int>& pred, const std::vector<int>& truth,
                              const EvalOptions& opts) {
    if (scores.size() != truth.size() || pred.size() != truth.size())
        throw DataError("evaluate: stream lengths differ");
    MetricReport rep;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    try {
        const Prf a = affiliation(pred, truth);
        rep.aff_p = a.precision;
        rep.aff_r = a.recall;
        rep.aff_f = a.f1;
    } catch (const Error& e) {
        rep.aff_p = rep.aff_r = rep.aff_f = nan;
        rep.notes.push_back(std::string("affiliation: ") + e.what());
    }
    {
        const Prf pa = prf(point_adjust(pred, truth), truth);
        rep.pa_p = pa.precision;
        rep.pa_r = pa.recall;
        rep.pa_f = pa.f1;
    }
    try {
        rep.auc_roc = auc(scores, truth, Curve::Roc);
        rep.auc_pr = auc(scores, truth, Curve::Pr);
    } catch (const Error& e) {
        rep.auc_roc = rep.auc_pr = nan;
        rep.notes.push_back(std::string("auc: ") + e.what());
    }
    const int range_buffer = opts.range_buffer.value_or(
        std::min(median_segment_length(truth), static_cast<int>(truth.size()) / 4));
    try {
        const RangeAuc r = range_auc(scores, truth, range_buffer);
        rep.r_a_r = r.roc;
        rep.r_a_p = r.pr;
    } catch (const Error& e) {
        rep.r_a_r = rep.r_a_p = nan;
        rep.notes.push_back(std::string("range_auc: ") + e.what());
    }
    try {
        const int max_buffer = opts.vus_max_buffer.value_or(default_vus_buffer(truth));
        const RangeAuc v = vus(scores, truth, max_buffer);
        rep.v_roc = v.roc;
        rep.v_pr = v.pr;
    } catch (const Error& e) {
        rep.v_roc = rep.v_pr = nan;
        rep.notes.push_back(std::string("vus: ") + e.what());
    }
    return rep;
}

}  // namespace scatterad
