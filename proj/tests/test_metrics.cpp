#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "scatterad/errors.hpp"
#include "scatterad/metrics.hpp"
#include "scatterad/rng.hpp"

using namespace scatterad;

namespace {

std::vector<int> bits(const std::string& s) {
    std::vector<int> out;
    for (char c : s) out.push_back(c == '1' ? 1 : 0);
    return out;
}

std::vector<int> random_labels(Rng& rng, int n, double p) {
    std::vector<int> out(static_cast<std::size_t>(n), 0);
    for (int& v : out) v = rng.uniform() < p ? 1 : 0;
    return out;
}

}  // namespace

TEST_CASE("point adjustment") {
    SUBCASE("definition example") {
        CHECK(point_adjust(bits("00100"), bits("01110")) == bits("01110"));
    }
    SUBCASE("all-zero prediction is unchanged") {
        CHECK(point_adjust(bits("00000"), bits("01110")) == bits("00000"));
    }
    SUBCASE("predictions outside truth segments survive") {
        CHECK(point_adjust(bits("10010"), bits("00110")) == bits("10110"));
    }
    SUBCASE("length mismatch is an error") {
        CHECK_THROWS_AS(point_adjust(bits("01"), bits("011")), DataError);
    }
    SUBCASE("matches the segment-loop oracle on 1000 random streams") {
        Rng rng(101);
        for (int trial = 0; trial < 1000; ++trial) {
            const int n = 5 + rng.uniform_int(60);
            auto pred = random_labels(rng, n, 0.3);
            auto truth = random_labels(rng, n, 0.25);
            auto got = point_adjust(pred, truth);
            // oracle: walk each maximal truth run; copy pred elsewhere
            std::vector<int> expected = pred;
            int i = 0;
            while (i < n) {
                if (truth[static_cast<std::size_t>(i)]) {
                    int j = i;
                    while (j + 1 < n && truth[static_cast<std::size_t>(j + 1)]) ++j;
                    bool any = false;
                    for (int t = i; t <= j; ++t) any = any || pred[static_cast<std::size_t>(t)];
                    if (any)
                        for (int t = i; t <= j; ++t) expected[static_cast<std::size_t>(t)] = 1;
                    i = j + 1;
                } else {
                    ++i;
                }
            }
            CHECK(got == expected);
        }
    }
}

TEST_CASE("point-wise precision/recall/F1") {
    SUBCASE("perfect prediction") {
        Prf r = prf(bits("0110"), bits("0110"));
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
    }
    SUBCASE("complement prediction on a balanced stream") {
        Prf r = prf(bits("0101"), bits("1010"));
        CHECK(r.precision == 0.0);
        CHECK(r.recall == 0.0);
        CHECK(r.f1 == 0.0);
    }
    SUBCASE("both all-zero scores (1,1,1)") {
        Prf r = prf(bits("0000"), bits("0000"));
        CHECK(r.f1 == 1.0);
    }
    SUBCASE("matches a confusion-count oracle on random streams") {
        Rng rng(103);
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 4 + rng.uniform_int(50);
            auto pred = random_labels(rng, n, 0.4);
            auto truth = random_labels(rng, n, 0.3);
            Prf r = prf(pred, truth);
            int tp = 0, fp = 0, fn = 0;
            for (int i = 0; i < n; ++i) {
                tp += pred[static_cast<std::size_t>(i)] && truth[static_cast<std::size_t>(i)];
                fp += pred[static_cast<std::size_t>(i)] && !truth[static_cast<std::size_t>(i)];
                fn += !pred[static_cast<std::size_t>(i)] && truth[static_cast<std::size_t>(i)];
            }
            if (tp + fp + fn == 0) continue;
            const double p = tp + fp ? double(tp) / (tp + fp) : 0.0;
            const double rc = tp + fn ? double(tp) / (tp + fn) : 0.0;
            CHECK(r.precision == doctest::Approx(p).epsilon(1e-12));
            CHECK(r.recall == doctest::Approx(rc).epsilon(1e-12));
        }
    }
    SUBCASE("point adjustment never lowers F1") {
        Rng rng(104);
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 8 + rng.uniform_int(40);
            auto pred = random_labels(rng, n, 0.3);
            auto truth = random_labels(rng, n, 0.3);
            const double plain = prf(pred, truth).f1;
            const double adjusted = prf(point_adjust(pred, truth), truth).f1;
            CHECK(adjusted >= plain - 1e-12);
        }
    }
}

TEST_CASE("affiliation metrics") {
    SUBCASE("perfect prediction scores (1,1,1)") {
        auto truth = bits("0011100011000");
        Prf r = affiliation(truth, truth);
        CHECK(r.precision == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.recall == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.f1 == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("empty prediction scores ~0") {
        auto truth = bits("0011100");
        Prf r = affiliation(bits("0000000"), truth);
        CHECK(r.recall == doctest::Approx(0.0));
        CHECK(r.f1 == doctest::Approx(0.0));
    }
    SUBCASE("no truth segments is an error") {
        CHECK_THROWS_AS(affiliation(bits("0100"), bits("0000")), DataError);
    }
    SUBCASE("one-step shift vs a direct zone-distance oracle") {
        // one truth segment [40, 60) in a length-100 stream; prediction
        // shifted right by one step
        std::vector<int> truth(100, 0), pred(100, 0);
        for (int t = 40; t < 60; ++t) truth[static_cast<std::size_t>(t)] = 1;
        for (int t = 41; t < 61; ++t) pred[static_cast<std::size_t>(t)] = 1;
        Prf got = affiliation(pred, truth);

        // oracle: single zone = whole stream, segment [40, 59]
        auto dist = [](int x) { return x < 40 ? 40 - x : (x > 59 ? x - 59 : 0); };
        double d_p = 0.0;
        for (int t = 41; t < 61; ++t) d_p += dist(t);
        d_p /= 20.0;
        double e_p = 0.0;
        for (int x = 0; x < 100; ++x) e_p += dist(x);
        e_p /= 100.0;
        const double precision = 1.0 - d_p / e_p;

        double d_r = 0.0, e_r = 0.0;
        for (int t = 40; t < 60; ++t) {
            int best = 1 << 30;
            for (int p = 41; p < 61; ++p) best = std::min(best, std::abs(t - p));
            d_r += best;
            double acc = 0.0;
            for (int x = 0; x < 100; ++x) acc += std::abs(t - x);
            e_r += acc / 100.0;
        }
        d_r /= 20.0;
        e_r /= 20.0;
        const double recall = 1.0 - d_r / e_r;
        const double f1 = 2.0 * precision * recall / (precision + recall);

        CHECK(got.precision == doctest::Approx(precision).epsilon(1e-6));
        CHECK(got.recall == doctest::Approx(recall).epsilon(1e-6));
        CHECK(got.f1 == doctest::Approx(f1).epsilon(1e-6));
    }
    SUBCASE("scores stay in [0,1] on random streams") {
        Rng rng(107);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 12 + rng.uniform_int(50);
            auto truth = random_labels(rng, n, 0.25);
            truth[static_cast<std::size_t>(n / 2)] = 1;  // at least one segment
            auto pred = random_labels(rng, n, 0.3);
            Prf r = affiliation(pred, truth);
            CHECK(r.precision >= 0.0);
            CHECK(r.precision <= 1.0);
            CHECK(r.recall >= 0.0);
            CHECK(r.recall <= 1.0);
            CHECK(r.f1 >= 0.0);
            CHECK(r.f1 <= 1.0);
        }
    }
}

TEST_CASE("auc") {
    SUBCASE("hand-computed example: 3 of 4 concordant pairs") {
        std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
        std::vector<int> truth = {0, 0, 1, 1};
        CHECK(auc(scores, truth, Curve::Roc) == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(auc_concordance(scores, truth) == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("perfect separation scores 1") {
        CHECK(auc({1, 2, 3, 10, 11}, {0, 0, 0, 1, 1}, Curve::Roc) == doctest::Approx(1.0));
    }
    SUBCASE("constant scores give 0.5 by the tie convention") {
        CHECK(auc({2, 2, 2, 2}, {0, 1, 0, 1}, Curve::Roc) == doctest::Approx(0.5));
        CHECK(auc_concordance({2, 2, 2, 2}, {0, 1, 0, 1}) == doctest::Approx(0.5));
    }
    SUBCASE("single-class truth is an error") {
        CHECK_THROWS_AS(auc({1, 2}, {1, 1}, Curve::Roc), DataError);
        CHECK_THROWS_AS(auc_concordance({1, 2}, {0, 0}), DataError);
    }
    SUBCASE("trapezoid equals pairwise concordance on random streams") {
        Rng rng(109);
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 4 + rng.uniform_int(60);
            std::vector<double> scores(static_cast<std::size_t>(n));
            for (double& s : scores)
                s = rng.uniform_int(4) == 0 ? 0.5 : rng.uniform();  // force some ties
            auto truth = random_labels(rng, n, 0.4);
            truth[0] = 0;
            truth[static_cast<std::size_t>(n - 1)] = 1;
            CHECK(auc(scores, truth, Curve::Roc) ==
                  doctest::Approx(auc_concordance(scores, truth)).epsilon(1e-9));
        }
    }
    SUBCASE("ROC-AUC is invariant under strictly monotone score transforms") {
        Rng rng(110);
        std::vector<double> scores(50);
        for (double& s : scores) s = rng.uniform();
        auto truth = random_labels(rng, 50, 0.3);
        truth[0] = 1;
        truth[1] = 0;
        std::vector<double> warped = scores;
        for (double& s : warped) s = std::exp(3.0 * s) + 7.0;
        CHECK(auc(scores, truth, Curve::Roc) ==
              doctest::Approx(auc(warped, truth, Curve::Roc)).epsilon(1e-12));
    }
    SUBCASE("PR-AUC of a perfect ranking is 1") {
        CHECK(auc({1, 2, 9, 10}, {0, 0, 1, 1}, Curve::Pr) == doctest::Approx(1.0));
    }
}

TEST_CASE("range-aware AUC") {
    Rng rng(111);
    std::vector<int> truth(50, 0);
    for (int t = 10; t < 16; ++t) truth[static_cast<std::size_t>(t)] = 1;
    for (int t = 30; t < 33; ++t) truth[static_cast<std::size_t>(t)] = 1;
    std::vector<double> scores(50);
    for (double& s : scores) s = rng.uniform();

    SUBCASE("buffer 0 reduces to the plain AUC") {
        RangeAuc r = range_auc(scores, truth, 0);
        CHECK(r.roc == doctest::Approx(auc(scores, truth, Curve::Roc)).epsilon(1e-9));
        CHECK(r.pr == doctest::Approx(auc(scores, truth, Curve::Pr)).epsilon(1e-9));
    }
    SUBCASE("smoothed label at half the buffer distance is sqrt(1/2)") {
        auto w = smooth_labels(truth, 4);
        // index 17 is 2 steps past the segment ending at 15
        CHECK(w[17] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
        CHECK(w[12] == 1.0);
        CHECK(w[25] == 0.0);  // beyond the buffer
    }
    SUBCASE("matches a per-threshold weighted-count oracle") {
        const int buffer = 3;
        auto w = smooth_labels(truth, buffer);
        RangeAuc got = range_auc(scores, truth, buffer);

        // oracle: explicit threshold sweep over sorted unique scores
        std::vector<double> uniq = scores;
        std::sort(uniq.begin(), uniq.end(), std::greater<>());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        double total_pos = 0.0, total_neg = 0.0;
        for (double v : w) {
            total_pos += v;
            total_neg += 1.0 - v;
        }
        double prev_tpr = 0.0, prev_fpr = 0.0, roc = 0.0, prev_recall = 0.0, pr = 0.0;
        for (double threshold : uniq) {
            double tp = 0.0, fp = 0.0;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                if (scores[i] >= threshold) {
                    tp += w[i];
                    fp += 1.0 - w[i];
                }
            }
            const double tpr = tp / total_pos;
            const double fpr = fp / total_neg;
            roc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
            pr += (tpr - prev_recall) * (tp / (tp + fp));
            prev_tpr = tpr;
            prev_fpr = fpr;
            prev_recall = tpr;
        }
        CHECK(got.roc == doctest::Approx(roc).epsilon(1e-9));
        CHECK(got.pr == doctest::Approx(pr).epsilon(1e-9));
    }
}

TEST_CASE("volume under the surface") {
    Rng rng(113);
    std::vector<int> truth(40, 0);
    for (int t = 8; t < 12; ++t) truth[static_cast<std::size_t>(t)] = 1;
    for (int t = 25; t < 31; ++t) truth[static_cast<std::size_t>(t)] = 1;
    std::vector<double> scores(40);
    for (double& s : scores) s = rng.uniform();

    SUBCASE("max buffer 0 reduces to the plain AUC") {
        RangeAuc r = vus(scores, truth, 0);
        CHECK(r.roc == doctest::Approx(auc(scores, truth, Curve::Roc)).epsilon(1e-9));
    }
    SUBCASE("lies between the min and max of its constituents") {
        const int max_l = 5;
        RangeAuc v = vus(scores, truth, max_l);
        double lo = 1.0, hi = 0.0;
        for (int l = 0; l <= max_l; ++l) {
            RangeAuc r = range_auc(scores, truth, l);
            lo = std::min(lo, r.roc);
            hi = std::max(hi, r.roc);
        }
        CHECK(v.roc >= lo - 1e-12);
        CHECK(v.roc <= hi + 1e-12);
    }
    SUBCASE("equals the explicit trapezoid average") {
        const int max_l = 4;
        RangeAuc v = vus(scores, truth, max_l);
        double roc = 0.0, pr = 0.0;
        for (int l = 0; l <= max_l; ++l) {
            RangeAuc r = range_auc(scores, truth, l);
            const double weight = (l == 0 || l == max_l) ? 0.5 : 1.0;
            roc += weight * r.roc;
            pr += weight * r.pr;
        }
        CHECK(v.roc == doctest::Approx(roc / max_l).epsilon(1e-9));
        CHECK(v.pr == doctest::Approx(pr / max_l).epsilon(1e-9));
    }
    SUBCASE("default buffer is 4x the median segment length, capped") {
        CHECK(default_vus_buffer(truth) == 10);  // lengths {4,6}: median 6 -> 24 capped to 40/4
        std::vector<int> tiny(400, 0);
        tiny[5] = 1;
        CHECK(default_vus_buffer(tiny) == 4);
    }
}

TEST_CASE("shift sensitivity") {
    SUBCASE("zero shift is a perfect match") {
        std::vector<int> truth = bits("0011100110");
        auto rows = shift_sensitivity(truth, {0});
        CHECK(rows[0].aff_f == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(rows[0].pointwise_f1 == doctest::Approx(1.0));
    }
    SUBCASE("alternating unit segments lose all overlap at shift 1") {
        std::vector<int> truth;
        for (int i = 0; i < 20; ++i) truth.push_back(i % 2);
        auto rows = shift_sensitivity(truth, {1});
        CHECK(rows[0].pointwise_f1 == doctest::Approx(0.0));
    }
    SUBCASE("shift beyond the stream is an error") {
        CHECK_THROWS_AS(shift_sensitivity(bits("0110"), {4}), ConfigError);
    }
    SUBCASE("left and right shifts agree on reflection-symmetric truths") {
        std::vector<int> truth = bits("00111001110011100");  // palindrome
        auto right = shift_sensitivity(truth, {2});
        auto left = shift_sensitivity(truth, {-2});
        CHECK(right[0].pointwise_f1 == doctest::Approx(left[0].pointwise_f1).epsilon(1e-12));
    }
}

TEST_CASE("macro statistics") {
    SUBCASE("all-zero streams") {
        MacroStats m = macro_stats(bits("0000"), bits("0000"));
        CHECK(m.anomaly_ratio_pred == 0.0);
        CHECK(m.anomaly_ratio_truth == 0.0);
        CHECK(m.num_segments_pred == 0);
        CHECK(m.num_segments_truth == 0);
    }
    SUBCASE("counting example") {
        MacroStats m = macro_stats(bits("0110011"), bits("0110011"));
        CHECK(m.anomaly_ratio_truth == doctest::Approx(4.0 / 7.0));
        CHECK(m.num_segments_truth == 2);
    }
    SUBCASE("matches a run-length oracle on random streams") {
        Rng rng(115);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 5 + rng.uniform_int(40);
            auto pred = random_labels(rng, n, 0.4);
            auto truth = random_labels(rng, n, 0.4);
            MacroStats m = macro_stats(pred, truth);
            int segs = 0;
            for (int i = 0; i < n; ++i)
                if (truth[static_cast<std::size_t>(i)] &&
                    (i == 0 || !truth[static_cast<std::size_t>(i - 1)]))
                    ++segs;
            CHECK(m.num_segments_truth == segs);
        }
    }
}

TEST_CASE("report formatting") {
    Rng rng(117);
    std::vector<int> truth(60, 0);
    for (int t = 20; t < 30; ++t) truth[static_cast<std::size_t>(t)] = 1;
    std::vector<double> scores(60);
    for (std::size_t i = 0; i < scores.size(); ++i)
        scores[i] = truth[i] ? 0.8 + 0.1 * rng.uniform() : 0.2 * rng.uniform();
    std::vector<int> pred(60, 0);
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > 0.5;

    MetricReport rep = evaluate_streams(scores, pred, truth);
    SUBCASE("all twelve values are present and in range") {
        const auto values = rep.values();
        CHECK(values.size() == 12);
        for (double v : values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(rep.pa_f == doctest::Approx(1.0));
        CHECK(rep.auc_roc == doctest::Approx(1.0));
    }
    SUBCASE("csv row carries the paper's column names") {
        const std::string csv = rep.to_csv_row(true);
        CHECK(csv.find("Aff-P,Aff-R,Aff-F,PA-P,PA-R,PA-F,A-ROC,A-PR,R-A-R,R-A-P,V-ROC,V-PR") !=
              std::string::npos);
    }
    SUBCASE("text table lists each metric") {
        const std::string table = rep.to_table();
        for (const auto& name : MetricReport::names())
            CHECK(table.find(name) != std::string::npos);
    }
    SUBCASE("single-class truth degrades gracefully with notes") {
        std::vector<int> all_zero(60, 0);
        MetricReport degraded = evaluate_streams(scores, pred, all_zero);
        CHECK(std::isnan(degraded.auc_roc));
        CHECK(!degraded.notes.empty());
    }
}
