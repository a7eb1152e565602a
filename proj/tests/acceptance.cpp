// Acceptance suite: end-to-end checks of the trained detector, the losses,
// and the evaluation stack. Each criterion prints one PASS/FAIL line; the
// binary fails if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "doctest.h"
#include "scatterad/metrics.hpp"
#include "scatterad/protocols.hpp"
#include "scatterad/trainer.hpp"
#include "support/testutil.hpp"

using namespace scatterad;

namespace {

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
}

double wall_seconds(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- the end-to-end reference run shared by criteria 6-11 ----

struct ReferenceRun {
    TimeSeriesDataset data;
    ModelState model;
    std::vector<TrainStepLog> log;
    double untrained_auc = 0.0;
    double trained_auc = 0.0;
    double train_seconds = 0.0;
    std::vector<double> scores;
    std::vector<int> truth;
};

SyntheticSpec reference_spec() {
    SyntheticSpec spec;
    spec.train_length = 8000;
    spec.test_length = 4000;
    spec.channels = 8;
    spec.anomaly_rate = 0.05;
    spec.seed = 123;
    return spec;
}

EncoderConfig reference_encoder() {
    EncoderConfig e;
    e.in_channels = 8;
    e.d_out = 32;
    e.heads = 4;
    e.gat_layers = 2;
    return e;
}

TrainConfig reference_train(std::uint64_t seed, Topology topology = Topology::Lookback) {
    TrainConfig t;
    t.window = 64;
    t.batch_size = 16;
    t.lr = 3e-3;
    t.epochs = 30;
    t.seed = seed;
    t.topology.kind = topology;
    return t;
}

const ReferenceRun& reference_run() {
    static ReferenceRun run = [] {
        ReferenceRun r;
        r.data = generate_synthetic(reference_spec());
        r.model = ModelState::init(reference_encoder(), CenterConfig{},
                                   reference_train(42), 42);
        ScoreConfig sc;
        const auto untrained_scores = anomaly_scores(r.model, r.data, sc);
        r.truth.assign(r.data.test_labels.begin(),
                       r.data.test_labels.begin() +
                           static_cast<std::ptrdiff_t>(untrained_scores.size()));
        r.untrained_auc = auc(untrained_scores, r.truth, Curve::Roc);

        const auto t0 = std::chrono::steady_clock::now();
        r.log = train(r.model, r.data);
        r.scores = anomaly_scores(r.model, r.data, sc);
        r.train_seconds = wall_seconds(t0);
        r.trained_auc = auc(r.scores, r.truth, Curve::Roc);
        return r;
    }();
    return run;
}

}  // namespace

TEST_CASE("criterion 1: gradient integrity of the composite loss") {
    const auto t0 = std::chrono::steady_clock::now();
    // 2-window, 6-timestep, 3-channel toy batch at d_out = 8
    EncoderConfig enc;
    enc.in_channels = 3;
    enc.d_out = 8;
    enc.heads = 4;
    enc.gat_layers = 2;
    enc.kernels = {2, 4};  // longest kernel must fit the 6-step window
    TrainConfig tcfg;
    tcfg.window = 6;
    tcfg.batch_size = 2;
    tcfg.epochs = 1;
    ModelState model = ModelState::init(enc, CenterConfig{}, tcfg, 97);

    Rng rng(21);
    std::vector<Window> batch;
    for (int w = 0; w < 2; ++w)
        batch.push_back(Window{0, testutil::random_tensor({6, 3}, rng, 1.0, false)});
    TemporalGraph g = build_lookback(6, tcfg.topology);
    std::vector<TemporalGraph> graphs(2, g);

    auto result = testutil::check_gradients(
        [&] {
            return compute_batch_loss(model, batch, graphs, ForwardMode{true, false})
                .objective;
        },
        model.learnable(), 1e-5);

    bool target_clean = true;
    for (auto& [name, p] : model.target.learnable())
        target_clean = target_clean && p.grad().empty();

    const double secs = wall_seconds(t0);
    const bool ok = result.max_err < 1e-4 && target_clean && secs < 30.0;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%d online parameters vs central differences, max rel err %.2e "
                  "(tol 1e-4); target grads zero: %s; %.1f s",
                  result.checked, result.max_err, target_clean ? "yes" : "no", secs);
    report(1, ok, buf);
    CHECK_MESSAGE(result.max_err < 1e-4, result.worst);
    CHECK(target_clean);
    CHECK(secs < 30.0);
}

TEST_CASE("criterion 2: loss identities") {
    const double time_const = loss_time(Tensor::full({8, 4}, 0.77)).value();

    ScatterCenter center;
    center.strategy = CenterStrategy::FixedRadius;
    center.centers = {{0.4, 0.0, 0.0}};
    Tensor aligned = Tensor::from_data({3, 3}, {2, 0, 0, 5, 0, 0, 0.3, 0, 0});
    const double scatter_aligned = loss_scatter(aligned, center).value();

    TemporalGraph g = build_lookback(6, TopologyConfig{});
    std::vector<double> on(6 * 4, 0.0), tg(6 * 4, 0.0);
    for (int t = 0; t < 6; ++t) {
        on[static_cast<std::size_t>(t) * 4] = 1.0;
        tg[static_cast<std::size_t>(t) * 4 + 1] = 1.0;
    }
    const double contrast_zero_cos =
        loss_contrast(Tensor::from_data({6, 4}, on), Tensor::from_data({6, 4}, tg), g).value();

    Rng rng(33);
    bool sum_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        LossBreakdown parts{rng.normal(), rng.normal(), rng.normal(), 0.0};
        sum_ok = sum_ok && std::abs(total_loss(parts) -
                                    (parts.time + parts.scatter + parts.contrast)) <= 1e-12;
    }

    const bool ok = time_const == 0.0 && std::abs(scatter_aligned + 1.0) < 1e-9 &&
                    std::abs(contrast_zero_cos - std::log(2.0)) < 1e-12 && sum_ok;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "time(const)=%g scatter(aligned)=%.12f contrast(cos 0)=%.12f "
                  "(log 2=%.12f) total==sum within 1e-12: %s",
                  time_const, scatter_aligned, contrast_zero_cos, std::log(2.0),
                  sum_ok ? "yes" : "no");
    report(2, ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 3: EMA closed form and cadence") {
    std::vector<std::pair<std::string, Tensor>> target{{"w", Tensor::zeros({4})}};
    std::vector<std::pair<std::string, Tensor>> online{{"w", Tensor::full({4}, 3.0)}};
    for (int n = 0; n < 10; ++n) ema_update(target, online, 0.5);
    const double expected = 3.0 * (1.0 - std::pow(0.5, 10));  // v (1 - m^n)
    const double got = target[0].second.at(0);
    const bool closed_form_ok = std::abs(got - expected) < 1e-12;

    // cadence: per_epoch applies once per epoch, per_step once per step
    SyntheticSpec spec;
    spec.train_length = 320;
    spec.test_length = 64;
    spec.channels = 3;
    spec.anomaly_rate = 0.05;
    spec.seed = 9;
    TimeSeriesDataset data = generate_synthetic(spec);
    EncoderConfig enc;
    enc.in_channels = 3;
    enc.d_out = 8;
    enc.heads = 4;
    enc.gat_layers = 1;
    enc.kernels = {2, 4};
    int counts[2] = {0, 0};
    long long steps[2] = {0, 0};
    int idx = 0;
    for (EmaCadence cadence : {EmaCadence::PerEpoch, EmaCadence::PerStep}) {
        TrainConfig t;
        t.window = 16;
        t.batch_size = 5;
        t.epochs = 2;
        t.lr = 1e-3;
        t.ema.cadence = cadence;
        ModelState model = ModelState::init(enc, CenterConfig{}, t, 3);
        TrainHooks hooks;
        hooks.before_ema = [&](const ModelState&) { ++counts[idx]; };
        auto log = train(model, data, hooks);
        steps[idx] = static_cast<long long>(log.size());
        ++idx;
    }
    const bool cadence_ok = counts[0] == 2 && steps[1] == counts[1];

    const bool ok = closed_form_ok && cadence_ok;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "v(1-m^n): got %.12f want %.12f; per_epoch updates=%d (epochs=2), "
                  "per_step updates=%d (steps=%lld)",
                  got, expected, counts[0], counts[1], steps[1]);
    report(3, ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 4: metric oracle equivalence on 500 random streams") {
    Rng rng(77);
    double max_auc_diff = 0.0, max_reduction_diff = 0.0;
    bool pa_ok = true;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 8 + rng.uniform_int(57);  // length <= 64
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (double& s : scores)
            s = rng.uniform_int(5) == 0 ? 0.25 : rng.uniform();  // tie mass
        std::vector<int> truth(static_cast<std::size_t>(n), 0);
        for (int& v : truth) v = rng.uniform() < 0.35 ? 1 : 0;
        truth[0] = 1;
        truth[static_cast<std::size_t>(n - 1)] = 0;

        max_auc_diff = std::max(max_auc_diff, std::abs(auc(scores, truth, Curve::Roc) -
                                                       auc_concordance(scores, truth)));
        max_reduction_diff = std::max(
            max_reduction_diff, std::abs(range_auc(scores, truth, 0).roc -
                                         auc(scores, truth, Curve::Roc)));
        max_reduction_diff = std::max(
            max_reduction_diff,
            std::abs(vus(scores, truth, 0).pr - auc(scores, truth, Curve::Pr)));

        std::vector<int> pred(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i)
            pred[static_cast<std::size_t>(i)] = rng.uniform() < 0.3 ? 1 : 0;
        auto adjusted = point_adjust(pred, truth);
        // oracle: per-segment any-hit fill
        std::vector<int> expected = pred;
        for (const Segment& seg : label_segments(truth)) {
            bool hit = false;
            for (int t = seg.first; t <= seg.last; ++t)
                hit = hit || pred[static_cast<std::size_t>(t)];
            if (hit)
                for (int t = seg.first; t <= seg.last; ++t)
                    expected[static_cast<std::size_t>(t)] = 1;
        }
        pa_ok = pa_ok && adjusted == expected;
    }
    const bool ok = max_auc_diff < 1e-9 && pa_ok && max_reduction_diff < 1e-9;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "trapezoid vs concordance max diff %.2e; PA == segment oracle: %s; "
                  "range/vus(0) vs plain AUC max diff %.2e",
                  max_auc_diff, pa_ok ? "yes" : "no", max_reduction_diff);
    report(4, ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 5: affiliation sanity and the shift contrast") {
    std::vector<int> truth(200, 0);
    for (int t = 60; t < 90; ++t) truth[static_cast<std::size_t>(t)] = 1;
    for (int t = 140; t < 160; ++t) truth[static_cast<std::size_t>(t)] = 1;
    const double perfect = affiliation(truth, truth).f1;

    // short bursty stream: unit-length segments with tight gaps
    std::vector<int> bursty(300, 0);
    for (int t = 2; t < 298; t += 3) bursty[static_cast<std::size_t>(t)] = 1;
    const double bursty_shift1 = shift_sensitivity(bursty, {1})[0].aff_f;

    // long-segment stream: generous segments with wide gaps
    std::vector<int> longseg(1200, 0);
    for (int start = 100; start + 50 < 1200; start += 300)
        for (int t = start; t < start + 50; ++t) longseg[static_cast<std::size_t>(t)] = 1;
    const double long_shift1 = shift_sensitivity(longseg, {1})[0].aff_f;

    const bool ok = std::abs(perfect - 1.0) < 1e-9 && bursty_shift1 < 0.5 &&
                    long_shift1 > 0.95;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "perfect Aff-F=%.9f; 1-step shift: bursty Aff-F=%.3f (<0.5), "
                  "long-segment Aff-F=%.3f (>0.95)",
                  perfect, bursty_shift1, long_shift1);
    report(5, ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 6: end-to-end detection on the seeded synthetic set") {
    const ReferenceRun& r = reference_run();
    const bool ok = r.trained_auc >= 0.85 && r.trained_auc >= r.untrained_auc + 0.2 &&
                    r.train_seconds < 300.0;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "AUC-ROC %.4f (>= 0.85), untrained %.4f (margin %+.4f >= 0.2), "
                  "train+score %.1f s (< 300)",
                  r.trained_auc, r.untrained_auc, r.trained_auc - r.untrained_auc,
                  r.train_seconds);
    report(6, ok, buf);
    CHECK(r.trained_auc >= 0.85);
    CHECK(r.trained_auc >= r.untrained_auc + 0.2);
    CHECK(r.train_seconds < 300.0);
}

TEST_CASE("criterion 7: the scattering phenomenon under noise") {
    ReferenceRun& r = const_cast<ReferenceRun&>(reference_run());
    double ratio_at_zero = 0.0;
    std::string rows;
    char buf[160];
    std::uint64_t tag = 0;
    for (double sigma : {0.0, 0.5, 1.0, 2.0}) {
        TimeSeriesDataset noisy = r.data.with_test_noise(sigma, Rng::derive(7, tag++));
        Matrix embeddings = embed_test(r.model, noisy);
        std::vector<int> labels(noisy.test_labels.begin(),
                                noisy.test_labels.begin() + embeddings.rows);
        ScatterReport rep = scattering_analysis(embeddings, labels, sigma);
        if (sigma == 0.0) ratio_at_zero = rep.separation_ratio;
        std::snprintf(buf, sizeof(buf),
                      "    sigma=%.1f normal=%.3f anomalous=%.3f ratio=%.3f\n", sigma,
                      rep.score_normal, rep.score_anomalous, rep.separation_ratio);
        rows += buf;
    }
    const bool ok = ratio_at_zero > 1.1;
    std::snprintf(buf, sizeof(buf), "separation ratio %.3f at sigma=0 (> 1.1); sweep:",
                  ratio_at_zero);
    report(7, ok, buf);
    std::fputs(rows.c_str(), stdout);
    CHECK(ok);
}

TEST_CASE("criterion 8: convergence shape of the training loss") {
    const ReferenceRun& r = reference_run();
    REQUIRE(r.log.size() > 100);
    const double first = r.log[0].loss.total;
    const double at100 = r.log[100].loss.total;
    const bool ok = at100 < first;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "total loss step 1 = %.4f, step 100 = %.4f", first,
                  at100);
    report(8, ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 9: five-seed stability of the detection AUC") {
    const ReferenceRun& r = reference_run();
    std::vector<double> aucs{r.trained_auc};
    for (std::uint64_t seed = 43; seed <= 46; ++seed) {
        ModelState model = ModelState::init(reference_encoder(), CenterConfig{},
                                            reference_train(seed), seed);
        train(model, r.data);
        const auto scores = anomaly_scores(model, r.data, ScoreConfig{});
        aucs.push_back(auc(scores, r.truth, Curve::Roc));
    }
    const double mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / aucs.size();
    double var = 0.0;
    for (double a : aucs) var += (a - mean) * (a - mean);
    const double std_dev = std::sqrt(var / aucs.size());
    const bool ok = std_dev <= 0.05;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "AUC over seeds 42-46: %.4f %.4f %.4f %.4f %.4f; mean %.4f std %.4f "
                  "(<= 0.05)",
                  aucs[0], aucs[1], aucs[2], aucs[3], aucs[4], mean, std_dev);
    report(9, ok, buf);
    CHECK(ok);
}

TEST_CASE("criterion 10: topology robustness harness") {
    ReferenceRun& r = const_cast<ReferenceRun&>(reference_run());
    std::printf("    topology  Aff-F   PA-F    A-ROC   A-PR    windows/s  ms/window\n");
    bool all_ok = true;
    for (Topology kind : {Topology::Lookback, Topology::Random, Topology::Knn}) {
        ModelState* model = nullptr;
        ModelState fresh;
        if (kind == Topology::Lookback) {
            model = &r.model;
        } else {
            fresh = ModelState::init(reference_encoder(), CenterConfig{},
                                     reference_train(42, kind), 42);
            train(fresh, r.data);
            model = &fresh;
        }
        const auto t0 = std::chrono::steady_clock::now();
        EvalReport rep = evaluate_detection(*model, r.data, ScoreConfig{}, EvalOptions{});
        const double secs = wall_seconds(t0);
        const double windows = static_cast<double>(rep.scores.size()) / 64.0;
        const char* name = kind == Topology::Lookback ? "lookback"
                           : kind == Topology::Random ? "random"
                                                      : "knn";
        const bool finite = std::isfinite(rep.metrics.aff_f) &&
                            std::isfinite(rep.metrics.auc_roc) &&
                            std::isfinite(rep.metrics.pa_f) &&
                            std::isfinite(rep.metrics.auc_pr);
        all_ok = all_ok && finite;
        std::printf("    %-9s %.4f  %.4f  %.4f  %.4f  %8.1f  %8.2f\n", name,
                    rep.metrics.aff_f, rep.metrics.pa_f, rep.metrics.auc_roc,
                    rep.metrics.auc_pr, windows / secs, 1000.0 * secs / windows);
    }
    report(10, all_ok, "lookback/random/knn all complete the reference run (table above)");
    CHECK(all_ok);
}

TEST_CASE("criterion 11: delta sweep schema and invariances") {
    ReferenceRun& r = const_cast<ReferenceRun&>(reference_run());
    const std::vector<double> deltas = {0.2, 0.4, 0.6, 0.8, 1.0};
    auto rows = delta_sweep(r.model, r.data, deltas, ScoreConfig{});
    bool schema_ok = rows.size() == 5;
    bool auc_constant = true;
    bool smooth = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        schema_ok = schema_ok && rows[i].delta == deltas[i] && rows[i].aff_f >= 0.0 &&
                    rows[i].aff_f <= 1.0;
        if (i) {
            auc_constant = auc_constant && rows[i].auc_roc == rows[0].auc_roc;
            smooth = smooth && std::abs(rows[i].aff_f - rows[i - 1].aff_f) < 0.5;
        }
    }
    const bool ok = schema_ok && auc_constant && smooth;
    std::string detail = "rows (delta, Aff-F, A-ROC):";
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), " (%.1f, %.3f, %.3f)", row.delta, row.aff_f,
                      row.auc_roc);
        detail += buf;
    }
    report(11, ok, detail);
    CHECK(ok);
}

TEST_CASE("criterion 12: InfoNCE bound bookkeeping") {
    TemporalGraph g = build_lookback(10, TopologyConfig{});  // 16 edges
    const int batch = static_cast<int>(g.edges.size());
    Tensor eye = Tensor::zeros({6, 6});
    {
        auto d = eye.mutable_data();
        for (int i = 0; i < 6; ++i) d[static_cast<std::size_t>(i) * 6 + i] = 1.0;
    }

    // uniform scores: every online/target row identical
    InfoNceResult uniform = loss_infonce(Tensor::full({10, 6}, 1.0),
                                         Tensor::full({10, 6}, 0.5), g, 0.1, eye);
    const bool uniform_ok =
        std::abs(uniform.loss.value() - std::log(static_cast<double>(batch))) < 1e-9;

    Rng rng(55);
    bool identity_ok = true, nonneg_ok = true;
    for (int trial = 0; trial < 20; ++trial) {
        Tensor on = testutil::random_tensor({10, 6}, rng, 1.0, false);
        Tensor tg = testutil::random_tensor({10, 6}, rng, 1.0, false);
        InfoNceResult res = loss_infonce(on, tg, g, 0.1, eye);
        identity_ok = identity_ok &&
                      std::abs(res.mi_estimate - (std::log(static_cast<double>(batch - 1)) -
                                                  res.loss.value())) < 1e-12;
        nonneg_ok = nonneg_ok && res.loss.value() >= 0.0;
    }
    const bool ok = uniform_ok && identity_ok && nonneg_ok;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "uniform-score loss %.9f vs log|B| %.9f; MI identity holds: %s; "
                  "loss >= 0: %s",
                  uniform.loss.value(), std::log(static_cast<double>(batch)),
                  identity_ok ? "yes" : "no", nonneg_ok ? "yes" : "no");
    report(12, ok, buf);
    CHECK(ok);
}
