#include "scatterad/objective.hpp"

#include <cmath>

#include "scatterad/errors.hpp"
#include "scatterad/rng.hpp"

namespace scatterad {

namespace {
constexpr double kNormEps = 1e-12;
}

bool ScatterCenter::all_zero() const {
    for (const auto& c : centers)
        for (double v : c)
            if (v != 0.0) return false;
    return true;
}

ScatterCenter init_center(CenterStrategy strategy, int dim, std::uint64_t seed,
                          double radius, int count) {
    if (dim < 1) throw ConfigError("scatter center: dimension must be >= 1");
    ScatterCenter c;
    c.strategy = strategy;
    c.seed = seed;
    Rng rng(seed);

    auto random_direction = [&]() {
        std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
        double norm = 0.0;
        while (norm == 0.0) {
            for (double& x : v) x = rng.normal();
            norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
        }
        for (double& x : v) x /= norm;
        return v;
    };
    auto random_in_ball = [&]() {
        std::vector<double> v = random_direction();
        double eps = rng.uniform();
        while (eps == 0.0) eps = rng.uniform();  // keep the norm strictly in (0, 1)
        for (double& x : v) x *= eps;
        return v;
    };

    switch (strategy) {
        case CenterStrategy::RandomInBall:
            c.centers.push_back(random_in_ball());
            break;
        case CenterStrategy::Zero:
            c.centers.emplace_back(static_cast<std::size_t>(dim), 0.0);
            break;
        case CenterStrategy::FixedRadius: {
            if (radius <= 0.0 || radius > 1.0)
                throw ConfigError("scatter center: fixed radius must lie in (0, 1]");
            std::vector<double> v = random_direction();
            for (double& x : v) x *= radius;
            c.centers.push_back(std::move(v));
            break;
        }
        case CenterStrategy::MultiCenter: {
            if (count < 1) throw ConfigError("scatter center: count must be >= 1");
            for (int i = 0; i < count; ++i) c.centers.push_back(random_in_ball());
            break;
        }
    }
    return c;
}

const char* center_strategy_name(CenterStrategy s) {
    switch (s) {
        case CenterStrategy::RandomInBall: return "random_in_ball";
        case CenterStrategy::Zero: return "zero";
        case CenterStrategy::FixedRadius: return "fixed_radius";
        case CenterStrategy::MultiCenter: return "multi_center";
    }
    return "?";
}

CenterStrategy center_strategy_from_name(const std::string& name) {
    if (name == "random_in_ball") return CenterStrategy::RandomInBall;
    if (name == "zero") return CenterStrategy::Zero;
    if (name == "fixed_radius") return CenterStrategy::FixedRadius;
    if (name == "multi_center") return CenterStrategy::MultiCenter;
    throw ConfigError("unknown center strategy '" + name + "'");
}

Tensor project_to_sphere(const Tensor& z, double eps) { return row_normalize(z, eps); }

Tensor loss_time(const Tensor& z) {
    const int t_len = z.rows();
    if (t_len < 2) throw NumericError("loss_time: needs at least 2 time steps");
    Tensor diff = slice_rows(z, 1, t_len) - slice_rows(z, 0, t_len - 1);
    return reduce_sum(square(diff)) * Tensor::scalar(1.0 / (t_len - 1));
}

namespace {

// Cosine of each row of z against one fixed center, eps-guarded. Returns a
// length-T vector.
Tensor cosine_to_center(const Tensor& z, const std::vector<double>& center) {
    const int d = z.cols();
    double cnorm = 0.0;
    for (double v : center) cnorm += v * v;
    cnorm = std::sqrt(cnorm);
    Tensor c = Tensor::from_data({d, 1}, center);
    Tensor dots = reshape(matmul(z, c), {z.rows()});    // T
    Tensor denom = add_scalar(row_norms(z), kNormEps);  // T
    return mul_scalar(div(dots, denom), 1.0 / (cnorm + kNormEps));
}

}  // namespace

Tensor loss_scatter(const Tensor& z, const ScatterCenter& center) {
    if (center.count() == 0) throw ConfigError("loss_scatter: center not initialized");
    if (center.dim() != z.cols())
        throw NumericError("loss_scatter: center dimension " + std::to_string(center.dim()) +
                           " does not match representation width " + std::to_string(z.cols()));
    // The zero-center ablation arm has no defined cosine; the term degenerates
    // to a constant 0.
    if (center.all_zero()) return Tensor::scalar(0.0);

    Tensor zt = project_to_sphere(z, kNormEps);
    Tensor best;
    if (center.count() == 1) {
        best = cosine_to_center(zt, center.centers.front());
    } else {
        std::vector<Tensor> cols;
        cols.reserve(center.centers.size());
        for (const auto& c : center.centers)
            cols.push_back(reshape(cosine_to_center(zt, c), {zt.rows(), 1}));
        best = reduce_max(concat_cols(cols), 1);  // nearest center per row
    }
    return neg(reduce_mean(best));
}

Tensor loss_contrast(const Tensor& z_online, const Tensor& z_target,
                     const TemporalGraph& graph) {
    if (graph.edges.empty()) throw NumericError("loss_contrast: empty edge set");
    std::vector<int> src, dst;
    src.reserve(graph.edges.size());
    dst.reserve(graph.edges.size());
    for (const auto& [s, d] : graph.edges) {
        src.push_back(s);
        dst.push_back(d);
    }
    Tensor a = gather_rows(z_online, src);  // E x d
    Tensor b = gather_rows(z_target, dst);
    Tensor dots = reduce_sum(mul(a, b), 1);  // E
    Tensor denom = mul(add_scalar(row_norms(a), kNormEps), add_scalar(row_norms(b), kNormEps));
    Tensor cos = div(dots, denom);
    return neg(reduce_mean(log(sigmoid(cos))));
}

InfoNceResult loss_infonce(const Tensor& z_online, const Tensor& z_target,
                           const TemporalGraph& graph, double temperature,
                           const Tensor& predictor) {
    if (graph.edges.size() < 2) throw NumericError("loss_infonce: needs at least 2 edges");
    if (temperature <= 0.0) throw ConfigError("loss_infonce: temperature must be positive");
    std::vector<int> src, dst;
    for (const auto& [s, d] : graph.edges) {
        src.push_back(s);
        dst.push_back(d);
    }
    const int batch = static_cast<int>(graph.edges.size());

    Tensor p = row_normalize(matmul(gather_rows(z_online, src), predictor), kNormEps);
    Tensor q = row_normalize(gather_rows(z_target, dst), kNormEps);  // stop-grad upstream
    Tensor scores = mul_scalar(matmul(p, transpose(q)), 1.0 / temperature);  // E x E

    // log-softmax rows with a detached row max: the max path's gradient
    // contributions cancel exactly, so detaching is exact.
    Tensor row_max = reduce_max(scores, 1).detach();
    Tensor shifted = add_rowwise(scores, neg(row_max));
    Tensor lse = add(log(reduce_sum(exp(shifted), 1)), row_max);
    Tensor positives = diag(scores);
    Tensor loss = reduce_mean(sub(lse, positives));

    InfoNceResult r;
    r.loss = loss;
    r.batch_size = batch;
    r.mi_estimate = std::log(static_cast<double>(batch - 1)) - loss.value();
    return r;
}

double total_loss(const LossBreakdown& parts) {
    return parts.time + parts.scatter + parts.contrast;
}

Tensor total_loss(const Tensor& time, const Tensor& scatter, const Tensor& contrast) {
    return add(add(time, scatter), contrast);
}

void ema_update(std::vector<std::pair<std::string, Tensor>>& target,
                std::vector<std::pair<std::string, Tensor>>& online, double m) {
    if (m <= 0.0 || m >= 1.0) throw ConfigError("ema: momentum must lie in (0, 1)");
    if (target.size() != online.size())
        throw NumericError("ema: parameter lists differ in length");
    for (std::size_t i = 0; i < target.size(); ++i) {
        Tensor& t = target[i].second;
        Tensor& o = online[i].second;
        if (t.shape() != o.shape())
            throw NumericError("ema: shape mismatch at '" + target[i].first + "' between " +
                               t.shape_str() + " and " + o.shape_str());
        auto td = t.mutable_data();
        auto od = o.data();
        for (std::size_t j = 0; j < td.size(); ++j)
            td[j] = m * td[j] + (1.0 - m) * od[j];
    }
}

}  // namespace scatterad
