#include "scatterad/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <unordered_map>

#include "scatterad/errors.hpp"

namespace scatterad {

namespace detail {

using AdjointLookup = std::function<std::vector<double>&(int)>;

struct Node {
    std::uint64_t id = 0;
    std::vector<int> shape;
    std::vector<double> value;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<double> grad;  // persistent accumulator, lazily sized
    std::vector<std::shared_ptr<Node>> parents;
    // Adds this node's adjoint contribution into its parents' adjoints.
    std::function<void(const std::vector<double>&, const AdjointLookup&)> backprop;

    int size() const { return static_cast<int>(value.size()); }
};

namespace {

std::atomic<std::uint64_t> g_next_id{1};

int numel(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::shared_ptr<Node> new_node(std::vector<int> shape) {
    auto n = std::make_shared<Node>();
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    n->shape = std::move(shape);
    n->value.assign(static_cast<std::size_t>(numel(n->shape)), 0.0);
    return n;
}

}  // namespace
}  // namespace detail

using detail::Node;

// ---------------------------------------------------------------------------
// Tensor handle
// ---------------------------------------------------------------------------

Tensor::Tensor() = default;
Tensor::~Tensor() = default;
Tensor::Tensor(const Tensor&) = default;
Tensor& Tensor::operator=(const Tensor&) = default;
Tensor::Tensor(Tensor&&) noexcept = default;
Tensor& Tensor::operator=(Tensor&&) noexcept = default;
Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

namespace {
const Node& expect(const std::shared_ptr<Node>& n) {
    if (!n) throw NumericError("operation on an undefined tensor");
    return *n;
}
}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    for (int d : shape) {
        if (d <= 0) throw NumericError("tensor dimensions must be positive, got " +
                                       detail::shape_to_string(shape));
    }
    if (shape.empty() || shape.size() > 2) {
        throw NumericError("tensors are 1-D or 2-D, got " + detail::shape_to_string(shape));
    }
    auto n = detail::new_node(std::move(shape));
    std::fill(n->value.begin(), n->value.end(), value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    Tensor t = zeros(shape, requires_grad);
    if (static_cast<int>(data.size()) != t.size()) {
        throw NumericError("data length " + std::to_string(data.size()) +
                           " does not match shape " + detail::shape_to_string(shape));
    }
    t.node_->value = std::move(data);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.node_->value) v = rng.normal() * stddev;
    return t;
}

const std::vector<int>& Tensor::shape() const { return expect(node_).shape; }
int Tensor::ndim() const { return static_cast<int>(expect(node_).shape.size()); }
int Tensor::size() const { return expect(node_).size(); }

int Tensor::rows() const {
    const Node& n = expect(node_);
    return n.shape[0];
}

int Tensor::cols() const {
    const Node& n = expect(node_);
    return n.shape.size() == 2 ? n.shape[1] : 1;
}

double Tensor::value() const {
    const Node& n = expect(node_);
    if (n.size() != 1) {
        throw NumericError("value() requires a scalar tensor, got shape " +
                           detail::shape_to_string(n.shape));
    }
    return n.value[0];
}

double Tensor::at(int i) const {
    const Node& n = expect(node_);
    return n.value.at(static_cast<std::size_t>(i));
}

double Tensor::at(int r, int c) const {
    const Node& n = expect(node_);
    return n.value.at(static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                      static_cast<std::size_t>(c));
}

std::span<const double> Tensor::data() const {
    const Node& n = expect(node_);
    return {n.value.data(), n.value.size()};
}

std::span<double> Tensor::mutable_data() {
    Node& n = const_cast<Node&>(expect(node_));
    if (!n.is_leaf) throw NumericError("only leaf tensors may be mutated in place");
    return {n.value.data(), n.value.size()};
}

bool Tensor::requires_grad() const { return expect(node_).requires_grad; }
bool Tensor::is_leaf() const { return expect(node_).is_leaf; }
bool Tensor::has_grad() const { return !expect(node_).grad.empty(); }

std::span<const double> Tensor::grad() const {
    const Node& n = expect(node_);
    return {n.grad.data(), n.grad.size()};
}

void Tensor::zero_grad() {
    Node& n = const_cast<Node&>(expect(node_));
    n.grad.assign(n.value.size(), 0.0);
}

Tensor Tensor::detach() const {
    const Node& n = expect(node_);
    auto out = detail::new_node(n.shape);
    out->value = n.value;
    return Tensor(std::move(out));
}

Tensor Tensor::clone() const {
    const Node& n = expect(node_);
    auto out = detail::new_node(n.shape);
    out->value = n.value;
    out->requires_grad = n.requires_grad;
    return Tensor(std::move(out));
}

std::string Tensor::shape_str() const { return detail::shape_to_string(expect(node_).shape); }

// ---------------------------------------------------------------------------
// Op plumbing
// ---------------------------------------------------------------------------

struct TensorOps {
    static std::shared_ptr<Node> node(const Tensor& t) {
        expect(t.node_);
        return t.node_;
    }

    static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }

    // Creates the output node for an op; records lineage only when a parent
    // requires grad, so detached subgraphs cost nothing on the tape.
    template <typename Backprop>
    static Tensor make_op(std::vector<int> shape,
                          std::vector<std::shared_ptr<Node>> parents, Backprop bp) {
        auto out = detail::new_node(std::move(shape));
        bool needs = false;
        for (const auto& p : parents) needs = needs || p->requires_grad;
        if (needs) {
            out->requires_grad = true;
            out->is_leaf = false;
            out->parents = std::move(parents);
            out->backprop = std::move(bp);
        }
        return wrap(std::move(out));
    }
};

namespace {

using detail::AdjointLookup;

std::shared_ptr<Node> N(const Tensor& t) { return TensorOps::node(t); }

enum class Broadcast { Same, ScalarA, ScalarB };

Broadcast broadcast_kind(const Node& a, const Node& b, const char* op) {
    if (a.shape == b.shape) return Broadcast::Same;
    if (a.size() == 1) return Broadcast::ScalarA;
    if (b.size() == 1) return Broadcast::ScalarB;
    throw NumericError(std::string(op) + ": shapes " + detail::shape_to_string(a.shape) +
                       " and " + detail::shape_to_string(b.shape) +
                       " broadcast only when identical or one side is a scalar");
}

// Generic binary elementwise op. fa/fb give the local derivatives w.r.t. each
// input as a function of (a_i, b_i).
template <typename F, typename Da, typename Db>
Tensor binary_op(const Tensor& ta, const Tensor& tb, const char* name, F f, Da da, Db db) {
    auto a = N(ta);
    auto b = N(tb);
    const Broadcast kind = broadcast_kind(*a, *b, name);
    const std::vector<int>& shape = (kind == Broadcast::ScalarA) ? b->shape : a->shape;
    const int n = (kind == Broadcast::ScalarA) ? b->size() : a->size();

    Tensor out = TensorOps::make_op(
        shape, {a, b},
        [a, b, kind, da, db, n](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (a->requires_grad) {
                std::vector<double>& ga = parent(0);
                for (int i = 0; i < n; ++i) {
                    const double av = a->value[kind == Broadcast::ScalarA ? 0 : i];
                    const double bv = b->value[kind == Broadcast::ScalarB ? 0 : i];
                    ga[kind == Broadcast::ScalarA ? 0 : i] += adj[i] * da(av, bv);
                }
            }
            if (b->requires_grad) {
                std::vector<double>& gb = parent(1);
                for (int i = 0; i < n; ++i) {
                    const double av = a->value[kind == Broadcast::ScalarA ? 0 : i];
                    const double bv = b->value[kind == Broadcast::ScalarB ? 0 : i];
                    gb[kind == Broadcast::ScalarB ? 0 : i] += adj[i] * db(av, bv);
                }
            }
        });
    auto o = N(out);
    for (int i = 0; i < n; ++i) {
        const double av = a->value[kind == Broadcast::ScalarA ? 0 : i];
        const double bv = b->value[kind == Broadcast::ScalarB ? 0 : i];
        o->value[i] = f(av, bv);
    }
    return out;
}

// Generic unary elementwise op; d gives dy/dx as a function of (x_i, y_i).
template <typename F, typename D>
Tensor unary_op(const Tensor& tx, F f, D d) {
    auto x = N(tx);
    const int n = x->size();
    Tensor out = TensorOps::make_op(
        x->shape, {x},
        [x, d, n](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int i = 0; i < n; ++i) gx[i] += adj[i] * d(x->value[i], 0.0);
        });
    auto o = N(out);
    for (int i = 0; i < n; ++i) o->value[i] = f(x->value[i]);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : N(b)->value) {
        if (v == 0.0) throw NumericError("div: division by zero");
    }
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& x) {
    return unary_op(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor square(const Tensor& x) {
    return unary_op(x, [](double v) { return v * v; },
                    [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
    for (double v : N(x)->value) {
        if (v < 0.0) throw NumericError("sqrt: negative input");
    }
    return unary_op(x, [](double v) { return std::sqrt(v); },
                    [](double v, double) { return 0.5 / std::sqrt(v); });
}

Tensor exp(const Tensor& x) {
    return unary_op(x, [](double v) { return std::exp(v); },
                    [](double v, double) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
    for (double v : N(x)->value) {
        if (v <= 0.0) throw NumericError("log: non-positive input");
    }
    return unary_op(x, [](double v) { return std::log(v); },
                    [](double v, double) { return 1.0 / v; });
}

Tensor prelu(const Tensor& tx, const Tensor& talpha) {
    auto x = N(tx);
    auto alpha = N(talpha);
    if (alpha->size() != 1) throw NumericError("prelu: alpha must be a scalar tensor");
    const int n = x->size();
    Tensor out = TensorOps::make_op(
        x->shape, {x, alpha},
        [x, alpha, n](const std::vector<double>& adj, const AdjointLookup& parent) {
            const double a = alpha->value[0];
            if (x->requires_grad) {
                std::vector<double>& gx = parent(0);
                for (int i = 0; i < n; ++i)
                    gx[i] += adj[i] * (x->value[i] > 0.0 ? 1.0 : a);
            }
            if (alpha->requires_grad) {
                std::vector<double>& ga = parent(1);
                double acc = 0.0;
                for (int i = 0; i < n; ++i)
                    if (x->value[i] <= 0.0) acc += adj[i] * x->value[i];
                ga[0] += acc;
            }
        });
    auto o = N(out);
    const double a = alpha->value[0];
    for (int i = 0; i < n; ++i)
        o->value[i] = x->value[i] > 0.0 ? x->value[i] : a * x->value[i];
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary_op(
        x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor elu(const Tensor& x) {
    return unary_op(
        x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : std::exp(v); });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double v, double) {
            const double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 - s);
        });
}

Tensor add_scalar(const Tensor& x, double c) {
    return unary_op(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
    return unary_op(x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& ta, const Tensor& tb) {
    auto a = N(ta);
    auto b = N(tb);
    if (a->shape.size() != 2 || b->shape.size() != 2) {
        throw NumericError("matmul: expects 2-D operands, got " +
                           detail::shape_to_string(a->shape) + " and " +
                           detail::shape_to_string(b->shape));
    }
    const int m = a->shape[0], k = a->shape[1], k2 = b->shape[0], n = b->shape[1];
    if (k != k2) {
        throw NumericError("matmul: inner dimensions disagree between " +
                           detail::shape_to_string(a->shape) + " and " +
                           detail::shape_to_string(b->shape));
    }
    Tensor out = TensorOps::make_op(
        {m, n}, {a, b},
        [a, b, m, k, n](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (a->requires_grad) {
                std::vector<double>& ga = parent(0);  // dA = dC * B^T
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double g = adj[static_cast<std::size_t>(i) * n + j];
                        if (g == 0.0) continue;
                        for (int p = 0; p < k; ++p)
                            ga[static_cast<std::size_t>(i) * k + p] +=
                                g * b->value[static_cast<std::size_t>(p) * n + j];
                    }
            }
            if (b->requires_grad) {
                std::vector<double>& gb = parent(1);  // dB = A^T * dC
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        const double av = a->value[static_cast<std::size_t>(i) * k + p];
                        if (av == 0.0) continue;
                        for (int j = 0; j < n; ++j)
                            gb[static_cast<std::size_t>(p) * n + j] +=
                                av * adj[static_cast<std::size_t>(i) * n + j];
                    }
            }
        });
    auto o = N(out);
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = a->value[static_cast<std::size_t>(i) * k + p];
            if (av == 0.0) continue;
            const double* brow = &b->value[static_cast<std::size_t>(p) * n];
            double* orow = &o->value[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& tx) {
    auto x = N(tx);
    if (x->shape.size() != 2) throw NumericError("transpose: expects a 2-D tensor");
    const int r = x->shape[0], c = x->shape[1];
    Tensor out = TensorOps::make_op(
        {c, r}, {x},
        [x, r, c](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int i = 0; i < c; ++i)
                for (int j = 0; j < r; ++j)
                    gx[static_cast<std::size_t>(j) * c + i] +=
                        adj[static_cast<std::size_t>(i) * r + j];
        });
    auto o = N(out);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            o->value[static_cast<std::size_t>(j) * r + i] =
                x->value[static_cast<std::size_t>(i) * c + j];
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace {

// Maps a reduction over a 2-D layout into independent groups. axis nullopt:
// one group of everything; axis 0: one group per column; axis 1: per row.
struct GroupPlan {
    int groups = 0;
    int group_size = 0;
    // element index for (group g, member i)
    std::function<int(int, int)> element;
};

GroupPlan make_plan(const Node& x, std::optional<int> axis) {
    const int r = x.shape[0];
    const int c = x.shape.size() == 2 ? x.shape[1] : 1;
    if (axis.has_value() && (*axis < 0 || *axis >= static_cast<int>(x.shape.size())))
        throw NumericError("reduce: axis " + std::to_string(*axis) + " out of range for " +
                           detail::shape_to_string(x.shape));
    GroupPlan plan;
    if (!axis.has_value() || x.shape.size() == 1) {
        plan.groups = 1;
        plan.group_size = x.size();
        plan.element = [](int, int i) { return i; };
        return plan;
    }
    if (*axis == 0) {
        plan.groups = c;
        plan.group_size = r;
        plan.element = [c](int g, int i) { return i * c + g; };
    } else if (*axis == 1) {
        plan.groups = r;
        plan.group_size = c;
        plan.element = [c](int g, int i) { return g * c + i; };
    } else {
        throw NumericError("reduce: axis " + std::to_string(*axis) + " out of range");
    }
    return plan;
}

}  // namespace

Tensor reduce(const Tensor& tx, Reduce op, std::optional<int> axis) {
    auto x = N(tx);
    if (x->size() == 0) throw NumericError("reduce: empty tensor");
    GroupPlan plan = make_plan(*x, axis);
    if (plan.group_size == 0) throw NumericError("reduce: empty axis");

    std::vector<int> out_shape =
        plan.groups == 1 ? std::vector<int>{1} : std::vector<int>{plan.groups};

    std::vector<double> result(static_cast<std::size_t>(plan.groups), 0.0);
    // argbest for min/max: first attaining element (deterministic ties).
    std::vector<int> arg(static_cast<std::size_t>(plan.groups), 0);
    for (int g = 0; g < plan.groups; ++g) {
        switch (op) {
            case Reduce::Sum:
            case Reduce::Mean: {
                double s = 0.0;
                for (int i = 0; i < plan.group_size; ++i) s += x->value[plan.element(g, i)];
                result[g] = op == Reduce::Mean ? s / plan.group_size : s;
                break;
            }
            case Reduce::Min:
            case Reduce::Max: {
                double best = x->value[plan.element(g, 0)];
                int best_i = 0;
                for (int i = 1; i < plan.group_size; ++i) {
                    const double v = x->value[plan.element(g, i)];
                    const bool better = op == Reduce::Min ? v < best : v > best;
                    if (better) {
                        best = v;
                        best_i = i;
                    }
                }
                result[g] = best;
                arg[g] = best_i;
                break;
            }
            case Reduce::L2Norm: {
                double s = 0.0;
                for (int i = 0; i < plan.group_size; ++i) {
                    const double v = x->value[plan.element(g, i)];
                    s += v * v;
                }
                result[g] = std::sqrt(s);
                break;
            }
        }
    }

    Tensor out = TensorOps::make_op(
        out_shape, {x},
        [x, plan, op, result, arg](const std::vector<double>& adj,
                                   const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int g = 0; g < plan.groups; ++g) {
                const double a = adj[g];
                switch (op) {
                    case Reduce::Sum:
                        for (int i = 0; i < plan.group_size; ++i)
                            gx[plan.element(g, i)] += a;
                        break;
                    case Reduce::Mean:
                        for (int i = 0; i < plan.group_size; ++i)
                            gx[plan.element(g, i)] += a / plan.group_size;
                        break;
                    case Reduce::Min:
                    case Reduce::Max:
                        gx[plan.element(g, arg[g])] += a;
                        break;
                    case Reduce::L2Norm: {
                        const double norm = result[g];
                        const double denom = norm > 0.0 ? norm : 1e-300;
                        for (int i = 0; i < plan.group_size; ++i)
                            gx[plan.element(g, i)] += a * x->value[plan.element(g, i)] / denom;
                        break;
                    }
                }
            }
        });
    N(out)->value = result;
    return out;
}

Tensor softmax(const Tensor& tx, std::optional<int> axis) {
    auto x = N(tx);
    GroupPlan plan = make_plan(*x, axis);
    std::vector<double> y(x->value.size(), 0.0);
    for (int g = 0; g < plan.groups; ++g) {
        double m = -1e308;
        for (int i = 0; i < plan.group_size; ++i)
            m = std::max(m, x->value[plan.element(g, i)]);
        double z = 0.0;
        for (int i = 0; i < plan.group_size; ++i) {
            const int e = plan.element(g, i);
            y[e] = std::exp(x->value[e] - m);
            z += y[e];
        }
        for (int i = 0; i < plan.group_size; ++i) y[plan.element(g, i)] /= z;
    }
    Tensor out = TensorOps::make_op(
        x->shape, {x},
        [x, plan, y](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int g = 0; g < plan.groups; ++g) {
                double dot = 0.0;
                for (int i = 0; i < plan.group_size; ++i) {
                    const int e = plan.element(g, i);
                    dot += y[e] * adj[e];
                }
                for (int i = 0; i < plan.group_size; ++i) {
                    const int e = plan.element(g, i);
                    gx[e] += y[e] * (adj[e] - dot);
                }
            }
        });
    N(out)->value = std::move(y);
    return out;
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& tx, std::vector<int> shape) {
    auto x = N(tx);
    if (shape.empty() || shape.size() > 2)
        throw NumericError("reshape: tensors are 1-D or 2-D");
    if (detail::numel(shape) != x->size())
        throw NumericError("reshape: cannot view " + detail::shape_to_string(x->shape) +
                           " as " + detail::shape_to_string(shape));
    Tensor out = TensorOps::make_op(
        shape, {x},
        [x](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (std::size_t i = 0; i < adj.size(); ++i) gx[i] += adj[i];
        });
    N(out)->value = x->value;
    return out;
}

Tensor slice_rows(const Tensor& tx, int begin, int end) {
    auto x = N(tx);
    const int r = x->shape[0];
    const int c = x->shape.size() == 2 ? x->shape[1] : 1;
    if (begin < 0 || end > r || begin >= end) {
        throw NumericError("slice_rows: range [" + std::to_string(begin) + ", " +
                           std::to_string(end) + ") invalid for " +
                           detail::shape_to_string(x->shape));
    }
    std::vector<int> shape = x->shape;
    shape[0] = end - begin;
    Tensor out = TensorOps::make_op(
        shape, {x},
        [x, begin, end, c](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int i = 0; i < (end - begin) * c; ++i)
                gx[static_cast<std::size_t>(begin) * c + i] += adj[i];
        });
    auto o = N(out);
    std::copy(x->value.begin() + static_cast<std::ptrdiff_t>(begin) * c,
              x->value.begin() + static_cast<std::ptrdiff_t>(end) * c, o->value.begin());
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw NumericError("concat_cols: no inputs");
    std::vector<std::shared_ptr<Node>> nodes;
    nodes.reserve(xs.size());
    int total_cols = 0;
    const int r = xs.front().rows();
    std::vector<int> offsets;
    std::vector<int> widths;
    for (const auto& t : xs) {
        auto n = N(t);
        if (n->shape.size() != 2 || n->shape[0] != r)
            throw NumericError("concat_cols: inputs must be 2-D with equal row counts");
        offsets.push_back(total_cols);
        widths.push_back(n->shape[1]);
        total_cols += n->shape[1];
        nodes.push_back(std::move(n));
    }
    Tensor out = TensorOps::make_op(
        {r, total_cols}, nodes,
        [nodes, offsets, widths, r, total_cols](const std::vector<double>& adj,
                                                const AdjointLookup& parent) {
            for (std::size_t p = 0; p < nodes.size(); ++p) {
                if (!nodes[p]->requires_grad) continue;
                std::vector<double>& g = parent(static_cast<int>(p));
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < widths[p]; ++j)
                        g[static_cast<std::size_t>(i) * widths[p] + j] +=
                            adj[static_cast<std::size_t>(i) * total_cols + offsets[p] + j];
            }
        });
    auto o = N(out);
    for (std::size_t p = 0; p < nodes.size(); ++p)
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < widths[p]; ++j)
                o->value[static_cast<std::size_t>(i) * total_cols + offsets[p] + j] =
                    nodes[p]->value[static_cast<std::size_t>(i) * widths[p] + j];
    return out;
}

Tensor gather_rows(const Tensor& tx, const std::vector<int>& index) {
    auto x = N(tx);
    const int r = x->shape[0];
    const int c = x->shape.size() == 2 ? x->shape[1] : 1;
    for (int i : index) {
        if (i < 0 || i >= r)
            throw NumericError("gather_rows: index " + std::to_string(i) +
                               " out of range for " + detail::shape_to_string(x->shape));
    }
    std::vector<int> shape = x->shape;
    shape[0] = static_cast<int>(index.size());
    Tensor out = TensorOps::make_op(
        shape, {x},
        [x, index, c](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (std::size_t e = 0; e < index.size(); ++e)
                for (int j = 0; j < c; ++j)
                    gx[static_cast<std::size_t>(index[e]) * c + j] += adj[e * c + j];
        });
    auto o = N(out);
    for (std::size_t e = 0; e < index.size(); ++e)
        for (int j = 0; j < c; ++j)
            o->value[e * c + j] = x->value[static_cast<std::size_t>(index[e]) * c + j];
    return out;
}

Tensor time_shift(const Tensor& tx, int steps) {
    auto x = N(tx);
    if (steps < 0) throw NumericError("time_shift: negative shift");
    const int r = x->shape[0];
    const int c = x->shape.size() == 2 ? x->shape[1] : 1;
    Tensor out = TensorOps::make_op(
        x->shape, {x},
        [x, steps, r, c](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int t = steps; t < r; ++t)
                for (int j = 0; j < c; ++j)
                    gx[static_cast<std::size_t>(t - steps) * c + j] +=
                        adj[static_cast<std::size_t>(t) * c + j];
        });
    auto o = N(out);
    for (int t = steps; t < r; ++t)
        for (int j = 0; j < c; ++j)
            o->value[static_cast<std::size_t>(t) * c + j] =
                x->value[static_cast<std::size_t>(t - steps) * c + j];
    return out;
}

Tensor add_colwise(const Tensor& tx, const Tensor& tbias) {
    auto x = N(tx);
    auto bias = N(tbias);
    const int r = x->shape[0];
    const int c = x->shape.size() == 2 ? x->shape[1] : 1;
    if (bias->size() != c)
        throw NumericError("add_colwise: bias length " + std::to_string(bias->size()) +
                           " does not match column count " + std::to_string(c));
    Tensor out = TensorOps::make_op(
        x->shape, {x, bias},
        [x, bias, r, c](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (x->requires_grad) {
                std::vector<double>& gx = parent(0);
                for (std::size_t i = 0; i < adj.size(); ++i) gx[i] += adj[i];
            }
            if (bias->requires_grad) {
                std::vector<double>& gb = parent(1);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        gb[j] += adj[static_cast<std::size_t>(i) * c + j];
            }
        });
    auto o = N(out);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            o->value[static_cast<std::size_t>(i) * c + j] =
                x->value[static_cast<std::size_t>(i) * c + j] + bias->value[j];
    return out;
}

namespace {

Tensor rowwise_op(const Tensor& tx, const Tensor& tv, bool multiply) {
    auto x = N(tx);
    auto v = N(tv);
    const int r = x->shape[0];
    const int c = x->shape.size() == 2 ? x->shape[1] : 1;
    if (v->size() != r)
        throw NumericError("rowwise op: vector length " + std::to_string(v->size()) +
                           " does not match row count " + std::to_string(r));
    Tensor out = TensorOps::make_op(
        x->shape, {x, v},
        [x, v, r, c, multiply](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (x->requires_grad) {
                std::vector<double>& gx = parent(0);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) {
                        const std::size_t e = static_cast<std::size_t>(i) * c + j;
                        gx[e] += adj[e] * (multiply ? v->value[i] : 1.0);
                    }
            }
            if (v->requires_grad) {
                std::vector<double>& gv = parent(1);
                for (int i = 0; i < r; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const std::size_t e = static_cast<std::size_t>(i) * c + j;
                        acc += adj[e] * (multiply ? x->value[e] : 1.0);
                    }
                    gv[i] += acc;
                }
            }
        });
    auto o = N(out);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
            const std::size_t e = static_cast<std::size_t>(i) * c + j;
            o->value[e] = multiply ? x->value[e] * v->value[i] : x->value[e] + v->value[i];
        }
    return out;
}

}  // namespace

Tensor mul_rowwise(const Tensor& x, const Tensor& v) { return rowwise_op(x, v, true); }
Tensor add_rowwise(const Tensor& x, const Tensor& v) { return rowwise_op(x, v, false); }

Tensor row_norms(const Tensor& tx) {
    auto x = N(tx);
    const int r = x->shape[0];
    const int c = x->shape.size() == 2 ? x->shape[1] : 1;
    std::vector<double> norms(static_cast<std::size_t>(r), 0.0);
    for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) {
            const double v = x->value[static_cast<std::size_t>(i) * c + j];
            s += v * v;
        }
        norms[i] = std::sqrt(s);
    }
    Tensor out = TensorOps::make_op(
        {r}, {x},
        [x, r, c, norms](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int i = 0; i < r; ++i) {
                const double denom = norms[i] > 0.0 ? norms[i] : 1e-300;
                for (int j = 0; j < c; ++j) {
                    const std::size_t e = static_cast<std::size_t>(i) * c + j;
                    gx[e] += adj[i] * x->value[e] / denom;
                }
            }
        });
    N(out)->value = std::move(norms);
    return out;
}

Tensor row_normalize(const Tensor& tx, double eps) {
    auto x = N(tx);
    const int r = x->shape[0];
    const int c = x->shape.size() == 2 ? x->shape[1] : 1;
    std::vector<double> norms(static_cast<std::size_t>(r), 0.0);
    for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) {
            const double v = x->value[static_cast<std::size_t>(i) * c + j];
            s += v * v;
        }
        norms[i] = std::sqrt(s);
    }
    Tensor out = TensorOps::make_op(
        x->shape, {x},
        [x, r, c, norms, eps](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int i = 0; i < r; ++i) {
                const double s = norms[i] + eps;
                const double n = norms[i] > 0.0 ? norms[i] : 1e-300;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) {
                    const std::size_t e = static_cast<std::size_t>(i) * c + j;
                    dot += adj[e] * x->value[e];
                }
                for (int j = 0; j < c; ++j) {
                    const std::size_t e = static_cast<std::size_t>(i) * c + j;
                    gx[e] += adj[e] / s - x->value[e] * dot / (n * s * s);
                }
            }
        });
    auto o = N(out);
    for (int i = 0; i < r; ++i) {
        const double s = norms[i] + eps;
        for (int j = 0; j < c; ++j) {
            const std::size_t e = static_cast<std::size_t>(i) * c + j;
            o->value[e] = x->value[e] / s;
        }
    }
    return out;
}

Tensor diag(const Tensor& tx) {
    auto x = N(tx);
    if (x->shape.size() != 2 || x->shape[0] != x->shape[1])
        throw NumericError("diag: expects a square matrix, got " +
                           detail::shape_to_string(x->shape));
    const int n = x->shape[0];
    Tensor out = TensorOps::make_op(
        {n}, {x},
        [x, n](const std::vector<double>& adj, const AdjointLookup& parent) {
            if (!x->requires_grad) return;
            std::vector<double>& gx = parent(0);
            for (int i = 0; i < n; ++i)
                gx[static_cast<std::size_t>(i) * n + i] += adj[i];
        });
    auto o = N(out);
    for (int i = 0; i < n; ++i) o->value[i] = x->value[static_cast<std::size_t>(i) * n + i];
    return out;
}

// ---------------------------------------------------------------------------
// Graph-structured ops
// ---------------------------------------------------------------------------

Tensor edge_softmax(const Tensor& tscores, const std::vector<int>& dst, int num_nodes) {
    auto s = N(tscores);
    const int e_count = s->shape[0];
    if (static_cast<int>(dst.size()) != e_count)
        throw NumericError("edge_softmax: dst length does not match score count");
    if ((s->shape.size() == 2 && s->shape[1] != 1))
        throw NumericError("edge_softmax: scores must be a column vector");

    std::vector<double> group_max(static_cast<std::size_t>(num_nodes), -1e308);
    for (int e = 0; e < e_count; ++e)
        group_max[dst[e]] = std::max(group_max[dst[e]], s->value[e]);
    std::vector<double> alpha(s->value.size(), 0.0);
    std::vector<double> group_sum(static_cast<std::size_t>(num_nodes), 0.0);
    for (int e = 0; e < e_count; ++e) {
        alpha[e] = std::exp(s->value[e] - group_max[dst[e]]);
        group_sum[dst[e]] += alpha[e];
    }
    for (int e = 0; e < e_count; ++e) alpha[e] /= group_sum[dst[e]];

    Tensor out = TensorOps::make_op(
        s->shape, {s},
        [s, dst, num_nodes, alpha, e_count](const std::vector<double>& adj,
                                            const AdjointLookup& parent) {
            if (!s->requires_grad) return;
            std::vector<double>& gs = parent(0);
            std::vector<double> dot(static_cast<std::size_t>(num_nodes), 0.0);
            for (int e = 0; e < e_count; ++e) dot[dst[e]] += alpha[e] * adj[e];
            for (int e = 0; e < e_count; ++e)
                gs[e] += alpha[e] * (adj[e] - dot[dst[e]]);
        });
    N(out)->value = std::move(alpha);
    return out;
}

Tensor edge_weighted_sum(const Tensor& talpha, const std::vector<int>& src,
                         const std::vector<int>& dst, const Tensor& tvalues,
                         int num_nodes) {
    auto alpha = N(talpha);
    auto values = N(tvalues);
    const int e_count = alpha->shape[0];
    if (static_cast<int>(src.size()) != e_count || static_cast<int>(dst.size()) != e_count)
        throw NumericError("edge_weighted_sum: edge lists do not match weight count");
    if (values->shape.size() != 2)
        throw NumericError("edge_weighted_sum: values must be 2-D");
    const int c = values->shape[1];

    Tensor out = TensorOps::make_op(
        {num_nodes, c}, {alpha, values},
        [alpha, values, src, dst, e_count, c](const std::vector<double>& adj,
                                              const AdjointLookup& parent) {
            if (alpha->requires_grad) {
                std::vector<double>& ga = parent(0);
                for (int e = 0; e < e_count; ++e) {
                    double acc = 0.0;
                    for (int j = 0; j < c; ++j)
                        acc += adj[static_cast<std::size_t>(dst[e]) * c + j] *
                               values->value[static_cast<std::size_t>(src[e]) * c + j];
                    ga[e] += acc;
                }
            }
            if (values->requires_grad) {
                std::vector<double>& gv = parent(1);
                for (int e = 0; e < e_count; ++e)
                    for (int j = 0; j < c; ++j)
                        gv[static_cast<std::size_t>(src[e]) * c + j] +=
                            alpha->value[e] * adj[static_cast<std::size_t>(dst[e]) * c + j];
            }
        });
    auto o = N(out);
    for (int e = 0; e < e_count; ++e)
        for (int j = 0; j < c; ++j)
            o->value[static_cast<std::size_t>(dst[e]) * c + j] +=
                alpha->value[e] * values->value[static_cast<std::size_t>(src[e]) * c + j];
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

Tensor batch_norm(const Tensor& tx, const Tensor& tgamma, const Tensor& tbeta,
                  BatchNormState& state, bool training, bool update_running,
                  double eps, double momentum) {
    auto x = N(tx);
    auto gamma = N(tgamma);
    auto beta = N(tbeta);
    const int r = x->shape[0];
    const int c = x->shape.size() == 2 ? x->shape[1] : 1;
    if (gamma->size() != c || beta->size() != c)
        throw NumericError("batch_norm: scale/shift length does not match column count");
    if (state.running_mean.empty()) {
        state.running_mean.assign(static_cast<std::size_t>(c), 0.0);
        state.running_var.assign(static_cast<std::size_t>(c), 1.0);
    }
    if (static_cast<int>(state.running_mean.size()) != c)
        throw NumericError("batch_norm: running statistics have the wrong width");

    std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
    std::vector<double> var(static_cast<std::size_t>(c), 0.0);
    if (training) {
        for (int j = 0; j < c; ++j) {
            double s = 0.0;
            for (int i = 0; i < r; ++i) s += x->value[static_cast<std::size_t>(i) * c + j];
            mean[j] = s / r;
            double v = 0.0;
            for (int i = 0; i < r; ++i) {
                const double d = x->value[static_cast<std::size_t>(i) * c + j] - mean[j];
                v += d * d;
            }
            var[j] = v / r;  // population variance
        }
        if (update_running) {
            for (int j = 0; j < c; ++j) {
                state.running_mean[j] =
                    (1.0 - momentum) * state.running_mean[j] + momentum * mean[j];
                state.running_var[j] =
                    (1.0 - momentum) * state.running_var[j] + momentum * var[j];
            }
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    std::vector<double> inv_std(static_cast<std::size_t>(c), 0.0);
    for (int j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    std::vector<double> xhat(x->value.size(), 0.0);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
            const std::size_t e = static_cast<std::size_t>(i) * c + j;
            xhat[e] = (x->value[e] - mean[j]) * inv_std[j];
        }

    Tensor out = TensorOps::make_op(
        x->shape, {x, gamma, beta},
        [x, gamma, beta, r, c, inv_std, xhat, training](const std::vector<double>& adj,
                                                        const AdjointLookup& parent) {
            if (gamma->requires_grad) {
                std::vector<double>& gg = parent(1);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) {
                        const std::size_t e = static_cast<std::size_t>(i) * c + j;
                        gg[j] += adj[e] * xhat[e];
                    }
            }
            if (beta->requires_grad) {
                std::vector<double>& gb = parent(2);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        gb[j] += adj[static_cast<std::size_t>(i) * c + j];
            }
            if (x->requires_grad) {
                std::vector<double>& gx = parent(0);
                if (training) {
                    // Differentiates through the batch statistics.
                    for (int j = 0; j < c; ++j) {
                        double sum_dy = 0.0, sum_dy_xhat = 0.0;
                        for (int i = 0; i < r; ++i) {
                            const std::size_t e = static_cast<std::size_t>(i) * c + j;
                            const double dy = adj[e] * gamma->value[j];
                            sum_dy += dy;
                            sum_dy_xhat += dy * xhat[e];
                        }
                        const double m_dy = sum_dy / r;
                        const double m_dy_xhat = sum_dy_xhat / r;
                        for (int i = 0; i < r; ++i) {
                            const std::size_t e = static_cast<std::size_t>(i) * c + j;
                            const double dy = adj[e] * gamma->value[j];
                            gx[e] += inv_std[j] * (dy - m_dy - xhat[e] * m_dy_xhat);
                        }
                    }
                } else {
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < c; ++j) {
                            const std::size_t e = static_cast<std::size_t>(i) * c + j;
                            gx[e] += adj[e] * gamma->value[j] * inv_std[j];
                        }
                }
            }
        });
    auto o = N(out);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
            const std::size_t e = static_cast<std::size_t>(i) * c + j;
            o->value[e] = gamma->value[j] * xhat[e] + beta->value[j];
        }
    return out;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    auto root = TensorOps::node(loss);
    if (root->size() != 1)
        throw NumericError("backward: loss must be a scalar, got shape " +
                           detail::shape_to_string(root->shape));

    // Collect the reachable subgraph. Node ids are assigned in construction
    // order, so descending id order is a valid reverse topological order and
    // every node is visited exactly once.
    std::vector<Node*> order;
    std::unordered_map<Node*, std::vector<double>> adjoint;
    {
        std::vector<Node*> stack{root.get()};
        std::unordered_map<Node*, bool> seen;
        while (!stack.empty()) {
            Node* n = stack.back();
            stack.pop_back();
            if (seen[n]) continue;
            seen[n] = true;
            order.push_back(n);
            for (const auto& p : n->parents) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->id > b->id; });

    adjoint[root.get()] = {1.0};
    for (Node* n : order) {
        auto it = adjoint.find(n);
        if (it == adjoint.end()) continue;  // not on a differentiable path
        if (n->backprop) {
            detail::AdjointLookup lookup = [&adjoint, n](int parent_idx) -> std::vector<double>& {
                Node* p = n->parents[static_cast<std::size_t>(parent_idx)].get();
                auto& buf = adjoint[p];
                if (buf.empty()) buf.assign(p->value.size(), 0.0);
                return buf;
            };
            n->backprop(it->second, lookup);
        }
    }
    for (Node* n : order) {
        if (!n->requires_grad) continue;
        auto it = adjoint.find(n);
        if (it == adjoint.end()) continue;
        if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
        for (std::size_t i = 0; i < n->grad.size(); ++i) n->grad[i] += it->second[i];
    }
}

}  // namespace scatterad
