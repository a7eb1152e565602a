#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scatterad/rng.hpp"

namespace scatterad {

namespace detail {
struct Node;
}

// Dense 1-D/2-D tensor of 64-bit reals participating in a reverse-mode
// autodiff graph. A Tensor is a cheap handle; copying shares the storage.
// Ops are free functions below; each records a backward closure on the
// implicit tape (nodes carry monotonically increasing ids, and backward()
// replays them exactly once in descending order).
class Tensor {
public:
    Tensor();
    ~Tensor();
    Tensor(const Tensor&);
    Tensor& operator=(const Tensor&);
    Tensor(Tensor&&) noexcept;
    Tensor& operator=(Tensor&&) noexcept;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Gaussian init with the given stddev.
    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev,
                        bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const;
    int ndim() const;
    int size() const;
    // 2-D views: 1-D tensors behave as column vectors (rows = size, cols = 1).
    int rows() const;
    int cols() const;

    double value() const;  // scalar tensors only
    double at(int i) const;
    double at(int r, int c) const;
    std::span<const double> data() const;
    // In-place mutation is allowed for leaf tensors only (parameters).
    std::span<double> mutable_data();

    bool requires_grad() const;
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    // A leaf copy sharing no graph history. Gradients never flow through.
    Tensor detach() const;
    // A deep, independent leaf copy.
    Tensor clone() const;

    std::string shape_str() const;

private:
    explicit Tensor(std::shared_ptr<detail::Node> node);
    std::shared_ptr<detail::Node> node_;
    friend struct TensorOps;
};

// ---- elementwise ops (identical shapes or tensor-scalar broadcast) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
// PReLU with a learnable scalar slope.
Tensor prelu(const Tensor& x, const Tensor& alpha);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor elu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- reductions ----
// axis = nullopt reduces everything to a scalar; axis 0 reduces down columns
// (result length = cols); axis 1 reduces across rows (result length = rows).
enum class Reduce { Sum, Mean, Min, Max, L2Norm };
Tensor reduce(const Tensor& x, Reduce op, std::optional<int> axis = std::nullopt);
inline Tensor reduce_sum(const Tensor& x, std::optional<int> a = std::nullopt) {
    return reduce(x, Reduce::Sum, a);
}
inline Tensor reduce_mean(const Tensor& x, std::optional<int> a = std::nullopt) {
    return reduce(x, Reduce::Mean, a);
}
inline Tensor reduce_min(const Tensor& x, std::optional<int> a = std::nullopt) {
    return reduce(x, Reduce::Min, a);
}
inline Tensor reduce_max(const Tensor& x, std::optional<int> a = std::nullopt) {
    return reduce(x, Reduce::Max, a);
}
inline Tensor l2_norm(const Tensor& x, std::optional<int> a = std::nullopt) {
    return reduce(x, Reduce::L2Norm, a);
}

// Numerically stable softmax along an axis (max subtraction).
Tensor softmax(const Tensor& x, std::optional<int> axis = std::nullopt);

// ---- structural ops ----
// Same data, new shape (element count must match).
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor slice_rows(const Tensor& x, int begin, int end);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor gather_rows(const Tensor& x, const std::vector<int>& index);
// Shift rows down by `steps`, zero-filling the top (causal left pad).
Tensor time_shift(const Tensor& x, int steps);
// Add a length-cols vector to every row.
Tensor add_colwise(const Tensor& x, const Tensor& bias);
// Scale / shift row i by v[i] (v has length rows).
Tensor mul_rowwise(const Tensor& x, const Tensor& v);
Tensor add_rowwise(const Tensor& x, const Tensor& v);
// Per-row Euclidean norms, and rows divided by (norm + eps).
Tensor row_norms(const Tensor& x);
Tensor row_normalize(const Tensor& x, double eps);
Tensor diag(const Tensor& x);

// ---- graph-structured ops ----
// Softmax over edge scores grouped by destination node.
Tensor edge_softmax(const Tensor& scores, const std::vector<int>& dst, int num_nodes);
// out[dst[e]] += alpha[e] * values[src[e]]; out has num_nodes rows.
Tensor edge_weighted_sum(const Tensor& alpha, const std::vector<int>& src,
                         const std::vector<int>& dst, const Tensor& values,
                         int num_nodes);

// ---- batch normalization ----
struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
};
// Per-column normalization. Training mode uses batch statistics (and may
// fold them into the running estimates); inference mode uses running
// statistics. Differentiable through the batch statistics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training, bool update_running,
                  double eps = 1e-5, double momentum = 0.1);

// ---- backward ----
// Reverse pass from a scalar loss. Populates grad for every requires_grad
// tensor reachable from the loss; repeated calls accumulate.
void backward(const Tensor& loss);

}  // namespace scatterad
