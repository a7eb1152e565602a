#pragma once

#include <string>
#include <vector>

#include "scatterad/graph.hpp"
#include "scatterad/rng.hpp"
#include "scatterad/tensor.hpp"

namespace scatterad {

struct EncoderConfig {
    int in_channels = 0;
    int d_out = 32;
    int heads = 4;
    int gat_layers = 2;
    std::vector<int> kernels = {2, 4, 8};  // parallel causal branches
    double leaky_slope = 0.2;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    int head_dim() const;
    void validate() const;
};

// One causal convolution branch: k taps projecting in_channels -> d_out,
// a bias, and its own batch norm.
struct ConvBranch {
    int kernel = 1;
    std::vector<Tensor> taps;  // tap i applies to h_{t-i}
    Tensor bias;
    Tensor bn_gamma;
    Tensor bn_beta;
    BatchNormState bn_state;
};

struct GatHead {
    Tensor weight;  // d_in x d_head
    Tensor attn;    // 2*d_head, split into source/destination halves
};

struct GatLayer {
    std::vector<GatHead> heads;
};

// All parameters of one encoder (the online and target encoders are two
// instances of this). The PReLU slope is itself learnable.
struct EncoderParams {
    EncoderConfig cfg;
    std::vector<ConvBranch> branches;
    Tensor prelu_alpha;
    std::vector<GatLayer> gat;

    static EncoderParams init(const EncoderConfig& cfg, Rng& rng, bool requires_grad);

    // Learnable tensors with stable names (checkpoint / EMA / optimizer order).
    std::vector<std::pair<std::string, Tensor>> learnable();
    // Non-learnable state (batch-norm running statistics).
    std::vector<std::pair<std::string, std::vector<double>*>> buffers();

    EncoderParams clone(bool requires_grad) const;
    long long param_count() const;
    std::string describe() const;
};

struct ForwardMode {
    bool training = true;
    bool update_running = false;
};

// Multi-scale causal convolution: each branch applies conv -> BN -> PReLU;
// branch outputs are summed. Output keeps the window length via causal
// zero left-padding.
Tensor causal_conv_encode(const Tensor& window, EncoderParams& params, ForwardMode mode);

// One multi-head attention layer over the temporal graph. Neighborhoods are
// in-edges plus a self-loop; head outputs are concatenated, then ELU.
// When attn_out is given it receives one (num_nodes x num_nodes) dense
// attention matrix per head.
Tensor gat_layer(const Tensor& h, const TemporalGraph& graph, GatLayer& layer,
                 const EncoderConfig& cfg,
                 std::vector<std::vector<double>>* attn_out = nullptr);

// Full encoder: z = gat_stack(conv(x)) + conv(x).
Tensor encode(const Tensor& window, const TemporalGraph& graph, EncoderParams& params,
              ForwardMode mode);

}  // namespace scatterad
