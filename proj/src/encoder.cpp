#include "scatterad/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scatterad/errors.hpp"

namespace scatterad {

int EncoderConfig::head_dim() const {
    if (heads <= 0 || d_out % heads != 0)
        throw ConfigError("encoder: d_out " + std::to_string(d_out) +
                          " must be a positive multiple of heads " + std::to_string(heads));
    return d_out / heads;
}

void EncoderConfig::validate() const {
    if (in_channels <= 0) throw ConfigError("encoder: in_channels must be positive");
    if (d_out <= 0) throw ConfigError("encoder: d_out must be positive");
    if (gat_layers < 0) throw ConfigError("encoder: gat_layers must be >= 0");
    if (kernels.empty()) throw ConfigError("encoder: at least one kernel length required");
    for (int k : kernels)
        if (k <= 0) throw ConfigError("encoder: kernel lengths must be positive");
    (void)head_dim();
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng& rng, bool requires_grad) {
    cfg.validate();
    EncoderParams p;
    p.cfg = cfg;
    for (int k : cfg.kernels) {
        ConvBranch b;
        b.kernel = k;
        const double scale = 1.0 / std::sqrt(static_cast<double>(k * cfg.in_channels));
        for (int i = 0; i < k; ++i)
            b.taps.push_back(
                Tensor::randn({cfg.in_channels, cfg.d_out}, rng, scale, requires_grad));
        b.bias = Tensor::zeros({cfg.d_out}, requires_grad);
        b.bn_gamma = Tensor::full({cfg.d_out}, 1.0, requires_grad);
        b.bn_beta = Tensor::zeros({cfg.d_out}, requires_grad);
        b.bn_state.running_mean.assign(static_cast<std::size_t>(cfg.d_out), 0.0);
        b.bn_state.running_var.assign(static_cast<std::size_t>(cfg.d_out), 1.0);
        p.branches.push_back(std::move(b));
    }
    p.prelu_alpha = Tensor::full({1}, 0.25, requires_grad);
    const int dh = cfg.head_dim();
    for (int l = 0; l < cfg.gat_layers; ++l) {
        GatLayer layer;
        const double wscale = 1.0 / std::sqrt(static_cast<double>(cfg.d_out));
        const double ascale = 1.0 / std::sqrt(static_cast<double>(2 * dh));
        for (int h = 0; h < cfg.heads; ++h) {
            GatHead head;
            head.weight = Tensor::randn({cfg.d_out, dh}, rng, wscale, requires_grad);
            head.attn = Tensor::randn({2 * dh, 1}, rng, ascale, requires_grad);
            layer.heads.push_back(std::move(head));
        }
        p.gat.push_back(std::move(layer));
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::learnable() {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const std::string prefix = "conv" + std::to_string(b) + ".";
        for (std::size_t i = 0; i < branches[b].taps.size(); ++i)
            out.emplace_back(prefix + "tap" + std::to_string(i), branches[b].taps[i]);
        out.emplace_back(prefix + "bias", branches[b].bias);
        out.emplace_back(prefix + "bn_gamma", branches[b].bn_gamma);
        out.emplace_back(prefix + "bn_beta", branches[b].bn_beta);
    }
    out.emplace_back("prelu_alpha", prelu_alpha);
    for (std::size_t l = 0; l < gat.size(); ++l)
        for (std::size_t h = 0; h < gat[l].heads.size(); ++h) {
            const std::string prefix =
                "gat" + std::to_string(l) + ".head" + std::to_string(h) + ".";
            out.emplace_back(prefix + "weight", gat[l].heads[h].weight);
            out.emplace_back(prefix + "attn", gat[l].heads[h].attn);
        }
    return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> EncoderParams::buffers() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const std::string prefix = "conv" + std::to_string(b) + ".";
        out.emplace_back(prefix + "bn_rmean", &branches[b].bn_state.running_mean);
        out.emplace_back(prefix + "bn_rvar", &branches[b].bn_state.running_var);
    }
    return out;
}

EncoderParams EncoderParams::clone(bool requires_grad) const {
    EncoderParams p;
    p.cfg = cfg;
    for (const auto& b : branches) {
        ConvBranch nb;
        nb.kernel = b.kernel;
        for (const auto& t : b.taps) {
            Tensor c = t.clone();
            nb.taps.push_back(requires_grad ? c : c.detach());
        }
        auto copy = [&](const Tensor& t) {
            Tensor c = t.clone();
            return requires_grad ? c : c.detach();
        };
        nb.bias = copy(b.bias);
        nb.bn_gamma = copy(b.bn_gamma);
        nb.bn_beta = copy(b.bn_beta);
        nb.bn_state = b.bn_state;
        p.branches.push_back(std::move(nb));
    }
    {
        Tensor c = prelu_alpha.clone();
        p.prelu_alpha = requires_grad ? c : c.detach();
    }
    for (const auto& l : gat) {
        GatLayer nl;
        for (const auto& h : l.heads) {
            GatHead nh;
            Tensor w = h.weight.clone();
            Tensor a = h.attn.clone();
            nh.weight = requires_grad ? w : w.detach();
            nh.attn = requires_grad ? a : a.detach();
            nl.heads.push_back(std::move(nh));
        }
        p.gat.push_back(std::move(nl));
    }
    return p;
}

long long EncoderParams::param_count() const {
    long long n = 0;
    for (const auto& b : branches) {
        for (const auto& t : b.taps) n += t.size();
        n += b.bias.size() + b.bn_gamma.size() + b.bn_beta.size();
    }
    n += 1;  // prelu alpha
    for (const auto& l : gat)
        for (const auto& h : l.heads) n += h.weight.size() + h.attn.size();
    return n;
}

std::string EncoderParams::describe() const {
    std::ostringstream os;
    os << "encoder in=" << cfg.in_channels << " d_out=" << cfg.d_out
       << " heads=" << cfg.heads << " gat_layers=" << cfg.gat_layers << " kernels=";
    for (std::size_t i = 0; i < cfg.kernels.size(); ++i)
        os << (i ? "," : "") << cfg.kernels[i];
    os << " params=" << param_count();
    return os.str();
}

Tensor causal_conv_encode(const Tensor& window, EncoderParams& params, ForwardMode mode) {
    const int t_len = window.rows();
    if (t_len < 2) throw NumericError("conv encoder: window shorter than 2");
    int max_kernel = 0;
    for (const auto& b : params.branches) max_kernel = std::max(max_kernel, b.kernel);
    if (t_len < max_kernel)
        throw NumericError("conv encoder: window length " + std::to_string(t_len) +
                           " shorter than kernel " + std::to_string(max_kernel));
    if (window.cols() != params.cfg.in_channels)
        throw NumericError("conv encoder: window has " + std::to_string(window.cols()) +
                           " channels, expected " + std::to_string(params.cfg.in_channels));

    Tensor out;
    for (auto& branch : params.branches) {
        Tensor pre;
        for (int i = 0; i < branch.kernel; ++i) {
            Tensor shifted = i == 0 ? window : time_shift(window, i);
            Tensor term = matmul(shifted, branch.taps[static_cast<std::size_t>(i)]);
            pre = pre.defined() ? pre + term : term;
        }
        pre = add_colwise(pre, branch.bias);
        Tensor normed = batch_norm(pre, branch.bn_gamma, branch.bn_beta, branch.bn_state,
                                   mode.training, mode.update_running, params.cfg.bn_eps,
                                   params.cfg.bn_momentum);
        Tensor activated = prelu(normed, params.prelu_alpha);
        out = out.defined() ? out + activated : activated;
    }
    return out;
}

Tensor gat_layer(const Tensor& h, const TemporalGraph& graph, GatLayer& layer,
                 const EncoderConfig& cfg, std::vector<std::vector<double>>* attn_out) {
    const int t_len = h.rows();
    if (graph.num_nodes != t_len)
        throw NumericError("gat: graph has " + std::to_string(graph.num_nodes) +
                           " nodes but input has " + std::to_string(t_len) + " rows");
    const int dh = cfg.head_dim();

    // Attention edges: graph in-edges plus one self-loop per node, so every
    // neighborhood is nonempty.
    std::vector<int> src, dst;
    src.reserve(graph.edges.size() + static_cast<std::size_t>(t_len));
    dst.reserve(src.capacity());
    for (const auto& [s, d] : graph.edges) {
        if (s < 0 || s >= t_len || d < 0 || d >= t_len)
            throw NumericError("gat: edge index out of range");
        src.push_back(s);
        dst.push_back(d);
    }
    for (int i = 0; i < t_len; ++i) {
        src.push_back(i);
        dst.push_back(i);
    }

    if (attn_out) attn_out->clear();
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(layer.heads.size());
    for (auto& head : layer.heads) {
        Tensor wh = matmul(h, head.weight);  // T x dh
        // attn splits into [self ; neighbor]: e_ij = a^T [W h_i || W h_j] with
        // i the destination and j the in-neighbor
        Tensor a_self = slice_rows(head.attn, 0, dh);
        Tensor a_neigh = slice_rows(head.attn, dh, 2 * dh);
        Tensor self_score = matmul(wh, a_self);  // T x 1
        Tensor neigh_score = matmul(wh, a_neigh);
        Tensor e = leaky_relu(gather_rows(self_score, dst) + gather_rows(neigh_score, src),
                              cfg.leaky_slope);
        Tensor alpha = edge_softmax(e, dst, t_len);
        if (attn_out) {
            std::vector<double> dense(static_cast<std::size_t>(t_len) * t_len, 0.0);
            for (std::size_t k = 0; k < src.size(); ++k)
                dense[static_cast<std::size_t>(dst[k]) * t_len + src[k]] =
                    alpha.at(static_cast<int>(k));
            attn_out->push_back(std::move(dense));
        }
        head_outputs.push_back(edge_weighted_sum(alpha, src, dst, wh, t_len));
    }
    return elu(concat_cols(head_outputs));
}

Tensor encode(const Tensor& window, const TemporalGraph& graph, EncoderParams& params,
              ForwardMode mode) {
    Tensor conv = causal_conv_encode(window, params, mode);
    if (params.gat.empty()) return conv;
    Tensor g = conv;
    for (auto& layer : params.gat) g = gat_layer(g, graph, layer, params.cfg);
    return g + conv;
}

}  // namespace scatterad
