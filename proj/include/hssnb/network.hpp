#ifndef HSSNB_NETWORK_HPP
#define HSSNB_NETWORK_HPP

// Full network assembly: conv3d x3 -> reshape -> conv2d x2 -> reshape ->
// bidirectional LSTM (sequence) -> dropout -> bidirectional LSTM (last) ->
// dense softmax. Covers construction, the forward/backward chain and the
// softmax/cross-entropy head.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "hssnb/conv.hpp"
#include "hssnb/errors.hpp"
#include "hssnb/lstm.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

// Architecture hyperparameters. Kernel sizes are explicit so that shallow
// spectral inputs (reduced presets) can use kernels that actually fit.
struct Architecture {
    std::size_t window = 25;          // D, odd
    std::size_t spectral_depth = 30;  // S after PCA
    std::size_t classes = 16;         // N

    std::array<std::size_t, 3> conv3d_filters{8, 16, 32};
    std::array<std::array<std::size_t, 3>, 3> conv3d_kernels{{{3, 3, 7}, {3, 3, 5}, {3, 3, 3}}};
    std::array<std::size_t, 2> conv2d_filters{64, 128};
    std::array<std::array<std::size_t, 2>, 2> conv2d_kernels{{{3, 3}, {3, 3}}};
    std::size_t lstm_hidden = 64;
    Real dropout_rate = Real(0.25);
    bool peepholes = false;

    // 25x25x30 input, the published configuration.
    static Architecture standard(std::size_t classes = 16) {
        Architecture a;
        a.classes = classes;
        return a;
    }

    // Small model for desk-scale training runs (11x11x8 input, sequence
    // length 3).
    static Architecture desk(std::size_t classes) {
        Architecture a;
        a.window = 11;
        a.spectral_depth = 8;
        a.classes = classes;
        a.conv3d_filters = {4, 8, 16};
        a.conv3d_kernels = {{{3, 3, 3}, {3, 3, 3}, {3, 3, 3}}};
        a.conv2d_filters = {16, 32};
        a.conv2d_kernels = {{{2, 2}, {2, 2}}};
        a.lstm_hidden = 16;
        return a;
    }

    // Tiny model for exhaustive finite-difference checks (9x9x8 input,
    // sequence length 4).
    static Architecture gradcheck_preset() {
        Architecture a;
        a.window = 9;
        a.spectral_depth = 8;
        a.classes = 3;
        a.conv3d_filters = {2, 4, 8};
        a.conv3d_kernels = {{{2, 2, 3}, {2, 2, 3}, {2, 2, 3}}};
        a.conv2d_filters = {8, 16};
        a.conv2d_kernels = {{{2, 2}, {2, 2}}};
        a.lstm_hidden = 8;
        return a;
    }
};

// Ordered (layer name, output shape) pairs from input to dense. Throws a
// ShapeError naming the first layer whose kernel no longer fits.
inline std::vector<std::pair<std::string, Shape>> compute_shape_chain(const Architecture& a) {
    std::vector<std::pair<std::string, Shape>> chain;
    std::size_t H = a.window, W = a.window, Dp = a.spectral_depth, C = 1;
    chain.emplace_back("input_1", Shape{H, W, Dp, C});

    for (std::size_t i = 0; i < 3; ++i) {
        const auto& k = a.conv3d_kernels[i];
        const std::string name = "conv3d_" + std::to_string(i + 1);
        if (k[0] > H || k[1] > W || k[2] > Dp)
            throw ShapeError(name + " cannot fit: input (" + std::to_string(H) + "," +
                             std::to_string(W) + "," + std::to_string(Dp) + "), kernel (" +
                             std::to_string(k[0]) + "," + std::to_string(k[1]) + "," +
                             std::to_string(k[2]) + ")");
        H = H - k[0] + 1;
        W = W - k[1] + 1;
        Dp = Dp - k[2] + 1;
        C = a.conv3d_filters[i];
        chain.emplace_back(name, Shape{H, W, Dp, C});
    }

    chain.emplace_back("reshape_1", Shape{H, W, Dp * C});
    std::size_t C2 = Dp * C;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& k = a.conv2d_kernels[i];
        const std::string name = "conv2d_" + std::to_string(i + 1);
        if (k[0] > H || k[1] > W)
            throw ShapeError(name + " cannot fit: input (" + std::to_string(H) + "," +
                             std::to_string(W) + "," + std::to_string(C2) + "), kernel (" +
                             std::to_string(k[0]) + "," + std::to_string(k[1]) + ")");
        H = H - k[0] + 1;
        W = W - k[1] + 1;
        C2 = a.conv2d_filters[i];
        chain.emplace_back(name, Shape{H, W, C2});
    }

    chain.emplace_back("reshape_2", Shape{H, W * C2});
    chain.emplace_back("bidirectional_1", Shape{H, 2 * a.lstm_hidden});
    chain.emplace_back("dropout_1", Shape{H, 2 * a.lstm_hidden});
    chain.emplace_back("bidirectional_2", Shape{2 * a.lstm_hidden});
    chain.emplace_back("dense_1", Shape{a.classes});
    return chain;
}

// ---------------------------------------------------------------------------
// Dense head
// ---------------------------------------------------------------------------

struct DenseLayer {
    Tensor weights;  // [N][in]
    Tensor bias;     // [N]

    std::size_t parameter_count() const { return weights.size() + bias.size(); }

    static DenseLayer glorot(std::size_t classes, std::size_t input_dim, Rng& rng) {
        DenseLayer d;
        d.weights = glorot_init({classes, input_dim}, input_dim, classes, rng);
        d.bias = Tensor({classes});
        return d;
    }
};

struct DenseGrads {
    Tensor weights, bias;
};

inline Tensor softmax(const Tensor& logits) {
    Tensor probs(logits.shape());
    Real max = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) max = std::max(max, logits[i]);
    Real sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max);
        sum += probs[i];
    }
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] /= sum;
    return probs;
}

// Categorical cross-entropy against a one-hot target. The returned gradient
// is with respect to the logits (softmax folded in): probs - one_hot.
// probs[true] is clamped below at 1e-12 before the log.
inline std::pair<Real, Tensor> cross_entropy_loss(const Tensor& probs, const Tensor& one_hot) {
    if (!probs.same_shape(one_hot))
        throw ShapeError("cross_entropy_loss: probs " + shape_to_string(probs.shape()) +
                         " vs target " + shape_to_string(one_hot.shape()));
    Real loss = 0;
    Tensor grad(probs.shape());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (one_hot[i] != 0) loss -= one_hot[i] * std::log(std::max(probs[i], Real(1e-12)));
        grad[i] = probs[i] - one_hot[i];
    }
    return {loss, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct HssnbModel {
    Architecture arch;
    std::array<Conv3dLayer, 3> conv3d;
    std::array<Conv2dLayer, 2> conv2d;
    BiLstmLayer bilstm_seq;
    DropoutLayer dropout;
    BiLstmLayer bilstm_last;
    DenseLayer dense;

    std::size_t parameter_count() const {
        std::size_t total = 0;
        for (const auto& l : conv3d) total += l.parameter_count();
        for (const auto& l : conv2d) total += l.parameter_count();
        total += bilstm_seq.parameter_count() + bilstm_last.parameter_count();
        total += dense.parameter_count();
        return total;
    }

    // Layer table in network order; reshape and dropout rows carry zero.
    std::vector<std::pair<std::string, std::size_t>> layer_parameter_counts() const {
        return {
            {"conv3d_1", conv3d[0].parameter_count()},
            {"conv3d_2", conv3d[1].parameter_count()},
            {"conv3d_3", conv3d[2].parameter_count()},
            {"reshape_1", 0},
            {"conv2d_1", conv2d[0].parameter_count()},
            {"conv2d_2", conv2d[1].parameter_count()},
            {"reshape_2", 0},
            {"bidirectional_1", bilstm_seq.parameter_count()},
            {"dropout_1", 0},
            {"bidirectional_2", bilstm_last.parameter_count()},
            {"dense_1", dense.parameter_count()},
        };
    }
};

namespace detail {

template <class Params, class Fn>
void visit_lstm_tensors(Params& p, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".w_ib", p.w_ib);
    fn(prefix + ".r_ib", p.r_ib);
    fn(prefix + ".b_ib", p.b_ib);
    fn(prefix + ".w_ig", p.w_ig);
    fn(prefix + ".r_ig", p.r_ig);
    fn(prefix + ".b_ig", p.b_ig);
    fn(prefix + ".w_fg", p.w_fg);
    fn(prefix + ".r_fg", p.r_fg);
    fn(prefix + ".b_fg", p.b_fg);
    fn(prefix + ".w_og", p.w_og);
    fn(prefix + ".r_og", p.r_og);
    fn(prefix + ".b_og", p.b_og);
    if (p.peepholes) {
        fn(prefix + ".p_ig", p.p_ig);
        fn(prefix + ".p_fg", p.p_fg);
        fn(prefix + ".p_og", p.p_og);
    }
}

}  // namespace detail

// Visits every trainable tensor in declaration order; the same order is used
// for gradients, optimizer state and checkpoints.
template <class Model, class Fn>
void visit_model_tensors(Model& m, Fn&& fn) {
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string name = "conv3d_" + std::to_string(i + 1);
        fn(name + ".kernels", m.conv3d[i].kernels);
        fn(name + ".bias", m.conv3d[i].bias);
    }
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string name = "conv2d_" + std::to_string(i + 1);
        fn(name + ".kernels", m.conv2d[i].kernels);
        fn(name + ".bias", m.conv2d[i].bias);
    }
    detail::visit_lstm_tensors(m.bilstm_seq.forward_params, "bidirectional_1.fwd", fn);
    detail::visit_lstm_tensors(m.bilstm_seq.backward_params, "bidirectional_1.bwd", fn);
    detail::visit_lstm_tensors(m.bilstm_last.forward_params, "bidirectional_2.fwd", fn);
    detail::visit_lstm_tensors(m.bilstm_last.backward_params, "bidirectional_2.bwd", fn);
    fn("dense_1.weights", m.dense.weights);
    fn("dense_1.bias", m.dense.bias);
}

inline std::vector<std::pair<std::string, Tensor*>> parameter_tensors(HssnbModel& m) {
    std::vector<std::pair<std::string, Tensor*>> out;
    visit_model_tensors(m, [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
    return out;
}

inline std::vector<std::pair<std::string, const Tensor*>> parameter_tensors(
    const HssnbModel& m) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    visit_model_tensors(
        m, [&](const std::string& name, const Tensor& t) { out.emplace_back(name, &t); });
    return out;
}

struct ModelGrads {
    std::array<Conv3dGrads, 3> conv3d;
    std::array<Conv2dGrads, 2> conv2d;
    BiLstmGrads bilstm_seq, bilstm_last;
    DenseGrads dense;

    static ModelGrads zeros_like(const HssnbModel& m) {
        ModelGrads g;
        for (std::size_t i = 0; i < 3; ++i) {
            g.conv3d[i].kernels = Tensor(m.conv3d[i].kernels.shape());
            g.conv3d[i].bias = Tensor(m.conv3d[i].bias.shape());
        }
        for (std::size_t i = 0; i < 2; ++i) {
            g.conv2d[i].kernels = Tensor(m.conv2d[i].kernels.shape());
            g.conv2d[i].bias = Tensor(m.conv2d[i].bias.shape());
        }
        g.bilstm_seq.forward = m.bilstm_seq.forward_params.zeros_like();
        g.bilstm_seq.backward = m.bilstm_seq.backward_params.zeros_like();
        g.bilstm_last.forward = m.bilstm_last.forward_params.zeros_like();
        g.bilstm_last.backward = m.bilstm_last.backward_params.zeros_like();
        g.dense.weights = Tensor(m.dense.weights.shape());
        g.dense.bias = Tensor(m.dense.bias.shape());
        return g;
    }

    std::vector<std::pair<std::string, Tensor*>> tensors() {
        std::vector<std::pair<std::string, Tensor*>> out;
        for (std::size_t i = 0; i < 3; ++i) {
            const std::string name = "conv3d_" + std::to_string(i + 1);
            out.emplace_back(name + ".kernels", &conv3d[i].kernels);
            out.emplace_back(name + ".bias", &conv3d[i].bias);
        }
        for (std::size_t i = 0; i < 2; ++i) {
            const std::string name = "conv2d_" + std::to_string(i + 1);
            out.emplace_back(name + ".kernels", &conv2d[i].kernels);
            out.emplace_back(name + ".bias", &conv2d[i].bias);
        }
        auto push = [&](const std::string& prefix, LstmGrads& g) {
            detail::visit_lstm_tensors(
                g, prefix, [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
        };
        push("bidirectional_1.fwd", bilstm_seq.forward);
        push("bidirectional_1.bwd", bilstm_seq.backward);
        push("bidirectional_2.fwd", bilstm_last.forward);
        push("bidirectional_2.bwd", bilstm_last.backward);
        out.emplace_back("dense_1.weights", &dense.weights);
        out.emplace_back("dense_1.bias", &dense.bias);
        return out;
    }

    void add(ModelGrads& other) {
        auto a = tensors();
        auto b = other.tensors();
        for (std::size_t i = 0; i < a.size(); ++i) {
            Tensor& dst = *a[i].second;
            const Tensor& src = *b[i].second;
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }

    void scale(Real s) {
        for (auto& [name, t] : tensors())
            for (std::size_t j = 0; j < t->size(); ++j) (*t)[j] *= s;
    }
};

// Constructs all layers with Glorot-initialized weights and zero biases.
// Throws a ShapeError naming the first infeasible layer.
inline HssnbModel build_model(const Architecture& arch, Rng& rng) {
    if (arch.window % 2 == 0) throw ParamError("build_model: window must be odd");
    compute_shape_chain(arch);  // feasibility gate

    HssnbModel m;
    m.arch = arch;

    std::size_t in_c = 1;
    std::size_t depth = arch.spectral_depth;
    std::size_t height = arch.window, width = arch.window;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& k = arch.conv3d_kernels[i];
        m.conv3d[i] = Conv3dLayer::glorot(arch.conv3d_filters[i], k[0], k[1], k[2], in_c,
                                          Activation::relu, rng);
        height -= k[0] - 1;
        width -= k[1] - 1;
        depth -= k[2] - 1;
        in_c = arch.conv3d_filters[i];
    }
    std::size_t channels = depth * in_c;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& k = arch.conv2d_kernels[i];
        m.conv2d[i] =
            Conv2dLayer::glorot(arch.conv2d_filters[i], k[0], k[1], channels, Activation::relu, rng);
        height -= k[0] - 1;
        width -= k[1] - 1;
        channels = arch.conv2d_filters[i];
    }
    const std::size_t seq_features = width * channels;
    m.bilstm_seq = BiLstmLayer::glorot(seq_features, arch.lstm_hidden, BiMode::sequence,
                                       arch.peepholes, rng);
    m.dropout.rate = arch.dropout_rate;
    m.bilstm_last =
        BiLstmLayer::glorot(2 * arch.lstm_hidden, arch.lstm_hidden, BiMode::last, arch.peepholes, rng);
    m.dense = DenseLayer::glorot(arch.classes, 2 * arch.lstm_hidden, rng);
    return m;
}

namespace detail {

template <class Fn>
void zip_lstm_tensors(LstmGrads& a, const LstmGrads& b, Fn&& fn) {
    fn(a.w_ib, b.w_ib); fn(a.r_ib, b.r_ib); fn(a.b_ib, b.b_ib);
    fn(a.w_ig, b.w_ig); fn(a.r_ig, b.r_ig); fn(a.b_ig, b.b_ig);
    fn(a.w_fg, b.w_fg); fn(a.r_fg, b.r_fg); fn(a.b_fg, b.b_fg);
    fn(a.w_og, b.w_og); fn(a.r_og, b.r_og); fn(a.b_og, b.b_og);
    if (a.peepholes) {
        fn(a.p_ig, b.p_ig);
        fn(a.p_fg, b.p_fg);
        fn(a.p_og, b.p_og);
    }
}

}  // namespace detail

inline void add_lstm_grads(LstmGrads& dst, const LstmGrads& src) {
    detail::zip_lstm_tensors(dst, src, [](Tensor& a, const Tensor& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    });
}

struct ModelCache {
    std::array<Conv3dCache, 3> conv3d;
    std::array<Conv2dCache, 2> conv2d;
    Shape reshape1_in_shape, reshape2_in_shape;
    BiLstmCache bilstm_seq, bilstm_last;
    Tensor dropout_mask;
    Tensor bilstm_last_input;  // dropout output, input of the second Bi-LSTM
    Tensor dense_input;        // [2*hidden]
    Tensor probs;              // [N]
};

// Forward pass on one patch ([D][D][S] or [D][D][S][1]). Returns class
// probabilities. `dropout_rng` is consumed only when training with a
// positive dropout rate; `cache` is only needed when a backward pass
// follows.
inline Tensor model_forward(const HssnbModel& m, const Tensor& patch, bool training,
                            Rng* dropout_rng, ModelCache* cache = nullptr) {
    Tensor x = patch;
    if (x.rank() == 3) x = x.reshaped({x.dim(0), x.dim(1), x.dim(2), 1});
    if (x.rank() != 4)
        throw ShapeError("model_forward: patch " + shape_to_string(patch.shape()));

    for (std::size_t i = 0; i < 3; ++i)
        x = conv3d_forward(m.conv3d[i], x, cache ? &cache->conv3d[i] : nullptr);

    if (cache) cache->reshape1_in_shape = x.shape();
    Tensor y = reshape_3d_to_2d(x);
    for (std::size_t i = 0; i < 2; ++i)
        y = conv2d_forward(m.conv2d[i], y, cache ? &cache->conv2d[i] : nullptr);

    if (cache) cache->reshape2_in_shape = y.shape();
    Tensor seq = reshape_2d_to_seq(y);

    BiLstmCache local_seq_cache;
    BiLstmCache& seq_cache = cache ? cache->bilstm_seq : local_seq_cache;
    Tensor s1 = bilstm_forward(m.bilstm_seq, seq, seq_cache);

    Tensor mask;
    Tensor s2;
    if (training && m.dropout.rate > 0) {
        if (!dropout_rng) throw ParamError("model_forward: training requires a dropout rng");
        s2 = dropout_forward(m.dropout, s1, true, *dropout_rng, cache ? &mask : nullptr);
    } else {
        s2 = s1;
        if (cache) mask = Tensor::full(s1.shape(), 1);
    }
    if (cache) {
        cache->dropout_mask = std::move(mask);
        cache->bilstm_last_input = s2;
    }

    BiLstmCache local_last_cache;
    BiLstmCache& last_cache = cache ? cache->bilstm_last : local_last_cache;
    Tensor feat = bilstm_forward(m.bilstm_last, s2, last_cache);

    if (cache) cache->dense_input = feat;
    Tensor logits(m.dense.bias.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = m.dense.bias[i];
    matvec_add(m.dense.weights, feat.data(), logits.data());

    Tensor probs = softmax(logits);
    if (cache) cache->probs = probs;
    return probs;
}

// Backward pass from the softmax/cross-entropy gradient (probs - one_hot).
// Adds into `grads`; pass `patch_grad` to also receive d(loss)/d(patch).
inline void model_backward(const HssnbModel& m, const ModelCache& cache,
                           const Tensor& grad_logits, ModelGrads& grads,
                           Tensor* patch_grad = nullptr) {
    // Dense head.
    const Tensor& feat = cache.dense_input;
    for (std::size_t i = 0; i < grad_logits.size(); ++i) {
        const Real g = grad_logits[i];
        grads.dense.bias[i] += g;
        Real* wrow = grads.dense.weights.data() + i * feat.size();
        for (std::size_t j = 0; j < feat.size(); ++j) wrow[j] += g * feat[j];
    }
    Tensor d_feat({feat.size()});
    matvec_transposed_add(m.dense.weights, grad_logits.data(), d_feat.data());

    // Second Bi-LSTM (last mode).
    auto [g_last, d_s2] = bilstm_backward(m.bilstm_last, cache.bilstm_last, d_feat);
    add_lstm_grads(grads.bilstm_last.forward, g_last.forward);
    add_lstm_grads(grads.bilstm_last.backward, g_last.backward);

    // Dropout.
    Tensor d_s1 = dropout_backward(d_s2, cache.dropout_mask);

    // First Bi-LSTM (sequence mode).
    auto [g_seq, d_seq] = bilstm_backward(m.bilstm_seq, cache.bilstm_seq, d_s1);
    add_lstm_grads(grads.bilstm_seq.forward, g_seq.forward);
    add_lstm_grads(grads.bilstm_seq.backward, g_seq.backward);

    // Reshape back to the 2-D conv stack.
    Tensor d2 = reshape_2d_to_seq_backward(d_seq, cache.reshape2_in_shape);
    for (std::size_t i = 2; i-- > 0;) {
        Conv2dGrads g;
        d2 = conv2d_backward(m.conv2d[i], cache.conv2d[i], d2, g);
        for (std::size_t j = 0; j < g.kernels.size(); ++j)
            grads.conv2d[i].kernels[j] += g.kernels[j];
        for (std::size_t j = 0; j < g.bias.size(); ++j) grads.conv2d[i].bias[j] += g.bias[j];
    }

    Tensor d3 = reshape_3d_to_2d_backward(d2, cache.reshape1_in_shape);
    for (std::size_t i = 3; i-- > 0;) {
        Conv3dGrads g;
        d3 = conv3d_backward(m.conv3d[i], cache.conv3d[i], d3, g);
        for (std::size_t j = 0; j < g.kernels.size(); ++j)
            grads.conv3d[i].kernels[j] += g.kernels[j];
        for (std::size_t j = 0; j < g.bias.size(); ++j) grads.conv3d[i].bias[j] += g.bias[j];
    }
    if (patch_grad) *patch_grad = std::move(d3);
}

// Convenience loss evaluation used by finite-difference checks.
inline Real model_loss(const HssnbModel& m, const Tensor& patch, const Tensor& one_hot) {
    const Tensor probs = model_forward(m, patch, false, nullptr, nullptr);
    return cross_entropy_loss(probs, one_hot).first;
}

}  // namespace hssnb

#endif  // HSSNB_NETWORK_HPP
