#ifndef HSSNB_LSTM_HPP
#define HSSNB_LSTM_HPP

// Peephole-capable LSTM cell: explicit forward recursion and hand-derived
// backpropagation through time, wrapped into bidirectional layers, plus
// inverted dropout.
//
// Gate naming: ib = block input (tanh), ig = input gate, fg = forget gate,
// og = output gate (logistic). The input/forget gate peepholes read the
// previous cell state; the output gate peephole reads the current one.
// Peephole weights exist only when `peepholes` is set, which also changes
// the parameter count.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "hssnb/errors.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

inline Real logistic(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }

struct LstmParams {
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    bool peepholes = false;

    Tensor w_ib, r_ib, b_ib;        // block input
    Tensor w_ig, r_ig, b_ig, p_ig;  // input gate
    Tensor w_fg, r_fg, b_fg, p_fg;  // forget gate
    Tensor w_og, r_og, b_og, p_og;  // output gate

    std::size_t parameter_count() const {
        return 4 * (hidden * input_dim + hidden * hidden + hidden) +
               (peepholes ? 3 * hidden : 0);
    }

    static LstmParams glorot(std::size_t input_dim, std::size_t hidden, bool peepholes,
                             Rng& rng) {
        LstmParams p;
        p.input_dim = input_dim;
        p.hidden = hidden;
        p.peepholes = peepholes;
        auto w = [&] { return glorot_init({hidden, input_dim}, input_dim, hidden, rng); };
        auto r = [&] { return glorot_init({hidden, hidden}, hidden, hidden, rng); };
        p.w_ib = w(); p.r_ib = r(); p.b_ib = Tensor({hidden});
        p.w_ig = w(); p.r_ig = r(); p.b_ig = Tensor({hidden});
        p.w_fg = w(); p.r_fg = r(); p.b_fg = Tensor({hidden});
        p.w_og = w(); p.r_og = r(); p.b_og = Tensor({hidden});
        if (peepholes) {
            auto pv = [&] { return glorot_init({hidden}, hidden, hidden, rng); };
            p.p_ig = pv();
            p.p_fg = pv();
            p.p_og = pv();
        }
        return p;
    }

    // Zero-valued gradient mirror of this parameter set.
    LstmParams zeros_like() const {
        LstmParams g;
        g.input_dim = input_dim;
        g.hidden = hidden;
        g.peepholes = peepholes;
        g.w_ib = Tensor(w_ib.shape()); g.r_ib = Tensor(r_ib.shape()); g.b_ib = Tensor(b_ib.shape());
        g.w_ig = Tensor(w_ig.shape()); g.r_ig = Tensor(r_ig.shape()); g.b_ig = Tensor(b_ig.shape());
        g.w_fg = Tensor(w_fg.shape()); g.r_fg = Tensor(r_fg.shape()); g.b_fg = Tensor(b_fg.shape());
        g.w_og = Tensor(w_og.shape()); g.r_og = Tensor(r_og.shape()); g.b_og = Tensor(b_og.shape());
        if (peepholes) {
            g.p_ig = Tensor(p_ig.shape());
            g.p_fg = Tensor(p_fg.shape());
            g.p_og = Tensor(p_og.shape());
        }
        return g;
    }
};

using LstmGrads = LstmParams;

// Per-timestep values retained for BPTT: inputs, raw pre-activations, gate
// activations, cell states and outputs. Row t of each tensor is timestep t.
struct LstmCache {
    Tensor inputs;                          // [T][input_dim]
    Tensor pre_ib, pre_ig, pre_fg, pre_og;  // [T][hidden]
    Tensor act_ib, act_ig, act_fg, act_og;  // [T][hidden]
    Tensor cell, tanh_cell, output;         // [T][hidden]

    std::size_t steps() const { return inputs.rank() == 2 ? inputs.dim(0) : 0; }
};

namespace detail {

// One recursion step written into caller-provided rows.
inline void lstm_step_into(const LstmParams& p, const Real* x, const Real* o_prev,
                           const Real* c_prev, Real* pre_ib, Real* pre_ig, Real* pre_fg,
                           Real* pre_og, Real* act_ib, Real* act_ig, Real* act_fg,
                           Real* act_og, Real* cell, Real* tanh_cell, Real* out) {
    const std::size_t h = p.hidden;

    auto preact = [&](const Tensor& w, const Tensor& r, const Tensor& b, Real* dst) {
        for (std::size_t i = 0; i < h; ++i) dst[i] = b[i];
        matvec_add(w, x, dst);
        matvec_add(r, o_prev, dst);
    };

    preact(p.w_ib, p.r_ib, p.b_ib, pre_ib);
    preact(p.w_ig, p.r_ig, p.b_ig, pre_ig);
    preact(p.w_fg, p.r_fg, p.b_fg, pre_fg);
    preact(p.w_og, p.r_og, p.b_og, pre_og);
    if (p.peepholes) {
        for (std::size_t i = 0; i < h; ++i) {
            pre_ig[i] += p.p_ig[i] * c_prev[i];
            pre_fg[i] += p.p_fg[i] * c_prev[i];
        }
    }

    for (std::size_t i = 0; i < h; ++i) {
        act_ib[i] = std::tanh(pre_ib[i]);
        act_ig[i] = logistic(pre_ig[i]);
        act_fg[i] = logistic(pre_fg[i]);
        cell[i] = act_ib[i] * act_ig[i] + c_prev[i] * act_fg[i];
    }
    if (p.peepholes)
        for (std::size_t i = 0; i < h; ++i) pre_og[i] += p.p_og[i] * cell[i];
    for (std::size_t i = 0; i < h; ++i) {
        act_og[i] = logistic(pre_og[i]);
        tanh_cell[i] = std::tanh(cell[i]);
        out[i] = tanh_cell[i] * act_og[i];
    }
}

}  // namespace detail

struct LstmStepResult {
    Tensor output, cell;
    Tensor pre_ib, pre_ig, pre_fg, pre_og;
    Tensor act_ib, act_ig, act_fg, act_og;
    Tensor tanh_cell;
};

inline LstmStepResult lstm_step(const LstmParams& p, const Tensor& input,
                                const Tensor& output_prev, const Tensor& cell_prev) {
    if (input.rank() != 1 || input.dim(0) != p.input_dim)
        throw ShapeError("lstm_step: input " + shape_to_string(input.shape()) +
                         " does not match input_dim " + std::to_string(p.input_dim));
    if (output_prev.dim(0) != p.hidden || cell_prev.dim(0) != p.hidden)
        throw ShapeError("lstm_step: state size does not match hidden " +
                         std::to_string(p.hidden));

    LstmStepResult r;
    const Shape hs{p.hidden};
    r.output = Tensor(hs); r.cell = Tensor(hs);
    r.pre_ib = Tensor(hs); r.pre_ig = Tensor(hs); r.pre_fg = Tensor(hs); r.pre_og = Tensor(hs);
    r.act_ib = Tensor(hs); r.act_ig = Tensor(hs); r.act_fg = Tensor(hs); r.act_og = Tensor(hs);
    r.tanh_cell = Tensor(hs);
    detail::lstm_step_into(p, input.data(), output_prev.data(), cell_prev.data(),
                           r.pre_ib.data(), r.pre_ig.data(), r.pre_fg.data(), r.pre_og.data(),
                           r.act_ib.data(), r.act_ig.data(), r.act_fg.data(), r.act_og.data(),
                           r.cell.data(), r.tanh_cell.data(), r.output.data());
    return r;
}

// Iterates the step from zero initial state over a [T][input_dim] sequence.
inline Tensor lstm_forward(const LstmParams& p, const Tensor& sequence, LstmCache& cache) {
    if (sequence.rank() != 2 || sequence.dim(1) != p.input_dim)
        throw ShapeError("lstm_forward: sequence " + shape_to_string(sequence.shape()) +
                         " does not match input_dim " + std::to_string(p.input_dim));
    const std::size_t T = sequence.dim(0);
    if (T < 1) throw ParamError("lstm_forward: empty sequence");
    const std::size_t h = p.hidden;

    cache.inputs = sequence;
    const Shape th{T, h};
    cache.pre_ib = Tensor(th); cache.pre_ig = Tensor(th);
    cache.pre_fg = Tensor(th); cache.pre_og = Tensor(th);
    cache.act_ib = Tensor(th); cache.act_ig = Tensor(th);
    cache.act_fg = Tensor(th); cache.act_og = Tensor(th);
    cache.cell = Tensor(th); cache.tanh_cell = Tensor(th); cache.output = Tensor(th);

    const std::vector<Real> zero(h, 0);
    for (std::size_t t = 0; t < T; ++t) {
        const Real* o_prev = t == 0 ? zero.data() : cache.output.data() + (t - 1) * h;
        const Real* c_prev = t == 0 ? zero.data() : cache.cell.data() + (t - 1) * h;
        detail::lstm_step_into(p, sequence.data() + t * p.input_dim, o_prev, c_prev,
                               cache.pre_ib.data() + t * h, cache.pre_ig.data() + t * h,
                               cache.pre_fg.data() + t * h, cache.pre_og.data() + t * h,
                               cache.act_ib.data() + t * h, cache.act_ig.data() + t * h,
                               cache.act_fg.data() + t * h, cache.act_og.data() + t * h,
                               cache.cell.data() + t * h, cache.tanh_cell.data() + t * h,
                               cache.output.data() + t * h);
    }
    return cache.output;
}

// Reverse-time recursion. `upstream` holds dE/d(output_t) per timestep; the
// returned grads accumulate every weight gradient, and input_grads holds
// dE/d(input_t). Deltas for t = T are zero by the boundary condition.
inline std::pair<LstmGrads, Tensor> lstm_bptt(const LstmParams& p, const LstmCache& cache,
                                              const Tensor& upstream) {
    const std::size_t T = cache.steps();
    const std::size_t h = p.hidden;
    const std::size_t in = p.input_dim;
    if (upstream.rank() != 2 || upstream.dim(0) != T || upstream.dim(1) != h)
        throw ShapeError("lstm_bptt: upstream " + shape_to_string(upstream.shape()) +
                         " does not match outputs (" + std::to_string(T) + "," +
                         std::to_string(h) + ")");

    LstmGrads grads = p.zeros_like();
    Tensor input_grads({T, in});

    std::vector<Real> d_ib_next(h, 0), d_ig_next(h, 0), d_fg_next(h, 0), d_og_next(h, 0);
    std::vector<Real> d_cell_next(h, 0);
    std::vector<Real> dy(h), d_og(h), d_cell(h), d_fg(h), d_ig(h), d_ib(h);
    const std::vector<Real> zero(h, 0);

    for (std::size_t ti = T; ti-- > 0;) {
        const std::size_t t = ti;
        const Real* act_ib = cache.act_ib.data() + t * h;
        const Real* act_ig = cache.act_ig.data() + t * h;
        const Real* act_fg = cache.act_fg.data() + t * h;
        const Real* act_og = cache.act_og.data() + t * h;
        const Real* tanh_c = cache.tanh_cell.data() + t * h;
        const Real* cell = cache.cell.data() + t * h;
        const Real* cell_prev = t == 0 ? zero.data() : cache.cell.data() + (t - 1) * h;
        const Real* out_prev = t == 0 ? zero.data() : cache.output.data() + (t - 1) * h;
        const Real* x = cache.inputs.data() + t * in;
        const Real* act_fg_next = t + 1 < T ? cache.act_fg.data() + (t + 1) * h : nullptr;

        // dy_t = upstream_t + R^T deltas from t+1 (all four gates).
        for (std::size_t i = 0; i < h; ++i) dy[i] = upstream(t, i);
        if (t + 1 < T) {
            matvec_transposed_add(p.r_ib, d_ib_next.data(), dy.data());
            matvec_transposed_add(p.r_ig, d_ig_next.data(), dy.data());
            matvec_transposed_add(p.r_fg, d_fg_next.data(), dy.data());
            matvec_transposed_add(p.r_og, d_og_next.data(), dy.data());
        }

        for (std::size_t i = 0; i < h; ++i) {
            d_og[i] = dy[i] * tanh_c[i] * act_og[i] * (1 - act_og[i]);
            d_cell[i] = dy[i] * act_og[i] * (1 - tanh_c[i] * tanh_c[i]);
        }
        if (p.peepholes)
            for (std::size_t i = 0; i < h; ++i) d_cell[i] += p.p_og[i] * d_og[i];
        if (t + 1 < T) {
            for (std::size_t i = 0; i < h; ++i) d_cell[i] += d_cell_next[i] * act_fg_next[i];
            if (p.peepholes)
                for (std::size_t i = 0; i < h; ++i)
                    d_cell[i] += p.p_ig[i] * d_ig_next[i] + p.p_fg[i] * d_fg_next[i];
        }

        for (std::size_t i = 0; i < h; ++i) {
            d_fg[i] = d_cell[i] * cell_prev[i] * act_fg[i] * (1 - act_fg[i]);
            d_ig[i] = d_cell[i] * act_ib[i] * act_ig[i] * (1 - act_ig[i]);
            d_ib[i] = d_cell[i] * act_ig[i] * (1 - act_ib[i] * act_ib[i]);
        }

        Real* xg = input_grads.data() + t * in;
        matvec_transposed_add(p.w_ib, d_ib.data(), xg);
        matvec_transposed_add(p.w_ig, d_ig.data(), xg);
        matvec_transposed_add(p.w_fg, d_fg.data(), xg);
        matvec_transposed_add(p.w_og, d_og.data(), xg);

        // Weight gradients: dW = sum_t outer(delta_t, x_t), dR = sum_t
        // outer(delta_{t+1}, o_t) (o_{-1} = c_{-1} = 0 absorbs the boundary),
        // db = sum_t delta_t; peepholes pair previous cell with the input and
        // forget gates and the current cell with the output gate.
        auto accumulate = [&](Tensor& w, Tensor& r, Tensor& b, const std::vector<Real>& d) {
            for (std::size_t i = 0; i < h; ++i) {
                const Real di = d[i];
                if (di == 0) continue;
                Real* wrow = w.data() + i * in;
                for (std::size_t j = 0; j < in; ++j) wrow[j] += di * x[j];
                Real* rrow = r.data() + i * h;
                for (std::size_t j = 0; j < h; ++j) rrow[j] += di * out_prev[j];
                b[i] += di;
            }
        };
        accumulate(grads.w_ib, grads.r_ib, grads.b_ib, d_ib);
        accumulate(grads.w_ig, grads.r_ig, grads.b_ig, d_ig);
        accumulate(grads.w_fg, grads.r_fg, grads.b_fg, d_fg);
        accumulate(grads.w_og, grads.r_og, grads.b_og, d_og);
        if (p.peepholes) {
            for (std::size_t i = 0; i < h; ++i) {
                grads.p_ig[i] += cell_prev[i] * d_ig[i];
                grads.p_fg[i] += cell_prev[i] * d_fg[i];
                grads.p_og[i] += cell[i] * d_og[i];
            }
        }

        d_ib_next.assign(d_ib.begin(), d_ib.end());
        d_ig_next.assign(d_ig.begin(), d_ig.end());
        d_fg_next.assign(d_fg.begin(), d_fg.end());
        d_og_next.assign(d_og.begin(), d_og.end());
        d_cell_next.assign(d_cell.begin(), d_cell.end());
    }
    return {std::move(grads), std::move(input_grads)};
}

// ---------------------------------------------------------------------------
// Bidirectional wrapper
// ---------------------------------------------------------------------------

enum class BiMode { sequence, last };

struct BiLstmLayer {
    LstmParams forward_params;
    LstmParams backward_params;
    BiMode mode = BiMode::sequence;

    std::size_t hidden() const { return forward_params.hidden; }
    std::size_t parameter_count() const {
        return forward_params.parameter_count() + backward_params.parameter_count();
    }

    static BiLstmLayer glorot(std::size_t input_dim, std::size_t hidden, BiMode mode,
                              bool peepholes, Rng& rng) {
        BiLstmLayer layer;
        layer.forward_params = LstmParams::glorot(input_dim, hidden, peepholes, rng);
        layer.backward_params = LstmParams::glorot(input_dim, hidden, peepholes, rng);
        layer.mode = mode;
        return layer;
    }
};

struct BiLstmCache {
    LstmCache forward;
    LstmCache backward;  // over the reversed sequence
    std::size_t steps = 0;
};

struct BiLstmGrads {
    LstmGrads forward;
    LstmGrads backward;
};

namespace detail {

inline Tensor reverse_rows(const Tensor& t) {
    const std::size_t rows = t.dim(0), cols = t.dim(1);
    Tensor out({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out(r, c) = t(rows - 1 - r, c);
    return out;
}

}  // namespace detail

// mode sequence: [T][2*hidden], backward outputs re-reversed before the
// concatenation. mode last: [2*hidden], forward output at t=T-1 next to the
// backward direction's own final output (original t=0).
inline Tensor bilstm_forward(const BiLstmLayer& layer, const Tensor& sequence,
                             BiLstmCache& cache) {
    const std::size_t T = sequence.dim(0);
    const std::size_t h = layer.hidden();
    cache.steps = T;

    const Tensor f_out = lstm_forward(layer.forward_params, sequence, cache.forward);
    const Tensor b_out =
        lstm_forward(layer.backward_params, detail::reverse_rows(sequence), cache.backward);

    if (layer.mode == BiMode::sequence) {
        Tensor out({T, 2 * h});
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < h; ++i) {
                out(t, i) = f_out(t, i);
                out(t, h + i) = b_out(T - 1 - t, i);
            }
        return out;
    }
    Tensor out({2 * h});
    for (std::size_t i = 0; i < h; ++i) {
        out[i] = f_out(T - 1, i);
        out[h + i] = b_out(T - 1, i);
    }
    return out;
}

// Routes the upstream gradient into both directions and sums their input
// gradients (backward direction un-reversed). mode last feeds each
// direction's final timestep only.
inline std::pair<BiLstmGrads, Tensor> bilstm_backward(const BiLstmLayer& layer,
                                                      const BiLstmCache& cache,
                                                      const Tensor& upstream) {
    const std::size_t T = cache.steps;
    const std::size_t h = layer.hidden();

    Tensor up_f({T, h}), up_b({T, h});
    if (layer.mode == BiMode::sequence) {
        if (upstream.rank() != 2 || upstream.dim(0) != T || upstream.dim(1) != 2 * h)
            throw ShapeError("bilstm_backward: upstream " + shape_to_string(upstream.shape()) +
                             " does not match sequence output");
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < h; ++i) {
                up_f(t, i) = upstream(t, i);
                up_b(T - 1 - t, i) = upstream(t, h + i);
            }
    } else {
        if (upstream.rank() != 1 || upstream.dim(0) != 2 * h)
            throw ShapeError("bilstm_backward: upstream " + shape_to_string(upstream.shape()) +
                             " does not match last-step output");
        for (std::size_t i = 0; i < h; ++i) {
            up_f(T - 1, i) = upstream[i];
            up_b(T - 1, i) = upstream[h + i];
        }
    }

    auto [g_f, in_f] = lstm_bptt(layer.forward_params, cache.forward, up_f);
    auto [g_b, in_b_rev] = lstm_bptt(layer.backward_params, cache.backward, up_b);
    const Tensor in_b = detail::reverse_rows(in_b_rev);

    Tensor input_grads(in_f.shape());
    for (std::size_t i = 0; i < in_f.size(); ++i) input_grads[i] = in_f[i] + in_b[i];

    BiLstmGrads grads{std::move(g_f), std::move(g_b)};
    return {std::move(grads), std::move(input_grads)};
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

struct DropoutLayer {
    Real rate = Real(0.25);
};

// Inverted dropout: training zeroes each element with probability `rate` and
// scales survivors by 1/(1-rate); inference is the identity. The mask holds
// the applied per-element scale so backward is an exact replay.
inline Tensor dropout_forward(const DropoutLayer& layer, const Tensor& input, bool training,
                              Rng& rng, Tensor* mask_out = nullptr) {
    if (!(layer.rate >= 0 && layer.rate < 1))
        throw ParamError("dropout: rate must be in [0,1)");
    if (!training || layer.rate == 0) {
        if (mask_out) *mask_out = Tensor::full(input.shape(), 1);
        return input;
    }
    const Real scale = Real(1) / (Real(1) - layer.rate);
    Tensor mask(input.shape());
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const Real keep = rng.uniform() >= layer.rate ? scale : Real(0);
        mask[i] = keep;
        out[i] = input[i] * keep;
    }
    if (mask_out) *mask_out = std::move(mask);
    return out;
}

inline Tensor dropout_backward(const Tensor& upstream, const Tensor& mask) {
    return hadamard(upstream, mask);
}

}  // namespace hssnb

#endif  // HSSNB_LSTM_HPP
