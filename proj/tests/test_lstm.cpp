#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hssnb/lstm.hpp"

using namespace hssnb;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, Real lo = -1, Real hi = 1) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

LstmParams random_params(std::size_t input_dim, std::size_t hidden, bool peepholes, Rng& rng) {
    LstmParams p = LstmParams::glorot(input_dim, hidden, peepholes, rng);
    // Random biases too, so no term is trivially zero.
    p.b_ib = random_tensor({hidden}, rng, -0.5, 0.5);
    p.b_ig = random_tensor({hidden}, rng, -0.5, 0.5);
    p.b_fg = random_tensor({hidden}, rng, -0.5, 0.5);
    p.b_og = random_tensor({hidden}, rng, -0.5, 0.5);
    return p;
}

LstmParams zero_params(std::size_t input_dim, std::size_t hidden, bool peepholes) {
    Rng rng(0);
    LstmParams p = LstmParams::glorot(input_dim, hidden, peepholes, rng);
    for (Tensor* t : {&p.w_ib, &p.r_ib, &p.b_ib, &p.w_ig, &p.r_ig, &p.b_ig, &p.w_fg, &p.r_fg,
                      &p.b_fg, &p.w_og, &p.r_og, &p.b_og})
        t->fill(0);
    if (peepholes)
        for (Tensor* t : {&p.p_ig, &p.p_fg, &p.p_og}) t->fill(0);
    return p;
}

// ---------------------------------------------------------------------------
// Independent single-step oracle: a second, direct transcription of the
// recursion using plain double vectors, sharing no code with the library.
// ---------------------------------------------------------------------------

struct OracleStep {
    std::vector<double> ib, ig, fg, og, cell, out;
};

double oracle_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

OracleStep oracle_step(const LstmParams& p, const std::vector<double>& x,
                       const std::vector<double>& o_prev, const std::vector<double>& c_prev) {
    const std::size_t h = p.hidden, in = p.input_dim;
    OracleStep s;
    s.ib.resize(h);
    s.ig.resize(h);
    s.fg.resize(h);
    s.og.resize(h);
    s.cell.resize(h);
    s.out.resize(h);

    auto dot_row = [&](const Tensor& m, std::size_t row, const std::vector<double>& v) {
        double acc = 0;
        for (std::size_t j = 0; j < v.size(); ++j) acc += m(row, j) * v[j];
        return acc;
    };
    (void)in;

    for (std::size_t i = 0; i < h; ++i) {
        const double pre_ib = dot_row(p.w_ib, i, x) + dot_row(p.r_ib, i, o_prev) + p.b_ib[i];
        s.ib[i] = std::tanh(pre_ib);

        double pre_ig = dot_row(p.w_ig, i, x) + dot_row(p.r_ig, i, o_prev) + p.b_ig[i];
        if (p.peepholes) pre_ig += p.p_ig[i] * c_prev[i];
        s.ig[i] = oracle_sigmoid(pre_ig);

        double pre_fg = dot_row(p.w_fg, i, x) + dot_row(p.r_fg, i, o_prev) + p.b_fg[i];
        if (p.peepholes) pre_fg += p.p_fg[i] * c_prev[i];
        s.fg[i] = oracle_sigmoid(pre_fg);

        s.cell[i] = s.ib[i] * s.ig[i] + c_prev[i] * s.fg[i];

        double pre_og = dot_row(p.w_og, i, x) + dot_row(p.r_og, i, o_prev) + p.b_og[i];
        if (p.peepholes) pre_og += p.p_og[i] * s.cell[i];
        s.og[i] = oracle_sigmoid(pre_og);

        s.out[i] = std::tanh(s.cell[i]) * s.og[i];
    }
    return s;
}

// Finite-difference check of lstm_bptt for every parameter tensor and every
// input, against the scalar loss sum(upstream .* outputs). Per-component
// relative error by default; `tensor_scaled` divides by the tensor's max
// gradient magnitude instead, for long sequences whose smallest components
// sit below the double-precision FD noise floor.
void check_bptt_against_fd(std::size_t T, std::size_t hidden, std::size_t input_dim,
                           bool peepholes, std::uint64_t seed, Real tolerance,
                           bool tensor_scaled = false) {
    Rng rng(seed);
    LstmParams params = random_params(input_dim, hidden, peepholes, rng);
    Tensor sequence = random_tensor({T, input_dim}, rng);
    const Tensor upstream = random_tensor({T, hidden}, rng);

    LstmCache cache;
    lstm_forward(params, sequence, cache);
    auto [grads, input_grads] = lstm_bptt(params, cache, upstream);

    auto loss = [&] {
        LstmCache c;
        const Tensor out = lstm_forward(params, sequence, c);
        double acc = 0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += upstream[i] * out[i];
        return acc;
    };

    const Real eps = 1e-5;
    auto check_tensor = [&](Tensor& target, const Tensor& analytic, const char* name) {
        ASSERT_EQ(target.shape(), analytic.shape()) << name;
        Real scale = 1e-8;
        if (tensor_scaled)
            for (std::size_t i = 0; i < analytic.size(); ++i)
                scale = std::max(scale, std::abs(analytic[i]));
        for (std::size_t i = 0; i < target.size(); ++i) {
            const Real saved = target[i];
            target[i] = saved + eps;
            const double plus = loss();
            target[i] = saved - eps;
            const double minus = loss();
            target[i] = saved;
            const Real numeric = Real((plus - minus) / (2 * eps));
            const Real denom =
                tensor_scaled
                    ? scale
                    : std::max({std::abs(analytic[i]), std::abs(numeric), Real(1e-8)});
            const Real rel = std::abs(analytic[i] - numeric) / denom;
            ASSERT_LT(rel, tolerance)
                << name << "[" << i << "]: analytic " << analytic[i] << " numeric " << numeric;
        }
    };

    check_tensor(params.w_ib, grads.w_ib, "w_ib");
    check_tensor(params.r_ib, grads.r_ib, "r_ib");
    check_tensor(params.b_ib, grads.b_ib, "b_ib");
    check_tensor(params.w_ig, grads.w_ig, "w_ig");
    check_tensor(params.r_ig, grads.r_ig, "r_ig");
    check_tensor(params.b_ig, grads.b_ig, "b_ig");
    check_tensor(params.w_fg, grads.w_fg, "w_fg");
    check_tensor(params.r_fg, grads.r_fg, "r_fg");
    check_tensor(params.b_fg, grads.b_fg, "b_fg");
    check_tensor(params.w_og, grads.w_og, "w_og");
    check_tensor(params.r_og, grads.r_og, "r_og");
    check_tensor(params.b_og, grads.b_og, "b_og");
    if (peepholes) {
        check_tensor(params.p_ig, grads.p_ig, "p_ig");
        check_tensor(params.p_fg, grads.p_fg, "p_fg");
        check_tensor(params.p_og, grads.p_og, "p_og");
    }
    check_tensor(sequence, input_grads, "inputs");
}

}  // namespace

TEST(LstmStep, ZeroWeightsGiveHalfGatesZeroCell) {
    const LstmParams p = zero_params(3, 4, false);
    const Tensor x({3}, {1, -2, 3});
    const Tensor o_prev({4});
    const Tensor c_prev({4});
    const LstmStepResult r = lstm_step(p, x, o_prev, c_prev);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(r.act_ig[i], 0.5);
        EXPECT_EQ(r.act_fg[i], 0.5);
        EXPECT_EQ(r.act_og[i], 0.5);
        EXPECT_EQ(r.act_ib[i], 0.0);
        EXPECT_EQ(r.cell[i], 0.0);
        EXPECT_EQ(r.output[i], 0.0);
    }
}

TEST(LstmStep, ZeroWeightsHalveThePreviousCell) {
    const LstmParams p = zero_params(3, 4, false);
    const Tensor x({3}, {1, 1, 1});
    const Tensor o_prev({4});
    const Tensor c_prev({4}, {2, -4, 0.5, 8});
    const LstmStepResult r = lstm_step(p, x, o_prev, c_prev);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.cell[i], 0.5 * c_prev[i], 1e-15);
}

TEST(LstmStep, MatchesIndependentOracle) {
    for (const bool peepholes : {false, true}) {
        Rng rng(peepholes ? 101 : 100);
        const LstmParams p = random_params(3, 4, peepholes, rng);
        const Tensor x = random_tensor({3}, rng);
        const Tensor o_prev = random_tensor({4}, rng);
        const Tensor c_prev = random_tensor({4}, rng);

        const LstmStepResult r = lstm_step(p, x, o_prev, c_prev);
        const OracleStep expected =
            oracle_step(p, {x[0], x[1], x[2]}, {o_prev[0], o_prev[1], o_prev[2], o_prev[3]},
                        {c_prev[0], c_prev[1], c_prev[2], c_prev[3]});
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_NEAR(r.act_ib[i], expected.ib[i], 1e-12);
            EXPECT_NEAR(r.act_ig[i], expected.ig[i], 1e-12);
            EXPECT_NEAR(r.act_fg[i], expected.fg[i], 1e-12);
            EXPECT_NEAR(r.act_og[i], expected.og[i], 1e-12);
            EXPECT_NEAR(r.cell[i], expected.cell[i], 1e-12);
            EXPECT_NEAR(r.output[i], expected.out[i], 1e-12);
        }
    }
}

TEST(LstmStep, ActivationRanges) {
    Rng rng(55);
    const LstmParams p = random_params(5, 6, true, rng);
    const Tensor x = random_tensor({5}, rng, -3, 3);
    const Tensor o_prev = random_tensor({6}, rng);
    const Tensor c_prev = random_tensor({6}, rng, -2, 2);
    const LstmStepResult r = lstm_step(p, x, o_prev, c_prev);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_GT(r.act_ig[i], 0.0);
        EXPECT_LT(r.act_ig[i], 1.0);
        EXPECT_GT(r.act_fg[i], 0.0);
        EXPECT_LT(r.act_fg[i], 1.0);
        EXPECT_GT(r.act_og[i], 0.0);
        EXPECT_LT(r.act_og[i], 1.0);
        EXPECT_GT(r.act_ib[i], -1.0);
        EXPECT_LT(r.act_ib[i], 1.0);
        EXPECT_GT(r.tanh_cell[i], -1.0);
        EXPECT_LT(r.tanh_cell[i], 1.0);
    }
}

TEST(LstmStep, DimensionMismatchThrows) {
    Rng rng(1);
    const LstmParams p = random_params(3, 4, false, rng);
    EXPECT_THROW(lstm_step(p, Tensor({2}), Tensor({4}), Tensor({4})), ShapeError);
    EXPECT_THROW(lstm_step(p, Tensor({3}), Tensor({5}), Tensor({4})), ShapeError);
}

TEST(LstmForward, SingleStepReducesToStep) {
    Rng rng(9);
    const LstmParams p = random_params(3, 5, true, rng);
    const Tensor seq = random_tensor({1, 3}, rng);
    LstmCache cache;
    const Tensor out = lstm_forward(p, seq, cache);

    const Tensor x({3}, {seq(0, 0), seq(0, 1), seq(0, 2)});
    const LstmStepResult step = lstm_step(p, x, Tensor({5}), Tensor({5}));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(out(0, i), step.output[i]);
}

TEST(LstmForward, ConstantInputZeroRecurrentGivesConstantPreacts) {
    Rng rng(12);
    LstmParams p = random_params(4, 3, false, rng);
    p.r_ib.fill(0);
    p.r_ig.fill(0);
    p.r_fg.fill(0);
    p.r_og.fill(0);
    Tensor seq({6, 4});
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t j = 0; j < 4; ++j) seq(t, j) = Real(0.3) * Real(j + 1);
    LstmCache cache;
    lstm_forward(p, seq, cache);
    for (std::size_t t = 1; t < 6; ++t)
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(cache.pre_ib(t, i), cache.pre_ib(0, i));
            EXPECT_EQ(cache.pre_ig(t, i), cache.pre_ig(0, i));
            EXPECT_EQ(cache.pre_fg(t, i), cache.pre_fg(0, i));
            EXPECT_EQ(cache.pre_og(t, i), cache.pre_og(0, i));
        }
}

TEST(LstmForward, MatchesStepByStepLoop) {
    Rng rng(31);
    const LstmParams p = random_params(3, 4, true, rng);
    const Tensor seq = random_tensor({5, 3}, rng);
    LstmCache cache;
    const Tensor out = lstm_forward(p, seq, cache);

    Tensor o_prev({4}), c_prev({4});
    for (std::size_t t = 0; t < 5; ++t) {
        Tensor x({3}, {seq(t, 0), seq(t, 1), seq(t, 2)});
        const LstmStepResult step = lstm_step(p, x, o_prev, c_prev);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out(t, i), step.output[i]);
        o_prev = step.output;
        c_prev = step.cell;
    }
}

TEST(LstmForward, EmptySequenceThrows) {
    Rng rng(2);
    const LstmParams p = random_params(3, 4, false, rng);
    LstmCache cache;
    EXPECT_THROW(lstm_forward(p, Tensor({0, 3}), cache), ParamError);
}

TEST(LstmBptt, ZeroUpstreamGivesZeroGrads) {
    Rng rng(3);
    const LstmParams p = random_params(3, 4, true, rng);
    const Tensor seq = random_tensor({4, 3}, rng);
    LstmCache cache;
    lstm_forward(p, seq, cache);
    auto [grads, input_grads] = lstm_bptt(p, cache, Tensor({4, 4}));
    for (const Tensor* t : {&grads.w_ib, &grads.r_ib, &grads.b_ib, &grads.w_ig, &grads.r_ig,
                            &grads.b_ig, &grads.w_fg, &grads.r_fg, &grads.b_fg, &grads.w_og,
                            &grads.r_og, &grads.b_og, &grads.p_ig, &grads.p_fg, &grads.p_og}) {
        for (std::size_t i = 0; i < t->size(); ++i) EXPECT_EQ((*t)[i], 0.0);
    }
    for (std::size_t i = 0; i < input_grads.size(); ++i) EXPECT_EQ(input_grads[i], 0.0);
}

TEST(LstmBptt, SingleStepHasNoRecurrentGradient) {
    Rng rng(4);
    const LstmParams p = random_params(3, 4, false, rng);
    const Tensor seq = random_tensor({1, 3}, rng);
    LstmCache cache;
    lstm_forward(p, seq, cache);
    auto [grads, input_grads] = lstm_bptt(p, cache, random_tensor({1, 4}, rng));
    for (const Tensor* t : {&grads.r_ib, &grads.r_ig, &grads.r_fg, &grads.r_og})
        for (std::size_t i = 0; i < t->size(); ++i) EXPECT_EQ((*t)[i], 0.0);
}

TEST(LstmBptt, MatchesFiniteDifferencesPeepholesOff) {
    check_bptt_against_fd(4, 5, 3, false, 2024, 1e-6);
}

TEST(LstmBptt, MatchesFiniteDifferencesPeepholesOn) {
    check_bptt_against_fd(4, 5, 3, true, 2025, 1e-6);
}

TEST(LstmBptt, MatchesFiniteDifferencesLongerSequence) {
    check_bptt_against_fd(8, 8, 2, true, 7, 1e-6, /*tensor_scaled=*/true);
}

TEST(LstmParamsCount, FormulaWithAndWithoutPeepholes) {
    Rng rng(1);
    const LstmParams off = LstmParams::glorot(10, 6, false, rng);
    const LstmParams on = LstmParams::glorot(10, 6, true, rng);
    EXPECT_EQ(off.parameter_count(), 4u * (6 * 10 + 6 * 6 + 6));
    EXPECT_EQ(on.parameter_count(), 4u * (6 * 10 + 6 * 6 + 6) + 3 * 6);
}

TEST(BiLstm, PublishedParameterCounts) {
    Rng rng(1);
    const BiLstmLayer first = BiLstmLayer::glorot(1920, 64, BiMode::sequence, false, rng);
    const BiLstmLayer second = BiLstmLayer::glorot(128, 64, BiMode::last, false, rng);
    EXPECT_EQ(first.parameter_count(), 1016320u);
    EXPECT_EQ(second.parameter_count(), 98816u);

    const Tensor seq = random_tensor({15, 1920}, rng, -0.1, 0.1);
    BiLstmCache cache;
    const Tensor out1 = bilstm_forward(first, seq, cache);
    EXPECT_EQ(out1.shape(), (Shape{15, 128}));

    const Tensor out2 = bilstm_forward(second, out1, cache);
    EXPECT_EQ(out2.shape(), (Shape{128}));
}

TEST(BiLstm, PalindromeWithSharedParamsGivesMirrorHalves) {
    Rng rng(88);
    BiLstmLayer layer = BiLstmLayer::glorot(3, 4, BiMode::sequence, false, rng);
    layer.backward_params = layer.forward_params;

    Tensor seq({5, 3});
    const Real rows[5][3] = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}, {4, 5, 6}, {1, 2, 3}};
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t j = 0; j < 3; ++j) seq(t, j) = rows[t][j];

    BiLstmCache cache;
    const Tensor out = bilstm_forward(layer, seq, cache);
    // Palindrome + identical params: backward half at t equals forward half
    // at T-1-t.
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t i = 0; i < 4; ++i)
            EXPECT_NEAR(out(t, 4 + i), out(4 - t, i), 1e-12);
}

TEST(BiLstm, ReversalConsistency) {
    Rng rng(17);
    const BiLstmLayer layer = BiLstmLayer::glorot(3, 4, BiMode::sequence, true, rng);
    const Tensor seq = random_tensor({6, 3}, rng);

    BiLstmCache cache;
    const Tensor out = bilstm_forward(layer, seq, cache);

    // The backward half must equal an explicit run over the reversed input,
    // re-reversed.
    Tensor reversed({6, 3});
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t j = 0; j < 3; ++j) reversed(t, j) = seq(5 - t, j);
    LstmCache c2;
    const Tensor bwd = lstm_forward(layer.backward_params, reversed, c2);
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out(t, 4 + i), bwd(5 - t, i));
}

TEST(BiLstm, LastModeConcatenatesFinalSteps) {
    Rng rng(23);
    const BiLstmLayer layer = BiLstmLayer::glorot(3, 4, BiMode::last, false, rng);
    const Tensor seq = random_tensor({5, 3}, rng);
    BiLstmCache cache;
    const Tensor out = bilstm_forward(layer, seq, cache);
    ASSERT_EQ(out.shape(), (Shape{8}));

    LstmCache cf, cb;
    const Tensor f = lstm_forward(layer.forward_params, seq, cf);
    Tensor reversed({5, 3});
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t j = 0; j < 3; ++j) reversed(t, j) = seq(4 - t, j);
    const Tensor b = lstm_forward(layer.backward_params, reversed, cb);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(out[i], f(4, i));
        EXPECT_EQ(out[4 + i], b(4, i));
    }
}

TEST(BiLstmBackward, ZeroUpstreamGivesZeroEverywhere) {
    Rng rng(5);
    const BiLstmLayer layer = BiLstmLayer::glorot(3, 4, BiMode::sequence, false, rng);
    const Tensor seq = random_tensor({4, 3}, rng);
    BiLstmCache cache;
    bilstm_forward(layer, seq, cache);
    auto [grads, input_grads] = bilstm_backward(layer, cache, Tensor({4, 8}));
    for (std::size_t i = 0; i < grads.forward.w_ib.size(); ++i)
        EXPECT_EQ(grads.forward.w_ib[i], 0.0);
    for (std::size_t i = 0; i < input_grads.size(); ++i) EXPECT_EQ(input_grads[i], 0.0);
}

TEST(BiLstmBackward, LastModeForwardHalfOnlyLeavesBackwardUntouched) {
    Rng rng(6);
    const BiLstmLayer layer = BiLstmLayer::glorot(3, 4, BiMode::last, false, rng);
    const Tensor seq = random_tensor({4, 3}, rng);
    BiLstmCache cache;
    bilstm_forward(layer, seq, cache);
    Tensor upstream({8});
    for (std::size_t i = 0; i < 4; ++i) upstream[i] = Real(i + 1);  // forward half only
    auto [grads, input_grads] = bilstm_backward(layer, cache, upstream);
    for (const Tensor* t :
         {&grads.backward.w_ib, &grads.backward.r_ib, &grads.backward.b_ib, &grads.backward.w_ig,
          &grads.backward.w_fg, &grads.backward.w_og}) {
        for (std::size_t i = 0; i < t->size(); ++i) EXPECT_EQ((*t)[i], 0.0);
    }
    bool forward_nonzero = false;
    for (std::size_t i = 0; i < grads.forward.w_ib.size(); ++i)
        forward_nonzero = forward_nonzero || grads.forward.w_ib[i] != 0;
    EXPECT_TRUE(forward_nonzero);
}

TEST(BiLstmBackward, SequenceModeMatchesFiniteDifferences) {
    Rng rng(321);
    BiLstmLayer layer = BiLstmLayer::glorot(3, 4, BiMode::sequence, true, rng);
    Tensor seq = random_tensor({4, 3}, rng);
    const Tensor upstream = random_tensor({4, 8}, rng);

    BiLstmCache cache;
    bilstm_forward(layer, seq, cache);
    auto [grads, input_grads] = bilstm_backward(layer, cache, upstream);

    auto loss = [&] {
        BiLstmCache c;
        const Tensor out = bilstm_forward(layer, seq, c);
        double acc = 0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += upstream[i] * out[i];
        return acc;
    };
    const Real eps = 1e-5;
    auto check = [&](Tensor& target, const Tensor& analytic, const char* name) {
        for (std::size_t i = 0; i < target.size(); ++i) {
            const Real saved = target[i];
            target[i] = saved + eps;
            const double plus = loss();
            target[i] = saved - eps;
            const double minus = loss();
            target[i] = saved;
            const Real numeric = Real((plus - minus) / (2 * eps));
            const Real rel = std::abs(analytic[i] - numeric) /
                             std::max({std::abs(analytic[i]), std::abs(numeric), Real(1e-8)});
            ASSERT_LT(rel, 1e-6) << name << "[" << i << "]";
        }
    };
    check(layer.forward_params.w_ib, grads.forward.w_ib, "fwd.w_ib");
    check(layer.forward_params.r_og, grads.forward.r_og, "fwd.r_og");
    check(layer.forward_params.p_fg, grads.forward.p_fg, "fwd.p_fg");
    check(layer.backward_params.w_fg, grads.backward.w_fg, "bwd.w_fg");
    check(layer.backward_params.r_ib, grads.backward.r_ib, "bwd.r_ib");
    check(layer.backward_params.p_og, grads.backward.p_og, "bwd.p_og");
    check(seq, input_grads, "inputs");
}

TEST(BiLstmBackward, LastModeMatchesFiniteDifferences) {
    Rng rng(654);
    BiLstmLayer layer = BiLstmLayer::glorot(2, 3, BiMode::last, false, rng);
    Tensor seq = random_tensor({4, 2}, rng);
    const Tensor upstream = random_tensor({6}, rng);

    BiLstmCache cache;
    bilstm_forward(layer, seq, cache);
    auto [grads, input_grads] = bilstm_backward(layer, cache, upstream);

    auto loss = [&] {
        BiLstmCache c;
        const Tensor out = bilstm_forward(layer, seq, c);
        double acc = 0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += upstream[i] * out[i];
        return acc;
    };
    const Real eps = 1e-5;
    auto check = [&](Tensor& target, const Tensor& analytic, const char* name) {
        for (std::size_t i = 0; i < target.size(); ++i) {
            const Real saved = target[i];
            target[i] = saved + eps;
            const double plus = loss();
            target[i] = saved - eps;
            const double minus = loss();
            target[i] = saved;
            const Real numeric = Real((plus - minus) / (2 * eps));
            const Real rel = std::abs(analytic[i] - numeric) /
                             std::max({std::abs(analytic[i]), std::abs(numeric), Real(1e-8)});
            ASSERT_LT(rel, 1e-6) << name << "[" << i << "]";
        }
    };
    check(layer.forward_params.w_ib, grads.forward.w_ib, "fwd.w_ib");
    check(layer.backward_params.w_ib, grads.backward.w_ib, "bwd.w_ib");
    check(layer.backward_params.r_fg, grads.backward.r_fg, "bwd.r_fg");
    check(seq, input_grads, "inputs");
}

TEST(Dropout, InferenceIsIdentity) {
    Rng rng(1);
    const DropoutLayer layer{0.25};
    const Tensor in = random_tensor({7, 5}, rng);
    Rng drop_rng(2);
    const Tensor out = dropout_forward(layer, in, false, drop_rng);
    EXPECT_EQ(out.values(), in.values());
}

TEST(Dropout, RateZeroIsIdentityInTraining) {
    Rng rng(1);
    const DropoutLayer layer{0.0};
    const Tensor in = random_tensor({4, 4}, rng);
    Rng drop_rng(2);
    const Tensor out = dropout_forward(layer, in, true, drop_rng);
    EXPECT_EQ(out.values(), in.values());
}

TEST(Dropout, MonteCarloMeanIsPreserved) {
    const DropoutLayer layer{0.25};
    const Tensor in = Tensor::full({1000000}, 1);
    Rng drop_rng(77);
    const Tensor out = dropout_forward(layer, in, true, drop_rng);
    double sum = 0;
    for (std::size_t i = 0; i < out.size(); ++i) sum += out[i];
    EXPECT_NEAR(sum / double(out.size()), 1.0, 0.005);
}

TEST(Dropout, BackwardReplaysTheMask) {
    Rng rng(9);
    const DropoutLayer layer{0.5};
    const Tensor in = random_tensor({6, 6}, rng);
    Rng drop_rng(3);
    Tensor mask;
    const Tensor out = dropout_forward(layer, in, true, drop_rng, &mask);
    for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out[i], in[i] * mask[i]);

    const Tensor upstream = Tensor::full(in.shape(), 2);
    const Tensor back = dropout_backward(upstream, mask);
    for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(back[i], 2 * mask[i]);
}
