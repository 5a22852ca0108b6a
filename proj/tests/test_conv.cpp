#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "hssnb/conv.hpp"

using namespace hssnb;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, Real lo = -1, Real hi = 1) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Brute-force oracle: the definition written as one big gather per output
// element, independent of the layer implementation.
Tensor conv3d_oracle(const Tensor& in, const Tensor& kernels, const Tensor& bias, bool relu) {
    const std::size_t H = in.dim(0), W = in.dim(1), Dp = in.dim(2), inC = in.dim(3);
    const std::size_t F = kernels.dim(0), kh = kernels.dim(1), kw = kernels.dim(2),
                      kd = kernels.dim(3), kc = kernels.dim(4);
    Tensor out({H - kh + 1, W - kw + 1, Dp - kd + 1, F});
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t a = 0; a + kh <= H; ++a)
            for (std::size_t b = 0; b + kw <= W; ++b)
                for (std::size_t c = 0; c + kd <= Dp; ++c) {
                    double acc = bias[f];
                    for (std::size_t p = 0; p < kh; ++p)
                        for (std::size_t q = 0; q < kw; ++q)
                            for (std::size_t r = 0; r < kd; ++r)
                                for (std::size_t m = 0; m < inC; ++m)
                                    acc += kernels[((((f * kh + p) * kw + q) * kd + r) * kc + m)] *
                                           in(a + p, b + q, c + r, m);
                    if (relu && acc < 0) acc = 0;
                    out(a, b, c, f) = Real(acc);
                }
    return out;
}

Tensor conv2d_oracle(const Tensor& in, const Tensor& kernels, const Tensor& bias, bool relu) {
    const std::size_t H = in.dim(0), W = in.dim(1), inC = in.dim(2);
    const std::size_t F = kernels.dim(0), kh = kernels.dim(1), kw = kernels.dim(2);
    Tensor out({H - kh + 1, W - kw + 1, F});
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t a = 0; a + kh <= H; ++a)
            for (std::size_t b = 0; b + kw <= W; ++b) {
                double acc = bias[f];
                for (std::size_t p = 0; p < kh; ++p)
                    for (std::size_t q = 0; q < kw; ++q)
                        for (std::size_t m = 0; m < inC; ++m)
                            acc += kernels(f, p, q, m) * in(a + p, b + q, m);
                if (relu && acc < 0) acc = 0;
                out(a, b, f) = Real(acc);
            }
    return out;
}

// Central finite differences of sum(upstream .* forward(x)) with respect to
// every entry of `target`.
Tensor finite_diff(Tensor& target, const Tensor& upstream, const std::function<Tensor()>& fwd,
                   Real eps = 1e-6) {
    Tensor grad(target.shape());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const Real saved = target[i];
        target[i] = saved + eps;
        const Tensor plus = fwd();
        target[i] = saved - eps;
        const Tensor minus = fwd();
        target[i] = saved;
        double acc = 0;
        for (std::size_t j = 0; j < plus.size(); ++j)
            acc += upstream[j] * (plus[j] - minus[j]);
        grad[i] = Real(acc / (2 * eps));
    }
    return grad;
}

void expect_close(const Tensor& a, const Tensor& b, Real tol, const char* what) {
    ASSERT_EQ(a.shape(), b.shape()) << what;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Real rel = std::abs(a[i] - b[i]) /
                         std::max({std::abs(a[i]), std::abs(b[i]), Real(1)});
        ASSERT_LT(rel, tol) << what << " at " << i << ": " << a[i] << " vs " << b[i];
    }
}

}  // namespace

TEST(Conv3d, DefaultFirstLayerShape) {
    Rng rng(1);
    Conv3dLayer layer = Conv3dLayer::glorot(8, 3, 3, 7, 1, Activation::relu, rng);
    const Tensor in = random_tensor({25, 25, 30, 1}, rng);
    const Tensor out = conv3d_forward(layer, in);
    EXPECT_EQ(out.shape(), (Shape{23, 23, 24, 8}));
    EXPECT_EQ(layer.parameter_count(), 512u);
}

TEST(Conv3d, AllOnesKernelSumsVolume) {
    Rng rng(1);
    Conv3dLayer layer;
    layer.kernels = Tensor::full({1, 3, 3, 7, 1}, 1);
    layer.bias = Tensor({1});
    layer.activation = Activation::linear;
    const Tensor in = Tensor::full({10, 10, 12, 1}, 1);
    const Tensor out = conv3d_forward(layer, in);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 63.0);
}

TEST(Conv3d, MatchesBruteForceOracle) {
    Rng rng(33);
    Conv3dLayer layer = Conv3dLayer::glorot(3, 2, 2, 3, 2, Activation::relu, rng);
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-1, 1);
    const Tensor in = random_tensor({6, 6, 8, 2}, rng);
    const Tensor out = conv3d_forward(layer, in);
    const Tensor expected = conv3d_oracle(in, layer.kernels, layer.bias, true);
    expect_close(out, expected, 1e-6, "conv3d vs oracle");
}

TEST(Conv3d, KernelTooLargeThrows) {
    Rng rng(1);
    Conv3dLayer layer = Conv3dLayer::glorot(2, 3, 3, 9, 1, Activation::relu, rng);
    const Tensor in = random_tensor({5, 5, 8, 1}, rng);
    EXPECT_THROW(conv3d_forward(layer, in), ShapeError);
}

TEST(Conv3dBackward, ZeroUpstreamGivesZeroGrads) {
    Rng rng(2);
    Conv3dLayer layer = Conv3dLayer::glorot(2, 2, 2, 2, 1, Activation::relu, rng);
    const Tensor in = random_tensor({4, 4, 4, 1}, rng);
    Conv3dCache cache;
    const Tensor out = conv3d_forward(layer, in, &cache);
    Conv3dGrads grads;
    const Tensor in_grad = conv3d_backward(layer, cache, Tensor(out.shape()), grads);
    for (std::size_t i = 0; i < grads.kernels.size(); ++i) EXPECT_EQ(grads.kernels[i], 0.0);
    for (std::size_t i = 0; i < grads.bias.size(); ++i) EXPECT_EQ(grads.bias[i], 0.0);
    for (std::size_t i = 0; i < in_grad.size(); ++i) EXPECT_EQ(in_grad[i], 0.0);
}

TEST(Conv3dBackward, BiasAdjointIsUpstreamSum) {
    Rng rng(6);
    Conv3dLayer layer = Conv3dLayer::glorot(3, 2, 2, 2, 2, Activation::linear, rng);
    const Tensor in = random_tensor({5, 4, 4, 2}, rng);
    Conv3dCache cache;
    const Tensor out = conv3d_forward(layer, in, &cache);
    const Tensor upstream = random_tensor(out.shape(), rng);
    Conv3dGrads grads;
    conv3d_backward(layer, cache, upstream, grads);
    for (std::size_t f = 0; f < 3; ++f) {
        double sum = 0;
        for (std::size_t a = 0; a < out.dim(0); ++a)
            for (std::size_t b = 0; b < out.dim(1); ++b)
                for (std::size_t c = 0; c < out.dim(2); ++c) sum += upstream(a, b, c, f);
        EXPECT_NEAR(grads.bias[f], sum, 1e-9);
    }
}

TEST(Conv3dBackward, MatchesFiniteDifferences) {
    Rng rng(44);
    Conv3dLayer layer = Conv3dLayer::glorot(2, 2, 2, 3, 2, Activation::relu, rng);
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-0.5, 0.5);
    Tensor in = random_tensor({5, 5, 6, 2}, rng);
    Conv3dCache cache;
    const Tensor out = conv3d_forward(layer, in, &cache);
    const Tensor upstream = random_tensor(out.shape(), rng);

    Conv3dGrads grads;
    const Tensor in_grad = conv3d_backward(layer, cache, upstream, grads);

    auto fwd = [&] { return conv3d_forward(layer, in); };
    expect_close(grads.kernels, finite_diff(layer.kernels, upstream, fwd), 1e-6, "dK");
    expect_close(grads.bias, finite_diff(layer.bias, upstream, fwd), 1e-6, "db");
    expect_close(in_grad, finite_diff(in, upstream, fwd), 1e-6, "dx");
}

TEST(Conv2d, TableShapeAndParameterCount) {
    Rng rng(1);
    Conv2dLayer layer = Conv2dLayer::glorot(64, 3, 3, 576, Activation::relu, rng);
    const Tensor in = random_tensor({19, 19, 576}, rng, -0.1, 0.1);
    const Tensor out = conv2d_forward(layer, in);
    EXPECT_EQ(out.shape(), (Shape{17, 17, 64}));
    EXPECT_EQ(layer.parameter_count(), 331840u);
}

TEST(Conv2d, IdentityKernelSelectsChannel) {
    Conv2dLayer layer;
    layer.kernels = Tensor({1, 1, 1, 3});
    layer.kernels(0, 0, 0, 1) = 1;  // select channel 1
    layer.bias = Tensor({1});
    layer.activation = Activation::linear;
    Rng rng(3);
    const Tensor in = random_tensor({4, 4, 3}, rng);
    const Tensor out = conv2d_forward(layer, in);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(out(a, b, 0), in(a, b, 1));
}

TEST(Conv2d, MatchesBruteForceOracle) {
    Rng rng(21);
    Conv2dLayer layer = Conv2dLayer::glorot(2, 2, 2, 3, Activation::relu, rng);
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-1, 1);
    const Tensor in = random_tensor({5, 5, 3}, rng);
    const Tensor out = conv2d_forward(layer, in);
    const Tensor expected = conv2d_oracle(in, layer.kernels, layer.bias, true);
    expect_close(out, expected, 1e-6, "conv2d vs oracle");
}

TEST(Conv2dBackward, ImpulseUpstreamCopiesWindow) {
    Rng rng(12);
    Conv2dLayer layer = Conv2dLayer::glorot(1, 2, 2, 1, Activation::linear, rng);
    const Tensor in = random_tensor({4, 4, 1}, rng);
    Conv2dCache cache;
    const Tensor out = conv2d_forward(layer, in, &cache);
    Tensor upstream(out.shape());
    upstream(1, 2, 0) = 1;  // single impulse
    Conv2dGrads grads;
    conv2d_backward(layer, cache, upstream, grads);
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q)
            EXPECT_NEAR(grads.kernels(0, p, q, 0), in(1 + p, 2 + q, 0), 1e-12);
}

TEST(Conv2dBackward, MatchesFiniteDifferences) {
    Rng rng(45);
    Conv2dLayer layer = Conv2dLayer::glorot(2, 2, 2, 2, Activation::relu, rng);
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-0.5, 0.5);
    Tensor in = random_tensor({5, 4, 2}, rng);
    Conv2dCache cache;
    const Tensor out = conv2d_forward(layer, in, &cache);
    const Tensor upstream = random_tensor(out.shape(), rng);

    Conv2dGrads grads;
    const Tensor in_grad = conv2d_backward(layer, cache, upstream, grads);

    auto fwd = [&] { return conv2d_forward(layer, in); };
    expect_close(grads.kernels, finite_diff(layer.kernels, upstream, fwd), 1e-6, "dK");
    expect_close(grads.bias, finite_diff(layer.bias, upstream, fwd), 1e-6, "db");
    expect_close(in_grad, finite_diff(in, upstream, fwd), 1e-6, "dx");
}

TEST(Conv, LinearityWithZeroBias) {
    Rng rng(90);
    Conv2dLayer layer = Conv2dLayer::glorot(3, 3, 3, 2, Activation::linear, rng);
    const Tensor x = random_tensor({6, 6, 2}, rng);
    const Tensor y = random_tensor({6, 6, 2}, rng);
    const Real a = 1.7, b = -0.4;
    Tensor combo({6, 6, 2});
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * y[i];
    const Tensor fx = conv2d_forward(layer, x);
    const Tensor fy = conv2d_forward(layer, y);
    const Tensor fc = conv2d_forward(layer, combo);
    for (std::size_t i = 0; i < fc.size(); ++i)
        EXPECT_NEAR(fc[i], a * fx[i] + b * fy[i], 1e-10);
}

TEST(Conv, ParameterCountFormulasMatchPublishedRows) {
    Rng rng(1);
    EXPECT_EQ(Conv3dLayer::glorot(8, 3, 3, 7, 1, Activation::relu, rng).parameter_count(), 512u);
    EXPECT_EQ(Conv3dLayer::glorot(16, 3, 3, 5, 8, Activation::relu, rng).parameter_count(),
              5776u);
    EXPECT_EQ(Conv3dLayer::glorot(32, 3, 3, 3, 16, Activation::relu, rng).parameter_count(),
              13856u);
    EXPECT_EQ(Conv2dLayer::glorot(64, 3, 3, 576, Activation::relu, rng).parameter_count(),
              331840u);
    EXPECT_EQ(Conv2dLayer::glorot(128, 3, 3, 64, Activation::relu, rng).parameter_count(),
              73856u);
}

TEST(Reshape, FuseSpectralAndFilterAxes) {
    Rng rng(3);
    const Tensor in = random_tensor({19, 19, 18, 32}, rng);
    const Tensor out = reshape_3d_to_2d(in);
    EXPECT_EQ(out.shape(), (Shape{19, 19, 576}));
    // Index map oracle: element (i,j,d,f) lands at channel d*32+f.
    for (std::size_t i = 0; i < 19; i += 6)
        for (std::size_t j = 0; j < 19; j += 6)
            for (std::size_t d = 0; d < 18; ++d)
                for (std::size_t f = 0; f < 32; ++f)
                    ASSERT_EQ(out(i, j, d * 32 + f), in(i, j, d, f));
    // Round trip restores the tensor exactly.
    const Tensor back = reshape_3d_to_2d_backward(out, in.shape());
    EXPECT_EQ(back.values(), in.values());
}

TEST(Reshape, RowsBecomeTimesteps) {
    Rng rng(4);
    const Tensor in = random_tensor({15, 15, 128}, rng);
    const Tensor out = reshape_2d_to_seq(in);
    EXPECT_EQ(out.shape(), (Shape{15, 1920}));
    for (std::size_t i = 0; i < 15; ++i)
        for (std::size_t j = 0; j < 15; j += 4)
            for (std::size_t f = 0; f < 128; f += 16)
                ASSERT_EQ(out(i, j * 128 + f), in(i, j, f));
    const Tensor back = reshape_2d_to_seq_backward(out, in.shape());
    EXPECT_EQ(back.values(), in.values());
}

TEST(Conv, OutputDimFormula) {
    Rng rng(10);
    for (std::size_t k = 1; k <= 3; ++k) {
        Conv2dLayer layer = Conv2dLayer::glorot(1, k, k, 1, Activation::linear, rng);
        const Tensor in = random_tensor({7, 9, 1}, rng);
        const Tensor out = conv2d_forward(layer, in);
        EXPECT_EQ(out.dim(0), 7 - k + 1);
        EXPECT_EQ(out.dim(1), 9 - k + 1);
    }
}
