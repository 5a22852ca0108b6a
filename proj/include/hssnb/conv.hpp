#ifndef HSSNB_CONV_HPP
#define HSSNB_CONV_HPP

// 3-D and 2-D convolution layers (stride 1, valid, cross-correlation
// orientation) with exact adjoints, plus the two reshape adapters that fuse
// a spectral/filter block into channels and rows into timesteps.

#include <cstddef>
#include <string>
#include <vector>

#include "hssnb/errors.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

enum class Activation { linear, relu };

inline Real apply_activation(Activation a, Real x) {
    return a == Activation::relu ? (x > 0 ? x : Real(0)) : x;
}

inline Real activation_gradient(Activation a, Real pre) {
    return a == Activation::relu ? (pre > 0 ? Real(1) : Real(0)) : Real(1);
}

// ---------------------------------------------------------------------------
// Conv3D
// ---------------------------------------------------------------------------

struct Conv3dLayer {
    Tensor kernels;  // [F][kh][kw][kd][inC]
    Tensor bias;     // [F]
    Activation activation = Activation::relu;

    std::size_t filters() const { return kernels.dim(0); }
    std::size_t parameter_count() const { return kernels.size() + bias.size(); }

    static Conv3dLayer glorot(std::size_t filters, std::size_t kh, std::size_t kw,
                              std::size_t kd, std::size_t in_channels, Activation act,
                              Rng& rng) {
        Conv3dLayer layer;
        const std::size_t receptive = kh * kw * kd;
        layer.kernels = glorot_init({filters, kh, kw, kd, in_channels},
                                    in_channels * receptive, filters * receptive, rng);
        layer.bias = Tensor({filters});
        layer.activation = act;
        return layer;
    }
};

struct Conv3dCache {
    Tensor input;   // [H][W][Dp][inC]
    Tensor preact;  // output shape, before activation
};

struct Conv3dGrads {
    Tensor kernels;
    Tensor bias;
};

inline Tensor conv3d_forward(const Conv3dLayer& layer, const Tensor& input,
                             Conv3dCache* cache = nullptr) {
    if (input.rank() != 4)
        throw ShapeError("conv3d_forward: input must be rank 4, got " +
                         shape_to_string(input.shape()));
    const std::size_t H = input.dim(0), W = input.dim(1), Dp = input.dim(2),
                      inC = input.dim(3);
    const std::size_t F = layer.kernels.dim(0), kh = layer.kernels.dim(1),
                      kw = layer.kernels.dim(2), kd = layer.kernels.dim(3),
                      kc = layer.kernels.dim(4);
    if (kc != inC || kh > H || kw > W || kd > Dp)
        throw ShapeError("conv3d_forward: kernel " + shape_to_string(layer.kernels.shape()) +
                         " does not fit input " + shape_to_string(input.shape()));

    const std::size_t oH = H - kh + 1, oW = W - kw + 1, oD = Dp - kd + 1;
    Tensor pre({oH, oW, oD, F});
    const Real* in = input.data();
    const Real* ker = layer.kernels.data();

    for (std::size_t a = 0; a < oH; ++a)
        for (std::size_t b = 0; b < oW; ++b)
            for (std::size_t c = 0; c < oD; ++c)
                for (std::size_t f = 0; f < F; ++f) {
                    Real acc = layer.bias[f];
                    const Real* kf = ker + f * kh * kw * kd * inC;
                    for (std::size_t p = 0; p < kh; ++p)
                        for (std::size_t q = 0; q < kw; ++q) {
                            const Real* in_row =
                                in + (((a + p) * W + (b + q)) * Dp + c) * inC;
                            const Real* k_row = kf + ((p * kw + q) * kd) * inC;
                            for (std::size_t r = 0; r < kd; ++r)
                                for (std::size_t m = 0; m < inC; ++m)
                                    acc += k_row[r * inC + m] * in_row[r * inC + m];
                        }
                    pre(a, b, c, f) = acc;
                }

    Tensor out(pre.shape());
    for (std::size_t i = 0; i < pre.size(); ++i)
        out[i] = apply_activation(layer.activation, pre[i]);
    if (cache) {
        cache->input = input;
        cache->preact = std::move(pre);
    }
    return out;
}

inline Tensor conv3d_backward(const Conv3dLayer& layer, const Conv3dCache& cache,
                              const Tensor& upstream, Conv3dGrads& grads) {
    if (!upstream.same_shape(cache.preact))
        throw ShapeError("conv3d_backward: upstream " + shape_to_string(upstream.shape()) +
                         " does not match forward output " +
                         shape_to_string(cache.preact.shape()));
    const Tensor& input = cache.input;
    const std::size_t W = input.dim(1), Dp = input.dim(2), inC = input.dim(3);
    const std::size_t F = layer.kernels.dim(0), kh = layer.kernels.dim(1),
                      kw = layer.kernels.dim(2), kd = layer.kernels.dim(3);
    const std::size_t oH = upstream.dim(0), oW = upstream.dim(1), oD = upstream.dim(2);

    grads.kernels = Tensor(layer.kernels.shape());
    grads.bias = Tensor({F});
    Tensor input_grad(input.shape());

    const Real* in = input.data();
    const Real* ker = layer.kernels.data();
    Real* kg = grads.kernels.data();
    Real* ig = input_grad.data();

    for (std::size_t a = 0; a < oH; ++a)
        for (std::size_t b = 0; b < oW; ++b)
            for (std::size_t c = 0; c < oD; ++c)
                for (std::size_t f = 0; f < F; ++f) {
                    const Real g = upstream(a, b, c, f) *
                                   activation_gradient(layer.activation, cache.preact(a, b, c, f));
                    if (g == 0) continue;
                    grads.bias[f] += g;
                    const Real* kf = ker + f * kh * kw * kd * inC;
                    Real* kgf = kg + f * kh * kw * kd * inC;
                    for (std::size_t p = 0; p < kh; ++p)
                        for (std::size_t q = 0; q < kw; ++q) {
                            const std::size_t base = (((a + p) * W + (b + q)) * Dp + c) * inC;
                            const std::size_t kbase = ((p * kw + q) * kd) * inC;
                            for (std::size_t r = 0; r < kd; ++r)
                                for (std::size_t m = 0; m < inC; ++m) {
                                    kgf[kbase + r * inC + m] += g * in[base + r * inC + m];
                                    ig[base + r * inC + m] += g * kf[kbase + r * inC + m];
                                }
                        }
                }
    return input_grad;
}

// ---------------------------------------------------------------------------
// Conv2D
// ---------------------------------------------------------------------------

struct Conv2dLayer {
    Tensor kernels;  // [F][kh][kw][inC]
    Tensor bias;     // [F]
    Activation activation = Activation::relu;

    std::size_t filters() const { return kernels.dim(0); }
    std::size_t parameter_count() const { return kernels.size() + bias.size(); }

    static Conv2dLayer glorot(std::size_t filters, std::size_t kh, std::size_t kw,
                              std::size_t in_channels, Activation act, Rng& rng) {
        Conv2dLayer layer;
        const std::size_t receptive = kh * kw;
        layer.kernels = glorot_init({filters, kh, kw, in_channels}, in_channels * receptive,
                                    filters * receptive, rng);
        layer.bias = Tensor({filters});
        layer.activation = act;
        return layer;
    }
};

struct Conv2dCache {
    Tensor input;   // [H][W][inC]
    Tensor preact;  // output shape
};

struct Conv2dGrads {
    Tensor kernels;
    Tensor bias;
};

inline Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& input,
                             Conv2dCache* cache = nullptr) {
    if (input.rank() != 3)
        throw ShapeError("conv2d_forward: input must be rank 3, got " +
                         shape_to_string(input.shape()));
    const std::size_t H = input.dim(0), W = input.dim(1), inC = input.dim(2);
    const std::size_t F = layer.kernels.dim(0), kh = layer.kernels.dim(1),
                      kw = layer.kernels.dim(2), kc = layer.kernels.dim(3);
    if (kc != inC || kh > H || kw > W)
        throw ShapeError("conv2d_forward: kernel " + shape_to_string(layer.kernels.shape()) +
                         " does not fit input " + shape_to_string(input.shape()));

    const std::size_t oH = H - kh + 1, oW = W - kw + 1;
    Tensor pre({oH, oW, F});
    const Real* in = input.data();
    const Real* ker = layer.kernels.data();

    for (std::size_t a = 0; a < oH; ++a)
        for (std::size_t b = 0; b < oW; ++b)
            for (std::size_t f = 0; f < F; ++f) {
                Real acc = layer.bias[f];
                const Real* kf = ker + f * kh * kw * inC;
                for (std::size_t p = 0; p < kh; ++p) {
                    const Real* in_row = in + ((a + p) * W + b) * inC;
                    const Real* k_row = kf + p * kw * inC;
                    for (std::size_t q = 0; q < kw; ++q)
                        for (std::size_t m = 0; m < inC; ++m)
                            acc += k_row[q * inC + m] * in_row[q * inC + m];
                }
                pre(a, b, f) = acc;
            }

    Tensor out(pre.shape());
    for (std::size_t i = 0; i < pre.size(); ++i)
        out[i] = apply_activation(layer.activation, pre[i]);
    if (cache) {
        cache->input = input;
        cache->preact = std::move(pre);
    }
    return out;
}

inline Tensor conv2d_backward(const Conv2dLayer& layer, const Conv2dCache& cache,
                              const Tensor& upstream, Conv2dGrads& grads) {
    if (!upstream.same_shape(cache.preact))
        throw ShapeError("conv2d_backward: upstream " + shape_to_string(upstream.shape()) +
                         " does not match forward output " +
                         shape_to_string(cache.preact.shape()));
    const Tensor& input = cache.input;
    const std::size_t W = input.dim(1), inC = input.dim(2);
    const std::size_t F = layer.kernels.dim(0), kh = layer.kernels.dim(1),
                      kw = layer.kernels.dim(2);
    const std::size_t oH = upstream.dim(0), oW = upstream.dim(1);

    grads.kernels = Tensor(layer.kernels.shape());
    grads.bias = Tensor({F});
    Tensor input_grad(input.shape());

    const Real* in = input.data();
    const Real* ker = layer.kernels.data();
    Real* kg = grads.kernels.data();
    Real* ig = input_grad.data();

    for (std::size_t a = 0; a < oH; ++a)
        for (std::size_t b = 0; b < oW; ++b)
            for (std::size_t f = 0; f < F; ++f) {
                const Real g = upstream(a, b, f) *
                               activation_gradient(layer.activation, cache.preact(a, b, f));
                if (g == 0) continue;
                grads.bias[f] += g;
                const Real* kf = ker + f * kh * kw * inC;
                Real* kgf = kg + f * kh * kw * inC;
                for (std::size_t p = 0; p < kh; ++p) {
                    const std::size_t base = ((a + p) * W + b) * inC;
                    const std::size_t kbase = p * kw * inC;
                    for (std::size_t q = 0; q < kw; ++q)
                        for (std::size_t m = 0; m < inC; ++m) {
                            kgf[kbase + q * inC + m] += g * in[base + q * inC + m];
                            ig[base + q * inC + m] += g * kf[kbase + q * inC + m];
                        }
                }
            }
    return input_grad;
}

// ---------------------------------------------------------------------------
// Reshape adapters
// ---------------------------------------------------------------------------

// (H, W, Dp, F) -> (H, W, Dp*F): spectral and filter axes fuse with depth
// major, filter minor. Row-major layout makes this a pure relabeling.
inline Tensor reshape_3d_to_2d(const Tensor& input) {
    if (input.rank() != 4)
        throw ShapeError("reshape_3d_to_2d: expected rank 4, got " +
                         shape_to_string(input.shape()));
    return input.reshaped({input.dim(0), input.dim(1), input.dim(2) * input.dim(3)});
}

inline Tensor reshape_3d_to_2d_backward(const Tensor& upstream, const Shape& input_shape) {
    return upstream.reshaped(input_shape);
}

// (H, W, F) -> (H, W*F): each row becomes one timestep.
inline Tensor reshape_2d_to_seq(const Tensor& input) {
    if (input.rank() != 3)
        throw ShapeError("reshape_2d_to_seq: expected rank 3, got " +
                         shape_to_string(input.shape()));
    return input.reshaped({input.dim(0), input.dim(1) * input.dim(2)});
}

inline Tensor reshape_2d_to_seq_backward(const Tensor& upstream, const Shape& input_shape) {
    return upstream.reshaped(input_shape);
}

}  // namespace hssnb

#endif  // HSSNB_CONV_HPP
