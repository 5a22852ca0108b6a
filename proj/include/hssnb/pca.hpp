#ifndef HSSNB_PCA_HPP
#define HSSNB_PCA_HPP

// Spectral dimensionality reduction: exact eigendecomposition of the C x C
// pixel covariance (cyclic Jacobi), top-S components, deterministic sign
// convention. The spatial dimensions pass through untouched.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "hssnb/dataset.hpp"
#include "hssnb/errors.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

struct PcaModel {
    std::vector<Real> mean;               // length C
    Tensor components;                    // [C][S], orthonormal columns
    std::vector<Real> explained_variance; // length S, non-increasing
};

namespace detail {

// Cyclic Jacobi for symmetric matrices. Returns eigenvalues in `values` and
// eigenvectors as columns of `vectors`, unsorted.
inline void jacobi_eigen_symmetric(const Tensor& sym, std::vector<Real>& values,
                                   Tensor& vectors) {
    const std::size_t n = sym.dim(0);
    Tensor a = sym;
    vectors = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) vectors(i, i) = 1;

    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        Real off = 0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < Real(1e-300)) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const Real apq = a(p, q);
                if (std::abs(apq) < Real(1e-300)) continue;
                const Real app = a(p, p), aqq = a(q, q);
                const Real tau = (aqq - app) / (2 * apq);
                const Real t = (tau >= 0 ? Real(1) : Real(-1)) /
                               (std::abs(tau) + std::sqrt(1 + tau * tau));
                const Real c = 1 / std::sqrt(1 + t * t);
                const Real s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const Real akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const Real apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const Real vkp = vectors(k, p), vkq = vectors(k, q);
                    vectors(k, p) = c * vkp - s * vkq;
                    vectors(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    values.resize(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
}

}  // namespace detail

// Fits on every pixel of the cube (labeled and unlabeled alike). Components
// are the top-S eigenvectors of the sample covariance, eigenvalue-descending;
// each component is flipped so its largest-magnitude entry is positive.
inline PcaModel pca_fit(const HsiCube& cube, std::size_t S) {
    const std::size_t C = cube.bands;
    const std::size_t pixels = cube.width * cube.height;
    if (S < 1 || S > C)
        throw ParamError("pca_fit: S must be in 1.." + std::to_string(C) + ", got " +
                         std::to_string(S));
    if (pixels < S + 1) throw ParamError("pca_fit: need at least S+1 pixels");

    PcaModel model;
    model.mean.assign(C, 0);
    const Real* v = cube.values.data();
    for (std::size_t p = 0; p < pixels; ++p)
        for (std::size_t b = 0; b < C; ++b) model.mean[b] += v[p * C + b];
    for (auto& m : model.mean) m /= Real(pixels);

    Tensor cov({C, C});
    std::vector<Real> centered(C);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t b = 0; b < C; ++b) centered[b] = v[p * C + b] - model.mean[b];
        for (std::size_t i = 0; i < C; ++i) {
            const Real ci = centered[i];
            for (std::size_t j = i; j < C; ++j) cov(i, j) += ci * centered[j];
        }
    }
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = i; j < C; ++j) {
            cov(i, j) /= Real(pixels - 1);
            cov(j, i) = cov(i, j);
        }

    std::vector<Real> eigenvalues;
    Tensor eigenvectors;
    detail::jacobi_eigen_symmetric(cov, eigenvalues, eigenvectors);

    std::vector<std::size_t> idx(C);
    for (std::size_t i = 0; i < C; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return eigenvalues[a] > eigenvalues[b]; });

    model.components = Tensor({C, S});
    model.explained_variance.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
        const std::size_t col = idx[s];
        model.explained_variance[s] = eigenvalues[col];
        std::size_t arg = 0;
        Real best = 0;
        for (std::size_t i = 0; i < C; ++i) {
            const Real mag = std::abs(eigenvectors(i, col));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        const Real sign = eigenvectors(arg, col) < 0 ? Real(-1) : Real(1);
        for (std::size_t i = 0; i < C; ++i) model.components(i, s) = sign * eigenvectors(i, col);
    }
    return model;
}

inline HsiCube pca_apply(const PcaModel& model, const HsiCube& cube) {
    const std::size_t C = model.mean.size();
    const std::size_t S = model.components.dim(1);
    if (cube.bands != C)
        throw ShapeError("pca_apply: cube has " + std::to_string(cube.bands) +
                         " bands, model expects " + std::to_string(C));

    HsiCube out;
    out.width = cube.width;
    out.height = cube.height;
    out.bands = S;
    out.values = Tensor({cube.height, cube.width, S});

    const std::size_t pixels = cube.width * cube.height;
    const Real* src = cube.values.data();
    Real* dst = out.values.data();
    std::vector<Real> centered(C);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t b = 0; b < C; ++b) centered[b] = src[p * C + b] - model.mean[b];
        for (std::size_t s = 0; s < S; ++s) {
            Real acc = 0;
            for (std::size_t b = 0; b < C; ++b) acc += model.components(b, s) * centered[b];
            dst[p * S + s] = acc;
        }
    }
    return out;
}

}  // namespace hssnb

#endif  // HSSNB_PCA_HPP
