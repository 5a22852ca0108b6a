#ifndef HSSNB_TENSOR_HPP
#define HSSNB_TENSOR_HPP

// Dense row-major N-dimensional array plus the few numeric kernels the rest
// of the library is built on: matmul, outer, hadamard, Glorot initialization,
// and a deterministic counter-based RNG.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hssnb/errors.hpp"

namespace hssnb {

// Arithmetic type for all activations, weights and gradients. Double by
// default; finite-difference agreement below ~1e-6 is not reachable in
// single precision for deep chains.
#ifdef HSSNB_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

inline std::string shape_to_string(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

// Row-major dense tensor (last index fastest). Values are plain storage:
// operations below never mutate their inputs.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        data_.assign(element_count(shape_), Real(0));
    }

    Tensor(Shape shape, std::vector<Real> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (element_count(shape_) != data_.size())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_to_string(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, Real value) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }
    std::vector<Real>& values() { return data_; }
    const std::vector<Real>& values() const { return data_; }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }

    Real& operator()(std::size_t i) {
        assert(rank() == 1);
        return data_[i];
    }
    Real operator()(std::size_t i) const {
        assert(rank() == 1);
        return data_[i];
    }
    Real& operator()(std::size_t i, std::size_t j) {
        assert(rank() == 2);
        return data_[i * shape_[1] + j];
    }
    Real operator()(std::size_t i, std::size_t j) const {
        assert(rank() == 2);
        return data_[i * shape_[1] + j];
    }
    Real& operator()(std::size_t i, std::size_t j, std::size_t k) {
        assert(rank() == 3);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    Real operator()(std::size_t i, std::size_t j, std::size_t k) const {
        assert(rank() == 3);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    Real& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        assert(rank() == 4);
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    Real operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        assert(rank() == 4);
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    // Relabels the axes; the flat buffer is unchanged.
    Tensor reshaped(Shape new_shape) const {
        if (element_count(new_shape) != data_.size())
            throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                             shape_to_string(new_shape));
        return Tensor(std::move(new_shape), data_);
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(Real value) {
        for (auto& v : data_) v = value;
    }

    static std::size_t element_count(const Shape& shape) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }

private:
    Shape shape_;
    std::vector<Real> data_;
};

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

// Counter-based generator (splitmix64 over an incrementing state). The whole
// stream is a function of the seed alone, identical across runs and
// platforms; distribution transforms are implemented here rather than taken
// from <random>, whose distributions are not bit-specified.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    Real uniform() { return Real(next_u64() >> 11) * Real(0x1.0p-53); }

    Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one spare cached per pair.
    Real normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        Real u1 = uniform();
        Real u2 = uniform();
        if (u1 < Real(1e-300)) u1 = Real(1e-300);
        const Real r = std::sqrt(Real(-2) * std::log(u1));
        const Real theta = Real(2) * Real(3.14159265358979323846) * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Uniform integer in [0, n). Modulo bias is ~n/2^64, irrelevant here.
    std::size_t below(std::size_t n) {
        assert(n > 0);
        return static_cast<std::size_t>(next_u64() % n);
    }

    // Derives an independent stream from a base seed and a stream index.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0xD6E8FEB86659FD93ULL * (stream + 1)));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
    Real spare_ = 0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul shape mismatch: " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const Real av = a(i, p);
            for (std::size_t j = 0; j < n; ++j) out(i, j) += av * b(p, j);
        }
    }
    return out;
}

inline Tensor outer(const Tensor& u, const Tensor& v) {
    if (u.rank() != 1 || v.rank() != 1)
        throw ShapeError("outer expects vectors, got " + shape_to_string(u.shape()) +
                         " and " + shape_to_string(v.shape()));
    const std::size_t m = u.dim(0), n = v.dim(0);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = u[i] * v[j];
    return out;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("hadamard shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

// Uniform samples in +-sqrt(6/(fan_in+fan_out)). Biases stay zero; callers
// never pass them through here.
inline Tensor glorot_init(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    if (fan_in < 1 || fan_out < 1) throw ParamError("glorot_init: fan counts must be >= 1");
    const Real limit = std::sqrt(Real(6) / Real(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

// y = M x for rank-2 M and rank-1 x; accumulate variant adds into out.
inline void matvec_add(const Tensor& m, const Real* x, Real* out) {
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    const Real* w = m.data();
    for (std::size_t i = 0; i < rows; ++i) {
        Real acc = 0;
        const Real* row = w + i * cols;
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        out[i] += acc;
    }
}

// out += M^T x.
inline void matvec_transposed_add(const Tensor& m, const Real* x, Real* out) {
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    const Real* w = m.data();
    for (std::size_t i = 0; i < rows; ++i) {
        const Real xi = x[i];
        const Real* row = w + i * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * xi;
    }
}

}  // namespace hssnb

#endif  // HSSNB_TENSOR_HPP
