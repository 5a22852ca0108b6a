#ifndef HSSNB_PATCHES_HPP
#define HSSNB_PATCHES_HPP

// D x D x S patch extraction around every labeled pixel (zero-padded at the
// borders, label = central pixel) and the per-class stratified train/test
// split.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <utility>
#include <vector>

#include "hssnb/dataset.hpp"
#include "hssnb/errors.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

struct PatchSet {
    Tensor patches;  // [M][D][D][S]
    Tensor labels;   // [M][N] one-hot
    std::vector<std::pair<std::size_t, std::size_t>> coords;  // (row, col) per patch

    std::size_t count() const { return coords.size(); }
    std::size_t window() const { return patches.rank() == 4 ? patches.dim(1) : 0; }
    std::size_t depth() const { return patches.rank() == 4 ? patches.dim(3) : 0; }
    std::size_t class_count() const { return labels.rank() == 2 ? labels.dim(1) : 0; }

    std::size_t label_index(std::size_t i) const {  // 0-based class index
        const std::size_t n = class_count();
        for (std::size_t k = 0; k < n; ++k)
            if (labels(i, k) == Real(1)) return k;
        return 0;
    }
};

// One patch per labeled pixel, (row, col) ascending. The cube is implicitly
// zero-padded by (D-1)/2 on each spatial edge.
inline PatchSet extract_patches(const HsiCube& cube, const LabelMap& labels, std::size_t D) {
    if (D % 2 == 0 || D < 1) throw ParamError("extract_patches: window must be odd");
    if (cube.width != labels.width || cube.height != labels.height)
        throw ShapeError("extract_patches: cube and label map dimensions differ");

    const std::size_t M = labels.labeled_count();
    if (M == 0) throw DataError("extract_patches: dataset has no labeled pixels");

    const std::size_t S = cube.bands;
    const std::size_t N = labels.class_count;
    const std::ptrdiff_t pad = std::ptrdiff_t((D - 1) / 2);

    PatchSet set;
    set.patches = Tensor({M, D, D, S});
    set.labels = Tensor({M, N});
    set.coords.reserve(M);

    std::size_t m = 0;
    for (std::size_t r = 0; r < cube.height; ++r) {
        for (std::size_t c = 0; c < cube.width; ++c) {
            const std::uint16_t cls = labels.label(r, c);
            if (cls == 0) continue;
            for (std::size_t dr = 0; dr < D; ++dr) {
                const std::ptrdiff_t src_r = std::ptrdiff_t(r) + std::ptrdiff_t(dr) - pad;
                if (src_r < 0 || src_r >= std::ptrdiff_t(cube.height)) continue;  // stays zero
                for (std::size_t dc = 0; dc < D; ++dc) {
                    const std::ptrdiff_t src_c = std::ptrdiff_t(c) + std::ptrdiff_t(dc) - pad;
                    if (src_c < 0 || src_c >= std::ptrdiff_t(cube.width)) continue;
                    for (std::size_t s = 0; s < S; ++s)
                        set.patches(m, dr, dc, s) =
                            cube.at(std::size_t(src_r), std::size_t(src_c), s);
                }
            }
            set.labels(m, cls - 1) = 1;
            set.coords.emplace_back(r, c);
            ++m;
        }
    }
    return set;
}

namespace detail {

inline PatchSet gather_patches(const PatchSet& set, const std::vector<std::size_t>& indices) {
    const std::size_t D = set.window(), S = set.depth(), N = set.class_count();
    PatchSet out;
    out.patches = Tensor({indices.size(), D, D, S});
    out.labels = Tensor({indices.size(), N});
    out.coords.reserve(indices.size());
    const std::size_t patch_len = D * D * S;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        std::copy_n(set.patches.data() + src * patch_len, patch_len,
                    out.patches.data() + i * patch_len);
        std::copy_n(set.labels.data() + src * N, N, out.labels.data() + i * N);
        out.coords.push_back(set.coords[src]);
    }
    return out;
}

}  // namespace detail

// Per-class split: round(train_fraction * class_size) samples into train
// (nearest integer, at least 1). A single-sample class goes entirely to
// train with a warning. Subsets keep the input (row, col) ordering.
inline std::pair<PatchSet, PatchSet> stratified_split(const PatchSet& set, Real train_fraction,
                                                      Rng& rng) {
    if (!(train_fraction > 0 && train_fraction < 1))
        throw ParamError("stratified_split: train_fraction must be in (0,1)");

    const std::size_t N = set.class_count();
    std::vector<std::vector<std::size_t>> by_class(N);
    for (std::size_t i = 0; i < set.count(); ++i) by_class[set.label_index(i)].push_back(i);

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t k = 0; k < N; ++k) {
        auto& members = by_class[k];
        if (members.empty()) continue;
        if (members.size() == 1) {
            std::cerr << "warning: class " << (k + 1)
                      << " has a single sample; assigning it to train\n";
            train_idx.push_back(members[0]);
            continue;
        }
        std::size_t n_train = std::size_t(
            std::lround(double(train_fraction) * double(members.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size());

        for (std::size_t i = members.size() - 1; i > 0; --i) {
            const std::size_t j = rng.below(i + 1);
            std::swap(members[i], members[j]);
        }
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_train ? train_idx : test_idx).push_back(members[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {detail::gather_patches(set, train_idx), detail::gather_patches(set, test_idx)};
}

}  // namespace hssnb

#endif  // HSSNB_PATCHES_HPP
