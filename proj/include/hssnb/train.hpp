#ifndef HSSNB_TRAIN_HPP
#define HSSNB_TRAIN_HPP

// Mini-batch training with Adam, per-epoch shuffling and deterministic seed
// fan-out (seed+1 init, seed+2 split, seed+3 shuffle, seed+4 dropout).
// Within a batch, patches can be processed by worker threads over fixed
// contiguous chunks; chunk accumulators are reduced in chunk order, so a
// given thread count always reproduces itself and threads=1 is the
// bit-reproducible serial mode.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "hssnb/errors.hpp"
#include "hssnb/network.hpp"
#include "hssnb/patches.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    Real learning_rate = Real(1e-3);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real epsilon = Real(1e-8);
    Real train_fraction = Real(0.3);
    std::size_t window = 25;
    std::size_t pca_dims = 30;
    std::uint64_t seed = 42;
    std::size_t threads = 1;

    std::uint64_t init_seed() const { return seed + 1; }
    std::uint64_t split_seed() const { return seed + 2; }
    std::uint64_t shuffle_seed() const { return seed + 3; }
    std::uint64_t dropout_seed() const { return seed + 4; }
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based in reports
    Real loss = 0;
    Real train_accuracy = 0;
};

struct AdamState {
    std::vector<Tensor> m, v;
    std::size_t step = 0;

    void init(HssnbModel& model) {
        m.clear();
        v.clear();
        for (auto& [name, t] : parameter_tensors(model)) {
            m.emplace_back(t->shape());
            v.emplace_back(t->shape());
        }
        step = 0;
    }
};

// One Adam update for a single tensor with bias correction.
inline void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                        std::size_t step, Real lr, Real beta1, Real beta2, Real eps) {
    const Real c1 = 1 - std::pow(beta1, Real(step));
    const Real c2 = 1 - std::pow(beta2, Real(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const Real g = grad[i];
        m[i] = beta1 * m[i] + (1 - beta1) * g;
        v[i] = beta2 * v[i] + (1 - beta2) * g * g;
        const Real m_hat = m[i] / c1;
        const Real v_hat = v[i] / c2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

inline void adam_step(HssnbModel& model, ModelGrads& grads, AdamState& state,
                      const TrainConfig& cfg) {
    auto params = parameter_tensors(model);
    auto gs = grads.tensors();
    if (state.m.size() != params.size()) state.init(model);
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i)
        adam_update(*params[i].second, *gs[i].second, state.m[i], state.v[i], state.step,
                    cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
}

inline Tensor patch_at(const PatchSet& set, std::size_t i) {
    const std::size_t D = set.window(), S = set.depth();
    const std::size_t len = D * D * S;
    std::vector<Real> data(set.patches.data() + i * len, set.patches.data() + (i + 1) * len);
    return Tensor({D, D, S}, std::move(data));
}

inline Tensor one_hot_at(const PatchSet& set, std::size_t i) {
    const std::size_t N = set.class_count();
    std::vector<Real> data(set.labels.data() + i * N, set.labels.data() + (i + 1) * N);
    return Tensor({N}, std::move(data));
}

// Argmax with ties broken toward the lower class index; returns 1-based
// class labels.
inline std::uint16_t argmax_label(const Tensor& probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return std::uint16_t(best + 1);
}

namespace detail {

struct BatchChunkResult {
    ModelGrads grads;
    bool finite = true;
    std::size_t correct = 0;
};

}  // namespace detail

// Returns per-epoch loss / training-accuracy history. Throws NumericError
// naming the epoch and batch if the loss stops being finite.
inline std::vector<EpochStats> train(HssnbModel& model, const PatchSet& train_set,
                                     const TrainConfig& cfg) {
    const std::size_t M = train_set.count();
    if (M == 0) throw ParamError("train: empty training set");
    if (cfg.epochs < 1) throw ParamError("train: epochs must be >= 1");
    const std::size_t B = std::max<std::size_t>(1, cfg.batch_size);
    const std::size_t threads = std::max<std::size_t>(1, cfg.threads);

    Rng shuffle_rng(cfg.shuffle_seed());
    AdamState opt;
    opt.init(model);

    std::vector<std::size_t> order(M);
    for (std::size_t i = 0; i < M; ++i) order[i] = i;

    std::vector<EpochStats> history;
    history.reserve(cfg.epochs);

    // Per-sample losses are written at the dataset index and reduced in
    // index order at epoch end, so the reported epoch loss does not depend
    // on the shuffle or the thread partitioning.
    std::vector<Real> sample_loss(M, 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = M - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.below(i + 1);
            std::swap(order[i], order[j]);
        }

        std::size_t epoch_correct = 0;

        const std::size_t batches = (M + B - 1) / B;
        for (std::size_t batch = 0; batch < batches; ++batch) {
            const std::size_t begin = batch * B;
            const std::size_t end = std::min(M, begin + B);
            const std::size_t count = end - begin;
            const std::size_t workers = std::min(threads, count);

            std::vector<detail::BatchChunkResult> chunks;
            chunks.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w)
                chunks.push_back({ModelGrads::zeros_like(model), true, 0});

            auto run_chunk = [&](std::size_t w) {
                const std::size_t chunk_begin = begin + w * count / workers;
                const std::size_t chunk_end = begin + (w + 1) * count / workers;
                auto& out = chunks[w];
                for (std::size_t pos = chunk_begin; pos < chunk_end; ++pos) {
                    const std::size_t idx = order[pos];
                    const Tensor patch = patch_at(train_set, idx);
                    const Tensor target = one_hot_at(train_set, idx);
                    // Dropout stream depends only on (seed, epoch, position):
                    // identical for every thread partitioning.
                    Rng dropout_rng(Rng::derive(cfg.dropout_seed(), epoch * M + pos));
                    ModelCache cache;
                    const Tensor probs = model_forward(model, patch, true, &dropout_rng, &cache);
                    auto [loss, grad_logits] = cross_entropy_loss(probs, target);
                    sample_loss[idx] = loss;
                    out.finite = out.finite && std::isfinite(loss);
                    std::size_t truth = 0;
                    for (std::size_t k = 0; k < target.size(); ++k)
                        if (target[k] == Real(1)) truth = k;
                    if (argmax_label(probs) == truth + 1) ++out.correct;
                    model_backward(model, cache, grad_logits, out.grads, nullptr);
                }
            };

            if (workers == 1) {
                run_chunk(0);
            } else {
                std::vector<std::thread> pool;
                pool.reserve(workers);
                for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_chunk, w);
                for (auto& t : pool) t.join();
            }

            ModelGrads& batch_grads = chunks[0].grads;
            bool finite = chunks[0].finite;
            for (std::size_t w = 1; w < workers; ++w) {
                batch_grads.add(chunks[w].grads);
                finite = finite && chunks[w].finite;
            }
            for (std::size_t w = 0; w < workers; ++w) epoch_correct += chunks[w].correct;

            if (!finite)
                throw NumericError("training diverged (non-finite loss) at epoch " +
                                   std::to_string(epoch + 1) + ", batch " +
                                   std::to_string(batch + 1));

            batch_grads.scale(Real(1) / Real(count));
            adam_step(model, batch_grads, opt, cfg);
        }

        Real epoch_loss = 0;
        for (std::size_t i = 0; i < M; ++i) epoch_loss += sample_loss[i];
        history.push_back({epoch + 1, epoch_loss / Real(M), Real(epoch_correct) / Real(M)});
    }
    return history;
}

// Argmax prediction for every patch; independent of batch partitioning.
inline std::vector<std::uint16_t> predict(const HssnbModel& model, const PatchSet& set,
                                          std::size_t threads = 1) {
    const std::size_t M = set.count();
    std::vector<std::uint16_t> labels(M);
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, M));

    auto run = [&](std::size_t w) {
        const std::size_t begin = w * M / workers;
        const std::size_t end = (w + 1) * M / workers;
        for (std::size_t i = begin; i < end; ++i) {
            const Tensor probs = model_forward(model, patch_at(set, i), false, nullptr, nullptr);
            labels[i] = argmax_label(probs);
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    return labels;
}

}  // namespace hssnb

#endif  // HSSNB_TRAIN_HPP
