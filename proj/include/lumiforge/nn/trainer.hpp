#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <type_traits>
#include <vector>

#include "lumiforge/error.hpp"
#include "lumiforge/nn/checkpoint.hpp"
#include "lumiforge/nn/network.hpp"
#include "lumiforge/nn/params.hpp"
#include "lumiforge/parallel.hpp"
#include "lumiforge/scene.hpp"

namespace lumiforge::nn {

struct TrainConfig {
    std::size_t steps = 1000;
    std::size_t batch = 16;
    AdamConfig adam{};
    std::uint64_t seed = 1;
    bool augment = true;
    AugmentPolicy augment_policy{};
    std::size_t threads = 1;
    std::filesystem::path loss_csv;     // empty: no CSV
    std::filesystem::path dump_path;    // checkpoint written on divergence (empty: none)
    std::size_t checkpoint_every = 0;   // 0: never
    std::filesystem::path checkpoint_path;
};

struct TrainLog {
    std::vector<double> loss;  // one entry per step
};

/// Masked MSE of one prediction and its gradient w.r.t. the (padded) residual.
/// The loss is summed, not averaged: callers divide by the batch's valid count.
template <class T>
struct SampleLoss {
    double sum_sq = 0.0;
    std::size_t valid = 0;
};

template <class T>
SampleLoss<T> residual_loss(const PreparedInput<T>& in, const Tensor4<T>& residual, const Epi& hr,
                            Tensor4<T>* d_residual, double grad_scale) {
    const Epi& up = in.upsampled;
    if (up.views() != hr.views() || up.pixels() != hr.pixels()) throw ShapeError("LR/HR pair shapes do not match");
    SampleLoss<T> s;
    if (d_residual) *d_residual = Tensor4<T>(residual.n(), residual.c(), residual.h(), residual.w());
    for (std::size_t u = 0; u < hr.views(); ++u)
        for (std::size_t x = 0; x < hr.pixels(); ++x) {
            if (!hr.valid(u, x) || !up.valid(u, x)) continue;
            ++s.valid;
            for (std::size_t c = 0; c < kChannels; ++c) {
                const double e = double(up(u, x, c)) + double(residual(0, c, u, x)) - double(hr(u, x, c));
                s.sum_sq += e * e;
                if (d_residual) (*d_residual)(0, c, u, x) = T(2.0 * e * grad_scale);
            }
        }
    return s;
}

/// Mean masked MSE of the network on `pairs` (no clamping, as in training).
template <class T>
double evaluate_loss(const Network<T>& net, const std::vector<TrainingPair>& pairs, std::size_t threads = 1) {
    std::vector<SampleLoss<T>> parts(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        const auto in = prepare_input(net, pairs[i].lr);
        typename Network<T>::Cache cache;
        parts[i] = residual_loss<T>(in, net.forward(in.padded, cache), pairs[i].hr, nullptr, 0.0);
    });
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : parts) {
        sum += p.sum_sq;
        n += p.valid;
    }
    if (n == 0) throw DomainError("no valid pixels to evaluate");
    return sum / double(n * kChannels);
}

/// Minibatch Adam on masked MSE. Batches and augmentations come from
/// per-step RNG streams; per-sample gradients are reduced in index order, so
/// the result does not depend on `threads`.
template <class T>
TrainLog train(Network<T>& net, const std::vector<TrainingPair>& data, const TrainConfig& cfg,
               const std::function<void(std::size_t, double)>& on_step = {}) {
    if (data.empty()) throw DomainError("training set is empty");
    if (cfg.batch == 0) throw DomainError("batch size must be >= 1");
    std::ofstream csv;
    if (!cfg.loss_csv.empty()) {
        if (cfg.loss_csv.has_parent_path()) std::filesystem::create_directories(cfg.loss_csv.parent_path());
        csv.open(cfg.loss_csv);
        if (!csv) throw IoError("cannot write " + cfg.loss_csv.string());
        csv << "step,loss\n" << std::setprecision(9);
    }
    auto& store = net.params();
    const std::uint64_t first_step = store.adam_step();
    TrainLog log;
    std::vector<GradBuffer<T>> grads(cfg.batch, store.make_grad_buffer());
    std::vector<SampleLoss<T>> losses(cfg.batch);
    std::vector<TrainingPair> batch(cfg.batch);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::uint64_t global_step = first_step + step;
        auto rng = item_rng(cfg.seed, global_step, 0x7a11);
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const auto& src = data[draw_index(rng, data.size())];
            batch[b] = cfg.augment ? augment(src, rng, cfg.augment_policy) : src;
        }
        std::vector<PreparedInput<T>> inputs(cfg.batch);
        std::size_t valid = 0;
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            inputs[b] = prepare_input(net, batch[b].lr);
            const Epi& up = inputs[b].upsampled;
            for (std::size_t u = 0; u < up.views(); ++u)
                for (std::size_t x = 0; x < up.pixels(); ++x) valid += up.valid(u, x) && batch[b].hr.valid(u, x);
        }
        if (valid == 0) throw DomainError("training batch has no valid pixels");
        const double scale = 1.0 / double(valid * kChannels);

        parallel_for(cfg.batch, cfg.threads, [&](std::size_t b) {
            typename Network<T>::Cache cache;
            const Tensor4<T> res = net.forward(inputs[b].padded, cache);
            Tensor4<T> d_res;
            losses[b] = residual_loss(inputs[b], res, batch[b].hr, &d_res, scale);
            grads[b].zero();
            net.backward(cache, d_res, grads[b]);
        });

        double loss = 0.0;
        for (const auto& l : losses) loss += l.sum_sq;
        loss *= scale;
        if (!std::isfinite(loss)) {
            if constexpr (std::is_same_v<T, float>) {
                if (!cfg.dump_path.empty()) save_checkpoint(cfg.dump_path, net, {global_step, {{"diverged", true}}});
            }
            throw DivergenceError("loss is not finite at step " + std::to_string(global_step));
        }
        store.zero_grads();
        for (const auto& g : grads) store.accumulate(g);
        adam_step(store, cfg.adam);

        log.loss.push_back(loss);
        if (csv) csv << global_step << ',' << loss << '\n';
        if (on_step) on_step(global_step, loss);
        if constexpr (std::is_same_v<T, float>) {
            if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() && (step + 1) % cfg.checkpoint_every == 0) {
                save_checkpoint(cfg.checkpoint_path, net, {global_step + 1});
            }
        }
    }
    return log;
}

}  // namespace lumiforge::nn
