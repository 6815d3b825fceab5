// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "toybench/pretrain.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "nn/adam.hpp"

namespace propcredit::toybench {

namespace {

void check_config(const ToyDataset& dataset, const nn::Architecture& arch, const PretrainConfig& config) {
    validate(dataset);
    PROPCREDIT_REQUIRE(config.steps >= 0 && config.batch >= 1, "pretraining needs steps >= 0 and batch >= 1");
    PROPCREDIT_REQUIRE(config.lr > 0.0 && config.lr_final > 0.0, "learning rates must be positive");
    PROPCREDIT_REQUIRE(config.cond_dropout >= 0.0 && config.cond_dropout <= 1.0, "cond_dropout must lie in [0, 1]");
    PROPCREDIT_REQUIRE(arch.data_dim == 2, "the toy benchmark is two-dimensional");
    PROPCREDIT_REQUIRE(arch.num_conditions == dataset.num_conditions(),
                       "network condition count must match the dataset vocabulary");
}

double cosine_lr(const PretrainConfig& config, int step) {
    if (config.steps <= 1) return config.lr;
    const double progress = static_cast<double>(step) / (config.steps - 1);
    return config.lr_final + 0.5 * (config.lr - config.lr_final) * (1.0 + std::cos(std::numbers::pi * progress));
}

/// Shared regression loop; `make_batch` fills inputs, times and targets.
template <class MakeBatch>
PretrainResult regress(const ToyDataset& dataset, const nn::Architecture& arch, const PretrainConfig& config,
                       MakeBatch&& make_batch) {
    check_config(dataset, arch, config);
    PretrainResult result{nn::PolicyParams::initialize(arch, config.seed), {}};
    auto state = nn::OptimizerState::for_size(result.params.size(), nn::AdamConfig{config.lr});
    std::vector<double> grad(result.params.size());
    const auto n = static_cast<Eigen::Index>(config.batch);
    std::vector<int> conds(static_cast<std::size_t>(config.batch));
    std::vector<double> times(conds.size());
    Eigen::MatrixXd input(2, n), target(2, n);

    for (int step = 0; step < config.steps; ++step) {
        CounterRng rng(config.seed, make_stream(StreamTag::Pretrain, static_cast<std::uint64_t>(step)));
        for (auto& c : conds) {
            c = static_cast<int>(rng.uniform() * dataset.num_conditions()) % dataset.num_conditions();
            if (rng.uniform() < config.cond_dropout) c = dataset.null_condition();
        }
        const Eigen::MatrixXd x0 =
            sample_data(dataset, conds, make_stream(StreamTag::Pretrain, static_cast<std::uint64_t>(step), 1));
        make_batch(rng, x0, input, times, target);

        nn::ForwardCache<double> cache;
        const Eigen::MatrixXd pred =
            nn::predict_batch<double>(arch, result.params.values(), input, times, conds, &cache);
        const Eigen::MatrixXd diff = pred - target;
        const double loss = diff.squaredNorm() / static_cast<double>(n);
        if (!std::isfinite(loss)) throw_numerical("pretraining diverged at step " + std::to_string(step));
        result.loss.push_back(loss);

        std::fill(grad.begin(), grad.end(), 0.0);
        nn::backward(arch, result.params.values(), cache, (2.0 / static_cast<double>(n)) * diff, grad);
        state.config.lr = cosine_lr(config, step);
        nn::adam_step(result.params.values(), grad, state);
    }
    return result;
}

}  // namespace

PretrainResult pretrain_diffusion(const ToyDataset& dataset, const nn::Architecture& arch,
                                  const sched::TrainSchedule& schedule, const PretrainConfig& config) {
    const int T = schedule.size();
    PROPCREDIT_REQUIRE(T >= 2, "training schedule needs at least two steps");
    return regress(dataset, arch, config,
                   [&](CounterRng& rng, const Eigen::MatrixXd& x0, Eigen::MatrixXd& input, std::vector<double>& times,
                       Eigen::MatrixXd& target) {
                       for (Eigen::Index i = 0; i < x0.cols(); ++i) {
                           const int t = static_cast<int>(rng.uniform() * T) % T;
                           const double ab = schedule.alpha_bar[static_cast<std::size_t>(t)];
                           for (Eigen::Index j = 0; j < 2; ++j) {
                               const double eps = rng.normal();
                               target(j, i) = eps;
                               input(j, i) = std::sqrt(ab) * x0(j, i) + std::sqrt(1.0 - ab) * eps;
                           }
                           times[static_cast<std::size_t>(i)] = static_cast<double>(t) / (T - 1);
                       }
                   });
}

PretrainResult pretrain_flow(const ToyDataset& dataset, const nn::Architecture& arch, const PretrainConfig& config) {
    return regress(dataset, arch, config,
                   [&](CounterRng& rng, const Eigen::MatrixXd& x0, Eigen::MatrixXd& input, std::vector<double>& times,
                       Eigen::MatrixXd& target) {
                       for (Eigen::Index i = 0; i < x0.cols(); ++i) {
                           const double t = rng.uniform();
                           for (Eigen::Index j = 0; j < 2; ++j) {
                               const double eps = rng.normal();
                               target(j, i) = eps - x0(j, i);
                               input(j, i) = (1.0 - t) * x0(j, i) + t * eps;
                           }
                           times[static_cast<std::size_t>(i)] = t;
                       }
                   });
}

namespace {

std::vector<std::uint64_t> eval_streams(std::size_t n) {
    std::vector<std::uint64_t> streams(n);
    for (std::size_t i = 0; i < n; ++i) streams[i] = make_stream(StreamTag::Evaluation, 0, i);
    return streams;
}

}  // namespace

Eigen::MatrixXd deterministic_samples(const nn::PolicyParams& params, const sched::DiffusionSchedule& schedule,
                                      std::span<const int> conds, std::uint64_t seed) {
    const auto ode =
        sched::make_ddim_schedule(schedule.base, static_cast<int>(schedule.size()), 0.0, false, schedule.steps.front());
    const auto streams = eval_streams(conds.size());
    const sampler::PolicySet set{&params, {}};
    const sampler::SampleRequest req{conds, seed, streams, sampler::Precision::Double};
    return sampler::ddim_reverse_sample(set, ode, {}, req).final_samples();
}

Eigen::MatrixXd deterministic_samples(const nn::PolicyParams& params, const sched::FlowGrid& grid,
                                      std::span<const int> conds, std::uint64_t seed) {
    const auto sigma = sched::flow_sigma(grid, sched::FlowSigmaKind::Constant, 1.0);
    const auto streams = eval_streams(conds.size());
    const sampler::PolicySet set{&params, {}};
    const sampler::SampleRequest req{conds, seed, streams, sampler::Precision::Double};
    return sampler::flow_sde_sample(set, grid, sigma, {}, req, true).final_samples();
}

}  // namespace propcredit::toybench
