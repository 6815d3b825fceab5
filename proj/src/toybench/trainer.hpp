// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nn/adam.hpp"
#include "nn/policy_net.hpp"
#include "sampler/sampler.hpp"
#include "sched/diffusion_schedule.hpp"
#include "sched/flow_schedule.hpp"
#include "toybench/dataset.hpp"

namespace propcredit::toybench {

enum class Method {
    DdpoBaseline,
    LogRho,
    EpsMatching,
    PcpoFull,
    TimestepSubsample,
    FlowVanilla,
    FlowProportional,
    FlowUniform,
};

std::string method_name(Method method);
Method parse_method(const std::string& name);
bool supports(Method method, sampler::SamplerKind kind);
/// Methods whose loss is written in terms of prediction differences rather
/// than stored log densities.
bool uses_matching_loss(Method method);

struct DiffusionSetup {
    sched::TrainSchedule train;
    int sample_steps = 20;
    double eta = 0.1;
    int steps_offset = -1;
    std::optional<double> w_star;  // default: mean native weight
};

struct FlowSetup {
    int steps = 16;
    double shift = 3.0;
    sched::FlowSigmaKind sigma_kind = sched::FlowSigmaKind::Constant;
    double eta = 0.3;
};

struct VariantConfig {
    Method method = Method::PcpoFull;
    sampler::SamplerKind sampler = sampler::SamplerKind::Diffusion;
    double xi = 0.1;
    double lr = 3e-4;
    int groups = 8;
    int group_size = 16;
    int inner_epochs = 2;
    int minibatches = 4;
    double subsample_fraction = 0.5;
    /// Precision of rollouts and of the log densities stored with them.
    sampler::Precision rollout_precision = sampler::Precision::Single;
    std::vector<int> train_conditions{8, 9};
    double grad_clip = 1.0;  // global norm; <= 0 disables
    RewardSpec reward;
};

void validate(const VariantConfig& config, const ToyDataset& dataset);

struct EpochMetrics {
    int epoch = 0;
    double reward_mean = 0.0;
    double clip_frac = 0.0;
    double clip_frac_first_step = 0.0;
    double coverage = 0.0;
    double spread = 0.0;
    /// max |log rho - (rho - 1)| / |rho - 1| over active matching-loss terms
    double taylor_gap_max = 0.0;
};

struct RunMetrics {
    std::string variant;
    std::uint64_t seed = 0;
    std::vector<EpochMetrics> epochs;
};

/// RL fine-tuning of one variant from a base policy.
///
/// Each epoch samples a rollout with the current policy (which becomes the old
/// policy), computes group-normalized advantages and then runs the variant's
/// loss for `inner_epochs` passes over shuffled minibatches.
class Trainer {
public:
    Trainer(ToyDataset dataset, nn::PolicyParams base, VariantConfig config, const DiffusionSetup& diffusion,
            const FlowSetup& flow, std::uint64_t seed);

    EpochMetrics rl_epoch();
    RunMetrics run(int epochs);

    const nn::PolicyParams& policy() const { return m_policy; }
    const VariantConfig& config() const { return m_config; }
    int epoch() const { return m_epoch; }
    /// Loss weight per schedule (or grid) index.
    const std::vector<double>& step_weights() const { return m_weights; }
    const sched::DiffusionSchedule* schedule() const { return m_schedule ? &*m_schedule : nullptr; }
    const sched::FlowGrid* grid() const { return m_grid ? &*m_grid : nullptr; }
    const sched::FlowSigma* flow_sigma() const { return m_sigma ? &*m_sigma : nullptr; }
    /// Positions used by each inner epoch of the last rl_epoch call.
    const std::vector<std::vector<int>>& last_positions() const { return m_last_positions; }

    /// Where to write the policy checkpoint when a loss turns non-finite.
    void set_dump_path(std::filesystem::path path) { m_dump_path = std::move(path); }

private:
    struct Batch;

    sampler::Rollout sample(std::span<const int> conds);
    double minibatch_step(const sampler::Rollout& rollout, const Batch& batch, std::span<const int> traj,
                          std::span<const int> positions, std::vector<double>& grad, int& clipped, int& terms,
                          double& taylor);
    [[noreturn]] void abort_numerical(const std::string& what) const;

    ToyDataset m_dataset;
    nn::PolicyParams m_policy;
    VariantConfig m_config;
    std::uint64_t m_seed;
    nn::OptimizerState m_optimizer;
    std::optional<sched::DiffusionSchedule> m_schedule;
    std::optional<sched::FlowGrid> m_grid;
    std::optional<sched::FlowSigma> m_sigma;
    std::vector<double> m_weights;
    int m_epoch = 0;
    std::vector<std::vector<int>> m_last_positions;
    std::optional<std::filesystem::path> m_dump_path;
};

}  // namespace propcredit::toybench
