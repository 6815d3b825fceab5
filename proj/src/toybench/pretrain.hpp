// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nn/policy_net.hpp"
#include "sampler/sampler.hpp"
#include "sched/diffusion_schedule.hpp"
#include "sched/flow_schedule.hpp"
#include "toybench/dataset.hpp"

namespace propcredit::toybench {

struct PretrainConfig {
    int steps = 3000;
    int batch = 256;
    double lr = 2e-3;
    double lr_final = 1e-4;  // cosine decay target
    double cond_dropout = 0.1;
    std::uint64_t seed = 0;
};

struct PretrainResult {
    nn::PolicyParams params;
    std::vector<double> loss;  // per step
};

/// Noise-prediction regression on the dense training schedule.
PretrainResult pretrain_diffusion(const ToyDataset& dataset, const nn::Architecture& arch,
                                  const sched::TrainSchedule& schedule, const PretrainConfig& config);

/// Velocity regression on z_t = (1 - t) x0 + t eps with target eps - x0.
PretrainResult pretrain_flow(const ToyDataset& dataset, const nn::Architecture& arch, const PretrainConfig& config);

/// Noise-free samples: DDIM with sigma = 0, or the flow ODE.
Eigen::MatrixXd deterministic_samples(const nn::PolicyParams& params, const sched::DiffusionSchedule& schedule,
                                      std::span<const int> conds, std::uint64_t seed);
Eigen::MatrixXd deterministic_samples(const nn::PolicyParams& params, const sched::FlowGrid& grid,
                                      std::span<const int> conds, std::uint64_t seed);

}  // namespace propcredit::toybench
