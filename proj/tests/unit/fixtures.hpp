// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>

#include "nn/policy_net.hpp"
#include "sched/diffusion_schedule.hpp"
#include "toybench/dataset.hpp"
#include "toybench/pretrain.hpp"

namespace fixture {

inline propcredit::nn::Architecture toy_arch(int modes = 8) {
    propcredit::nn::Architecture a;
    a.num_conditions = modes + 2;
    return a;
}

inline const propcredit::toybench::ToyDataset& ring() {
    static const auto ds = propcredit::toybench::ring_dataset(8, 3.0, 0.2, 0);
    return ds;
}

inline const propcredit::sched::TrainSchedule& sd_schedule() {
    static const auto s =
        propcredit::sched::build_train_schedule(1000, 8.5e-4, 1.2e-2, propcredit::sched::BetaKind::ScaledLinear);
    return s;
}

/// Pretrained once per process.
inline const propcredit::nn::PolicyParams& diffusion_policy(int steps) {
    static std::map<int, propcredit::nn::PolicyParams> cache;
    auto it = cache.find(steps);
    if (it == cache.end()) {
        propcredit::toybench::PretrainConfig cfg;
        cfg.steps = steps;
        it = cache.emplace(steps, propcredit::toybench::pretrain_diffusion(ring(), toy_arch(), sd_schedule(), cfg).params)
                 .first;
    }
    return it->second;
}

inline const propcredit::nn::PolicyParams& flow_policy(int steps) {
    static std::map<int, propcredit::nn::PolicyParams> cache;
    auto it = cache.find(steps);
    if (it == cache.end()) {
        propcredit::toybench::PretrainConfig cfg;
        cfg.steps = steps;
        it = cache.emplace(steps, propcredit::toybench::pretrain_flow(ring(), toy_arch(), cfg).params).first;
    }
    return it->second;
}

}  // namespace fixture
