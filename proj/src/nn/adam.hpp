// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace propcredit::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    static OptimizerState for_size(std::size_t n, AdamConfig config);
};

/// One bias-corrected Adam update of params in place.
void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state);

}  // namespace propcredit::nn
