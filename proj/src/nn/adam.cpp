// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nn/adam.hpp"

#include <cmath>

#include "common/error.hpp"

namespace propcredit::nn {

OptimizerState OptimizerState::for_size(std::size_t n, AdamConfig config) {
    OptimizerState s;
    s.config = config;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state) {
    PROPCREDIT_REQUIRE(params.size() == grads.size() && state.m.size() == params.size() && state.v.size() == params.size(),
                       "optimizer state does not match parameter size");
    const auto& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

}  // namespace propcredit::nn
