// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "sched/flow_schedule.hpp"

#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace propcredit::sched {

FlowGrid build_flow_grid(int num_steps, double shift) {
    PROPCREDIT_REQUIRE(num_steps >= 1, "flow grid needs N >= 1");
    PROPCREDIT_REQUIRE(shift >= 1.0 && std::isfinite(shift), "timestep shift must be >= 1");
    FlowGrid g;
    g.N = num_steps;
    g.shift = shift;
    g.t.resize(static_cast<std::size_t>(num_steps) + 1);
    for (int i = 0; i <= num_steps; ++i) {
        const double u = 1.0 - static_cast<double>(i) / num_steps;
        g.t[static_cast<std::size_t>(i)] = shift * u / (1.0 + (shift - 1.0) * u);
    }
    g.t.front() = 1.0;
    g.t.back() = 0.0;
    g.dt.resize(static_cast<std::size_t>(num_steps));
    for (std::size_t i = 0; i < g.dt.size(); ++i) {
        g.dt[i] = g.t[i] - g.t[i + 1];
        if (!(g.dt[i] > 0.0)) throw_numerical("flow grid is not strictly decreasing");
    }
    return g;
}

FlowSigma flow_sigma(const FlowGrid& grid, FlowSigmaKind kind, double eta) {
    PROPCREDIT_REQUIRE(eta > 0.0 && std::isfinite(eta), "eta must be > 0");
    FlowSigma s;
    s.kind = kind;
    s.eta = eta;
    s.sigma.resize(grid.dt.size());
    s.eval_t.resize(grid.dt.size());
    for (std::size_t i = 0; i < grid.dt.size(); ++i) {
        double t = grid.t[i];
        if (kind == FlowSigmaKind::Constant) {
            s.eval_t[i] = t;
            s.sigma[i] = eta;
            continue;
        }
        if (t >= 1.0) {
            if (grid.N < 2) throw_invalid("flowgrpo sigma at t = 1 needs a next grid point (N >= 2)");
            t = grid.t[i + 1];
            s.t_one_approx = t;
        }
        s.eval_t[i] = t;
        s.sigma[i] = eta * std::sqrt(t / (1.0 - t));
        if (!(std::isfinite(s.sigma[i]) && s.sigma[i] > 0.0)) throw_numerical("flowgrpo sigma is not finite and positive");
    }
    return s;
}

FlowCredit native_flow_weights(const FlowGrid& grid, const FlowSigma& sigma) {
    PROPCREDIT_REQUIRE(sigma.sigma.size() == grid.dt.size(), "sigma length must match the grid");
    FlowCredit c;
    c.mode = FlowWeightMode::Native;
    c.w.resize(grid.dt.size());
    for (std::size_t i = 0; i < grid.dt.size(); ++i) {
        c.w[i] = std::sqrt(grid.dt[i]) / sigma.sigma[i] * flow_poly_factor(grid.t[i]);
    }
    return c;
}

FlowCredit proportional_flow_weights(const FlowGrid& grid, const FlowSigma& sigma) {
    const FlowCredit native = native_flow_weights(grid, sigma);
    FlowCredit c;
    c.mode = FlowWeightMode::Proportional;
    // sum(dt) == 1, so zeta * dt_i preserves the native sum
    const double zeta = std::accumulate(native.w.begin(), native.w.end(), 0.0);
    c.zeta = zeta;
    c.w.resize(grid.dt.size());
    for (std::size_t i = 0; i < grid.dt.size(); ++i) c.w[i] = zeta * grid.dt[i];
    return c;
}

FlowCredit uniform_flow_weights(const FlowGrid& grid, const FlowSigma& sigma) {
    const FlowCredit native = native_flow_weights(grid, sigma);
    FlowCredit c;
    c.mode = FlowWeightMode::Uniform;
    const double mean = std::accumulate(native.w.begin(), native.w.end(), 0.0) / static_cast<double>(native.w.size());
    c.w.assign(native.w.size(), mean);
    return c;
}

FlowCredit flow_weights(const FlowGrid& grid, const FlowSigma& sigma, FlowWeightMode mode) {
    switch (mode) {
        case FlowWeightMode::Native: return native_flow_weights(grid, sigma);
        case FlowWeightMode::Proportional: return proportional_flow_weights(grid, sigma);
        case FlowWeightMode::Uniform: return uniform_flow_weights(grid, sigma);
    }
    throw_invalid("unknown flow weight mode");
}

}  // namespace propcredit::sched
