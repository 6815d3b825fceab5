// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace propcredit::sched {

/// Decreasing time grid from t = 1 (noise) to t = 0 (data).
///
/// Step i integrates from t[i] down to t[i + 1] and dt[i] = t[i] - t[i + 1].
struct FlowGrid {
    int N = 0;
    std::vector<double> t;
    std::vector<double> dt;
    double shift = 1.0;
};

/// Shifted grid t = s u / (1 + (s - 1) u) over the uniform grid u_i = 1 - i / N.
FlowGrid build_flow_grid(int num_steps, double shift);

enum class FlowSigmaKind { Constant, FlowGrpo };

struct FlowSigma {
    FlowSigmaKind kind = FlowSigmaKind::Constant;
    double eta = 0.0;
    std::vector<double> sigma;
    /// Time at which each step's sigma was evaluated (differs from t[i] only
    /// where t[i] == 1 under the flowgrpo kind).
    std::vector<double> eval_t;
    /// Substitute evaluation point used for t == 1, if any.
    std::optional<double> t_one_approx;
};

/// constant: sigma = eta. flowgrpo: sigma = eta * sqrt(t / (1 - t)), with t == 1
/// evaluated at the next grid point instead.
FlowSigma flow_sigma(const FlowGrid& grid, FlowSigmaKind kind, double eta);

enum class FlowWeightMode { Native, Proportional, Uniform };

struct FlowCredit {
    std::vector<double> w;
    FlowWeightMode mode = FlowWeightMode::Native;
    std::optional<double> zeta;
};

/// 1 + (1 - t) t / 2
inline double flow_poly_factor(double t) { return 1.0 + (1.0 - t) * t / 2.0; }

/// w_i = sqrt(dt_i) / sigma_i * (1 + (1 - t_i) t_i / 2)
FlowCredit native_flow_weights(const FlowGrid& grid, const FlowSigma& sigma);
/// w_i = zeta * dt_i with zeta = sum of native weights.
FlowCredit proportional_flow_weights(const FlowGrid& grid, const FlowSigma& sigma);
/// Constant weight with the native sum.
FlowCredit uniform_flow_weights(const FlowGrid& grid, const FlowSigma& sigma);

FlowCredit flow_weights(const FlowGrid& grid, const FlowSigma& sigma, FlowWeightMode mode);

}  // namespace propcredit::sched
