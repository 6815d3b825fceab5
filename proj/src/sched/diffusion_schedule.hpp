// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace propcredit::sched {

enum class BetaKind { Linear, ScaledLinear };

/// Dense training-time noise schedule.
///
/// alpha_bar[t] is the cumulative product of alpha up to and including t. The
/// value "before" index 0 is taken to be 1 (see alpha_bar_before()).
struct TrainSchedule {
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    int size() const { return static_cast<int>(beta.size()); }

    /// alpha_bar at index t - 1, with the boundary value 1 for t == 0.
    double alpha_bar_before(int t) const { return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)]; }
};

TrainSchedule build_train_schedule(int num_train_steps, double beta_start, double beta_end, BetaKind kind);

/// Builds from explicit betas; rejects values outside (0, 1) and decreasing betas.
TrainSchedule train_schedule_from_betas(std::vector<double> betas);

/// Inference subset of a TrainSchedule with per-step standard deviations.
///
/// Steps are stored in increasing index order and iterated in reverse when
/// sampling. For step k, the "previous" level is the preceding selected index;
/// for k == 0 it is dense index steps[0] - 1, or the alpha_bar = 1 boundary
/// when steps[0] == 0.
struct DiffusionSchedule {
    TrainSchedule base;
    std::vector<int> steps;
    double eta = 0.0;
    std::vector<double> sigma;
    bool rl = true;

    std::size_t size() const { return steps.size(); }
    double alpha_bar(std::size_t k) const { return base.alpha_bar[static_cast<std::size_t>(steps[k])]; }
    double alpha_bar_prev(std::size_t k) const;
    /// Step-to-step ratio alpha_bar / alpha_bar_prev.
    double alpha(std::size_t k) const { return alpha_bar(k) / alpha_bar_prev(k); }
    /// Normalized time in [0, 1] fed to the network.
    double time_feature(std::size_t k) const;
};

/// K evenly spaced steps with the standard DDIM deviation
/// eta * sqrt((1 - ab_prev) / (1 - ab)) * sqrt(1 - ab / ab_prev).
///
/// steps_offset < 0 selects the default: 1 when the stride is at least 2 (so
/// the last step keeps a nonzero deviation), otherwise 0.
DiffusionSchedule make_ddim_schedule(const TrainSchedule& base, int num_steps, double eta, bool rl = true,
                                     int steps_offset = -1);

/// Same steps, different deviations. Validates the schedule invariants.
DiffusionSchedule with_sigma(const DiffusionSchedule& schedule, std::vector<double> sigma);

/// Throws if any schedule invariant is violated.
void validate(const DiffusionSchedule& schedule);

/// C = sqrt(1 - ab) / sqrt(alpha) - sqrt(1 - ab_prev - sigma^2).
double credit_coefficient(double alpha_bar, double alpha_bar_prev, double sigma);
double credit_coefficient(const DiffusionSchedule& schedule, std::size_t k);

/// Per-step weights; when re-engineered, also the target and new deviations.
struct CreditProfile {
    std::vector<double> w;
    std::vector<double> C;
    std::optional<double> w_star;
    std::optional<std::vector<double>> sigma_tilde;
};

CreditProfile native_weights(const DiffusionSchedule& schedule);

/// Arithmetic mean of the profile weights.
double target_weight(const CreditProfile& profile);

/// Coefficients of the scalar problem w(sigma) = (a - sqrt(b - sigma^2)) / sigma.
struct WeightEquation {
    double a;  // sqrt(1 - ab) / sqrt(alpha)
    double b;  // 1 - ab_prev
};

WeightEquation weight_equation(const DiffusionSchedule& schedule, std::size_t k);

/// Admissible roots of (1 + w*^2) s^2 - 2 a w* s + (a^2 - b) = 0, ascending.
/// Admissible means s > 0, s^2 < b and a - w* s >= 0 (so C(s) = w* s > 0).
std::vector<double> admissible_sigma_roots(WeightEquation eq, double w_star);

/// Root nearest to `reference`; throws Numerical if none is admissible.
double solve_sigma_for_weight(WeightEquation eq, double w_star, double reference);

/// Per-step deviations giving the constant weight w_star at every step.
CreditProfile solve_constant_sigma(const DiffusionSchedule& schedule, double w_star);

}  // namespace propcredit::sched
