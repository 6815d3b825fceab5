// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace propcredit::objective {

struct Advantage {
    double value = 0.0;
    int group_id = 0;
};

inline constexpr double kAdvantageStdGuard = 1e-8;

/// (r - mean) / (std + 1e-8) with the population std. Size-1 groups yield 0.
/// Throws on an empty group.
std::vector<double> normalize_group(std::span<const double> rewards);

/// One Advantage per reward, groups numbered by position.
std::vector<Advantage> normalize_advantages(const std::vector<std::vector<double>>& groups);

/// max(-rho A, -clip(rho, 1 - xi, 1 + xi) A)
double ppo_clip_term(double rho, double advantage, double xi);
/// d/drho of ppo_clip_term away from kinks.
double ppo_clip_grad(double rho, double advantage, double xi);

/// max(0, xi |A| - A (rho - 1))
double hinge_term(double rho, double advantage, double xi);
double hinge_grad(double rho, double advantage, double xi);

/// max(0, xi |A| - A log rho)
double log_hinge_term(double log_rho, double advantage, double xi);

/// True when the hinge argument xi|A| - A * x is strictly negative, i.e. the
/// term contributes neither loss nor gradient. x is rho - 1 or log rho.
bool hinge_clipped(double x, double advantage, double xi);

/// Per-step quantities shared by the diffusion and flow log-ratio forms. For
/// flow, the predictions are velocities.
struct StepRatioInputs {
    std::span<const double> pred_theta;
    std::span<const double> pred_old;
    std::span<const double> noise_old;
    double w = 1.0;
    double xi = 0.1;
};

/// w (p_theta - p_old) . noise + 1/2 || w (p_theta - p_old) ||^2
double matching_distance(const StepRatioInputs& in);

/// -matching_distance for the DDIM transition.
double log_rho_diffusion(const StepRatioInputs& in);
/// -matching_distance for the Euler-Maruyama flow transition.
double log_rho_flow(const StepRatioInputs& in);

struct LossReport {
    double loss = 0.0;
    /// d loss / d p_theta, one vector per step (zero for clipped steps).
    std::vector<std::vector<double>> grad_pred_theta;
    /// true where the step's hinge is inactive
    std::vector<bool> clip_mask;
    double active_fraction = 1.0;
};

/// Sum over steps of max(0, xi |A| + A D_t) for one trajectory.
LossReport eps_matching_loss(std::span<const StepRatioInputs> steps, double advantage, double xi);

/// Mean of clipped share over all reports' steps.
double clip_fraction(std::span<const LossReport> reports);

/// |log rho - (rho - 1)| / max(|rho - 1|, 1e-12)
double taylor_gap(double rho);

}  // namespace propcredit::objective
