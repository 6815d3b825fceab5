// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "objective/objective.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace propcredit::objective {

std::vector<double> normalize_group(std::span<const double> rewards) {
    PROPCREDIT_REQUIRE(!rewards.empty(), "cannot normalize an empty reward group");
    std::vector<double> out(rewards.size(), 0.0);
    if (rewards.size() == 1) return out;
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size());
    const double denom = std::sqrt(var) + kAdvantageStdGuard;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / denom;
    return out;
}

std::vector<Advantage> normalize_advantages(const std::vector<std::vector<double>>& groups) {
    std::vector<Advantage> out;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (double a : normalize_group(groups[g])) out.push_back({a, static_cast<int>(g)});
    }
    return out;
}

double ppo_clip_term(double rho, double advantage, double xi) {
    const double clipped = std::clamp(rho, 1.0 - xi, 1.0 + xi);
    return std::max(-rho * advantage, -clipped * advantage);
}

double ppo_clip_grad(double rho, double advantage, double xi) {
    if (rho >= 1.0 - xi && rho <= 1.0 + xi) return -advantage;
    const double clipped = std::clamp(rho, 1.0 - xi, 1.0 + xi);
    return -rho * advantage > -clipped * advantage ? -advantage : 0.0;
}

double hinge_term(double rho, double advantage, double xi) {
    return std::max(0.0, xi * std::abs(advantage) - advantage * (rho - 1.0));
}

double hinge_grad(double rho, double advantage, double xi) {
    return hinge_clipped(rho - 1.0, advantage, xi) ? 0.0 : -advantage;
}

double log_hinge_term(double log_rho, double advantage, double xi) {
    return std::max(0.0, xi * std::abs(advantage) - advantage * log_rho);
}

bool hinge_clipped(double x, double advantage, double xi) {
    return xi * std::abs(advantage) - advantage * x < 0.0;
}

namespace {

void check_dims(const StepRatioInputs& in) {
    PROPCREDIT_REQUIRE(in.pred_theta.size() == in.pred_old.size() && in.pred_old.size() == in.noise_old.size(),
                       "step inputs must share one dimension");
}

}  // namespace

double matching_distance(const StepRatioInputs& in) {
    check_dims(in);
    double linear = 0.0, quadratic = 0.0;
    for (std::size_t j = 0; j < in.pred_theta.size(); ++j) {
        const double diff = in.w * (in.pred_theta[j] - in.pred_old[j]);
        linear += diff * in.noise_old[j];
        quadratic += diff * diff;
    }
    return linear + 0.5 * quadratic;
}

double log_rho_diffusion(const StepRatioInputs& in) { return -matching_distance(in); }

double log_rho_flow(const StepRatioInputs& in) { return -matching_distance(in); }

LossReport eps_matching_loss(std::span<const StepRatioInputs> steps, double advantage, double xi) {
    PROPCREDIT_REQUIRE(xi > 0.0 && xi < 1.0, "clip threshold must lie in (0, 1)");
    LossReport r;
    r.grad_pred_theta.resize(steps.size());
    r.clip_mask.assign(steps.size(), false);
    std::size_t clipped = 0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto& in = steps[t];
        PROPCREDIT_REQUIRE(in.w > 0.0, "credit weight must be > 0");
        const double d = matching_distance(in);
        auto& g = r.grad_pred_theta[t];
        g.assign(in.pred_theta.size(), 0.0);
        // log rho = -D, so the hinge argument is xi|A| + A D
        if (hinge_clipped(-d, advantage, xi)) {
            r.clip_mask[t] = true;
            ++clipped;
            continue;
        }
        r.loss += xi * std::abs(advantage) + advantage * d;
        for (std::size_t j = 0; j < g.size(); ++j) {
            g[j] = advantage * (in.w * in.noise_old[j] + in.w * in.w * (in.pred_theta[j] - in.pred_old[j]));
        }
    }
    r.active_fraction = steps.empty() ? 1.0 : 1.0 - static_cast<double>(clipped) / static_cast<double>(steps.size());
    return r;
}

double clip_fraction(std::span<const LossReport> reports) {
    std::size_t total = 0, clipped = 0;
    for (const auto& r : reports) {
        total += r.clip_mask.size();
        clipped += static_cast<std::size_t>(std::count(r.clip_mask.begin(), r.clip_mask.end(), true));
    }
    return total == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(total);
}

double taylor_gap(double rho) {
    PROPCREDIT_REQUIRE(rho > 0.0, "ratio must be positive");
    return std::abs(std::log(rho) - (rho - 1.0)) / std::max(std::abs(rho - 1.0), 1e-12);
}

}  // namespace propcredit::objective
