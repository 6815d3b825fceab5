// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "sched/diffusion_schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "common/error.hpp"

namespace propcredit::sched {

namespace {

constexpr double kSolverTolerance = 1e-9;

std::vector<double> linspace(double start, double end, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = n == 1 ? start : start + (end - start) * i / (n - 1);
    }
    return out;
}

std::string step_label(std::size_t k) { return "step " + std::to_string(k); }

}  // namespace

TrainSchedule train_schedule_from_betas(std::vector<double> betas) {
    PROPCREDIT_REQUIRE(betas.size() >= 2, "training schedule needs at least 2 timesteps");
    for (std::size_t t = 0; t < betas.size(); ++t) {
        if (!(betas[t] > 0.0 && betas[t] < 1.0)) {
            throw_invalid("beta[" + std::to_string(t) + "] = " + std::to_string(betas[t]) + " is outside (0, 1)");
        }
        if (t > 0 && betas[t] < betas[t - 1]) {
            throw_invalid("betas must be non-decreasing (index " + std::to_string(t) + ")");
        }
    }
    TrainSchedule s;
    s.beta = std::move(betas);
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    double product = 1.0;
    for (std::size_t t = 0; t < s.beta.size(); ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        product *= s.alpha[t];
        s.alpha_bar[t] = product;
    }
    return s;
}

TrainSchedule build_train_schedule(int num_train_steps, double beta_start, double beta_end, BetaKind kind) {
    PROPCREDIT_REQUIRE(num_train_steps >= 2, "training schedule needs at least 2 timesteps");
    PROPCREDIT_REQUIRE(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                       "betas must satisfy 0 < beta_start <= beta_end < 1");
    std::vector<double> betas;
    if (kind == BetaKind::Linear) {
        betas = linspace(beta_start, beta_end, num_train_steps);
    } else {
        betas = linspace(std::sqrt(beta_start), std::sqrt(beta_end), num_train_steps);
        for (double& b : betas) b *= b;
    }
    return train_schedule_from_betas(std::move(betas));
}

double DiffusionSchedule::alpha_bar_prev(std::size_t k) const {
    if (k > 0) return base.alpha_bar[static_cast<std::size_t>(steps[k - 1])];
    return base.alpha_bar_before(steps[0]);
}

double DiffusionSchedule::time_feature(std::size_t k) const {
    return static_cast<double>(steps[k]) / static_cast<double>(base.size() - 1);
}

DiffusionSchedule make_ddim_schedule(const TrainSchedule& base, int num_steps, double eta, bool rl,
                                     int steps_offset) {
    PROPCREDIT_REQUIRE(num_steps >= 1 && num_steps <= base.size(), "need 1 <= K <= T_train");
    PROPCREDIT_REQUIRE(eta >= 0.0 && std::isfinite(eta), "eta must be finite and >= 0");
    if (rl && eta == 0.0) {
        throw_invalid("eta = 0 gives a zero-variance policy; its density ratio is undefined for RL use");
    }
    const int stride = base.size() / num_steps;
    const int offset = steps_offset >= 0 ? steps_offset : (stride >= 2 ? 1 : 0);
    PROPCREDIT_REQUIRE((num_steps - 1) * stride + offset < base.size(), "steps offset pushes past T_train");

    DiffusionSchedule s;
    s.base = base;
    s.eta = eta;
    s.rl = rl;
    s.steps.resize(static_cast<std::size_t>(num_steps));
    for (int k = 0; k < num_steps; ++k) s.steps[static_cast<std::size_t>(k)] = k * stride + offset;

    s.sigma.resize(s.steps.size());
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const double ab = s.alpha_bar(k);
        const double ab_prev = s.alpha_bar_prev(k);
        s.sigma[k] = eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
    }
    validate(s);
    return s;
}

DiffusionSchedule with_sigma(const DiffusionSchedule& schedule, std::vector<double> sigma) {
    PROPCREDIT_REQUIRE(sigma.size() == schedule.size(), "sigma length must match the number of steps");
    DiffusionSchedule s = schedule;
    s.sigma = std::move(sigma);
    validate(s);
    return s;
}

void validate(const DiffusionSchedule& s) {
    PROPCREDIT_REQUIRE(!s.steps.empty(), "schedule has no steps");
    PROPCREDIT_REQUIRE(s.sigma.size() == s.steps.size(), "sigma length must match the number of steps");
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        PROPCREDIT_REQUIRE(s.steps[k] >= 0 && s.steps[k] < s.base.size(), "step index out of range");
        if (k > 0) PROPCREDIT_REQUIRE(s.steps[k] > s.steps[k - 1], "steps must be strictly increasing");
        const double sig = s.sigma[k];
        PROPCREDIT_REQUIRE(std::isfinite(sig) && sig >= 0.0, step_label(k) + ": sigma must be finite and >= 0");
        if (s.rl && !(sig > 0.0)) throw_invalid(step_label(k) + ": RL schedules need sigma > 0");
        const double headroom = 1.0 - s.alpha_bar_prev(k);
        // sigma == 0 is allowed on the boundary step of a non-RL schedule
        if (sig > 0.0 && !(sig * sig < headroom)) {
            throw_invalid(step_label(k) + ": sigma^2 must stay below 1 - alpha_bar_prev");
        }
    }
}

double credit_coefficient(double alpha_bar, double alpha_bar_prev, double sigma) {
    double radicand = 1.0 - alpha_bar_prev - sigma * sigma;
    // sigma = sqrt(1 - ab_prev) can overshoot by an ulp; treat that as the boundary
    if (radicand < 0.0 && radicand > -4.0 * std::numeric_limits<double>::epsilon()) radicand = 0.0;
    if (radicand < 0.0) throw_numerical("credit coefficient: negative radicand 1 - alpha_bar_prev - sigma^2");
    const double alpha = alpha_bar / alpha_bar_prev;
    return std::sqrt(1.0 - alpha_bar) / std::sqrt(alpha) - std::sqrt(radicand);
}

double credit_coefficient(const DiffusionSchedule& s, std::size_t k) {
    PROPCREDIT_REQUIRE(k < s.size(), "step index out of range");
    const double c = credit_coefficient(s.alpha_bar(k), s.alpha_bar_prev(k), s.sigma[k]);
    if (!(c > 0.0)) throw_numerical(step_label(k) + ": credit coefficient is not positive");
    return c;
}

CreditProfile native_weights(const DiffusionSchedule& s) {
    CreditProfile p;
    p.C.resize(s.size());
    p.w.resize(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (!(s.sigma[k] > 0.0)) throw_invalid(step_label(k) + ": weight undefined for sigma = 0");
        p.C[k] = credit_coefficient(s, k);
        p.w[k] = p.C[k] / s.sigma[k];
    }
    return p;
}

double target_weight(const CreditProfile& profile) {
    PROPCREDIT_REQUIRE(!profile.w.empty(), "empty credit profile");
    return std::accumulate(profile.w.begin(), profile.w.end(), 0.0) / static_cast<double>(profile.w.size());
}

WeightEquation weight_equation(const DiffusionSchedule& s, std::size_t k) {
    return {std::sqrt(1.0 - s.alpha_bar(k)) / std::sqrt(s.alpha(k)), 1.0 - s.alpha_bar_prev(k)};
}

std::vector<double> admissible_sigma_roots(WeightEquation eq, double w_star) {
    PROPCREDIT_REQUIRE(w_star > 0.0 && std::isfinite(w_star), "target weight must be > 0");
    const double a = eq.a, b = eq.b;
    const double q = 1.0 + w_star * w_star;
    const double disc = b * q - a * a;  // quarter discriminant
    if (disc < 0.0) return {};
    // larger root by the direct formula, smaller from the product (a^2 - b) / q
    const double hi = (a * w_star + std::sqrt(disc)) / q;
    const double lo = hi > 0.0 ? (a * a - b) / (q * hi) : (a * w_star - std::sqrt(disc)) / q;

    std::vector<double> roots;
    for (double r : {lo, hi}) {
        if (!(r > 0.0) || !(r * r < b) || a - w_star * r < 0.0) continue;
        // one Newton step on f(s) = a - sqrt(b - s^2) - w* s
        const double root_term = std::sqrt(b - r * r);
        const double f = a - root_term - w_star * r;
        const double df = r / root_term - w_star;
        double polished = r;
        if (df != 0.0 && std::isfinite(f / df)) polished = r - f / df;
        if (polished > 0.0 && polished * polished < b) r = polished;
        if (roots.empty() || roots.back() != r) roots.push_back(r);
    }
    return roots;
}

double solve_sigma_for_weight(WeightEquation eq, double w_star, double reference) {
    const auto roots = admissible_sigma_roots(eq, w_star);
    if (roots.empty()) {
        throw_numerical("no admissible sigma for target weight " + std::to_string(w_star) +
                        " (minimum reachable weight is " + std::to_string(std::sqrt(std::max(0.0, eq.a * eq.a - eq.b) / eq.b)) +
                        ")");
    }
    return *std::min_element(roots.begin(), roots.end(),
                             [&](double x, double y) { return std::abs(x - reference) < std::abs(y - reference); });
}

CreditProfile solve_constant_sigma(const DiffusionSchedule& s, double w_star) {
    PROPCREDIT_REQUIRE(w_star > 0.0 && std::isfinite(w_star), "target weight must be > 0");
    std::vector<double> sigma_tilde(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        try {
            sigma_tilde[k] = solve_sigma_for_weight(weight_equation(s, k), w_star, s.sigma[k]);
        } catch (const Error& e) {
            throw Error(e.kind(), step_label(k) + " (t=" + std::to_string(s.steps[k]) + "): " + e.what());
        }
    }
    CreditProfile p;
    p.C.resize(s.size());
    p.w.resize(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        p.C[k] = credit_coefficient(s.alpha_bar(k), s.alpha_bar_prev(k), sigma_tilde[k]);
        p.w[k] = p.C[k] / sigma_tilde[k];
        if (!(std::abs(p.w[k] - w_star) <= kSolverTolerance)) {
            throw_numerical(step_label(k) + ": solved weight misses the target by " +
                            std::to_string(std::abs(p.w[k] - w_star)));
        }
    }
    p.w_star = w_star;
    p.sigma_tilde = std::move(sigma_tilde);
    return p;
}

}  // namespace propcredit::sched
