// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "objective/objective.hpp"
#include "oracles.hpp"
#include "sched/diffusion_schedule.hpp"
#include "sched/flow_schedule.hpp"

using namespace propcredit;
using namespace propcredit::objective;

namespace {

std::vector<double> normals(CounterRng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * rng.normal();
    return v;
}

struct Case {
    std::vector<double> theta, old, noise;
    double w;
};

std::vector<StepRatioInputs> as_inputs(const std::vector<Case>& cases, double xi) {
    std::vector<StepRatioInputs> in;
    for (const auto& c : cases) in.push_back({c.theta, c.old, c.noise, c.w, xi});
    return in;
}

}  // namespace

TEST_SUITE("objective") {

TEST_CASE("group advantages") {
    for (double a : normalize_group(std::vector<double>{1, 1, 1, 1})) CHECK(std::abs(a) < 1e-12);
    const auto two = normalize_group(std::vector<double>{0.0, 2.0});
    CHECK(two[0] == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(two[1] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(normalize_group(std::vector<double>{3.5})[0] == 0.0);
    CHECK_THROWS_AS(normalize_group(std::span<const double>{}), Error);

    const auto adv = normalize_advantages({{0.0, 2.0}, {5.0}});
    REQUIRE(adv.size() == 3);
    CHECK(adv[0].group_id == 0);
    CHECK(adv[2].group_id == 1);
    CHECK(adv[2].value == 0.0);
}

TEST_CASE("advantages are shift invariant") {
    CounterRng rng(3, make_stream(StreamTag::Test, 3));
    for (int trial = 0; trial < 200; ++trial) {
        auto r = normals(rng, 2 + trial % 15);
        const auto a = normalize_group(r);
        const double shift = 10.0 * rng.normal();
        for (auto& x : r) x += shift;
        const auto b = normalize_group(r);
        double mean = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) <= 1e-9);
            mean += a[i];
        }
        CHECK(std::abs(mean) < 1e-9);
    }
}

TEST_CASE("surrogate values") {
    for (double a : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
        CHECK(ppo_clip_term(1.0, a, 0.2) == -a);
        CHECK(hinge_term(1.0, a, 0.2) == doctest::Approx(0.2 * std::abs(a)));
        CHECK(log_hinge_term(0.0, a, 0.2) == doctest::Approx(0.2 * std::abs(a)));
    }
    CHECK(ppo_clip_term(1.5, 1.0, 0.2) == doctest::Approx(-1.2));
    CHECK(ppo_clip_term(0.5, -1.0, 0.2) == doctest::Approx(0.8));
    CHECK(hinge_term(1.3, 1.0, 0.2) == 0.0);
    CHECK(hinge_term(1.3, -1.0, 0.2) == doctest::Approx(0.5));
    CHECK(log_hinge_term(0.25, 1.0, 0.2) == 0.0);
    CHECK(log_hinge_term(0.25, -1.0, 0.2) == doctest::Approx(0.45));
    CHECK(hinge_clipped(0.3, 1.0, 0.2));
    CHECK(!hinge_clipped(0.3, -1.0, 0.2));
    CHECK(!hinge_clipped(0.0, 0.0, 0.2));
}

TEST_CASE("hinge and clipped surrogate share gradients") {
    CounterRng rng(5, make_stream(StreamTag::Test, 4));
    int n = 0;
    while (n < 10000) {
        const double xi = 0.01 + 0.5 * rng.uniform();
        const double rho = std::exp(0.8 * rng.normal());
        const double a = 2.0 * rng.normal();
        if (std::abs(rho - (1.0 - xi)) <= 1e-3 || std::abs(rho - (1.0 + xi)) <= 1e-3 || std::abs(rho - 1.0) <= 1e-3) {
            continue;
        }
        const double g = ppo_clip_grad(rho, a, xi);
        CHECK(g == hinge_grad(rho, a, xi));
        CHECK((g == -a || g == 0.0));
        const double h = 1e-7;
        const double fd = (ppo_clip_term(rho + h, a, xi) - ppo_clip_term(rho - h, a, xi)) / (2 * h);
        const double fd_hinge = (hinge_term(rho + h, a, xi) - hinge_term(rho - h, a, xi)) / (2 * h);
        CHECK(std::abs(fd - g) <= 1e-6 * std::max(1.0, std::abs(a)));
        CHECK(std::abs(fd_hinge - g) <= 1e-6 * std::max(1.0, std::abs(a)));
        ++n;
    }
}

TEST_CASE("diffusion log ratio equals the Gaussian density ratio") {
    const auto base = sched::build_train_schedule(1000, 8.5e-4, 1.2e-2, sched::BetaKind::ScaledLinear);
    const auto s = sched::make_ddim_schedule(base, 50, 1.0);
    CounterRng rng(9, make_stream(StreamTag::Test, 5));
    for (int trial = 0; trial < 2000; ++trial) {
        const auto k = static_cast<std::size_t>(rng.uniform() * 50.0);
        const std::size_t d = 1 + trial % 4;
        const auto x = normals(rng, d), pt = normals(rng, d), po = normals(rng, d), eps = normals(rng, d);
        const double ab = s.alpha_bar(k), abp = s.alpha_bar_prev(k), sg = s.sigma[k];
        const double w = sched::credit_coefficient(s, k) / sg;
        const auto mt = oracle::ddim_mean(ab, abp, sg, x, pt);
        const auto mo = oracle::ddim_mean(ab, abp, sg, x, po);
        std::vector<double> next(d);
        for (std::size_t i = 0; i < d; ++i) next[i] = mo[i] + sg * eps[i];
        const double direct = oracle::log_normal(next, mt, sg * sg) - oracle::log_normal(next, mo, sg * sg);
        CHECK(std::abs(log_rho_diffusion({pt, po, eps, w, 0.1}) - direct) <= 1e-8);
    }
}

TEST_CASE("flow log ratio equals the Gaussian density ratio") {
    const auto g = sched::build_flow_grid(10, 3.0);
    const auto sg = sched::flow_sigma(g, sched::FlowSigmaKind::FlowGrpo, 0.7);
    const auto native = sched::native_flow_weights(g, sg);
    CounterRng rng(10, make_stream(StreamTag::Test, 6));
    for (int trial = 0; trial < 2000; ++trial) {
        const auto i = static_cast<std::size_t>(rng.uniform() * 10.0);
        const std::size_t d = 1 + trial % 4;
        const auto z = normals(rng, d), ut = normals(rng, d), uo = normals(rng, d), eps = normals(rng, d);
        const double std = sg.sigma[i] * std::sqrt(g.dt[i]);
        const auto mt = oracle::flow_mean(g.t[i], g.dt[i], sg.sigma[i], z, ut);
        const auto mo = oracle::flow_mean(g.t[i], g.dt[i], sg.sigma[i], z, uo);
        std::vector<double> next(d);
        for (std::size_t j = 0; j < d; ++j) next[j] = mo[j] + std * eps[j];
        const double direct = oracle::log_normal(next, mt, std * std) - oracle::log_normal(next, mo, std * std);
        CHECK(std::abs(log_rho_flow({ut, uo, eps, native.w[i], 0.1}) - direct) <= 1e-8);
    }
}

TEST_CASE("matching distance structure") {
    const std::vector<double> p{0.3, -1.2}, eps{0.7, 0.4};
    CHECK(log_rho_diffusion({p, p, eps, 3.0, 0.1}) == 0.0);
    CHECK(log_rho_flow({p, p, eps, 3.0, 0.1}) == 0.0);

    const std::vector<double> old{0.0, 0.0}, minus{-0.3, 1.2};
    const double w = 2.0;
    const double quad = 0.5 * w * w * (0.09 + 1.44);
    const double plus_d = matching_distance({p, old, eps, w, 0.1});
    const double minus_d = matching_distance({minus, old, eps, w, 0.1});
    CHECK((plus_d + minus_d) / 2.0 == doctest::Approx(quad));
    CHECK((plus_d - minus_d) / 2.0 == doctest::Approx(w * (0.3 * 0.7 - 1.2 * 0.4)));
}

TEST_CASE("matching loss") {
    CounterRng rng(12, make_stream(StreamTag::Test, 7));
    std::vector<Case> cases;
    for (int k = 0; k < 6; ++k) {
        const auto p = normals(rng, 2);
        cases.push_back({p, p, normals(rng, 2), 0.5 + rng.uniform()});
    }
    const auto on_policy = as_inputs(cases, 0.1);
    for (double a : {-1.5, 0.7}) {
        const auto r = eps_matching_loss(on_policy, a, 0.1);
        CHECK(r.loss == doctest::Approx(6 * 0.1 * std::abs(a)).epsilon(1e-14));
        for (bool m : r.clip_mask) CHECK(!m);
        CHECK(r.active_fraction == 1.0);
    }

    for (auto& c : cases) c.theta = normals(rng, 2);
    const auto zero = eps_matching_loss(as_inputs(cases, 0.1), 0.0, 0.1);
    CHECK(zero.loss == 0.0);
    for (const auto& g : zero.grad_pred_theta) {
        for (double v : g) CHECK(v == 0.0);
    }
}

TEST_CASE("matching loss gradient against finite differences") {
    CounterRng rng(13, make_stream(StreamTag::Test, 8));
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Case> cases;
        const int steps = 1 + trial % 5;
        for (int k = 0; k < steps; ++k) {
            cases.push_back({normals(rng, 3, 0.1), normals(rng, 3, 0.1), normals(rng, 3), 0.5 + 2.0 * rng.uniform()});
        }
        const double a = rng.normal();
        const double xi = 0.05 + 0.2 * rng.uniform();
        const auto report = eps_matching_loss(as_inputs(cases, xi), a, xi);
        for (int k = 0; k < steps; ++k) {
            for (std::size_t j = 0; j < 3; ++j) {
                auto loss_at = [&](std::vector<double>& x) {
                    auto copy = cases;
                    copy[k].theta = x;
                    return eps_matching_loss(as_inputs(copy, xi), a, xi).loss;
                };
                std::vector<double> x = cases[k].theta;
                // stay off the hinge kink
                const double fd = oracle::central_difference(loss_at, x, j, 1e-6);
                const double g = report.grad_pred_theta[k][j];
                const bool near_kink = [&] {
                    std::vector<double> lo = x, hi = x;
                    lo[j] -= 1e-6;
                    hi[j] += 1e-6;
                    auto c1 = cases, c2 = cases;
                    c1[k].theta = lo;
                    c2[k].theta = hi;
                    return eps_matching_loss(as_inputs(c1, xi), a, xi).clip_mask !=
                           eps_matching_loss(as_inputs(c2, xi), a, xi).clip_mask;
                }();
                if (near_kink) continue;
                CHECK(std::abs(fd - g) <= 1e-5 * std::max(std::abs(g), 1e-3));
            }
        }
    }
}

TEST_CASE("clip fraction and Taylor gap") {
    LossReport active, clipped, half;
    active.clip_mask = {false, false};
    clipped.clip_mask = {true, true};
    half.clip_mask = {true, false};
    CHECK(clip_fraction(std::vector<LossReport>{active}) == 0.0);
    CHECK(clip_fraction(std::vector<LossReport>{clipped}) == 1.0);
    CHECK(clip_fraction(std::vector<LossReport>{half}) == 0.5);
    CHECK(clip_fraction(std::vector<LossReport>{active, clipped}) == 0.5);

    CHECK(taylor_gap(1.0) == 0.0);
    CHECK(taylor_gap(1.1) == doctest::Approx(0.0469).epsilon(1e-3));
    CHECK(taylor_gap(0.9) == doctest::Approx(0.0536).epsilon(1e-3));

    for (int i = 0; i <= 10000; ++i) {
        const double x = -0.5 + i * 1e-4;
        CHECK(std::abs(std::log1p(x) - x) <= x * x / (2.0 * (1.0 - std::abs(x))) + 1e-18);
    }
}

}
