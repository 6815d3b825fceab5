// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "oracles.hpp"
#include "sched/diffusion_schedule.hpp"

using namespace propcredit;
using namespace propcredit::sched;

namespace {

TrainSchedule sd_like() { return build_train_schedule(1000, 8.5e-4, 1.2e-2, BetaKind::ScaledLinear); }

bool throws_kind(ErrorKind kind, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

}  // namespace

TEST_SUITE("diffusion_schedule") {

TEST_CASE("dense schedule") {
    const auto s = train_schedule_from_betas({0.1, 0.2});
    CHECK(s.alpha_bar[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar[1] == doctest::Approx(0.72).epsilon(1e-15));
    CHECK(s.alpha_bar_before(0) == 1.0);

    CHECK_THROWS_AS(build_train_schedule(2, 0.0, 0.0, BetaKind::Linear), Error);
    CHECK_THROWS_AS(train_schedule_from_betas({0.2, 0.1}), Error);
    CHECK_THROWS_AS(train_schedule_from_betas({0.1, 1.0}), Error);

    for (auto kind : {BetaKind::Linear, BetaKind::ScaledLinear}) {
        const auto d = build_train_schedule(1000, 1e-4, 0.02, kind);
        for (int t = 1; t < d.size(); ++t) CHECK(d.alpha_bar[t] < d.alpha_bar[t - 1]);
    }
}

TEST_CASE("ddim subset") {
    const auto base = build_train_schedule(1000, 1e-4, 0.02, BetaKind::Linear);

    // the first dense step sits on the alpha_bar = 1 boundary where sigma is 0
    const auto full = make_ddim_schedule(base, 1000, 1.0, false);
    for (int k = 0; k < 1000; ++k) CHECK(full.steps[k] == k);

    const auto s = make_ddim_schedule(base, 50, 1.0);
    REQUIRE(s.size() == 50);
    CHECK(s.steps.front() == 1);  // stride 20, default offset
    const std::size_t k = s.size() - 1;
    const double ab = base.alpha_bar[s.steps[k]];
    const double abp = base.alpha_bar[s.steps[k - 1]];
    const double expect = std::sqrt((1.0 - abp) / (1.0 - ab)) * std::sqrt(1.0 - ab / abp);
    CHECK(s.sigma[k] == doctest::Approx(expect).epsilon(1e-14));

    const auto zero = make_ddim_schedule(base, 50, 0.0, false);
    for (double v : zero.sigma) CHECK(v == 0.0);
    CHECK_THROWS_AS(make_ddim_schedule(base, 50, 0.0, true), Error);

    const auto small = make_ddim_schedule(base, 50, 1e-6, true);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(small.sigma[i] == doctest::Approx(1e-6 * s.sigma[i]));
}

TEST_CASE("credit coefficient") {
    const double ab = 0.6, abp = 0.75;
    CHECK(credit_coefficient(ab, abp, 0.5) ==
          doctest::Approx(std::sqrt(1.0 - ab) / std::sqrt(ab / abp)).epsilon(1e-14));
    CHECK(credit_coefficient(0.7, 0.8, std::sqrt(0.2)) ==
          doctest::Approx(std::sqrt(0.3) / std::sqrt(0.7 / 0.8)).epsilon(1e-14));
    CHECK_THROWS_AS(credit_coefficient(0.5, 0.9, 0.5), Error);

    const auto s = make_ddim_schedule(sd_like(), 50, 1.0);
    const auto p = native_weights(s);
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double a = s.alpha_bar(k), b = s.alpha_bar_prev(k), sg = s.sigma[k];
        const double direct = std::sqrt(1.0 - a) / std::sqrt(a / b) - std::sqrt(1.0 - b - sg * sg);
        CHECK(std::abs(p.C[k] - direct) <= 1e-12 * std::abs(direct));
        CHECK(p.C[k] > 0.0);
        CHECK(p.w[k] == doctest::Approx(p.C[k] / sg).epsilon(1e-15));
    }

    // same inputs, same weight
    CHECK(credit_coefficient(0.5, 0.6, 0.1) == credit_coefficient(0.5, 0.6, 0.1));
}

TEST_CASE("native weights vary across steps") {
    const auto p = native_weights(make_ddim_schedule(sd_like(), 50, 1.0));
    const auto [lo, hi] = std::minmax_element(p.w.begin(), p.w.end());
    MESSAGE("K=50, eta=1: max/min " << *hi / *lo << ", mean " << target_weight(p));
    CHECK(*hi / *lo >= 8.0);

    // at small eta the spread exceeds ten and the mean sits near 4.5
    const auto q = native_weights(make_ddim_schedule(sd_like(), 50, 0.065));
    const auto [qlo, qhi] = std::minmax_element(q.w.begin(), q.w.end());
    MESSAGE("K=50, eta=0.065: max/min " << *qhi / *qlo << ", mean " << target_weight(q));
    CHECK(*qhi / *qlo >= 10.0);
    CHECK(std::abs(target_weight(q) - 4.5) <= 0.3 * 4.5);

    CreditProfile flat;
    flat.w = {2.5, 2.5, 2.5};
    CHECK(target_weight(flat) == 2.5);
    flat.w = {1.0, 3.0};
    CHECK(target_weight(flat) == 2.0);
}

TEST_CASE("standard deviation at eta 1 minimizes the weight") {
    const auto s = make_ddim_schedule(sd_like(), 50, 1.0);
    for (std::size_t k = 0; k < s.size(); ++k) {
        const auto eq = weight_equation(s, k);
        const double w0 = oracle::weight_of_sigma(eq.a, eq.b, s.sigma[k]);
        for (double f : {0.98, 1.02}) CHECK(oracle::weight_of_sigma(eq.a, eq.b, f * s.sigma[k]) >= w0);
    }
    // so the mean is out of reach for steps whose native weight exceeds it
    CHECK(throws_kind(ErrorKind::Numerical, [&] { solve_constant_sigma(s, target_weight(native_weights(s))); }));
}

TEST_CASE("quadratic roots agree with bisection") {
    CounterRng rng(11, make_stream(StreamTag::Test, 2));
    int checked = 0;
    while (checked < 1000) {
        const double a = 0.05 + 3.0 * rng.uniform();
        const double b = 0.02 + 0.98 * rng.uniform();
        const double s0 = std::sqrt(b) * (0.02 + 0.96 * rng.uniform());
        const double w_star = oracle::weight_of_sigma(a, b, s0);
        if (!(w_star > 1e-3) || w_star > 1e3) continue;
        const auto roots = admissible_sigma_roots({a, b}, w_star);
        const auto expect = oracle::bisection_sigma(a, b, w_star);
        REQUIRE(!roots.empty());
        REQUIRE(roots.size() == expect.size());
        for (std::size_t i = 0; i < roots.size(); ++i) {
            CHECK(std::abs(roots[i] - expect[i]) <= 1e-9);
            CHECK(std::abs(oracle::weight_of_sigma(a, b, roots[i]) - w_star) <= 1e-9 * std::max(1.0, w_star));
        }
        ++checked;
    }
}

TEST_CASE("no admissible root") {
    CHECK(admissible_sigma_roots({1.0, 1.0}, 1.0).empty());
    CHECK(oracle::bisection_sigma(1.0, 1.0, 1.0).empty());
    CHECK(throws_kind(ErrorKind::Numerical, [] { solve_sigma_for_weight({1.0, 1.0}, 1.0, 0.5); }));
}

TEST_CASE("constant-weight profile") {
    const auto s = make_ddim_schedule(sd_like(), 50, 0.065);
    const auto native = native_weights(s);
    const double w_star = target_weight(native);
    const auto solved = solve_constant_sigma(s, w_star);
    REQUIRE(solved.sigma_tilde);
    const auto check = native_weights(with_sigma(s, *solved.sigma_tilde));
    double sum_native = 0.0, sum_tilde = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        CHECK(std::abs(check.w[k] - w_star) <= 1e-9);
        sum_native += native.w[k];
        sum_tilde += check.w[k];
        const auto eq = weight_equation(s, k);
        const auto roots = oracle::bisection_sigma(eq.a, eq.b, w_star);
        double nearest = roots.empty() ? -1.0 : roots.front();
        for (double r : roots) {
            if (std::abs(r - s.sigma[k]) < std::abs(nearest - s.sigma[k])) nearest = r;
        }
        CHECK(std::abs((*solved.sigma_tilde)[k] - nearest) <= 1e-9);
    }
    CHECK(std::abs(sum_tilde - sum_native) <= 1e-9 * sum_native);

    SUBCASE("fixed point at every step") {
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double sig = solve_sigma_for_weight(weight_equation(s, k), native.w[k], s.sigma[k]);
            CHECK(std::abs(sig - s.sigma[k]) <= 1e-10);
        }
    }
}

}
