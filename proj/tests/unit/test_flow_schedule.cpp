// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "sched/flow_schedule.hpp"

using namespace propcredit;
using namespace propcredit::sched;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

struct Preset {
    int n;
    double shift;
    FlowSigmaKind kind;
    double eta;
};

const Preset kPresets[] = {{16, 3.0, FlowSigmaKind::Constant, 0.3}, {10, 3.0, FlowSigmaKind::FlowGrpo, 0.7}};

}  // namespace

TEST_SUITE("flow_schedule") {

TEST_CASE("time grid") {
    const auto g = build_flow_grid(4, 1.0);
    for (double d : g.dt) CHECK(d == doctest::Approx(0.25).epsilon(1e-15));

    const auto h = build_flow_grid(2, 3.0);
    REQUIRE(h.t.size() == 3);
    CHECK(h.t[0] == 1.0);
    CHECK(h.t[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(h.t[2] == 0.0);
    CHECK(h.dt[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(h.dt[1] == doctest::Approx(0.75).epsilon(1e-15));

    for (int n : {1, 3, 16, 50}) {
        for (double s : {1.0, 2.0, 3.0, 7.5}) {
            const auto grid = build_flow_grid(n, s);
            CHECK(sum(grid.dt) == doctest::Approx(1.0).epsilon(1e-14));
            for (double d : grid.dt) CHECK(d > 0.0);
        }
    }
    CHECK_THROWS_AS(build_flow_grid(0, 1.0), Error);
    CHECK_THROWS_AS(build_flow_grid(4, 0.5), Error);
}

TEST_CASE("sigma kinds") {
    const auto c = flow_sigma(build_flow_grid(16, 3.0), FlowSigmaKind::Constant, 0.3);
    for (double v : c.sigma) CHECK(v == 0.3);
    CHECK(!c.t_one_approx);

    const auto half = flow_sigma(build_flow_grid(2, 1.0), FlowSigmaKind::FlowGrpo, 0.7);
    CHECK(half.sigma[1] == doctest::Approx(0.7).epsilon(1e-14));

    const auto fifth = flow_sigma(build_flow_grid(5, 1.0), FlowSigmaKind::FlowGrpo, 0.7);
    CHECK(fifth.sigma[1] == doctest::Approx(1.4).epsilon(1e-14));
    // t = 1 is evaluated at the next point
    REQUIRE(fifth.t_one_approx);
    CHECK(*fifth.t_one_approx == doctest::Approx(0.8));
    CHECK(fifth.sigma[0] == fifth.sigma[1]);
    CHECK(fifth.eval_t[0] == doctest::Approx(0.8));

    CHECK_THROWS_AS(flow_sigma(build_flow_grid(1, 1.0), FlowSigmaKind::FlowGrpo, 0.7), Error);
}

TEST_CASE("native weights") {
    const auto g = build_flow_grid(16, 1.0);
    const auto sg = flow_sigma(g, FlowSigmaKind::Constant, 0.3);
    const auto w = native_flow_weights(g, sg);
    REQUIRE(g.t[8] == doctest::Approx(0.5));
    CHECK(w.w[8] == doctest::Approx(0.9375).epsilon(1e-14));

    CHECK(flow_poly_factor(0.0) == 1.0);
    CHECK(flow_poly_factor(1.0) == 1.0);

    const auto shifted = build_flow_grid(16, 3.0);
    const auto ws = native_flow_weights(shifted, flow_sigma(shifted, FlowSigmaKind::Constant, 0.3));
    for (int i = 0; i < 16; ++i) {
        CHECK(ws.w[i] / std::sqrt(shifted.dt[i]) == doctest::Approx(flow_poly_factor(shifted.t[i]) / 0.3));
    }
}

TEST_CASE("proportional and uniform weights") {
    const auto g = build_flow_grid(8, 1.0);
    const auto sg = flow_sigma(g, FlowSigmaKind::Constant, 0.3);
    const auto prop = proportional_flow_weights(g, sg);
    REQUIRE(prop.zeta);
    for (double v : prop.w) CHECK(v == doctest::Approx(*prop.zeta / 8.0).epsilon(1e-14));

    const auto two = build_flow_grid(2, 3.0);
    const auto s2 = flow_sigma(two, FlowSigmaKind::Constant, 0.3);
    const double zeta = std::sqrt(0.25) / 0.3 * flow_poly_factor(1.0) + std::sqrt(0.75) / 0.3 * flow_poly_factor(0.75);
    const auto p2 = proportional_flow_weights(two, s2);
    CHECK(*p2.zeta == doctest::Approx(zeta).epsilon(1e-14));
    CHECK(p2.w[0] == doctest::Approx(0.25 * zeta).epsilon(1e-14));
    CHECK(p2.w[1] == doctest::Approx(0.75 * zeta).epsilon(1e-14));

    const auto native = native_flow_weights(g, sg);
    const auto uni = uniform_flow_weights(g, sg);
    for (double v : uni.w) CHECK(v == doctest::Approx(sum(native.w) / 8.0).epsilon(1e-14));
    // polynomial factor varies, so uniform differs from native
    bool differs = false;
    for (int i = 0; i < 8; ++i) differs = differs || std::abs(uni.w[i] - native.w[i]) > 1e-9;
    CHECK(differs);
}

TEST_CASE("uniform weight versus native on a shifted grid") {
    const auto g = build_flow_grid(16, 3.0);
    const auto sg = flow_sigma(g, FlowSigmaKind::Constant, 0.3);
    const auto native = native_flow_weights(g, sg);
    const auto uni = uniform_flow_weights(g, sg);
    // the shift packs steps near t = 1, so the first steps are the short ones
    CHECK(g.dt.front() < g.dt.back());
    CHECK(uni.w.front() > native.w.front());
    CHECK(uni.w.back() < native.w.back());
}

TEST_CASE("identities on both presets") {
    for (const auto& p : kPresets) {
        const auto g = build_flow_grid(p.n, p.shift);
        const auto sg = flow_sigma(g, p.kind, p.eta);
        const auto native = flow_weights(g, sg, FlowWeightMode::Native);
        const auto prop = flow_weights(g, sg, FlowWeightMode::Proportional);
        const auto uni = flow_weights(g, sg, FlowWeightMode::Uniform);
        const double total = sum(native.w);
        CHECK(std::abs(sum(prop.w) - total) <= 1e-12 * total);
        CHECK(std::abs(sum(uni.w) - total) <= 1e-12 * total);
        const double ratio0 = prop.w[0] / g.dt[0];
        for (int i = 0; i < p.n; ++i) {
            CHECK(std::abs(prop.w[i] / g.dt[i] - ratio0) <= 1e-12 * ratio0);
            const double lhs = native.w[i] * sg.sigma[i] / std::sqrt(g.dt[i]);
            CHECK(std::abs(lhs - flow_poly_factor(g.t[i])) <= 1e-12);
        }
    }
}

TEST_CASE("shift 1 native and proportional differ when the polynomial factor varies") {
    const auto g = build_flow_grid(16, 1.0);
    const auto sg = flow_sigma(g, FlowSigmaKind::Constant, 0.3);
    const auto native = native_flow_weights(g, sg);
    const auto prop = proportional_flow_weights(g, sg);
    double gap = 0.0;
    for (int i = 0; i < 16; ++i) gap = std::max(gap, std::abs(native.w[i] - prop.w[i]));
    CHECK(gap > 1e-6);
}

}
