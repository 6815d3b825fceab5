// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "fixtures.hpp"
#include "sampler/sampler.hpp"
#include "sched/flow_schedule.hpp"

using namespace propcredit;
using namespace propcredit::sampler;

namespace {

struct Batch {
    std::vector<int> conds;
    std::vector<std::uint64_t> streams;
    SampleRequest request(Precision p, std::uint64_t seed = 3) const { return {conds, seed, streams, p}; }
};

Batch make_batch(int n) {
    Batch b;
    for (int i = 0; i < n; ++i) {
        b.conds.push_back(i % 10);
        b.streams.push_back(make_stream(StreamTag::Test, 20, static_cast<std::uint64_t>(i)));
    }
    return b;
}

sched::DiffusionSchedule small_ddim(double eta = 1.0) { return sched::make_ddim_schedule(fixture::sd_schedule(), 10, eta); }

Eigen::MatrixXd column_stats(const Eigen::MatrixXd& x, Eigen::VectorXd& var) {
    const Eigen::VectorXd mean = x.rowwise().mean();
    var = (x.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(x.cols() - 1);
    return mean;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("replay reproduces every recorded state") {
    const auto arch = fixture::toy_arch();
    const auto p = nn::PolicyParams::initialize(arch, 1);
    const PolicySet set{&p, {}};
    const auto batch = make_batch(12);
    const auto s = small_ddim();
    const auto g = sched::build_flow_grid(8, 3.0);
    const auto sg = sched::flow_sigma(g, sched::FlowSigmaKind::FlowGrpo, 0.7);
    for (auto prec : {Precision::Double, Precision::Single}) {
        const auto r = ddim_reverse_sample(set, s, {}, batch.request(prec));
        CHECK(r.num_positions() == 10);
        CHECK(replay_matches(r, s));
        const auto f = flow_sde_sample(set, g, sg, {}, batch.request(prec));
        CHECK(f.num_positions() == 8);
        CHECK(replay_matches(f, g, sg));
        auto tampered = r;
        tampered.noises[3](0, 0) += 1e-3;
        CHECK(!replay_matches(tampered, s));
    }
}

TEST_CASE("guidance") {
    const auto arch = fixture::toy_arch();
    const auto ref = nn::PolicyParams::initialize(arch, 1);
    const auto tuned = nn::PolicyParams::initialize(arch, 2);
    Eigen::MatrixXd x(2, 5);
    x << 0.1, -0.4, 2.0, 1.0, -3.0, 0.5, 0.0, -1.0, 0.3, 0.2;
    const std::vector<int> conds{0, 1, 8, 9, 3};
    const std::vector<double> times(5, 0.4);
    const auto cond = nn::predict_batch<double>(arch, ref.values(), x, times, conds);
    CHECK(guided_prediction({1.0, {}}, {&ref, {}}, x, 0.4, conds) == cond);
    const std::vector<int> nulls(5, arch.null_condition());
    CHECK(guided_prediction({0.0, {}}, {&ref, {}}, x, 0.4, conds) ==
          nn::predict_batch<double>(arch, ref.values(), x, times, nulls));
    CHECK(guided_prediction({1.0, {0.0}}, {&ref, {&tuned}}, x, 0.4, conds) == cond);
    CHECK(guided_prediction({1.0, {1.0}}, {&ref, {&tuned}}, x, 0.4, conds) ==
          nn::predict_batch<double>(arch, tuned.values(), x, times, conds));
    // extrapolation is allowed
    const auto far = guided_prediction({1.0, {2.0}}, {&ref, {&tuned}}, x, 0.4, conds);
    const auto t = nn::predict_batch<double>(arch, tuned.values(), x, times, conds);
    CHECK((far - (2.0 * t - cond)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mixing identities on whole trajectories") {
    const auto arch = fixture::toy_arch();
    const auto ref = nn::PolicyParams::initialize(arch, 1);
    const auto tuned = nn::PolicyParams::initialize(arch, 2);
    const auto batch = make_batch(16);
    const auto s = small_ddim();
    for (auto prec : {Precision::Double, Precision::Single}) {
        const auto base = ddim_reverse_sample({&ref, {}}, s, {}, batch.request(prec));
        const auto zero = ddim_reverse_sample({&ref, {&tuned}}, s, {1.0, {0.0}}, batch.request(prec));
        CHECK(base.final_samples() == zero.final_samples());
        const auto own = ddim_reverse_sample({&tuned, {}}, s, {}, batch.request(prec));
        const auto one = ddim_reverse_sample({&ref, {&tuned}}, s, {1.0, {1.0}}, batch.request(prec));
        CHECK(own.final_samples() == one.final_samples());
    }
}

TEST_CASE("deterministic schedule") {
    const auto p = nn::PolicyParams::initialize(fixture::toy_arch(), 1);
    const auto s = sched::make_ddim_schedule(fixture::sd_schedule(), 10, 0.0, false);
    const auto batch = make_batch(8);
    const auto a = ddim_reverse_sample({&p, {}}, s, {}, batch.request(Precision::Double));
    const auto b = ddim_reverse_sample({&p, {}}, s, {}, batch.request(Precision::Double));
    CHECK(a.final_samples() == b.final_samples());
}

TEST_CASE("single diffusion step by hand") {
    const auto base = sched::train_schedule_from_betas({0.1, 0.2});
    const auto s = sched::make_ddim_schedule(base, 1, 1.0);
    REQUIRE(s.steps == std::vector<int>{1});
    const double alpha = 0.72 / 0.9;
    const double sigma = std::sqrt(0.1 / 0.28) * std::sqrt(1.0 - alpha);
    CHECK(s.sigma[0] == doctest::Approx(sigma).epsilon(1e-14));
    const auto zero = nn::PolicyParams::zeros(fixture::toy_arch());
    const auto batch = make_batch(4);
    const auto r = ddim_reverse_sample({&zero, {}}, s, {}, batch.request(Precision::Double));
    const Eigen::MatrixXd expect = r.states[0] / std::sqrt(alpha) + sigma * r.noises[0];
    CHECK((r.final_samples() - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("single flow step by hand") {
    const auto g = sched::build_flow_grid(1, 1.0);
    const auto sg = sched::flow_sigma(g, sched::FlowSigmaKind::Constant, 0.3);
    const auto zero = nn::PolicyParams::zeros(fixture::toy_arch());
    const auto batch = make_batch(4);
    const auto r = flow_sde_sample({&zero, {}}, g, sg, {}, batch.request(Precision::Double));
    // u = 0: score = -t z / sigma^2, so the mean is z (1 - t dt / 2)
    const Eigen::MatrixXd expect = 0.5 * r.states[0] + 0.3 * r.noises[0];
    CHECK((r.final_samples() - expect).cwiseAbs().maxCoeff() < 1e-14);

    const auto p = nn::PolicyParams::initialize(fixture::toy_arch(), 7);
    const auto g4 = sched::build_flow_grid(4, 3.0);
    const auto ode = flow_sde_sample({&p, {}}, g4, sched::flow_sigma(g4, sched::FlowSigmaKind::Constant, 0.3), {},
                                     batch.request(Precision::Double), true);
    for (int i = 0; i < 4; ++i) {
        CHECK(ode.noises[i].cwiseAbs().maxCoeff() == 0.0);
        const Eigen::MatrixXd euler = ode.states[i] - g4.dt[i] * ode.predictions[i];
        CHECK((ode.states[i + 1] - euler).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("log densities") {
    Eigen::MatrixXd x(3, 2);
    x.setConstant(0.7);
    const auto lp = gaussian_log_density<double>(x, x, 1.0);
    CHECK(lp(0) == doctest::Approx(-1.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));

    const auto p = nn::PolicyParams::initialize(fixture::toy_arch(), 1);
    const auto s = small_ddim();
    const auto batch = make_batch(32);
    auto r = ddim_reverse_sample({&p, {}}, s, {}, batch.request(Precision::Double));
    store_baseline_logprob(r, s);
    REQUIRE(r.stored_logprob.rows() == 10);
    for (int k = 0; k < 10; ++k) {
        const auto mean = ddim_mean<double>(s, static_cast<std::size_t>(s.size() - 1 - k), r.states[k], r.predictions[k]);
        const double sd = transition_std(r, &s, nullptr, nullptr, k);
        const auto again = gaussian_log_density<double>(r.states[k + 1], mean, sd * sd);
        CHECK(again.transpose() == r.stored_logprob.row(k));
    }

    auto single = ddim_reverse_sample({&p, {}}, s, {}, batch.request(Precision::Single));
    store_baseline_logprob(single, s);
    double gap = 0.0;
    for (int k = 0; k < 10; ++k) {
        const auto mean = ddim_mean<double>(s, static_cast<std::size_t>(s.size() - 1 - k), single.states[k],
                                            nn::predict_batch<double>(p.arch(), p.values(), single.states[k],
                                                                      std::vector<double>(32, s.time_feature(s.size() - 1 - k)),
                                                                      single.conditions));
        const double sd = transition_std(single, &s, nullptr, nullptr, k);
        const auto recomputed = gaussian_log_density<double>(single.states[k + 1], mean, sd * sd);
        gap = std::max(gap, (recomputed.transpose() - single.stored_logprob.row(k)).cwiseAbs().maxCoeff());
    }
    MESSAGE("single-vs-double log density gap: " << gap);
    CHECK(gap > 0.0);
}

TEST_CASE("non-finite states abort") {
    const auto arch = fixture::toy_arch();
    auto v = nn::PolicyParams::initialize(arch, 1).vector();
    const auto l = nn::layout_of(arch);
    for (std::size_t i = l.weight.back(); i < l.bias.back(); ++i) v[i] = 1e308;
    const nn::PolicyParams p(arch, v);
    const auto batch = make_batch(2);
    CHECK_THROWS_AS(ddim_reverse_sample({&p, {}}, small_ddim(), {}, batch.request(Precision::Double)), Error);
}

TEST_CASE("stochastic and deterministic samplers share marginals") {
    const int n = 10000;
    std::vector<int> conds;
    std::vector<std::uint64_t> streams;
    for (int i = 0; i < n; ++i) {
        conds.push_back(i % 8);
        streams.push_back(make_stream(StreamTag::Test, 21, static_cast<std::uint64_t>(i)));
    }
    const auto check_means = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const std::string& what) {
        Eigen::VectorXd va, vb;
        const Eigen::VectorXd ma = column_stats(a, va), mb = column_stats(b, vb);
        for (int d = 0; d < 2; ++d) {
            const double se = std::sqrt(va(d) / n + vb(d) / n);
            MESSAGE(what << " dim " << d << ": " << ma(d) << " vs " << mb(d) << " (se " << se << ")");
            CHECK(std::abs(ma(d) - mb(d)) <= 3.0 * se);
        }
    };

    SUBCASE("flow") {
        const auto& p = fixture::flow_policy(1500);
        const auto g = sched::build_flow_grid(16, 3.0);
        const auto sg = sched::flow_sigma(g, sched::FlowSigmaKind::Constant, 0.3);
        const SampleRequest req{conds, 0, streams, Precision::Double};
        const auto sde = flow_sde_sample({&p, {}}, g, sg, {}, req);
        const auto ode = flow_sde_sample({&p, {}}, g, sg, {}, req, true);
        check_means(sde.final_samples(), ode.final_samples(), "flow");
    }
    SUBCASE("diffusion") {
        const auto& p = fixture::diffusion_policy(1500);
        const auto sde_s = sched::make_ddim_schedule(fixture::sd_schedule(), 20, 1.0);
        const auto ode_s = sched::make_ddim_schedule(fixture::sd_schedule(), 20, 0.0, false);
        const SampleRequest req{conds, 0, streams, Precision::Double};
        check_means(ddim_reverse_sample({&p, {}}, sde_s, {}, req).final_samples(),
                    ddim_reverse_sample({&p, {}}, ode_s, {}, req).final_samples(), "diffusion");
    }
}

}
