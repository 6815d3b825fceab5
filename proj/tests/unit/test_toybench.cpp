// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "common/error.hpp"
#include "fixtures.hpp"
#include "toybench/comparison.hpp"
#include "toybench/trainer.hpp"

using namespace propcredit;
using namespace propcredit::toybench;

namespace {

DiffusionSetup small_diffusion() {
    DiffusionSetup d;
    d.train = fixture::sd_schedule();
    d.sample_steps = 10;
    return d;
}

FlowSetup small_flow() {
    FlowSetup f;
    f.steps = 8;
    return f;
}

VariantConfig small_variant(Method m) {
    VariantConfig v;
    v.method = m;
    v.sampler = m >= Method::FlowVanilla ? sampler::SamplerKind::Flow : sampler::SamplerKind::Diffusion;
    v.groups = 2;
    v.group_size = 8;
    v.minibatches = 2;
    return v;
}

const nn::PolicyParams& base_policy() {
    static const auto p = nn::PolicyParams::initialize(fixture::toy_arch(), 21);
    return p;
}

Trainer make_trainer(const VariantConfig& v, std::uint64_t seed = 0) {
    return Trainer(fixture::ring(), base_policy(), v, small_diffusion(), small_flow(), seed);
}

}  // namespace

TEST_SUITE("toybench") {

TEST_CASE("ring dataset") {
    const auto& ds = fixture::ring();
    CHECK(ds.num_components() == 8);
    CHECK(ds.num_conditions() == 10);
    double total = 0.0;
    for (double w : ds.weights) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ds.targets(0) == std::vector<int>{0});
    CHECK(ds.targets(8) == std::vector<int>{0, 2, 4, 6});
    CHECK(ds.targets(9) == std::vector<int>{1, 3, 5, 7});
    CHECK(ds.targets(ds.null_condition()).size() == 8);

    ToyDataset one;
    one.means = {Eigen::Vector2d(0.0, 0.0)};
    one.weights = {1.0};
    one.condition_targets = {{0}};
    CHECK_THROWS_AS(validate(one), Error);
    CHECK_THROWS_AS(ring_dataset(1, 3.0, 0.2, 0), Error);

    const std::vector<int> conds(4000, ds.null_condition());
    const auto x = sample_data(ds, conds, 1);
    CHECK(mode_coverage(x, ds) == 1.0);
    CHECK(sample_spread(x, ds) == doctest::Approx(0.2 * std::sqrt(std::numbers::pi / 2.0)).epsilon(0.05));
}

TEST_CASE("rewards") {
    const auto& ds = fixture::ring();
    const RewardSpec spec;
    const Eigen::Vector2d m0 = ds.means[0];
    CHECK(reward(ds, spec, m0, 0) == 1.0);
    CHECK(reward(ds, spec, Eigen::Vector2d(50.0, 50.0), 0) < 1e-12);
    const Eigen::Vector2d off = m0 + Eigen::Vector2d(0.0, std::sqrt(spec.tau));
    CHECK(reward(ds, spec, off, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    // condition 8 rewards any even mode
    CHECK(reward(ds, spec, ds.means[2], 8) == 1.0);
    CHECK(reward(ds, spec, ds.means[1], 8) < 0.1);

    RewardSpec half;
    half.kind = RewardKind::HalfPlane;
    CHECK(reward(ds, half, Eigen::Vector2d(0.0, 1.0), 0) == doctest::Approx(0.5));
    CHECK(reward(ds, half, Eigen::Vector2d(3.0, 0.0), 0) > 0.99);
    CHECK(parse_reward_kind(reward_name(RewardKind::HalfPlane)) == RewardKind::HalfPlane);
    CHECK_THROWS_AS(parse_reward_kind("bogus"), Error);
}

TEST_CASE("coverage") {
    const auto& ds = fixture::ring();
    Eigen::MatrixXd at_means(2, 8);
    for (int i = 0; i < 8; ++i) at_means.col(i) = ds.means[i];
    CHECK(mode_coverage(at_means, ds) == 1.0);
    Eigen::MatrixXd one(2, 8);
    one.colwise() = ds.means[3];
    CHECK(mode_coverage(one, ds) == doctest::Approx(1.0 / 8.0));
    CHECK(mode_coverage(one, ds, std::vector<int>{1, 3, 5, 7}) == doctest::Approx(0.25));
}

TEST_CASE("methods") {
    for (auto m : {Method::DdpoBaseline, Method::LogRho, Method::EpsMatching, Method::PcpoFull,
                   Method::TimestepSubsample, Method::FlowVanilla, Method::FlowProportional, Method::FlowUniform}) {
        CHECK(parse_method(method_name(m)) == m);
    }
    CHECK_THROWS_AS(parse_method("ppo"), Error);
    CHECK(supports(Method::PcpoFull, sampler::SamplerKind::Flow));
    CHECK(!supports(Method::FlowUniform, sampler::SamplerKind::Diffusion));
    auto bad = small_variant(Method::FlowUniform);
    bad.sampler = sampler::SamplerKind::Diffusion;
    CHECK_THROWS_AS(validate(bad, fixture::ring()), Error);
    auto no_groups = small_variant(Method::PcpoFull);
    no_groups.train_conditions = {42};
    CHECK_THROWS_AS(validate(no_groups, fixture::ring()), Error);
}

TEST_CASE("zero inner epochs leave the policy unchanged") {
    auto v = small_variant(Method::PcpoFull);
    v.inner_epochs = 0;
    auto t = make_trainer(v);
    t.rl_epoch();
    CHECK(t.policy() == base_policy());
}

TEST_CASE("first inner step never clips for matching losses") {
    for (auto m : {Method::EpsMatching, Method::PcpoFull}) {
        for (auto prec : {sampler::Precision::Single, sampler::Precision::Double}) {
            auto v = small_variant(m);
            v.rollout_precision = prec;
            auto t = make_trainer(v);
            for (int e = 0; e < 3; ++e) CHECK(t.rl_epoch().clip_frac_first_step == 0.0);
            CHECK(!(t.policy() == base_policy()));
        }
    }
    auto v = small_variant(Method::PcpoFull);
    v.sampler = sampler::SamplerKind::Flow;
    auto t = make_trainer(v);
    for (int e = 0; e < 2; ++e) CHECK(t.rl_epoch().clip_frac_first_step == 0.0);
}

TEST_CASE("constant weights for the full variant") {
    auto t = make_trainer(small_variant(Method::PcpoFull));
    const auto& w = t.step_weights();
    for (double x : w) CHECK(std::abs(x - w.front()) <= 1e-9);
    auto base = make_trainer(small_variant(Method::DdpoBaseline));
    double mean = 0.0;
    for (double x : base.step_weights()) mean += x / static_cast<double>(base.step_weights().size());
    CHECK(w.front() == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("proportional flow weights change the update") {
    auto vanilla = make_trainer(small_variant(Method::FlowVanilla));
    auto prop = make_trainer(small_variant(Method::FlowProportional));
    vanilla.rl_epoch();
    prop.rl_epoch();
    CHECK(!(vanilla.policy() == prop.policy()));
}

TEST_CASE("subsampling touches half the steps") {
    auto v = small_variant(Method::TimestepSubsample);
    v.inner_epochs = 3;
    auto t = make_trainer(v);
    t.rl_epoch();
    REQUIRE(t.last_positions().size() == 3);
    for (const auto& p : t.last_positions()) {
        CHECK(p.size() == 5);
        std::set<int> unique(p.begin(), p.end());
        CHECK(unique.size() == 5);
    }
    auto full = make_trainer(small_variant(Method::DdpoBaseline));
    full.rl_epoch();
    for (const auto& p : full.last_positions()) CHECK(p.size() == 10);
}

TEST_CASE("training is reproducible") {
    for (auto m : {Method::DdpoBaseline, Method::PcpoFull, Method::FlowVanilla}) {
        auto a = make_trainer(small_variant(m), 5);
        auto b = make_trainer(small_variant(m), 5);
        const auto ra = a.run(2), rb = b.run(2);
        CHECK(a.policy() == b.policy());
        for (int e = 0; e < 2; ++e) CHECK(ra.epochs[e].reward_mean == rb.epochs[e].reward_mean);
    }
}

TEST_CASE("pretraining") {
    PretrainConfig cfg;
    cfg.steps = 40;
    const auto a = pretrain_diffusion(fixture::ring(), fixture::toy_arch(), fixture::sd_schedule(), cfg);
    const auto b = pretrain_diffusion(fixture::ring(), fixture::toy_arch(), fixture::sd_schedule(), cfg);
    CHECK(a.params == b.params);
    CHECK(a.loss == b.loss);
    const auto f1 = pretrain_flow(fixture::ring(), fixture::toy_arch(), cfg);
    const auto f2 = pretrain_flow(fixture::ring(), fixture::toy_arch(), cfg);
    CHECK(f1.params == f2.params);
}

TEST_CASE("pretrained policy covers the ring") {
    const auto& p = fixture::diffusion_policy(3000);
    const auto s = sched::make_ddim_schedule(fixture::sd_schedule(), 20, 0.0, false);
    const std::vector<int> conds(512, fixture::ring().null_condition());
    const auto x = deterministic_samples(p, s, conds, 0);
    const double cov = mode_coverage(x, fixture::ring());
    MESSAGE("pretrained coverage " << cov << ", spread " << sample_spread(x, fixture::ring()));
    CHECK(cov >= 0.9);
}

TEST_CASE("comparison bookkeeping") {
    RunMetrics run;
    for (int e = 0; e < 10; ++e) run.epochs.push_back({e, 0.1 * e, 0, 0, 0, 0, 0});
    CHECK(epochs_to_threshold(run, -1.0, 5) == 0);
    CHECK(epochs_to_threshold(run, 0.35, 1) == 4);
    CHECK(!epochs_to_threshold(run, 5.0, 5));
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);

    ComparisonConfig cc;
    cc.variants = {small_variant(Method::PcpoFull), small_variant(Method::PcpoFull)};
    cc.epochs = 3;
    const BasePolicies bases{&base_policy(), &base_policy()};
    const auto r = run_comparison(fixture::ring(), bases, small_diffusion(), small_flow(), cc);
    REQUIRE(r.runs.size() == 2);
    for (int e = 0; e < 3; ++e) {
        CHECK(r.runs[0].epochs[e].reward_mean == r.runs[1].epochs[e].reward_mean);
        CHECK(r.runs[0].epochs[e].coverage == r.runs[1].epochs[e].coverage);
    }
    const auto csv = metrics_csv(r.runs);
    CHECK(csv.rfind("epoch,variant,seed,reward_mean,clip_frac,clip_frac_first_step,coverage", 0) == 0);

    ComparisonConfig low = cc;
    low.variants.resize(1);
    low.thresholds = {-1.0};
    const auto lr = run_comparison(fixture::ring(), bases, small_diffusion(), small_flow(), low);
    REQUIRE(lr.summary.size() == 1);
    CHECK(lr.summary[0].median_epochs == 0.0);
}

}
