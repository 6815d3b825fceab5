// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "toybench/dataset.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace propcredit::toybench {

std::vector<int> ToyDataset::targets(int condition) const {
    if (condition == null_condition()) {
        std::vector<int> all(means.size());
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    PROPCREDIT_REQUIRE(condition >= 0 && condition < num_conditions(), "condition id out of range");
    return condition_targets[static_cast<std::size_t>(condition)];
}

void validate(const ToyDataset& dataset) {
    PROPCREDIT_REQUIRE(dataset.means.size() >= 2, "a toy dataset needs at least two components");
    PROPCREDIT_REQUIRE(dataset.weights.size() == dataset.means.size(), "one weight per component is required");
    PROPCREDIT_REQUIRE(dataset.scale > 0.0 && std::isfinite(dataset.scale), "component scale must be positive");
    double total = 0.0;
    for (double w : dataset.weights) {
        PROPCREDIT_REQUIRE(w >= 0.0, "component weights must be non-negative");
        total += w;
    }
    PROPCREDIT_REQUIRE(std::abs(total - 1.0) <= 1e-12, "component weights must sum to 1");
    for (const auto& t : dataset.condition_targets) {
        PROPCREDIT_REQUIRE(!t.empty(), "a condition must target at least one component");
        for (int c : t) PROPCREDIT_REQUIRE(c >= 0 && c < dataset.num_components(), "condition targets an unknown component");
    }
}

ToyDataset ring_dataset(int modes, double radius, double scale, std::uint64_t seed) {
    PROPCREDIT_REQUIRE(modes >= 2, "a ring needs at least two modes");
    PROPCREDIT_REQUIRE(radius > 0.0, "ring radius must be positive");
    ToyDataset ds;
    ds.scale = scale;
    ds.seed = seed;
    for (int m = 0; m < modes; ++m) {
        const double angle = 2.0 * std::numbers::pi * m / modes;
        ds.means.emplace_back(radius * std::cos(angle), radius * std::sin(angle));
        ds.condition_targets.push_back({m});
    }
    ds.weights.assign(static_cast<std::size_t>(modes), 1.0 / modes);
    std::vector<int> even, odd;
    for (int m = 0; m < modes; ++m) (m % 2 == 0 ? even : odd).push_back(m);
    ds.condition_targets.push_back(even);
    ds.condition_targets.push_back(odd);
    validate(ds);
    return ds;
}

Eigen::MatrixXd sample_data(const ToyDataset& dataset, std::span<const int> conds, std::uint64_t stream) {
    CounterRng rng(dataset.seed, stream);
    Eigen::MatrixXd out(2, static_cast<Eigen::Index>(conds.size()));
    for (std::size_t i = 0; i < conds.size(); ++i) {
        const auto targets = dataset.targets(conds[i]);
        double total = 0.0;
        for (int c : targets) total += dataset.weights[static_cast<std::size_t>(c)];
        double u = rng.uniform() * total;
        int pick = targets.back();
        for (int c : targets) {
            u -= dataset.weights[static_cast<std::size_t>(c)];
            if (u < 0.0) {
                pick = c;
                break;
            }
        }
        const auto& m = dataset.means[static_cast<std::size_t>(pick)];
        const auto col = static_cast<Eigen::Index>(i);
        out(0, col) = m.x() + dataset.scale * rng.normal();
        out(1, col) = m.y() + dataset.scale * rng.normal();
    }
    return out;
}

int nearest_component(const ToyDataset& dataset, const Eigen::Vector2d& x) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < dataset.num_components(); ++c) {
        const double d = (x - dataset.means[static_cast<std::size_t>(c)]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

double mode_coverage(const Eigen::MatrixXd& samples, const ToyDataset& dataset, std::span<const int> components,
                     double min_share) {
    PROPCREDIT_REQUIRE(samples.rows() == 2, "samples must be 2 x n");
    PROPCREDIT_REQUIRE(samples.cols() > 0, "coverage needs at least one sample");
    std::vector<int> subset(components.begin(), components.end());
    if (subset.empty()) subset = dataset.targets(dataset.null_condition());
    if (min_share < 0.0) min_share = 0.25 / static_cast<double>(subset.size());
    std::vector<int> counts(static_cast<std::size_t>(dataset.num_components()), 0);
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        ++counts[static_cast<std::size_t>(nearest_component(dataset, samples.col(i)))];
    }
    int covered = 0;
    for (int c : subset) {
        const double share = counts[static_cast<std::size_t>(c)] / static_cast<double>(samples.cols());
        if (share >= min_share) ++covered;
    }
    return covered / static_cast<double>(subset.size());
}

double sample_spread(const Eigen::MatrixXd& samples, const ToyDataset& dataset) {
    PROPCREDIT_REQUIRE(samples.cols() > 0, "spread needs at least one sample");
    double total = 0.0;
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        const Eigen::Vector2d x = samples.col(i);
        total += (x - dataset.means[static_cast<std::size_t>(nearest_component(dataset, x))]).norm();
    }
    return total / static_cast<double>(samples.cols());
}

std::string reward_name(RewardKind kind) {
    return kind == RewardKind::ModeDistance ? "mode-distance" : "half-plane";
}

RewardKind parse_reward_kind(const std::string& name) {
    if (name == "mode-distance") return RewardKind::ModeDistance;
    if (name == "half-plane") return RewardKind::HalfPlane;
    throw_config("unknown reward kind '" + name + "'");
}

double reward(const ToyDataset& dataset, const RewardSpec& spec, const Eigen::Vector2d& x, int condition) {
    if (spec.kind == RewardKind::HalfPlane) {
        const double z = spec.sharpness * (spec.normal.dot(x) - spec.offset);
        return 1.0 / (1.0 + std::exp(-z));
    }
    PROPCREDIT_REQUIRE(spec.tau > 0.0, "reward temperature must be positive");
    double best = std::numeric_limits<double>::infinity();
    for (int c : dataset.targets(condition)) {
        best = std::min(best, (x - dataset.means[static_cast<std::size_t>(c)]).squaredNorm());
    }
    return std::exp(-best / spec.tau);
}

std::vector<double> rewards(const ToyDataset& dataset, const RewardSpec& spec, const Eigen::MatrixXd& samples,
                            std::span<const int> conds) {
    PROPCREDIT_REQUIRE(static_cast<std::size_t>(samples.cols()) == conds.size(), "one condition per sample is required");
    std::vector<double> out(conds.size());
    for (std::size_t i = 0; i < conds.size(); ++i) {
        out[i] = reward(dataset, spec, samples.col(static_cast<Eigen::Index>(i)), conds[i]);
    }
    return out;
}

}  // namespace propcredit::toybench
