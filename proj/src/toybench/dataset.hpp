// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace propcredit::toybench {

/// Isotropic Gaussian mixture in the plane plus a condition vocabulary.
///
/// Condition ids index `condition_targets`; each maps to the subset of
/// components a conditional sample should come from. The null condition
/// (id == num_conditions()) draws from the full mixture.
struct ToyDataset {
    std::vector<Eigen::Vector2d> means;
    double scale = 0.2;
    std::vector<double> weights;
    std::vector<std::vector<int>> condition_targets;
    std::uint64_t seed = 0;

    int num_components() const { return static_cast<int>(means.size()); }
    int num_conditions() const { return static_cast<int>(condition_targets.size()); }
    int null_condition() const { return num_conditions(); }
    /// Components a condition targets; the null condition targets all of them.
    std::vector<int> targets(int condition) const;
};

/// Throws InvalidArgument unless weights sum to 1, there are at least two
/// components and every condition targets valid components.
void validate(const ToyDataset& dataset);

/// `modes` components evenly spaced on a circle. Conditions 0..modes-1 pick a
/// single component, `modes` the even ones and `modes + 1` the odd ones.
ToyDataset ring_dataset(int modes, double radius, double scale, std::uint64_t seed);

/// Draws one sample per entry of `conds` (2 x n) from rng stream `stream` of
/// the dataset seed.
Eigen::MatrixXd sample_data(const ToyDataset& dataset, std::span<const int> conds, std::uint64_t stream);

/// Index of the nearest component mean.
int nearest_component(const ToyDataset& dataset, const Eigen::Vector2d& x);

/// Fraction of `components` (all components when empty) whose share of
/// nearest-assigned samples is at least `min_share`. A negative min_share
/// selects 0.25 / components.size().
double mode_coverage(const Eigen::MatrixXd& samples, const ToyDataset& dataset, std::span<const int> components = {},
                     double min_share = -1.0);

/// Mean distance of each sample to its nearest component mean.
double sample_spread(const Eigen::MatrixXd& samples, const ToyDataset& dataset);

enum class RewardKind { ModeDistance, HalfPlane };

struct RewardSpec {
    RewardKind kind = RewardKind::ModeDistance;
    double tau = 0.1;
    /// half-plane: sigmoid(sharpness * (normal . x - offset))
    Eigen::Vector2d normal{1.0, 0.0};
    double offset = 0.0;
    double sharpness = 2.0;
};

std::string reward_name(RewardKind kind);
RewardKind parse_reward_kind(const std::string& name);

/// exp(-min_m ||x - m||^2 / tau) over the condition's target components, or
/// the half-plane sigmoid.
double reward(const ToyDataset& dataset, const RewardSpec& spec, const Eigen::Vector2d& x, int condition);
std::vector<double> rewards(const ToyDataset& dataset, const RewardSpec& spec, const Eigen::MatrixXd& samples,
                            std::span<const int> conds);

}  // namespace propcredit::toybench
