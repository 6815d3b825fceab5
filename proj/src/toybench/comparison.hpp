// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "toybench/trainer.hpp"

namespace propcredit::toybench {

struct ComparisonConfig {
    std::vector<VariantConfig> variants;
    std::vector<std::uint64_t> seeds{0};
    int epochs = 200;
    /// Explicit reward thresholds. Empty selects one automatic threshold per
    /// sampler family: the midpoint between base reward and plateau.
    std::vector<double> thresholds;
    int smoothing_window = 5;
    int plateau_window = 20;
    int threads = 1;
};

struct BasePolicies {
    const nn::PolicyParams* diffusion = nullptr;
    const nn::PolicyParams* flow = nullptr;
};

struct RunOutcome {
    std::string variant;
    std::uint64_t seed = 0;
    double threshold = 0.0;
    std::optional<int> epochs_to_threshold;
    /// Coverage at the crossing epoch, or at the last epoch when never reached.
    double coverage_at_threshold = 0.0;
    double mean_clip_frac = 0.0;
    double mean_clip_frac_first_step = 0.0;
    double max_taylor_gap = 0.0;
};

struct VariantSummary {
    std::string variant;
    double threshold = 0.0;
    /// Unreached runs count as `epochs` (censored).
    double median_epochs = 0.0;
    int reached = 0;
    int runs = 0;
    double median_coverage = 0.0;
    double mean_clip_frac = 0.0;
    double mean_clip_frac_first_step = 0.0;
    double max_taylor_gap = 0.0;
};

struct FamilyLevels {
    sampler::SamplerKind sampler = sampler::SamplerKind::Diffusion;
    double base_reward = 0.0;
    double plateau_reward = 0.0;
};

struct ComparisonResult {
    int epochs = 0;
    std::vector<RunMetrics> runs;  // variant-major, seeds inner
    std::vector<FamilyLevels> levels;
    std::vector<RunOutcome> outcomes;
    std::vector<VariantSummary> summary;
};

/// Trailing moving average of the per-epoch mean reward.
std::vector<double> smoothed_reward(const RunMetrics& run, int window);

/// First epoch whose smoothed reward reaches `threshold`.
std::optional<int> epochs_to_threshold(const RunMetrics& run, double threshold, int window);

double median(std::vector<double> values);

ComparisonResult run_comparison(const ToyDataset& dataset, const BasePolicies& bases, const DiffusionSetup& diffusion,
                                const FlowSetup& flow, const ComparisonConfig& config);

/// epoch,variant,seed,reward_mean,clip_frac,clip_frac_first_step,coverage,spread,taylor_gap_max
std::string metrics_csv(const std::vector<RunMetrics>& runs);
std::string summary_json(const ComparisonResult& result, const ComparisonConfig& config);
std::string reward_plot_svg(const std::vector<RunMetrics>& runs);
std::string clip_plot_svg(const std::vector<RunMetrics>& runs);

}  // namespace propcredit::toybench
