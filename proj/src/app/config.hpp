// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nn/policy_net.hpp"
#include "toybench/comparison.hpp"
#include "toybench/pretrain.hpp"
#include "toybench/trainer.hpp"

namespace propcredit::app {

inline constexpr int kConfigVersion = 1;

enum class Command { AuditSchedule, AuditFlow, Pretrain, Finetune, Compare, Irg };

std::string command_name(Command command);
Command parse_command(const std::string& name);
const std::vector<Command>& all_commands();

struct DatasetSection {
    int modes = 8;
    double radius = 3.0;
    double scale = 0.2;
    std::uint64_t seed = 0;
};

struct NetworkSection {
    int time_pairs = 8;
    int cond_dim = 8;
    std::vector<int> hidden{64, 64, 64};
};

struct DiffusionSection {
    int train_steps = 1000;
    double beta_start = 8.5e-4;
    double beta_end = 1.2e-2;
    std::string beta_schedule = "scaled-linear";
    int sample_steps = 20;
    double eta = 0.1;
    int steps_offset = -1;  // -1: 1 when the stride is at least 2, else 0
    std::optional<double> w_star;
};

struct FlowSection {
    std::string name = "custom";
    int steps = 16;
    double shift = 3.0;
    std::string sigma = "constant";
    double eta = 0.3;
};

struct PretrainSection {
    int steps = 3000;
    int batch = 256;
    double lr = 2e-3;
    double lr_final = 1e-4;
    double cond_dropout = 0.1;
    std::string sampler = "diffusion";  // pretrain command only
    int eval_samples = 512;
    std::optional<std::string> diffusion_checkpoint;
    std::optional<std::string> flow_checkpoint;
};

struct RewardSection {
    std::string kind = "mode-distance";
    double tau = 0.1;
    std::vector<double> normal{1.0, 0.0};
    double offset = 0.0;
    double sharpness = 2.0;
};

struct RlSection {
    int epochs = 200;
    double xi = 0.1;
    double lr = 3e-4;
    int groups = 8;
    int group_size = 16;
    int inner_epochs = 2;
    int minibatches = 4;
    double subsample_fraction = 0.5;
    std::string rollout_precision = "single";
    std::vector<int> train_conditions{8, 9};
    double grad_clip = 1.0;
    RewardSection reward;
};

struct FinetuneSection {
    std::string variant = "pcpo-full";
};

struct CompareSection {
    /// "method" or "method:sampler"; flow-* methods default to the flow sampler.
    std::vector<std::string> variants{"ddpo-baseline", "pcpo-full"};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<double> thresholds;
    int smoothing_window = 5;
    int plateau_window = 20;
};

struct IrgSection {
    std::string variant = "pcpo-full";
    int finetune_epochs = 60;
    std::vector<RewardSection> rewards;
    /// One weight vector per sweep point, one entry per reward.
    std::vector<std::vector<double>> sweep;
    double cfg_scale = 1.0;
    int samples_per_condition = 128;
    std::vector<int> conditions{8, 9};
};

struct RunConfig {
    int version = kConfigVersion;
    Command command = Command::AuditSchedule;
    std::uint64_t seed = 0;
    int threads = 1;
    DatasetSection dataset;
    NetworkSection network;
    DiffusionSection diffusion;
    FlowSection flow;
    std::vector<FlowSection> flow_presets;
    PretrainSection pretrain;
    RlSection rl;
    FinetuneSection finetune;
    CompareSection compare;
    IrgSection irg;
};

RunConfig default_config(Command command);

/// Sections used by the command only, in a stable key order.
nlohmann::ordered_json to_json(const RunConfig& config);

/// Parses a config document or a run manifest (which embeds one under
/// "config"). Unknown keys, a wrong version, or a command mismatch when
/// `expected` is set throw a Config error. Missing keys take defaults.
RunConfig config_from_json(const nlohmann::json& doc, std::optional<Command> expected = std::nullopt);
RunConfig config_from_text(const std::string& text, std::optional<Command> expected = std::nullopt);

// Typed views used by the commands.
nn::Architecture architecture(const RunConfig& config);
toybench::ToyDataset dataset(const RunConfig& config);
sched::TrainSchedule train_schedule(const DiffusionSection& section);
toybench::DiffusionSetup diffusion_setup(const RunConfig& config);
toybench::FlowSetup flow_setup(const FlowSection& section);
toybench::PretrainConfig pretrain_config(const RunConfig& config);
toybench::RewardSpec reward_spec(const RewardSection& section);
/// "method[:sampler]" plus the rl section.
toybench::VariantConfig variant_config(const RunConfig& config, const std::string& variant);

}  // namespace propcredit::app
