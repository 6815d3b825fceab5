// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nn/policy_net.hpp"
#include "sched/diffusion_schedule.hpp"
#include "sched/flow_schedule.hpp"

namespace propcredit::sampler {

enum class Precision { Double, Single };
enum class SamplerKind { Diffusion, Flow };

/// Classifier-free guidance scale plus implicit-reward-guidance mixing
/// weights (one per tuned policy in the PolicySet).
struct GuidanceSpec {
    double cfg_scale = 1.0;
    std::vector<double> irg_lambdas;
};

/// Reference policy plus optional tuned policies for IRG mixing. With no tuned
/// policies the reference is sampled directly.
struct PolicySet {
    const nn::PolicyParams* reference = nullptr;
    std::vector<const nn::PolicyParams*> tuned;
};

/// Guided prediction for a batch at time t (double precision).
///
/// CFG is applied per policy first: (1 - beta) p(x, null) + beta p(x, c). The
/// policies are then mixed as (1 - sum lambda) p_ref + sum lambda_i p_i, the
/// same vector as p_ref + sum lambda_i (p_i - p_ref) but exact for lambda = 0
/// and for a single lambda = 1.
Eigen::MatrixXd guided_prediction(const GuidanceSpec& spec, const PolicySet& policies, const Eigen::MatrixXd& x,
                                  double t, std::span<const int> conds);

/// One recorded reverse-sampling step of a single trajectory.
struct StepRecord {
    int step_index = 0;  // schedule index (diffusion) or grid index (flow)
    double time = 0.0;   // network time input
    std::vector<double> state;
    std::vector<double> noise;
    std::vector<double> prediction;
    std::optional<double> stored_logprob;
};

struct Trajectory {
    std::vector<StepRecord> steps;
    std::vector<double> final_sample;
    int condition = 0;
    double reward = 0.0;
    std::uint64_t stream = 0;
};

/// A batch of trajectories stored column-wise, one matrix per sampling position.
///
/// Position s = 0 is the first reverse step (pure noise). states has K + 1
/// entries; states[s + 1] is produced from states[s], predictions[s] and
/// noises[s]. Values are stored in double but were computed at `precision`.
struct Rollout {
    SamplerKind kind = SamplerKind::Diffusion;
    Precision precision = Precision::Double;
    bool ode = false;
    std::vector<int> step_index;
    std::vector<double> time;
    std::vector<Eigen::MatrixXd> states;
    std::vector<Eigen::MatrixXd> noises;
    std::vector<Eigen::MatrixXd> predictions;
    Eigen::MatrixXd stored_logprob;  // K x n, empty until stored
    std::vector<int> conditions;
    std::vector<std::uint64_t> streams;
    std::vector<double> rewards;

    int num_positions() const { return static_cast<int>(noises.size()); }
    int batch_size() const { return static_cast<int>(conditions.size()); }
    const Eigen::MatrixXd& final_samples() const { return states.back(); }
    Trajectory trajectory(std::size_t i) const;
};

struct SampleRequest {
    std::span<const int> conds;
    std::uint64_t seed = 0;
    /// One rng stream id per trajectory.
    std::span<const std::uint64_t> streams;
    Precision precision = Precision::Double;
};

/// Stochastic DDIM reverse sampling from x_T ~ N(0, I).
Rollout ddim_reverse_sample(const PolicySet& policies, const sched::DiffusionSchedule& schedule,
                            const GuidanceSpec& spec, const SampleRequest& request);

/// Euler-Maruyama integration of the flow SDE from t = 1 to t = 0. With
/// ode = true the update is the plain Euler step z - u dt and no noise is drawn.
Rollout flow_sde_sample(const PolicySet& policies, const sched::FlowGrid& grid, const sched::FlowSigma& sigma,
                        const GuidanceSpec& spec, const SampleRequest& request, bool ode = false);

/// DDIM transition mean for schedule step k.
template <class S>
nn::Matrix<S> ddim_mean(const sched::DiffusionSchedule& schedule, std::size_t k, const nn::Matrix<S>& x,
                        const nn::Matrix<S>& pred);

/// Flow transition mean z - u dt + (sigma^2 / 2) s dt with
/// s = -(z - (1 - t) z0_hat) / sigma^2 and z0_hat = z - u t.
template <class S>
nn::Matrix<S> flow_mean(double t, double dt, double sigma, const nn::Matrix<S>& z, const nn::Matrix<S>& u);

/// Standard deviation of the position's Gaussian transition.
double transition_std(const Rollout& rollout, const sched::DiffusionSchedule* schedule,
                      const sched::FlowGrid* grid, const sched::FlowSigma* sigma, int position);

/// Re-applies every recorded update with the stored noise at the rollout's
/// precision; true iff every next state is reproduced bitwise.
bool replay_matches(const Rollout& rollout, const sched::DiffusionSchedule& schedule);
bool replay_matches(const Rollout& rollout, const sched::FlowGrid& grid, const sched::FlowSigma& sigma);

/// log N(x; mean, var I) summed over dimensions, per column.
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> gaussian_log_density(const nn::Matrix<S>& x, const nn::Matrix<S>& mean, S var);

/// Fills rollout.stored_logprob with the old policy's per-step log densities,
/// computed at the rollout's precision.
void store_baseline_logprob(Rollout& rollout, const sched::DiffusionSchedule& schedule);
void store_baseline_logprob(Rollout& rollout, const sched::FlowGrid& grid, const sched::FlowSigma& sigma);

}  // namespace propcredit::sampler
