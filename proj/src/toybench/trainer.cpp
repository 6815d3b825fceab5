// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "toybench/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "nn/checkpoint.hpp"
#include "objective/objective.hpp"

namespace propcredit::toybench {

using sampler::Precision;
using sampler::SamplerKind;

namespace {

struct MethodName {
    Method method;
    const char* name;
};

constexpr MethodName kMethodNames[] = {
    {Method::DdpoBaseline, "ddpo-baseline"},
    {Method::LogRho, "log-rho"},
    {Method::EpsMatching, "eps-matching"},
    {Method::PcpoFull, "pcpo-full"},
    {Method::TimestepSubsample, "timestep-subsample"},
    {Method::FlowVanilla, "flow-vanilla"},
    {Method::FlowProportional, "flow-proportional"},
    {Method::FlowUniform, "flow-uniform"},
};

bool is_flow_only(Method m) {
    return m == Method::FlowVanilla || m == Method::FlowProportional || m == Method::FlowUniform;
}

sched::FlowWeightMode flow_mode(Method m) {
    switch (m) {
        case Method::FlowProportional:
        case Method::PcpoFull:
            return sched::FlowWeightMode::Proportional;
        case Method::FlowUniform:
            return sched::FlowWeightMode::Uniform;
        default:
            return sched::FlowWeightMode::Native;
    }
}

}  // namespace

std::string method_name(Method method) {
    for (const auto& m : kMethodNames) {
        if (m.method == method) return m.name;
    }
    throw_invalid("unknown method");
}

Method parse_method(const std::string& name) {
    for (const auto& m : kMethodNames) {
        if (name == m.name) return m.method;
    }
    throw_config("unknown method '" + name + "'");
}

bool supports(Method method, SamplerKind kind) {
    if (is_flow_only(method)) return kind == SamplerKind::Flow;
    if (method == Method::EpsMatching || method == Method::PcpoFull) return true;
    return kind == SamplerKind::Diffusion;
}

bool uses_matching_loss(Method method) {
    return method != Method::DdpoBaseline && method != Method::LogRho && method != Method::TimestepSubsample;
}

void validate(const VariantConfig& c, const ToyDataset& dataset) {
    if (!supports(c.method, c.sampler)) {
        throw_config("method " + method_name(c.method) + " does not run on the " +
                     (c.sampler == SamplerKind::Flow ? "flow" : "diffusion") + " sampler");
    }
    if (!(c.xi > 0.0 && c.xi < 1.0)) throw_config("xi must lie in (0, 1)");
    if (!(c.lr > 0.0)) throw_config("learning rate must be positive");
    if (c.groups < 1 || c.group_size < 1) throw_config("groups and group_size must be >= 1");
    if (c.inner_epochs < 0) throw_config("inner_epochs must be >= 0");
    if (c.minibatches < 1 || c.minibatches > c.groups * c.group_size) {
        throw_config("minibatches must lie in [1, rollout size]");
    }
    if (!(c.subsample_fraction > 0.0 && c.subsample_fraction <= 1.0)) {
        throw_config("subsample_fraction must lie in (0, 1]");
    }
    if (c.train_conditions.empty()) throw_config("train_conditions must not be empty");
    for (int cond : c.train_conditions) {
        if (cond < 0 || cond >= dataset.num_conditions()) throw_config("train condition out of range");
    }
}

struct Trainer::Batch {
    std::vector<double> advantage;
    /// snapshot of the rollout policy for recomputing old predictions
    std::optional<nn::PolicyParams> old;
};

Trainer::Trainer(ToyDataset dataset, nn::PolicyParams base, VariantConfig config, const DiffusionSetup& diffusion,
                 const FlowSetup& flow, std::uint64_t seed)
    : m_dataset(std::move(dataset)), m_policy(std::move(base)), m_config(std::move(config)), m_seed(seed) {
    validate(m_dataset);
    validate(m_config, m_dataset);
    PROPCREDIT_REQUIRE(m_policy.arch().num_conditions == m_dataset.num_conditions(),
                       "policy condition vocabulary does not match the dataset");
    m_optimizer = nn::OptimizerState::for_size(m_policy.size(), nn::AdamConfig{m_config.lr});

    if (m_config.sampler == SamplerKind::Diffusion) {
        auto schedule = sched::make_ddim_schedule(diffusion.train, diffusion.sample_steps, diffusion.eta, true,
                                                  diffusion.steps_offset);
        auto profile = sched::native_weights(schedule);
        if (m_config.method == Method::PcpoFull) {
            const double w_star = diffusion.w_star.value_or(sched::target_weight(profile));
            const auto solved = sched::solve_constant_sigma(schedule, w_star);
            schedule = sched::with_sigma(schedule, *solved.sigma_tilde);
            profile = sched::native_weights(schedule);
            double dev = 0.0;
            for (double w : profile.w) dev = std::max(dev, std::abs(w - w_star));
            if (!(dev <= 1e-9)) throw_numerical("constant-weight schedule deviates from w* by " + std::to_string(dev));
        }
        m_weights = profile.w;
        m_schedule = std::move(schedule);
    } else {
        m_grid = sched::build_flow_grid(flow.steps, flow.shift);
        m_sigma = sched::flow_sigma(*m_grid, flow.sigma_kind, flow.eta);
        m_weights = sched::flow_weights(*m_grid, *m_sigma, flow_mode(m_config.method)).w;
    }
}

sampler::Rollout Trainer::sample(std::span<const int> conds) {
    std::vector<std::uint64_t> streams(conds.size());
    for (std::size_t i = 0; i < conds.size(); ++i) {
        streams[i] = make_stream(StreamTag::Rollout, static_cast<std::uint64_t>(m_epoch), i);
    }
    const sampler::PolicySet set{&m_policy, {}};
    const sampler::SampleRequest req{conds, m_seed, streams, m_config.rollout_precision};
    if (m_schedule) return sampler::ddim_reverse_sample(set, *m_schedule, {}, req);
    return sampler::flow_sde_sample(set, *m_grid, *m_sigma, {}, req);
}

void Trainer::abort_numerical(const std::string& what) const {
    if (m_dump_path) save_checkpoint(m_policy, *m_dump_path);
    throw_numerical(method_name(m_config.method) + " epoch " + std::to_string(m_epoch) + ": " + what);
}

double Trainer::minibatch_step(const sampler::Rollout& rollout, const Batch& batch, std::span<const int> traj,
                               std::span<const int> positions, std::vector<double>& grad, int& clipped, int& terms,
                               double& taylor) {
    const auto& arch = m_policy.arch();
    const auto n = static_cast<Eigen::Index>(traj.size());
    // mean over trajectories, sum over steps
    const double norm = 1.0 / static_cast<double>(traj.size());
    const bool matching = uses_matching_loss(m_config.method);
    const double xi = m_config.xi;

    std::vector<int> conds(traj.size());
    for (std::size_t j = 0; j < traj.size(); ++j) conds[j] = rollout.conditions[static_cast<std::size_t>(traj[j])];

    auto gather = [&](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out(m.rows(), n);
        for (Eigen::Index j = 0; j < n; ++j) out.col(j) = m.col(traj[static_cast<std::size_t>(j)]);
        return out;
    };

    // Matching terms couple all positions of a trajectory through one hinge,
    // so predictions are computed for every position before any gradient.
    std::vector<nn::ForwardCache<double>> caches(positions.size());
    std::vector<Eigen::MatrixXd> preds(positions.size());
    for (std::size_t p = 0; p < positions.size(); ++p) {
        const auto s = static_cast<std::size_t>(positions[p]);
        const std::vector<double> times(traj.size(), rollout.time[s]);
        preds[p] = nn::predict_batch<double>(arch, m_policy.values(), gather(rollout.states[s]), times, conds,
                                             &caches[p]);
    }
    std::vector<Eigen::MatrixXd> upstream(positions.size(), Eigen::MatrixXd::Zero(arch.data_dim, n));
    double loss = 0.0;

    if (matching) {
        std::vector<Eigen::MatrixXd> old(positions.size()), noise(positions.size());
        for (std::size_t p = 0; p < positions.size(); ++p) {
            const auto s = static_cast<std::size_t>(positions[p]);
            const std::vector<double> times(traj.size(), rollout.time[s]);
            old[p] = nn::predict_batch<double>(arch, batch.old->values(), gather(rollout.states[s]), times, conds);
            noise[p] = gather(rollout.noises[s]);
        }
        std::vector<objective::StepRatioInputs> inputs(positions.size());
        for (Eigen::Index j = 0; j < n; ++j) {
            const double a = batch.advantage[static_cast<std::size_t>(traj[static_cast<std::size_t>(j)])];
            for (std::size_t p = 0; p < positions.size(); ++p) {
                const auto d = static_cast<std::size_t>(arch.data_dim);
                inputs[p] = {std::span<const double>(preds[p].col(j).data(), d),
                             std::span<const double>(old[p].col(j).data(), d),
                             std::span<const double>(noise[p].col(j).data(), d),
                             m_weights[static_cast<std::size_t>(rollout.step_index[static_cast<std::size_t>(positions[p])])],
                             xi};
            }
            const auto report = objective::eps_matching_loss(inputs, a, xi);
            loss += report.loss * norm;
            for (std::size_t p = 0; p < positions.size(); ++p) {
                for (int i = 0; i < arch.data_dim; ++i) upstream[p](i, j) = report.grad_pred_theta[p][static_cast<std::size_t>(i)] * norm;
                if (report.clip_mask[p]) ++clipped;
                ++terms;
                const double rho = std::exp(-objective::matching_distance(inputs[p]));
                if (!report.clip_mask[p] && rho != 1.0) taylor = std::max(taylor, objective::taylor_gap(rho));
            }
        }
    } else {
        const auto& sch = *m_schedule;
        for (std::size_t p = 0; p < positions.size(); ++p) {
            const auto s = static_cast<std::size_t>(positions[p]);
            const auto k = static_cast<std::size_t>(rollout.step_index[s]);
            const double sigma = sch.sigma[k];
            const double var = sigma * sigma;
            const Eigen::MatrixXd x = gather(rollout.states[s]);
            const Eigen::MatrixXd next = gather(rollout.states[s + 1]);
            const Eigen::MatrixXd mean = sampler::ddim_mean<double>(sch, k, x, preds[p]);
            const Eigen::VectorXd lp = sampler::gaussian_log_density<double>(next, mean, var);
            // d mean / d prediction
            const double slope = std::sqrt(1.0 - sch.alpha_bar_prev(k) - var) -
                                 std::sqrt(1.0 - sch.alpha_bar(k)) / std::sqrt(sch.alpha(k));
            for (Eigen::Index j = 0; j < n; ++j) {
                const auto i = static_cast<std::size_t>(traj[static_cast<std::size_t>(j)]);
                const double a = batch.advantage[i];
                const double log_rho = lp(j) - rollout.stored_logprob(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i));
                double d_log_rho = 0.0;
                bool is_clipped = false;
                if (m_config.method == Method::LogRho) {
                    loss += objective::log_hinge_term(log_rho, a, xi) * norm;
                    is_clipped = objective::hinge_clipped(log_rho, a, xi);
                    d_log_rho = is_clipped ? 0.0 : -a;
                } else {
                    const double rho = std::exp(log_rho);
                    loss += objective::ppo_clip_term(rho, a, xi) * norm;
                    is_clipped = objective::hinge_clipped(rho - 1.0, a, xi);
                    d_log_rho = is_clipped ? 0.0 : objective::ppo_clip_grad(rho, a, xi) * rho;
                }
                if (is_clipped) ++clipped;
                ++terms;
                upstream[p].col(j) = (d_log_rho * norm * slope / var) * (next.col(j) - mean.col(j));
            }
        }
    }
    if (!std::isfinite(loss)) abort_numerical("non-finite loss");

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t p = 0; p < positions.size(); ++p) {
        nn::backward(arch, m_policy.values(), caches[p], upstream[p], grad);
    }
    return loss;
}

EpochMetrics Trainer::rl_epoch() {
    const auto& cfg = m_config;
    const auto epoch_key = static_cast<std::uint64_t>(m_epoch);
    std::vector<int> conds;
    for (int g = 0; g < cfg.groups; ++g) {
        const int c = cfg.train_conditions[static_cast<std::size_t>(g) % cfg.train_conditions.size()];
        conds.insert(conds.end(), static_cast<std::size_t>(cfg.group_size), c);
    }
    sampler::Rollout rollout = sample(conds);
    rollout.rewards = rewards(m_dataset, cfg.reward, rollout.final_samples(), conds);

    EpochMetrics metrics;
    metrics.epoch = m_epoch;
    metrics.reward_mean = std::accumulate(rollout.rewards.begin(), rollout.rewards.end(), 0.0) /
                          static_cast<double>(rollout.rewards.size());
    {
        double coverage = 0.0;
        for (int c : cfg.train_conditions) {
            std::vector<Eigen::Index> cols;
            for (std::size_t i = 0; i < conds.size(); ++i) {
                if (conds[i] == c) cols.push_back(static_cast<Eigen::Index>(i));
            }
            Eigen::MatrixXd subset(2, static_cast<Eigen::Index>(cols.size()));
            for (std::size_t j = 0; j < cols.size(); ++j) {
                subset.col(static_cast<Eigen::Index>(j)) = rollout.final_samples().col(cols[j]);
            }
            coverage += mode_coverage(subset, m_dataset, m_dataset.targets(c));
        }
        metrics.coverage = coverage / static_cast<double>(cfg.train_conditions.size());
        metrics.spread = sample_spread(rollout.final_samples(), m_dataset);
    }

    Batch batch;
    std::vector<std::vector<double>> groups(static_cast<std::size_t>(cfg.groups));
    for (std::size_t i = 0; i < conds.size(); ++i) {
        groups[i / static_cast<std::size_t>(cfg.group_size)].push_back(rollout.rewards[i]);
    }
    for (const auto& a : objective::normalize_advantages(groups)) batch.advantage.push_back(a.value);

    const bool matching = uses_matching_loss(cfg.method);
    if (matching) {
        batch.old = m_policy;
    } else {
        sampler::store_baseline_logprob(rollout, *m_schedule);
    }

    const int K = rollout.num_positions();
    const int n = rollout.batch_size();
    std::vector<double> grad(m_policy.size());
    int clipped = 0, terms = 0;
    double taylor = 0.0;
    m_last_positions.clear();

    for (int inner = 0; inner < cfg.inner_epochs; ++inner) {
        const auto inner_key = static_cast<std::uint64_t>(inner);
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        CounterRng shuffle(m_seed, make_stream(StreamTag::Minibatch, epoch_key, inner_key));
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle.uniform() * (i + 1)) % (i + 1);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        std::vector<int> positions(static_cast<std::size_t>(K));
        std::iota(positions.begin(), positions.end(), 0);
        if (cfg.method == Method::TimestepSubsample) {
            const auto keep = static_cast<std::size_t>(std::ceil(cfg.subsample_fraction * K - 1e-12));
            CounterRng pick(m_seed, make_stream(StreamTag::Subsample, epoch_key, inner_key));
            for (std::size_t i = 0; i < keep; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(pick.uniform() * static_cast<double>(positions.size() - i));
                std::swap(positions[i], positions[std::min(j, positions.size() - 1)]);
            }
            positions.resize(keep);
            std::sort(positions.begin(), positions.end());
        }
        m_last_positions.push_back(positions);

        for (int mb = 0; mb < cfg.minibatches; ++mb) {
            const std::size_t lo = static_cast<std::size_t>(mb) * static_cast<std::size_t>(n) / static_cast<std::size_t>(cfg.minibatches);
            const std::size_t hi = static_cast<std::size_t>(mb + 1) * static_cast<std::size_t>(n) / static_cast<std::size_t>(cfg.minibatches);
            const std::span<const int> traj(order.data() + lo, hi - lo);
            int mb_clipped = 0, mb_terms = 0;
            minibatch_step(rollout, batch, traj, positions, grad, mb_clipped, mb_terms, taylor);
            if (inner == 0 && mb == 0) {
                metrics.clip_frac_first_step = static_cast<double>(mb_clipped) / static_cast<double>(mb_terms);
            }
            clipped += mb_clipped;
            terms += mb_terms;

            if (cfg.grad_clip > 0.0) {
                double sq = 0.0;
                for (double g : grad) sq += g * g;
                const double norm = std::sqrt(sq);
                if (!std::isfinite(norm)) abort_numerical("non-finite gradient");
                if (norm > cfg.grad_clip) {
                    const double scale = cfg.grad_clip / norm;
                    for (double& g : grad) g *= scale;
                }
            }
            nn::adam_step(m_policy.values(), grad, m_optimizer);
        }
    }
    for (double v : m_policy.values()) {
        if (!std::isfinite(v)) abort_numerical("non-finite parameters after update");
    }
    metrics.clip_frac = terms > 0 ? static_cast<double>(clipped) / terms : 0.0;
    metrics.taylor_gap_max = taylor;
    ++m_epoch;
    return metrics;
}

RunMetrics Trainer::run(int epochs) {
    PROPCREDIT_REQUIRE(epochs >= 0, "epoch budget must be >= 0");
    RunMetrics out;
    out.variant = method_name(m_config.method);
    out.seed = m_seed;
    for (int e = 0; e < epochs; ++e) out.epochs.push_back(rl_epoch());
    return out;
}

}  // namespace propcredit::toybench
