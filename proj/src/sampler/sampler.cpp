// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "sampler/sampler.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace propcredit::sampler {

namespace {

using nn::Matrix;

template <class S>
struct PolicyBank {
    const nn::Architecture* arch = nullptr;
    std::vector<std::vector<S>> owned;
    std::vector<std::span<const S>> params;  // [0] reference, then tuned
};

template <class S>
PolicyBank<S> make_bank(const PolicySet& set) {
    PROPCREDIT_REQUIRE(set.reference != nullptr, "policy set needs a reference policy");
    PolicyBank<S> bank;
    bank.arch = &set.reference->arch();
    std::vector<const nn::PolicyParams*> all{set.reference};
    all.insert(all.end(), set.tuned.begin(), set.tuned.end());
    for (const auto* p : all) {
        PROPCREDIT_REQUIRE(p != nullptr && p->arch() == *bank.arch, "all mixed policies must share one architecture");
    }
    if constexpr (std::is_same_v<S, double>) {
        for (const auto* p : all) bank.params.push_back(p->values());
    } else {
        bank.owned.reserve(all.size());
        for (const auto* p : all) bank.owned.emplace_back(p->values().begin(), p->values().end());
        for (const auto& v : bank.owned) bank.params.emplace_back(v);
    }
    return bank;
}

template <class S>
Matrix<S> guided(const GuidanceSpec& spec, const PolicyBank<S>& bank, const Matrix<S>& x, double t,
                 std::span<const int> conds) {
    PROPCREDIT_REQUIRE(spec.irg_lambdas.size() + 1 == bank.params.size(), "one IRG weight per tuned policy is required");
    PROPCREDIT_REQUIRE(spec.cfg_scale >= 0.0, "guidance scale must be >= 0");
    const std::vector<double> times(conds.size(), t);
    const auto& arch = *bank.arch;
    auto eval = [&](std::size_t p) -> Matrix<S> {
        if (spec.cfg_scale == 1.0) return nn::predict_batch<S>(arch, bank.params[p], x, times, conds);
        const std::vector<int> nulls(conds.size(), arch.null_condition());
        Matrix<S> uncond = nn::predict_batch<S>(arch, bank.params[p], x, times, nulls);
        if (spec.cfg_scale == 0.0) return uncond;
        Matrix<S> cond = nn::predict_batch<S>(arch, bank.params[p], x, times, conds);
        return S(1.0 - spec.cfg_scale) * uncond + S(spec.cfg_scale) * cond;
    };
    if (spec.irg_lambdas.empty()) return eval(0);
    const double lambda_sum = std::accumulate(spec.irg_lambdas.begin(), spec.irg_lambdas.end(), 0.0);
    Matrix<S> out = S(1.0 - lambda_sum) * eval(0);
    for (std::size_t i = 0; i < spec.irg_lambdas.size(); ++i) out += S(spec.irg_lambdas[i]) * eval(i + 1);
    return out;
}

template <class S>
void check_finite(const Matrix<S>& m, const char* what, int position) {
    if (!m.allFinite()) {
        throw_numerical(std::string("non-finite ") + what + " at sampling position " + std::to_string(position));
    }
}

template <class S>
Matrix<S> noise_matrix(std::vector<CounterRng>& rngs, int dim) {
    Matrix<S> out(dim, static_cast<Eigen::Index>(rngs.size()));
    for (std::size_t i = 0; i < rngs.size(); ++i) {
        for (int j = 0; j < dim; ++j) out(j, static_cast<Eigen::Index>(i)) = static_cast<S>(rngs[i].normal());
    }
    return out;
}

template <class S>
Rollout run_sampler(const PolicySet& policies, const GuidanceSpec& spec, const SampleRequest& req, SamplerKind kind,
                    const sched::DiffusionSchedule* schedule, const sched::FlowGrid* grid,
                    const sched::FlowSigma* fsigma, bool ode) {
    PROPCREDIT_REQUIRE(req.streams.size() == req.conds.size(), "one rng stream per trajectory is required");
    PROPCREDIT_REQUIRE(!req.conds.empty(), "empty sampling batch");
    const PolicyBank<S> bank = make_bank<S>(policies);
    const int dim = bank.arch->data_dim;

    Rollout r;
    r.kind = kind;
    r.precision = std::is_same_v<S, double> ? Precision::Double : Precision::Single;
    r.ode = ode;
    r.conditions.assign(req.conds.begin(), req.conds.end());
    r.streams.assign(req.streams.begin(), req.streams.end());

    std::vector<CounterRng> rngs;
    rngs.reserve(req.streams.size());
    for (auto stream : req.streams) rngs.emplace_back(req.seed, stream);

    Matrix<S> x = noise_matrix<S>(rngs, dim);
    r.states.push_back(x.template cast<double>());

    const int positions = kind == SamplerKind::Diffusion ? static_cast<int>(schedule->size()) : grid->N;
    for (int s = 0; s < positions; ++s) {
        Matrix<S> mean;
        double std_dev = 0.0;
        double t = 0.0;
        int index = 0;
        Matrix<S> pred;
        if (kind == SamplerKind::Diffusion) {
            const std::size_t k = schedule->size() - 1 - static_cast<std::size_t>(s);
            index = static_cast<int>(k);
            t = schedule->time_feature(k);
            pred = guided<S>(spec, bank, x, t, req.conds);
            check_finite(pred, "prediction", s);
            mean = ddim_mean<S>(*schedule, k, x, pred);
            std_dev = schedule->sigma[k];
        } else {
            const auto i = static_cast<std::size_t>(s);
            index = s;
            t = grid->t[i];
            pred = guided<S>(spec, bank, x, t, req.conds);
            check_finite(pred, "prediction", s);
            if (ode) {
                mean = x - S(grid->dt[i]) * pred;
            } else {
                mean = flow_mean<S>(t, grid->dt[i], fsigma->sigma[i], x, pred);
                std_dev = fsigma->sigma[i] * std::sqrt(grid->dt[i]);
            }
        }
        Matrix<S> noise = Matrix<S>::Zero(dim, x.cols());
        if (!ode && std_dev > 0.0) noise = noise_matrix<S>(rngs, dim);
        Matrix<S> next = mean + S(std_dev) * noise;
        check_finite(next, "state", s);

        r.step_index.push_back(index);
        r.time.push_back(t);
        r.noises.push_back(noise.template cast<double>());
        r.predictions.push_back(pred.template cast<double>());
        r.states.push_back(next.template cast<double>());
        x = std::move(next);
    }
    return r;
}

template <class S>
bool replay_impl(const Rollout& r, const sched::DiffusionSchedule* schedule, const sched::FlowGrid* grid,
                 const sched::FlowSigma* fsigma) {
    for (int s = 0; s < r.num_positions(); ++s) {
        const auto su = static_cast<std::size_t>(s);
        const Matrix<S> x = r.states[su].template cast<S>();
        const Matrix<S> pred = r.predictions[su].template cast<S>();
        const Matrix<S> noise = r.noises[su].template cast<S>();
        Matrix<S> mean;
        double std_dev = 0.0;
        const auto k = static_cast<std::size_t>(r.step_index[su]);
        if (r.kind == SamplerKind::Diffusion) {
            mean = ddim_mean<S>(*schedule, k, x, pred);
            std_dev = schedule->sigma[k];
        } else if (r.ode) {
            mean = x - S(grid->dt[k]) * pred;
        } else {
            mean = flow_mean<S>(grid->t[k], grid->dt[k], fsigma->sigma[k], x, pred);
            std_dev = fsigma->sigma[k] * std::sqrt(grid->dt[k]);
        }
        const Matrix<S> next = mean + S(std_dev) * noise;
        if (!(next.template cast<double>().array() == r.states[su + 1].array()).all()) return false;
    }
    return true;
}

template <class S>
void store_impl(Rollout& r, const sched::DiffusionSchedule* schedule, const sched::FlowGrid* grid,
                const sched::FlowSigma* fsigma) {
    r.stored_logprob.resize(r.num_positions(), r.batch_size());
    for (int s = 0; s < r.num_positions(); ++s) {
        const auto su = static_cast<std::size_t>(s);
        const Matrix<S> x = r.states[su].template cast<S>();
        const Matrix<S> pred = r.predictions[su].template cast<S>();
        const Matrix<S> next = r.states[su + 1].template cast<S>();
        const auto k = static_cast<std::size_t>(r.step_index[su]);
        Matrix<S> mean;
        double var = 0.0;
        if (r.kind == SamplerKind::Diffusion) {
            mean = ddim_mean<S>(*schedule, k, x, pred);
            var = schedule->sigma[k] * schedule->sigma[k];
        } else {
            mean = flow_mean<S>(grid->t[k], grid->dt[k], fsigma->sigma[k], x, pred);
            var = fsigma->sigma[k] * fsigma->sigma[k] * grid->dt[k];
        }
        PROPCREDIT_REQUIRE(var > 0.0, "log density needs a positive transition variance");
        const auto lp = gaussian_log_density<S>(next, mean, static_cast<S>(var));
        r.stored_logprob.row(s) = lp.template cast<double>().transpose();
    }
}

}  // namespace

Eigen::MatrixXd guided_prediction(const GuidanceSpec& spec, const PolicySet& policies, const Eigen::MatrixXd& x,
                                  double t, std::span<const int> conds) {
    return guided<double>(spec, make_bank<double>(policies), x, t, conds);
}

template <class S>
Matrix<S> ddim_mean(const sched::DiffusionSchedule& schedule, std::size_t k, const Matrix<S>& x, const Matrix<S>& pred) {
    const double ab = schedule.alpha_bar(k);
    const double ab_prev = schedule.alpha_bar_prev(k);
    const double sig = schedule.sigma[k];
    const double radicand = 1.0 - ab_prev - sig * sig;
    if (radicand < 0.0) throw_numerical("DDIM direction term has a negative radicand");
    const S sqrt_one_minus_ab = static_cast<S>(std::sqrt(1.0 - ab));
    const S sqrt_alpha = static_cast<S>(std::sqrt(ab / ab_prev));
    const S direction = static_cast<S>(std::sqrt(radicand));
    return (x - sqrt_one_minus_ab * pred) / sqrt_alpha + direction * pred;
}

template <class S>
Matrix<S> flow_mean(double t, double dt, double sigma, const Matrix<S>& z, const Matrix<S>& u) {
    const S st = static_cast<S>(t);
    const S var = static_cast<S>(sigma * sigma);
    const Matrix<S> z0_hat = z - st * u;
    const Matrix<S> score = -(z - (S(1) - st) * z0_hat) / var;
    return z - static_cast<S>(dt) * u + (var / S(2)) * static_cast<S>(dt) * score;
}

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> gaussian_log_density(const Matrix<S>& x, const Matrix<S>& mean, S var) {
    const S dim = static_cast<S>(x.rows());
    const S norm = -S(0.5) * dim * std::log(S(2) * std::numbers::pi_v<S> * var);
    return ((x - mean).colwise().squaredNorm().array() * (-S(0.5) / var) + norm).transpose();
}

template Matrix<double> ddim_mean<double>(const sched::DiffusionSchedule&, std::size_t, const Matrix<double>&,
                                          const Matrix<double>&);
template Matrix<float> ddim_mean<float>(const sched::DiffusionSchedule&, std::size_t, const Matrix<float>&,
                                        const Matrix<float>&);
template Matrix<double> flow_mean<double>(double, double, double, const Matrix<double>&, const Matrix<double>&);
template Matrix<float> flow_mean<float>(double, double, double, const Matrix<float>&, const Matrix<float>&);
template Eigen::VectorXd gaussian_log_density<double>(const Matrix<double>&, const Matrix<double>&, double);
template Eigen::VectorXf gaussian_log_density<float>(const Matrix<float>&, const Matrix<float>&, float);

Trajectory Rollout::trajectory(std::size_t i) const {
    PROPCREDIT_REQUIRE(i < conditions.size(), "trajectory index out of range");
    const auto col = static_cast<Eigen::Index>(i);
    auto column = [&](const Eigen::MatrixXd& m) {
        std::vector<double> v(static_cast<std::size_t>(m.rows()));
        for (Eigen::Index j = 0; j < m.rows(); ++j) v[static_cast<std::size_t>(j)] = m(j, col);
        return v;
    };
    Trajectory t;
    t.condition = conditions[i];
    t.stream = streams[i];
    t.reward = i < rewards.size() ? rewards[i] : 0.0;
    for (int s = 0; s < num_positions(); ++s) {
        const auto su = static_cast<std::size_t>(s);
        StepRecord rec;
        rec.step_index = step_index[su];
        rec.time = time[su];
        rec.state = column(states[su]);
        rec.noise = column(noises[su]);
        rec.prediction = column(predictions[su]);
        if (stored_logprob.size() > 0) rec.stored_logprob = stored_logprob(s, col);
        t.steps.push_back(std::move(rec));
    }
    t.final_sample = column(states.back());
    return t;
}

Rollout ddim_reverse_sample(const PolicySet& policies, const sched::DiffusionSchedule& schedule,
                            const GuidanceSpec& spec, const SampleRequest& request) {
    if (request.precision == Precision::Single) {
        return run_sampler<float>(policies, spec, request, SamplerKind::Diffusion, &schedule, nullptr, nullptr, false);
    }
    return run_sampler<double>(policies, spec, request, SamplerKind::Diffusion, &schedule, nullptr, nullptr, false);
}

Rollout flow_sde_sample(const PolicySet& policies, const sched::FlowGrid& grid, const sched::FlowSigma& sigma,
                        const GuidanceSpec& spec, const SampleRequest& request, bool ode) {
    PROPCREDIT_REQUIRE(sigma.sigma.size() == grid.dt.size(), "flow sigma does not match the grid");
    if (request.precision == Precision::Single) {
        return run_sampler<float>(policies, spec, request, SamplerKind::Flow, nullptr, &grid, &sigma, ode);
    }
    return run_sampler<double>(policies, spec, request, SamplerKind::Flow, nullptr, &grid, &sigma, ode);
}

double transition_std(const Rollout& rollout, const sched::DiffusionSchedule* schedule, const sched::FlowGrid* grid,
                      const sched::FlowSigma* sigma, int position) {
    const auto k = static_cast<std::size_t>(rollout.step_index[static_cast<std::size_t>(position)]);
    if (rollout.kind == SamplerKind::Diffusion) return schedule->sigma[k];
    return sigma->sigma[k] * std::sqrt(grid->dt[k]);
}

bool replay_matches(const Rollout& rollout, const sched::DiffusionSchedule& schedule) {
    PROPCREDIT_REQUIRE(rollout.kind == SamplerKind::Diffusion, "rollout was not produced by the DDIM sampler");
    return rollout.precision == Precision::Single ? replay_impl<float>(rollout, &schedule, nullptr, nullptr)
                                                  : replay_impl<double>(rollout, &schedule, nullptr, nullptr);
}

bool replay_matches(const Rollout& rollout, const sched::FlowGrid& grid, const sched::FlowSigma& sigma) {
    PROPCREDIT_REQUIRE(rollout.kind == SamplerKind::Flow, "rollout was not produced by the flow sampler");
    return rollout.precision == Precision::Single ? replay_impl<float>(rollout, nullptr, &grid, &sigma)
                                                  : replay_impl<double>(rollout, nullptr, &grid, &sigma);
}

void store_baseline_logprob(Rollout& rollout, const sched::DiffusionSchedule& schedule) {
    PROPCREDIT_REQUIRE(rollout.kind == SamplerKind::Diffusion, "rollout was not produced by the DDIM sampler");
    if (rollout.precision == Precision::Single) {
        store_impl<float>(rollout, &schedule, nullptr, nullptr);
    } else {
        store_impl<double>(rollout, &schedule, nullptr, nullptr);
    }
}

void store_baseline_logprob(Rollout& rollout, const sched::FlowGrid& grid, const sched::FlowSigma& sigma) {
    PROPCREDIT_REQUIRE(rollout.kind == SamplerKind::Flow && !rollout.ode, "log densities need a stochastic flow rollout");
    if (rollout.precision == Precision::Single) {
        store_impl<float>(rollout, nullptr, &grid, &sigma);
    } else {
        store_impl<double>(rollout, nullptr, &grid, &sigma);
    }
}

}  // namespace propcredit::sampler
