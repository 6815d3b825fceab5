// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "propcredit/propcredit.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <span>
#include <string>

#include "app/commands.hpp"
#include "app/config.hpp"
#include "common/error.hpp"
#include "objective/objective.hpp"
#include "sched/diffusion_schedule.hpp"
#include "sched/flow_schedule.hpp"

struct pc_train_schedule {
    propcredit::sched::TrainSchedule value;
};

struct pc_ddim_schedule {
    propcredit::sched::DiffusionSchedule value;
};

struct pc_flow_grid {
    propcredit::sched::FlowGrid value;
};

namespace {

thread_local std::string g_last_error;

pc_status status_of(propcredit::ErrorKind kind) {
    switch (kind) {
        case propcredit::ErrorKind::InvalidArgument: return PC_ERR_INVALID_ARGUMENT;
        case propcredit::ErrorKind::Config: return PC_ERR_CONFIG;
        case propcredit::ErrorKind::Numerical: return PC_ERR_NUMERICAL;
        case propcredit::ErrorKind::Io: return PC_ERR_IO;
    }
    return PC_ERR_INTERNAL;
}

template <class F>
pc_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return PC_OK;
    } catch (const propcredit::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return PC_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PC_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return PC_ERR_INTERNAL;
    }
}

void require_ptr(const void* p, const char* name) {
    if (p == nullptr) propcredit::throw_invalid(std::string(name) + " must not be null");
}

void copy_out(std::span<const double> src, double* dst, std::size_t count) {
    if (count != src.size()) {
        propcredit::throw_invalid("output buffer holds " + std::to_string(count) + " values, " +
                                  std::to_string(src.size()) + " required");
    }
    std::copy(src.begin(), src.end(), dst);
}

char* dup_string(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* pc_version(void) { return PROPCREDIT_VERSION_STRING; }

const char* pc_last_error(void) { return g_last_error.c_str(); }

void pc_string_free(char* s) { std::free(s); }

pc_status pc_train_schedule_create(int train_steps, double beta_start, double beta_end, int scaled_linear,
                                   pc_train_schedule** out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = nullptr;
        const auto kind = scaled_linear ? propcredit::sched::BetaKind::ScaledLinear : propcredit::sched::BetaKind::Linear;
        *out = new pc_train_schedule{propcredit::sched::build_train_schedule(train_steps, beta_start, beta_end, kind)};
    });
}

pc_status pc_train_schedule_from_betas(const double* betas, size_t count, pc_train_schedule** out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = nullptr;
        require_ptr(betas, "betas");
        *out = new pc_train_schedule{propcredit::sched::train_schedule_from_betas({betas, betas + count})};
    });
}

void pc_train_schedule_destroy(pc_train_schedule* schedule) { delete schedule; }

pc_status pc_ddim_schedule_create(const pc_train_schedule* base, int sample_steps, double eta, int steps_offset,
                                  pc_ddim_schedule** out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = nullptr;
        require_ptr(base, "base");
        *out = new pc_ddim_schedule{
            propcredit::sched::make_ddim_schedule(base->value, sample_steps, eta, true, steps_offset < 0 ? -1 : steps_offset)};
    });
}

void pc_ddim_schedule_destroy(pc_ddim_schedule* schedule) { delete schedule; }

size_t pc_ddim_schedule_size(const pc_ddim_schedule* schedule) { return schedule ? schedule->value.size() : 0; }

pc_status pc_ddim_schedule_steps(const pc_ddim_schedule* schedule, int* out, size_t count) {
    return guarded([&] {
        require_ptr(schedule, "schedule");
        require_ptr(out, "out");
        if (count != schedule->value.size()) propcredit::throw_invalid("output buffer size mismatch");
        std::copy(schedule->value.steps.begin(), schedule->value.steps.end(), out);
    });
}

pc_status pc_ddim_schedule_sigma(const pc_ddim_schedule* schedule, double* out, size_t count) {
    return guarded([&] {
        require_ptr(schedule, "schedule");
        require_ptr(out, "out");
        copy_out(schedule->value.sigma, out, count);
    });
}

pc_status pc_credit_coefficient(double alpha_bar, double alpha_bar_prev, double sigma, double* out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = propcredit::sched::credit_coefficient(alpha_bar, alpha_bar_prev, sigma);
    });
}

pc_status pc_ddim_native_weights(const pc_ddim_schedule* schedule, double* w_out, size_t count) {
    return guarded([&] {
        require_ptr(schedule, "schedule");
        require_ptr(w_out, "w_out");
        copy_out(propcredit::sched::native_weights(schedule->value).w, w_out, count);
    });
}

pc_status pc_ddim_constant_weight_sigma(const pc_ddim_schedule* schedule, double w_star, double* sigma_out,
                                        double* w_out, size_t count) {
    return guarded([&] {
        require_ptr(schedule, "schedule");
        const auto& s = schedule->value;
        const double target = std::isnan(w_star) ? propcredit::sched::target_weight(propcredit::sched::native_weights(s)) : w_star;
        const auto solved = propcredit::sched::solve_constant_sigma(s, target);
        if (sigma_out) copy_out(*solved.sigma_tilde, sigma_out, count);
        if (w_out) copy_out(solved.w, w_out, count);
    });
}

pc_status pc_flow_grid_create(int steps, double shift, pc_flow_grid** out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = nullptr;
        *out = new pc_flow_grid{propcredit::sched::build_flow_grid(steps, shift)};
    });
}

void pc_flow_grid_destroy(pc_flow_grid* grid) { delete grid; }

size_t pc_flow_grid_steps(const pc_flow_grid* grid) { return grid ? static_cast<size_t>(grid->value.N) : 0; }

pc_status pc_flow_grid_times(const pc_flow_grid* grid, double* t_out, size_t count) {
    return guarded([&] {
        require_ptr(grid, "grid");
        require_ptr(t_out, "t_out");
        copy_out(grid->value.t, t_out, count);
    });
}

pc_status pc_flow_weights(const pc_flow_grid* grid, pc_flow_sigma_kind sigma_kind, double eta, pc_flow_weight_mode mode,
                          double* w_out, size_t count) {
    return guarded([&] {
        using namespace propcredit::sched;
        require_ptr(grid, "grid");
        require_ptr(w_out, "w_out");
        FlowSigmaKind kind;
        switch (sigma_kind) {
            case PC_FLOW_SIGMA_CONSTANT: kind = FlowSigmaKind::Constant; break;
            case PC_FLOW_SIGMA_FLOWGRPO: kind = FlowSigmaKind::FlowGrpo; break;
            default: propcredit::throw_invalid("unknown flow sigma kind");
        }
        FlowWeightMode m;
        switch (mode) {
            case PC_FLOW_WEIGHTS_NATIVE: m = FlowWeightMode::Native; break;
            case PC_FLOW_WEIGHTS_PROPORTIONAL: m = FlowWeightMode::Proportional; break;
            case PC_FLOW_WEIGHTS_UNIFORM: m = FlowWeightMode::Uniform; break;
            default: propcredit::throw_invalid("unknown flow weight mode");
        }
        const auto sigma = flow_sigma(grid->value, kind, eta);
        copy_out(flow_weights(grid->value, sigma, m).w, w_out, count);
    });
}

pc_status pc_log_rho(const double* pred_theta, const double* pred_old, const double* noise, size_t dim, double w,
                     double* out) {
    return guarded([&] {
        require_ptr(pred_theta, "pred_theta");
        require_ptr(pred_old, "pred_old");
        require_ptr(noise, "noise");
        require_ptr(out, "out");
        const propcredit::objective::StepRatioInputs in{{pred_theta, dim}, {pred_old, dim}, {noise, dim}, w, 0.1};
        *out = propcredit::objective::log_rho_diffusion(in);
    });
}

pc_status pc_eps_matching_loss(const double* pred_theta, const double* pred_old, const double* noise,
                               const double* weights, size_t steps, size_t dim, double advantage, double xi,
                               double* loss_out, double* grad_out, int* clip_mask_out) {
    return guarded([&] {
        require_ptr(pred_theta, "pred_theta");
        require_ptr(pred_old, "pred_old");
        require_ptr(noise, "noise");
        require_ptr(weights, "weights");
        require_ptr(loss_out, "loss_out");
        std::vector<propcredit::objective::StepRatioInputs> in(steps);
        for (size_t s = 0; s < steps; ++s) {
            in[s] = {{pred_theta + s * dim, dim}, {pred_old + s * dim, dim}, {noise + s * dim, dim}, weights[s], xi};
        }
        const auto report = propcredit::objective::eps_matching_loss(in, advantage, xi);
        *loss_out = report.loss;
        for (size_t s = 0; s < steps; ++s) {
            if (grad_out) std::copy(report.grad_pred_theta[s].begin(), report.grad_pred_theta[s].end(), grad_out + s * dim);
            if (clip_mask_out) clip_mask_out[s] = report.clip_mask[s] ? 1 : 0;
        }
    });
}

pc_status pc_default_config(const char* command, char** json_out) {
    return guarded([&] {
        require_ptr(command, "command");
        require_ptr(json_out, "json_out");
        *json_out = nullptr;
        const auto cfg = propcredit::app::default_config(propcredit::app::parse_command(command));
        *json_out = dup_string(propcredit::app::to_json(cfg).dump(2) + "\n");
    });
}

pc_status pc_run_command(const char* command, const char* config_json, const char* out_dir) {
    return guarded([&] {
        require_ptr(config_json, "config_json");
        require_ptr(out_dir, "out_dir");
        std::optional<propcredit::app::Command> expected;
        if (command) expected = propcredit::app::parse_command(command);
        const auto cfg = propcredit::app::config_from_text(config_json, expected);
        propcredit::app::run_command(cfg, out_dir);
    });
}

}  // extern "C"
