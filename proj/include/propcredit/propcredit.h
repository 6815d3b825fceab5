// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROPCREDIT_PROPCREDIT_H
#define PROPCREDIT_PROPCREDIT_H

#include <stddef.h>

#if defined(PROPCREDIT_BUILDING_LIBRARY)
#define PC_API __attribute__((visibility("default")))
#else
#define PC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. CONFIG and NUMERICAL match the CLI exit codes. */
typedef enum pc_status {
    PC_OK = 0,
    PC_ERR_INVALID_ARGUMENT = 1,
    PC_ERR_CONFIG = 2,
    PC_ERR_NUMERICAL = 3,
    PC_ERR_IO = 4,
    PC_ERR_INTERNAL = 5
} pc_status;

PC_API const char* pc_version(void);

/* Message of the last failed call on this thread; empty after success. */
PC_API const char* pc_last_error(void);

/* Strings returned through char** outputs are released with this. */
PC_API void pc_string_free(char* s);

/* ---- dense training schedule ------------------------------------------ */

typedef struct pc_train_schedule pc_train_schedule;

/* scaled_linear != 0 interpolates sqrt(beta) linearly. */
PC_API pc_status pc_train_schedule_create(int train_steps, double beta_start, double beta_end, int scaled_linear,
                                          pc_train_schedule** out);
PC_API pc_status pc_train_schedule_from_betas(const double* betas, size_t count, pc_train_schedule** out);
PC_API void pc_train_schedule_destroy(pc_train_schedule* schedule);

/* ---- DDIM sampling schedule -------------------------------------------- */

typedef struct pc_ddim_schedule pc_ddim_schedule;

/* steps_offset < 0 picks the default offset. eta must be > 0. */
PC_API pc_status pc_ddim_schedule_create(const pc_train_schedule* base, int sample_steps, double eta, int steps_offset,
                                         pc_ddim_schedule** out);
PC_API void pc_ddim_schedule_destroy(pc_ddim_schedule* schedule);
PC_API size_t pc_ddim_schedule_size(const pc_ddim_schedule* schedule);
/* Dense timestep index per sampling step, ascending. */
PC_API pc_status pc_ddim_schedule_steps(const pc_ddim_schedule* schedule, int* out, size_t count);
PC_API pc_status pc_ddim_schedule_sigma(const pc_ddim_schedule* schedule, double* out, size_t count);

PC_API pc_status pc_credit_coefficient(double alpha_bar, double alpha_bar_prev, double sigma, double* out);
PC_API pc_status pc_ddim_native_weights(const pc_ddim_schedule* schedule, double* w_out, size_t count);

/* Per-step sigma that makes every weight equal w_star. A NaN w_star selects
   the mean native weight. sigma_out and w_out may be NULL. */
PC_API pc_status pc_ddim_constant_weight_sigma(const pc_ddim_schedule* schedule, double w_star, double* sigma_out,
                                               double* w_out, size_t count);

/* ---- flow time grid ---------------------------------------------------- */

typedef struct pc_flow_grid pc_flow_grid;

typedef enum pc_flow_sigma_kind { PC_FLOW_SIGMA_CONSTANT = 0, PC_FLOW_SIGMA_FLOWGRPO = 1 } pc_flow_sigma_kind;

typedef enum pc_flow_weight_mode {
    PC_FLOW_WEIGHTS_NATIVE = 0,
    PC_FLOW_WEIGHTS_PROPORTIONAL = 1,
    PC_FLOW_WEIGHTS_UNIFORM = 2
} pc_flow_weight_mode;

PC_API pc_status pc_flow_grid_create(int steps, double shift, pc_flow_grid** out);
PC_API void pc_flow_grid_destroy(pc_flow_grid* grid);
PC_API size_t pc_flow_grid_steps(const pc_flow_grid* grid);
/* steps + 1 times from 1 down to 0. */
PC_API pc_status pc_flow_grid_times(const pc_flow_grid* grid, double* t_out, size_t count);
PC_API pc_status pc_flow_weights(const pc_flow_grid* grid, pc_flow_sigma_kind sigma_kind, double eta,
                                 pc_flow_weight_mode mode, double* w_out, size_t count);

/* ---- objective ----------------------------------------------------------- */

/* Per-step log policy ratio -(w d . noise + |w d|^2 / 2), d = pred_theta - pred_old. */
PC_API pc_status pc_log_rho(const double* pred_theta, const double* pred_old, const double* noise, size_t dim,
                            double w, double* out);

/* Trajectory hinge loss over `steps` row-major (steps x dim) arrays.
   grad_out (steps x dim) and clip_mask_out (steps) may be NULL. */
PC_API pc_status pc_eps_matching_loss(const double* pred_theta, const double* pred_old, const double* noise,
                                      const double* weights, size_t steps, size_t dim, double advantage, double xi,
                                      double* loss_out, double* grad_out, int* clip_mask_out);

/* ---- commands ------------------------------------------------------------ */

/* Default config document for a command as pretty-printed JSON. */
PC_API pc_status pc_default_config(const char* command, char** json_out);

/* Runs a command from a config (or run manifest) JSON text, writing outputs
   into out_dir. command may be NULL to take it from the document. */
PC_API pc_status pc_run_command(const char* command, const char* config_json, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* PROPCREDIT_PROPCREDIT_H */
