// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "common/error.hpp"
#include "common/format.hpp"
#include "common/rng.hpp"
#include "common/svg_plot.hpp"
#include "nn/checkpoint.hpp"
#include "sampler/sampler.hpp"
#include "sched/diffusion_schedule.hpp"
#include "sched/flow_schedule.hpp"
#include "toybench/comparison.hpp"
#include "toybench/pretrain.hpp"
#include "toybench/trainer.hpp"

namespace propcredit::app {

using nlohmann::ordered_json;
using sampler::SamplerKind;

namespace {

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root) : m_root(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(m_root, ec);
        if (ec) throw_io("cannot create output directory " + m_root.string() + ": " + ec.message());
    }

    void write(const std::string& name, const std::string& text) {
        std::ofstream out(m_root / name, std::ios::binary | std::ios::trunc);
        if (!out) throw_io("cannot open " + (m_root / name).string() + " for writing");
        out << text;
        if (!out) throw_io("failed writing " + (m_root / name).string());
        m_written.push_back(name);
    }

    std::filesystem::path path(const std::string& name) const { return m_root / name; }
    std::vector<std::string> written() const { return m_written; }

private:
    std::filesystem::path m_root;
    std::vector<std::string> m_written;
};

std::string num(double v) { return format_number(v); }

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

/// Number as JSON, with non-finite values as null.
ordered_json jnum(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string samples_csv(const Eigen::MatrixXd& samples, const std::vector<int>& conds) {
    std::ostringstream os;
    os << "index,condition,x,y\n";
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        os << i << ',' << conds[static_cast<std::size_t>(i)] << ',' << num(samples(0, i)) << ',' << num(samples(1, i))
           << '\n';
    }
    return os.str();
}

nn::PolicyParams base_policy(const RunConfig& c, SamplerKind kind) {
    const auto arch = architecture(c);
    const auto& path = kind == SamplerKind::Diffusion ? c.pretrain.diffusion_checkpoint : c.pretrain.flow_checkpoint;
    if (path) {
        auto params = nn::load_checkpoint(*path);
        if (!(params.arch() == arch)) throw_config("checkpoint " + *path + " does not match the configured network");
        return params;
    }
    const auto ds = dataset(c);
    if (kind == SamplerKind::Diffusion) {
        return toybench::pretrain_diffusion(ds, arch, train_schedule(c.diffusion), pretrain_config(c)).params;
    }
    return toybench::pretrain_flow(ds, arch, pretrain_config(c)).params;
}

ordered_json run_summary(const toybench::RunMetrics& run) {
    double clip = 0.0, first = 0.0, taylor = 0.0;
    for (const auto& e : run.epochs) {
        clip += e.clip_frac;
        first += e.clip_frac_first_step;
        taylor = std::max(taylor, e.taylor_gap_max);
    }
    const double n = static_cast<double>(std::max<std::size_t>(run.epochs.size(), 1));
    ordered_json j;
    j["variant"] = run.variant;
    j["seed"] = run.seed;
    j["epochs"] = run.epochs.size();
    j["initial_reward"] = run.epochs.empty() ? ordered_json(nullptr) : jnum(run.epochs.front().reward_mean);
    j["final_reward"] = run.epochs.empty() ? ordered_json(nullptr) : jnum(run.epochs.back().reward_mean);
    j["final_coverage"] = run.epochs.empty() ? ordered_json(nullptr) : jnum(run.epochs.back().coverage);
    j["mean_clip_frac"] = clip / n;
    j["mean_clip_frac_first_step"] = first / n;
    j["max_clip_frac_first_step"] = 0.0;
    for (const auto& e : run.epochs) {
        j["max_clip_frac_first_step"] = std::max(j["max_clip_frac_first_step"].get<double>(), e.clip_frac_first_step);
    }
    j["max_taylor_gap"] = taylor;
    return j;
}

void cmd_audit_schedule(const RunConfig& c, OutputDir& out) {
    const auto& d = c.diffusion;
    const auto base = train_schedule(d);
    sched::DiffusionSchedule s;
    try {
        s = sched::make_ddim_schedule(base, d.sample_steps, d.eta, true, d.steps_offset);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidArgument) throw_config(std::string("diffusion: ") + e.what());
        throw;
    }
    const auto native = sched::native_weights(s);
    const double w_star = d.w_star.value_or(sched::target_weight(native));
    const auto solved = sched::solve_constant_sigma(s, w_star);
    const auto tilde = sched::with_sigma(s, *solved.sigma_tilde);
    const auto check = sched::native_weights(tilde);

    std::ostringstream csv;
    csv << "step_index,t,t_prev,alpha_bar,alpha_bar_prev,sigma,C,w,sigma_tilde,C_tilde,w_tilde\n";
    double dev = 0.0, sum_native = 0.0, sum_tilde = 0.0, reach = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        // -1 marks the alpha_bar = 1 boundary
        const int t_prev = k > 0 ? s.steps[k - 1] : s.steps[0] - 1;
        csv << k << ',' << s.steps[k] << ',' << t_prev << ','
            << num(s.alpha_bar(k)) << ',' << num(s.alpha_bar_prev(k)) << ',' << num(s.sigma[k]) << ','
            << num(native.C[k]) << ',' << num(native.w[k]) << ',' << num(tilde.sigma[k]) << ',' << num(check.C[k])
            << ',' << num(check.w[k]) << '\n';
        dev = std::max(dev, std::abs(check.w[k] - w_star));
        sum_native += native.w[k];
        sum_tilde += check.w[k];
        const auto eq = sched::weight_equation(s, k);
        reach = std::max(reach, std::sqrt(std::max(0.0, (eq.a * eq.a - eq.b) / eq.b)));
    }
    out.write("schedule_audit.csv", csv.str());

    const auto [lo, hi] = std::minmax_element(native.w.begin(), native.w.end());
    ordered_json j;
    j["sample_steps"] = s.size();
    j["train_steps"] = base.size();
    j["eta"] = s.eta;
    j["steps_offset"] = s.steps.front();
    j["w_star"] = w_star;
    j["w_star_source"] = d.w_star ? "override" : "mean-native";
    j["native"] = {{"mean", sched::target_weight(native)}, {"min", *lo}, {"max", *hi}, {"max_over_min", *hi / *lo}};
    j["sum_w"] = sum_native;
    j["sum_w_tilde"] = sum_tilde;
    j["max_abs_deviation"] = dev;
    j["lowest_weight_reachable_at_every_step"] = reach;
    out.write("summary.json", json_text(j));

    std::vector<double> ks(s.size());
    std::iota(ks.begin(), ks.end(), 0.0);
    out.write("weights.svg", render_svg({"Per-step credit weight", "step k", "w", {{"native", ks, native.w, "#1f77b4"},
                                                                                 {"constant", ks, check.w, "#ff7f0e"}},
                                         true}));
    out.write("sigma.svg", render_svg({"Injected noise scale", "step k", "sigma",
                                       {{"native", ks, s.sigma, "#1f77b4"}, {"constant-weight", ks, tilde.sigma, "#ff7f0e"}},
                                       true}));
}

void cmd_audit_flow(const RunConfig& c, OutputDir& out) {
    ordered_json presets = ordered_json::array();
    for (const auto& p : c.flow_presets) {
        if (p.name.empty() || p.name.find_first_of("/\\ ") != std::string::npos) {
            throw_config("flow preset names must be non-empty without slashes or spaces");
        }
        const auto setup = flow_setup(p);
        sched::FlowGrid grid;
        sched::FlowSigma sigma;
        try {
            grid = sched::build_flow_grid(setup.steps, setup.shift);
            sigma = sched::flow_sigma(grid, setup.sigma_kind, setup.eta);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::InvalidArgument) throw_config("flow preset " + p.name + ": " + e.what());
            throw;
        }
        const auto native = sched::native_flow_weights(grid, sigma);
        const auto prop = sched::proportional_flow_weights(grid, sigma);
        const auto uni = sched::uniform_flow_weights(grid, sigma);

        std::ostringstream csv;
        csv << "i,t,t_next,dt,sigma,sigma_eval_t,w_native,w_prop,w_uniform,poly_factor\n";
        for (std::size_t i = 0; i < grid.dt.size(); ++i) {
            csv << i << ',' << num(grid.t[i]) << ',' << num(grid.t[i + 1]) << ',' << num(grid.dt[i]) << ','
                << num(sigma.sigma[i]) << ',' << num(sigma.eval_t[i]) << ',' << num(native.w[i]) << ','
                << num(prop.w[i]) << ',' << num(uni.w[i]) << ',' << num(sched::flow_poly_factor(grid.t[i])) << '\n';
        }
        out.write("flow_" + p.name + ".csv", csv.str());

        std::vector<double> idx(grid.dt.size());
        std::iota(idx.begin(), idx.end(), 0.0);
        out.write("flow_" + p.name + ".svg",
                  render_svg({"Flow step weights (" + p.name + ")", "step i", "w",
                              {{"native", idx, native.w, "#1f77b4"},
                               {"proportional", idx, prop.w, "#ff7f0e"},
                               {"uniform", idx, uni.w, "#2ca02c"}},
                              false}));

        ordered_json pj;
        pj["name"] = p.name;
        pj["steps"] = grid.N;
        pj["shift"] = grid.shift;
        pj["sigma"] = p.sigma;
        pj["eta"] = p.eta;
        pj["zeta"] = *prop.zeta;
        pj["sum_native"] = std::accumulate(native.w.begin(), native.w.end(), 0.0);
        pj["sum_prop"] = std::accumulate(prop.w.begin(), prop.w.end(), 0.0);
        pj["uniform_weight"] = uni.w.front();
        pj["t_one_approximation"] = sigma.t_one_approx
                                        ? ordered_json{{"used", true}, {"sigma_evaluated_at_t", *sigma.t_one_approx}}
                                        : ordered_json{{"used", false}};
        presets.push_back(pj);
    }
    out.write("summary.json", json_text({{"presets", presets}}));
}

void cmd_pretrain(const RunConfig& c, OutputDir& out) {
    const auto ds = dataset(c);
    const auto arch = architecture(c);
    const auto cfg = pretrain_config(c);
    toybench::PretrainResult result;
    Eigen::MatrixXd samples;
    std::vector<int> conds(static_cast<std::size_t>(std::max(c.pretrain.eval_samples, 0)), ds.null_condition());
    if (conds.empty()) throw_config("pretrain.eval_samples must be >= 1");
    if (c.pretrain.sampler == "diffusion") {
        const auto base = train_schedule(c.diffusion);
        result = toybench::pretrain_diffusion(ds, arch, base, cfg);
        const auto s = sched::make_ddim_schedule(base, c.diffusion.sample_steps, 0.0, false, c.diffusion.steps_offset);
        samples = toybench::deterministic_samples(result.params, s, conds, c.seed);
    } else if (c.pretrain.sampler == "flow") {
        result = toybench::pretrain_flow(ds, arch, cfg);
        const auto grid = sched::build_flow_grid(c.flow.steps, c.flow.shift);
        samples = toybench::deterministic_samples(result.params, grid, conds, c.seed);
    } else {
        throw_config("pretrain.sampler must be 'diffusion' or 'flow'");
    }

    out.write("checkpoint.json", nn::checkpoint_to_json(result.params));
    std::ostringstream loss;
    loss << "step,loss\n";
    for (std::size_t i = 0; i < result.loss.size(); ++i) loss << i << ',' << num(result.loss[i]) << '\n';
    out.write("pretrain_loss.csv", loss.str());
    out.write("samples.csv", samples_csv(samples, conds));

    ordered_json j;
    j["sampler"] = c.pretrain.sampler;
    j["steps"] = cfg.steps;
    j["final_loss"] = result.loss.empty() ? ordered_json(nullptr) : jnum(result.loss.back());
    j["coverage"] = toybench::mode_coverage(samples, ds);
    j["spread"] = toybench::sample_spread(samples, ds);
    j["eval_samples"] = conds.size();
    out.write("summary.json", json_text(j));

    std::vector<double> steps(result.loss.size());
    std::iota(steps.begin(), steps.end(), 0.0);
    out.write("pretrain_loss.svg", render_svg({"Pretraining loss", "step", "loss", {{"loss", steps, result.loss, "#1f77b4"}}, true}));
}

void cmd_finetune(const RunConfig& c, OutputDir& out) {
    const auto v = variant_config(c, c.finetune.variant);
    if (c.rl.epochs < 0) throw_config("rl.epochs must be >= 0");
    toybench::Trainer trainer(dataset(c), base_policy(c, v.sampler), v, diffusion_setup(c), flow_setup(c.flow), c.seed);
    trainer.set_dump_path(out.path("failure_state.json"));
    const auto run = trainer.run(c.rl.epochs);

    out.write("metrics.csv", toybench::metrics_csv({run}));
    auto j = run_summary(run);
    j["sampler"] = v.sampler == SamplerKind::Flow ? "flow" : "diffusion";
    j["step_weights"] = trainer.step_weights();
    out.write("summary.json", json_text(j));
    out.write("reward.svg", toybench::reward_plot_svg({run}));
    out.write("clip.svg", toybench::clip_plot_svg({run}));
    out.write("policy.json", nn::checkpoint_to_json(trainer.policy()));
}

void cmd_compare(const RunConfig& c, OutputDir& out) {
    toybench::ComparisonConfig cc;
    for (const auto& name : c.compare.variants) cc.variants.push_back(variant_config(c, name));
    if (cc.variants.empty()) throw_config("compare.variants must not be empty");
    if (c.compare.seeds.empty()) throw_config("compare.seeds must not be empty");
    if (c.rl.epochs < 1) throw_config("rl.epochs must be >= 1");
    cc.seeds = c.compare.seeds;
    cc.epochs = c.rl.epochs;
    cc.thresholds = c.compare.thresholds;
    cc.smoothing_window = c.compare.smoothing_window;
    cc.plateau_window = c.compare.plateau_window;
    cc.threads = c.threads;

    std::optional<nn::PolicyParams> diffusion_base, flow_base;
    for (const auto& v : cc.variants) {
        if (v.sampler == SamplerKind::Diffusion && !diffusion_base) diffusion_base = base_policy(c, SamplerKind::Diffusion);
        if (v.sampler == SamplerKind::Flow && !flow_base) flow_base = base_policy(c, SamplerKind::Flow);
    }
    const toybench::BasePolicies bases{diffusion_base ? &*diffusion_base : nullptr, flow_base ? &*flow_base : nullptr};
    const auto result = toybench::run_comparison(dataset(c), bases, diffusion_setup(c), flow_setup(c.flow), cc);

    out.write("metrics.csv", toybench::metrics_csv(result.runs));
    out.write("summary.json", toybench::summary_json(result, cc));
    out.write("reward.svg", toybench::reward_plot_svg(result.runs));
    out.write("clip.svg", toybench::clip_plot_svg(result.runs));
}

void cmd_irg(const RunConfig& c, OutputDir& out) {
    const auto& g = c.irg;
    if (g.rewards.empty()) throw_config("irg.rewards must not be empty");
    if (g.sweep.empty()) throw_config("irg.sweep must not be empty");
    for (const auto& point : g.sweep) {
        if (point.size() != g.rewards.size()) throw_config("each irg.sweep entry needs one weight per reward");
    }
    if (g.samples_per_condition < 1 || g.conditions.empty()) throw_config("irg needs samples and conditions");
    if (g.finetune_epochs < 0) throw_config("irg.finetune_epochs must be >= 0");

    const auto ds = dataset(c);
    for (int cond : g.conditions) {
        if (cond < 0 || cond > ds.null_condition()) throw_config("irg condition out of range");
    }
    const auto base = base_policy(c, SamplerKind::Diffusion);
    const auto setup = diffusion_setup(c);
    std::vector<toybench::RewardSpec> specs;
    std::vector<nn::PolicyParams> tuned;
    for (const auto& r : g.rewards) {
        auto v = variant_config(c, g.variant);
        if (v.sampler != SamplerKind::Diffusion) throw_config("irg runs on the diffusion sampler");
        v.reward = reward_spec(r);
        specs.push_back(v.reward);
        toybench::Trainer trainer(ds, base, v, setup, flow_setup(c.flow), c.seed);
        trainer.run(g.finetune_epochs);
        tuned.push_back(trainer.policy());
    }

    const auto schedule = sched::make_ddim_schedule(setup.train, setup.sample_steps, setup.eta, true, setup.steps_offset);
    std::vector<int> conds;
    for (int cond : g.conditions) conds.insert(conds.end(), static_cast<std::size_t>(g.samples_per_condition), cond);
    std::vector<std::uint64_t> streams(conds.size());
    for (std::size_t i = 0; i < streams.size(); ++i) streams[i] = make_stream(StreamTag::Evaluation, 1, i);
    const sampler::SampleRequest req{conds, c.seed, streams, sampler::Precision::Double};

    auto reward_means = [&](const Eigen::MatrixXd& samples) {
        ordered_json m = ordered_json::array();
        for (const auto& spec : specs) {
            const auto r = toybench::rewards(ds, spec, samples, conds);
            m.push_back(std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size()));
        }
        return m;
    };

    const sampler::GuidanceSpec ref_spec{g.cfg_scale, {}};
    const auto reference = sampler::ddim_reverse_sample({&base, {}}, schedule, ref_spec, req).final_samples();
    out.write("reference_samples.csv", samples_csv(reference, conds));

    sampler::PolicySet set{&base, {}};
    for (const auto& t : tuned) set.tuned.push_back(&t);
    ordered_json sweep = ordered_json::array();
    std::vector<std::vector<double>> trace(specs.size());
    for (std::size_t i = 0; i < g.sweep.size(); ++i) {
        const sampler::GuidanceSpec spec{g.cfg_scale, g.sweep[i]};
        const auto samples = sampler::ddim_reverse_sample(set, schedule, spec, req).final_samples();
        const std::string name = "irg_samples_" + std::to_string(i) + ".csv";
        out.write(name, samples_csv(samples, conds));
        const auto means = reward_means(samples);
        for (std::size_t r = 0; r < specs.size(); ++r) trace[r].push_back(means[r].get<double>());
        sweep.push_back({{"lambdas", g.sweep[i]},
                         {"file", name},
                         {"reward_means", means},
                         {"coverage", toybench::mode_coverage(samples, ds)}});
    }
    for (std::size_t r = 0; r < tuned.size(); ++r) {
        out.write("tuned_" + std::to_string(r) + ".json", nn::checkpoint_to_json(tuned[r]));
    }

    ordered_json rewards = ordered_json::array();
    for (const auto& r : g.rewards) rewards.push_back(r.kind);
    ordered_json j;
    j["rewards"] = rewards;
    j["reference_reward_means"] = reward_means(reference);
    j["sweep"] = sweep;
    out.write("irg_summary.json", json_text(j));

    std::vector<double> idx(g.sweep.size());
    std::iota(idx.begin(), idx.end(), 0.0);
    LinePlot plot{"Reward trade-off across the mixing sweep", "sweep point", "mean reward", {}, false};
    constexpr const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
    for (std::size_t r = 0; r < specs.size(); ++r) {
        plot.series.push_back({g.rewards[r].kind + " #" + std::to_string(r), idx, trace[r], colors[r % 4]});
    }
    out.write("irg_tradeoff.svg", render_svg(plot));
}

}  // namespace

std::string manifest_json(const RunConfig& config) {
    ordered_json j;
    j["tool"] = "propcredit";
    j["version"] = PROPCREDIT_VERSION_STRING;
    j["command"] = command_name(config.command);
    j["seed"] = config.seed;
    j["config"] = to_json(config);
    return json_text(j);
}

std::vector<std::string> run_command(const RunConfig& config, const std::filesystem::path& out_dir) {
    OutputDir out(out_dir);
    out.write(kManifestName, manifest_json(config));
    switch (config.command) {
        case Command::AuditSchedule: cmd_audit_schedule(config, out); break;
        case Command::AuditFlow: cmd_audit_flow(config, out); break;
        case Command::Pretrain: cmd_pretrain(config, out); break;
        case Command::Finetune: cmd_finetune(config, out); break;
        case Command::Compare: cmd_compare(config, out); break;
        case Command::Irg: cmd_irg(config, out); break;
    }
    return out.written();
}

}  // namespace propcredit::app
