// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "app/config.hpp"

#include <set>

#include "common/error.hpp"

namespace propcredit::app {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::pair<Command, const char*> kCommands[] = {
    {Command::AuditSchedule, "audit-schedule"}, {Command::AuditFlow, "audit-flow"}, {Command::Pretrain, "pretrain"},
    {Command::Finetune, "finetune"},           {Command::Compare, "compare"},       {Command::Irg, "irg"},
};

/// Reads keys from one JSON object and rejects any it was not asked for.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : m_obj(obj), m_path(std::move(path)) {
        if (!m_obj.is_object()) throw_config(m_path + " must be an object");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        m_known.insert(key);
        const auto it = m_obj.find(key);
        if (it == m_obj.end()) return;
        try {
            if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (!it->is_number_unsigned()) throw_config(where(key) + " must be a non-negative integer");
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw_config(where(key) + " must be an integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) throw_config(where(key) + " must be a number");
            }
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw_config(where(key) + ": " + e.what());
        }
    }

    void get(const std::string& key, std::optional<double>& out) {
        m_known.insert(key);
        const auto it = m_obj.find(key);
        if (it == m_obj.end() || it->is_null()) return;
        if (!it->is_number()) throw_config(where(key) + " must be a number or null");
        out = it->get<double>();
    }

    void get(const std::string& key, std::optional<std::string>& out) {
        m_known.insert(key);
        const auto it = m_obj.find(key);
        if (it == m_obj.end() || it->is_null()) return;
        if (!it->is_string()) throw_config(where(key) + " must be a string or null");
        out = it->get<std::string>();
    }

    /// Nested object handled by `read(sub_object, sub_path)`.
    template <class F>
    void section(const std::string& key, F&& read) {
        m_known.insert(key);
        const auto it = m_obj.find(key);
        if (it != m_obj.end()) read(*it, where(key));
    }

    void finish() const {
        for (const auto& [key, value] : m_obj.items()) {
            if (!m_known.contains(key)) throw_config("unknown key " + where(key));
        }
    }

private:
    std::string where(const std::string& key) const { return m_path.empty() ? key : m_path + "." + key; }

    const json& m_obj;
    std::string m_path;
    std::set<std::string> m_known;
};

ordered_json reward_json(const RewardSection& r) {
    return {{"kind", r.kind}, {"tau", r.tau}, {"normal", r.normal}, {"offset", r.offset}, {"sharpness", r.sharpness}};
}

void read_reward(const json& j, const std::string& path, RewardSection& r) {
    ObjectReader in(j, path);
    in.get("kind", r.kind);
    in.get("tau", r.tau);
    in.get("normal", r.normal);
    in.get("offset", r.offset);
    in.get("sharpness", r.sharpness);
    in.finish();
}

ordered_json flow_json(const FlowSection& f, bool with_name) {
    ordered_json j;
    if (with_name) j["name"] = f.name;
    j["steps"] = f.steps;
    j["shift"] = f.shift;
    j["sigma"] = f.sigma;
    j["eta"] = f.eta;
    return j;
}

void read_flow(const json& j, const std::string& path, FlowSection& f, bool with_name) {
    ObjectReader in(j, path);
    if (with_name) in.get("name", f.name);
    in.get("steps", f.steps);
    in.get("shift", f.shift);
    in.get("sigma", f.sigma);
    in.get("eta", f.eta);
    in.finish();
}

bool uses_toy(Command c) { return c != Command::AuditSchedule && c != Command::AuditFlow; }
bool uses_rl(Command c) { return c == Command::Finetune || c == Command::Compare || c == Command::Irg; }
bool uses_flow(Command c) { return c == Command::Pretrain || c == Command::Finetune || c == Command::Compare; }

}  // namespace

std::string command_name(Command command) {
    for (const auto& [c, name] : kCommands) {
        if (c == command) return name;
    }
    throw_invalid("unknown command");
}

Command parse_command(const std::string& name) {
    for (const auto& [c, n] : kCommands) {
        if (name == n) return c;
    }
    throw_config("unknown command '" + name + "'");
}

const std::vector<Command>& all_commands() {
    static const std::vector<Command> all = [] {
        std::vector<Command> v;
        for (const auto& [c, name] : kCommands) v.push_back(c);
        return v;
    }();
    return all;
}

RunConfig default_config(Command command) {
    RunConfig c;
    c.command = command;
    if (command == Command::AuditSchedule) {
        // Small eta keeps the mean native weight reachable by a constant-weight schedule.
        c.diffusion.sample_steps = 50;
        c.diffusion.eta = 0.065;
    }
    c.flow_presets = {FlowSection{"dance-grpo", 16, 3.0, "constant", 0.3}, FlowSection{"flow-grpo", 10, 3.0, "flowgrpo", 0.7}};
    c.irg.rewards = {RewardSection{}, RewardSection{"half-plane", 0.1, {1.0, 0.0}, 0.0, 2.0}};
    c.irg.sweep = {{1.0, 0.0}, {0.75, 0.25}, {0.5, 0.5}, {0.25, 0.75}, {0.0, 1.0}};
    if (command == Command::Finetune) c.rl.epochs = 100;
    return c;
}

ordered_json to_json(const RunConfig& c) {
    ordered_json j;
    j["version"] = c.version;
    j["command"] = command_name(c.command);
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    const Command cmd = c.command;
    if (uses_toy(cmd)) {
        j["dataset"] = {{"modes", c.dataset.modes}, {"radius", c.dataset.radius}, {"scale", c.dataset.scale},
                        {"seed", c.dataset.seed}};
        j["network"] = {{"time_pairs", c.network.time_pairs}, {"cond_dim", c.network.cond_dim},
                        {"hidden", c.network.hidden}};
    }
    if (cmd != Command::AuditFlow) {
        const auto& d = c.diffusion;
        j["diffusion"] = {{"train_steps", d.train_steps},
                          {"beta_start", d.beta_start},
                          {"beta_end", d.beta_end},
                          {"beta_schedule", d.beta_schedule},
                          {"sample_steps", d.sample_steps},
                          {"eta", d.eta},
                          {"steps_offset", d.steps_offset},
                          {"w_star", d.w_star ? ordered_json(*d.w_star) : ordered_json(nullptr)}};
    }
    if (uses_flow(cmd)) j["flow"] = flow_json(c.flow, false);
    if (cmd == Command::AuditFlow) {
        ordered_json presets = ordered_json::array();
        for (const auto& p : c.flow_presets) presets.push_back(flow_json(p, true));
        j["flow_presets"] = presets;
    }
    if (uses_toy(cmd)) {
        const auto& p = c.pretrain;
        ordered_json pj = {{"steps", p.steps}, {"batch", p.batch}, {"lr", p.lr}, {"lr_final", p.lr_final},
                           {"cond_dropout", p.cond_dropout}};
        if (cmd == Command::Pretrain) {
            pj["sampler"] = p.sampler;
            pj["eval_samples"] = p.eval_samples;
        } else {
            pj["diffusion_checkpoint"] = p.diffusion_checkpoint ? ordered_json(*p.diffusion_checkpoint) : ordered_json(nullptr);
            if (cmd != Command::Irg) {
                pj["flow_checkpoint"] = p.flow_checkpoint ? ordered_json(*p.flow_checkpoint) : ordered_json(nullptr);
            }
        }
        j["pretrain"] = pj;
    }
    if (uses_rl(cmd)) {
        const auto& r = c.rl;
        j["rl"] = {{"epochs", r.epochs},
                   {"xi", r.xi},
                   {"lr", r.lr},
                   {"groups", r.groups},
                   {"group_size", r.group_size},
                   {"inner_epochs", r.inner_epochs},
                   {"minibatches", r.minibatches},
                   {"subsample_fraction", r.subsample_fraction},
                   {"rollout_precision", r.rollout_precision},
                   {"train_conditions", r.train_conditions},
                   {"grad_clip", r.grad_clip},
                   {"reward", reward_json(r.reward)}};
    }
    if (cmd == Command::Finetune) j["finetune"] = {{"variant", c.finetune.variant}};
    if (cmd == Command::Compare) {
        const auto& k = c.compare;
        j["compare"] = {{"variants", k.variants},
                        {"seeds", k.seeds},
                        {"thresholds", k.thresholds},
                        {"smoothing_window", k.smoothing_window},
                        {"plateau_window", k.plateau_window}};
    }
    if (cmd == Command::Irg) {
        const auto& g = c.irg;
        ordered_json rewards = ordered_json::array();
        for (const auto& r : g.rewards) rewards.push_back(reward_json(r));
        j["irg"] = {{"variant", g.variant},
                    {"finetune_epochs", g.finetune_epochs},
                    {"rewards", rewards},
                    {"sweep", g.sweep},
                    {"cfg_scale", g.cfg_scale},
                    {"samples_per_condition", g.samples_per_condition},
                    {"conditions", g.conditions}};
    }
    return j;
}

RunConfig config_from_json(const json& raw, std::optional<Command> expected) {
    if (!raw.is_object()) throw_config("config must be a JSON object");
    const json& doc = raw.contains("config") && raw.contains("tool") ? raw.at("config") : raw;
    if (!doc.is_object()) throw_config("manifest config must be a JSON object");
    if (!doc.contains("version")) throw_config("config is missing 'version'");
    if (!doc.at("version").is_number_integer() || doc.at("version").get<int>() != kConfigVersion) {
        throw_config("unsupported config version (expected " + std::to_string(kConfigVersion) + ")");
    }
    Command cmd = expected.value_or(Command::AuditSchedule);
    if (doc.contains("command")) {
        if (!doc.at("command").is_string()) throw_config("command must be a string");
        cmd = parse_command(doc.at("command").get<std::string>());
        if (expected && cmd != *expected) {
            throw_config("config is for '" + command_name(cmd) + "', not '" + command_name(*expected) + "'");
        }
    } else if (!expected) {
        throw_config("config is missing 'command'");
    }

    RunConfig c = default_config(cmd);
    ObjectReader in(doc, "");
    in.get("version", c.version);
    std::string command_text;
    in.get("command", command_text);
    in.get("seed", c.seed);
    in.get("threads", c.threads);
    if (uses_toy(cmd)) {
        in.section("dataset", [&](const json& j, const std::string& p) {
            ObjectReader s(j, p);
            s.get("modes", c.dataset.modes);
            s.get("radius", c.dataset.radius);
            s.get("scale", c.dataset.scale);
            s.get("seed", c.dataset.seed);
            s.finish();
        });
        in.section("network", [&](const json& j, const std::string& p) {
            ObjectReader s(j, p);
            s.get("time_pairs", c.network.time_pairs);
            s.get("cond_dim", c.network.cond_dim);
            s.get("hidden", c.network.hidden);
            s.finish();
        });
    }
    if (cmd != Command::AuditFlow) {
        in.section("diffusion", [&](const json& j, const std::string& p) {
            ObjectReader s(j, p);
            auto& d = c.diffusion;
            s.get("train_steps", d.train_steps);
            s.get("beta_start", d.beta_start);
            s.get("beta_end", d.beta_end);
            s.get("beta_schedule", d.beta_schedule);
            s.get("sample_steps", d.sample_steps);
            s.get("eta", d.eta);
            s.get("steps_offset", d.steps_offset);
            s.get("w_star", d.w_star);
            s.finish();
        });
    }
    if (uses_flow(cmd)) {
        in.section("flow", [&](const json& j, const std::string& p) { read_flow(j, p, c.flow, false); });
    }
    if (cmd == Command::AuditFlow) {
        in.section("flow_presets", [&](const json& j, const std::string& p) {
            if (!j.is_array() || j.empty()) throw_config(p + " must be a non-empty array");
            c.flow_presets.clear();
            for (std::size_t i = 0; i < j.size(); ++i) {
                FlowSection f;
                read_flow(j[i], p + "[" + std::to_string(i) + "]", f, true);
                c.flow_presets.push_back(f);
            }
        });
    }
    if (uses_toy(cmd)) {
        in.section("pretrain", [&](const json& j, const std::string& p) {
            ObjectReader s(j, p);
            auto& t = c.pretrain;
            s.get("steps", t.steps);
            s.get("batch", t.batch);
            s.get("lr", t.lr);
            s.get("lr_final", t.lr_final);
            s.get("cond_dropout", t.cond_dropout);
            if (cmd == Command::Pretrain) {
                s.get("sampler", t.sampler);
                s.get("eval_samples", t.eval_samples);
            } else {
                s.get("diffusion_checkpoint", t.diffusion_checkpoint);
                if (cmd != Command::Irg) s.get("flow_checkpoint", t.flow_checkpoint);
            }
            s.finish();
        });
    }
    if (uses_rl(cmd)) {
        in.section("rl", [&](const json& j, const std::string& p) {
            ObjectReader s(j, p);
            auto& r = c.rl;
            s.get("epochs", r.epochs);
            s.get("xi", r.xi);
            s.get("lr", r.lr);
            s.get("groups", r.groups);
            s.get("group_size", r.group_size);
            s.get("inner_epochs", r.inner_epochs);
            s.get("minibatches", r.minibatches);
            s.get("subsample_fraction", r.subsample_fraction);
            s.get("rollout_precision", r.rollout_precision);
            s.get("train_conditions", r.train_conditions);
            s.get("grad_clip", r.grad_clip);
            s.section("reward", [&](const json& rj, const std::string& rp) { read_reward(rj, rp, r.reward); });
            s.finish();
        });
    }
    if (cmd == Command::Finetune) {
        in.section("finetune", [&](const json& j, const std::string& p) {
            ObjectReader s(j, p);
            s.get("variant", c.finetune.variant);
            s.finish();
        });
    }
    if (cmd == Command::Compare) {
        in.section("compare", [&](const json& j, const std::string& p) {
            ObjectReader s(j, p);
            auto& k = c.compare;
            s.get("variants", k.variants);
            s.get("seeds", k.seeds);
            s.get("thresholds", k.thresholds);
            s.get("smoothing_window", k.smoothing_window);
            s.get("plateau_window", k.plateau_window);
            s.finish();
        });
    }
    if (cmd == Command::Irg) {
        in.section("irg", [&](const json& j, const std::string& p) {
            ObjectReader s(j, p);
            auto& g = c.irg;
            s.get("variant", g.variant);
            s.get("finetune_epochs", g.finetune_epochs);
            s.section("rewards", [&](const json& rj, const std::string& rp) {
                if (!rj.is_array() || rj.empty()) throw_config(rp + " must be a non-empty array");
                g.rewards.clear();
                for (std::size_t i = 0; i < rj.size(); ++i) {
                    RewardSection r;
                    read_reward(rj[i], rp + "[" + std::to_string(i) + "]", r);
                    g.rewards.push_back(r);
                }
            });
            s.get("sweep", g.sweep);
            s.get("cfg_scale", g.cfg_scale);
            s.get("samples_per_condition", g.samples_per_condition);
            s.get("conditions", g.conditions);
            s.finish();
        });
    }
    in.finish();

    if (c.threads < 1) throw_config("threads must be >= 1");
    return c;
}

RunConfig config_from_text(const std::string& text, std::optional<Command> expected) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw_config(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(doc, expected);
}

nn::Architecture architecture(const RunConfig& c) {
    nn::Architecture arch;
    arch.time_pairs = c.network.time_pairs;
    arch.cond_dim = c.network.cond_dim;
    arch.hidden = c.network.hidden;
    arch.num_conditions = c.dataset.modes + 2;
    if (arch.time_pairs < 1 || arch.cond_dim < 1 || arch.hidden.empty()) throw_config("network sizes must be >= 1");
    for (int h : arch.hidden) {
        if (h < 1) throw_config("hidden widths must be >= 1");
    }
    return arch;
}

toybench::ToyDataset dataset(const RunConfig& c) {
    try {
        return toybench::ring_dataset(c.dataset.modes, c.dataset.radius, c.dataset.scale, c.dataset.seed);
    } catch (const Error& e) {
        throw_config(std::string("dataset: ") + e.what());
    }
}

sched::TrainSchedule train_schedule(const DiffusionSection& d) {
    sched::BetaKind kind;
    if (d.beta_schedule == "linear") {
        kind = sched::BetaKind::Linear;
    } else if (d.beta_schedule == "scaled-linear") {
        kind = sched::BetaKind::ScaledLinear;
    } else {
        throw_config("unknown beta_schedule '" + d.beta_schedule + "'");
    }
    try {
        return sched::build_train_schedule(d.train_steps, d.beta_start, d.beta_end, kind);
    } catch (const Error& e) {
        throw_config(std::string("diffusion: ") + e.what());
    }
}

toybench::DiffusionSetup diffusion_setup(const RunConfig& c) {
    return {train_schedule(c.diffusion), c.diffusion.sample_steps, c.diffusion.eta, c.diffusion.steps_offset,
            c.diffusion.w_star};
}

toybench::FlowSetup flow_setup(const FlowSection& f) {
    sched::FlowSigmaKind kind;
    if (f.sigma == "constant") {
        kind = sched::FlowSigmaKind::Constant;
    } else if (f.sigma == "flowgrpo") {
        kind = sched::FlowSigmaKind::FlowGrpo;
    } else {
        throw_config("unknown flow sigma '" + f.sigma + "'");
    }
    return {f.steps, f.shift, kind, f.eta};
}

toybench::PretrainConfig pretrain_config(const RunConfig& c) {
    const auto& p = c.pretrain;
    return {p.steps, p.batch, p.lr, p.lr_final, p.cond_dropout, c.seed};
}

toybench::RewardSpec reward_spec(const RewardSection& r) {
    toybench::RewardSpec spec;
    spec.kind = toybench::parse_reward_kind(r.kind);
    if (r.normal.size() != 2) throw_config("reward normal must have two entries");
    if (!(r.tau > 0.0)) throw_config("reward tau must be positive");
    spec.tau = r.tau;
    spec.normal = Eigen::Vector2d(r.normal[0], r.normal[1]);
    spec.offset = r.offset;
    spec.sharpness = r.sharpness;
    return spec;
}

toybench::VariantConfig variant_config(const RunConfig& c, const std::string& variant) {
    toybench::VariantConfig v;
    const auto colon = variant.find(':');
    v.method = toybench::parse_method(variant.substr(0, colon));
    const bool flow_method = !toybench::supports(v.method, sampler::SamplerKind::Diffusion);
    v.sampler = flow_method ? sampler::SamplerKind::Flow : sampler::SamplerKind::Diffusion;
    if (colon != std::string::npos) {
        const std::string s = variant.substr(colon + 1);
        if (s == "flow") {
            v.sampler = sampler::SamplerKind::Flow;
        } else if (s == "diffusion") {
            v.sampler = sampler::SamplerKind::Diffusion;
        } else {
            throw_config("unknown sampler '" + s + "' in variant '" + variant + "'");
        }
    }
    const auto& r = c.rl;
    v.xi = r.xi;
    v.lr = r.lr;
    v.groups = r.groups;
    v.group_size = r.group_size;
    v.inner_epochs = r.inner_epochs;
    v.minibatches = r.minibatches;
    v.subsample_fraction = r.subsample_fraction;
    if (r.rollout_precision == "single") {
        v.rollout_precision = sampler::Precision::Single;
    } else if (r.rollout_precision == "double") {
        v.rollout_precision = sampler::Precision::Double;
    } else {
        throw_config("rollout_precision must be 'single' or 'double'");
    }
    v.train_conditions = r.train_conditions;
    v.grad_clip = r.grad_clip;
    v.reward = reward_spec(r.reward);
    return v;
}

}  // namespace propcredit::app
