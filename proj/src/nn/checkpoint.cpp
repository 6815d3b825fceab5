// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nn/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "common/error.hpp"

namespace propcredit::nn {

namespace {
constexpr const char* kFormat = "propcredit-policy";
}

std::string checkpoint_to_json(const PolicyParams& params) {
    const auto& a = params.arch();
    nlohmann::json j;
    j["format"] = kFormat;
    j["version"] = kCheckpointVersion;
    j["architecture"] = {{"data_dim", a.data_dim},
                         {"time_pairs", a.time_pairs},
                         {"num_conditions", a.num_conditions},
                         {"cond_dim", a.cond_dim},
                         {"hidden", a.hidden}};
    j["parameter_count"] = params.size();
    j["params"] = params.vector();
    return j.dump();
}

PolicyParams checkpoint_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw_config(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat) throw_config("not a policy checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion) {
            throw_config("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
        }
        const auto& ja = j.at("architecture");
        Architecture a;
        a.data_dim = ja.at("data_dim").get<int>();
        a.time_pairs = ja.at("time_pairs").get<int>();
        a.num_conditions = ja.at("num_conditions").get<int>();
        a.cond_dim = ja.at("cond_dim").get<int>();
        a.hidden = ja.at("hidden").get<std::vector<int>>();
        auto values = j.at("params").get<std::vector<double>>();
        if (values.size() != j.at("parameter_count").get<std::size_t>()) throw_config("parameter_count mismatch");
        return PolicyParams(std::move(a), std::move(values));
    } catch (const nlohmann::json::exception& e) {
        throw_config(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(params) << '\n';
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot read checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

}  // namespace propcredit::nn
