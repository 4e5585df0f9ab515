// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/config.hpp"

#include "prunekit/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace prunekit {

std::string_view to_string(WeightNorm mode) {
    switch (mode) {
    case WeightNorm::MaxMin: return "max-min";
    case WeightNorm::Max: return "max";
    case WeightNorm::Log: return "log";
    }
    return "?";
}

std::string_view to_string(FlopsConvention convention) {
    return convention == FlopsConvention::Macs ? "macs" : "2macs";
}

std::optional<WeightNorm> parse_weight_norm(std::string_view name) {
    if (name == "max-min") return WeightNorm::MaxMin;
    if (name == "max") return WeightNorm::Max;
    if (name == "log") return WeightNorm::Log;
    return std::nullopt;
}

std::optional<FlopsConvention> parse_flops_convention(std::string_view name) {
    if (name == "macs") return FlopsConvention::Macs;
    if (name == "2macs") return FlopsConvention::TwoMacs;
    return std::nullopt;
}

void Config::validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("invalid config: " + m); };
    if (!(alpha >= 0) || !std::isfinite(alpha)) fail("alpha must be a nonnegative real");
    if (!(beta >= 0) || !std::isfinite(beta)) fail("beta must be a nonnegative real");
    if (!(flop_target_ratio > 0 && flop_target_ratio < 1)) fail("flop_target_ratio must lie strictly between 0 and 1");
    if (min_channels_per_layer < 1) fail("min_channels_per_layer must be positive");
    if (passes < 1) fail("passes must be at least 1");
    if (per_pass_ratio && !(*per_pass_ratio > 0 && *per_pass_ratio < 1))
        fail("per_pass_ratio must lie strictly between 0 and 1");
    if (param_target_ratio && !(*param_target_ratio > 0 && *param_target_ratio < 1))
        fail("param_target_ratio must lie strictly between 0 and 1");
}

double Config::effective_per_pass_ratio() const {
    if (per_pass_ratio) return *per_pass_ratio;
    if (passes == 1) return flop_target_ratio;
    return 1.0 - std::pow(1.0 - flop_target_ratio, 1.0 / passes);
}

bool apply_preset(Config& config, std::string_view preset) {
    if (preset == "vggnet") {
        config.alpha = 3.0;
        config.beta = 1.0;
    } else if (preset == "resnet") {
        config.alpha = 1.0;
        config.beta = 1.0;
    } else if (preset == "densenet") {
        config.alpha = 0.1;
        config.beta = 0.1;
    } else {
        return false;
    }
    return true;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ValidationError("invalid config: " + std::string(key) + " expects a number, got '" + std::string(v) + "'");
    return out;
}

int to_int(std::string_view key, std::string_view v) {
    int out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ValidationError("invalid config: " + std::string(key) + " expects an integer, got '" + std::string(v) + "'");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ValidationError("invalid config: " + std::string(key) + " expects a boolean, got '" + std::string(v) + "'");
}

}  // namespace

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = line;
        if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty() || s.front() == '[') continue;  // blank or table header
        auto eq = s.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        out[std::string(trim(s.substr(0, eq)))] = std::string(trim(s.substr(eq + 1)));
    }
    return out;
}

void apply_setting(Config& c, std::string_view key, std::string_view value) {
    if (key == "alpha") c.alpha = to_double(key, value);
    else if (key == "beta") c.beta = to_double(key, value);
    else if (key == "flop_target_ratio" || key == "flop_target") c.flop_target_ratio = to_double(key, value);
    else if (key == "weight_norm_mode" || key == "weight_norm") {
        auto m = parse_weight_norm(value);
        if (!m) throw ValidationError("invalid config: weight_norm must be max-min|max|log");
        c.weight_norm = *m;
    } else if (key == "use_in_channel") c.use_in_channel = to_bool(key, value);
    else if (key == "mode") {
        if (value == "cpmc") c.use_in_channel = true;
        else if (value == "cpmc-a") c.use_in_channel = false;
        else throw ValidationError("invalid config: mode must be cpmc|cpmc-a");
    } else if (key == "flops_convention") {
        auto f = parse_flops_convention(value);
        if (!f) throw ValidationError("invalid config: flops_convention must be macs|2macs");
        c.flops_convention = *f;
    } else if (key == "min_channels_per_layer" || key == "min_channels") c.min_channels_per_layer = to_int(key, value);
    else if (key == "passes") c.passes = to_int(key, value);
    else if (key == "per_pass_ratio" || key == "per_pass") c.per_pass_ratio = to_double(key, value);
    else if (key == "count_aux_params") c.count_aux_params = to_bool(key, value);
    else if (key == "count_aux_flops") c.count_aux_flops = to_bool(key, value);
    else if (key == "param_target_ratio") c.param_target_ratio = to_double(key, value);
    else if (key == "preset") {
        if (!apply_preset(c, value)) throw ValidationError("invalid config: unknown preset '" + std::string(value) + "'");
    } else {
        throw ValidationError("invalid config: unknown key '" + std::string(key) + "'");
    }
}

}  // namespace prunekit
