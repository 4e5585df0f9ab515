// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace prunekit {

enum class WeightNorm { MaxMin, Max, Log };

/// macs: one operation per multiply-accumulate. 2macs: every count doubled.
enum class FlopsConvention { Macs, TwoMacs };

std::string_view to_string(WeightNorm mode);
std::string_view to_string(FlopsConvention convention);
std::optional<WeightNorm> parse_weight_norm(std::string_view name);
std::optional<FlopsConvention> parse_flops_convention(std::string_view name);

struct Config {
    double alpha = 1.0;
    double beta = 1.0;
    double flop_target_ratio = 0.5;  // fraction of baseline FLOPs to remove
    WeightNorm weight_norm = WeightNorm::MaxMin;
    bool use_in_channel = true;  // false selects the out-channel-only ablation
    FlopsConvention flops_convention = FlopsConvention::Macs;
    int min_channels_per_layer = 1;
    int passes = 1;
    std::optional<double> per_pass_ratio;  // derived from the overall target when unset
    bool count_aux_params = true;          // bias and BN affine vectors in model totals
    bool count_aux_flops = true;           // BN, ReLU and pooling work in model totals
    std::optional<double> param_target_ratio;

    /// Throws ValidationError on out-of-range settings.
    void validate() const;

    /// Per-pass removal ratio whose compounding over `passes` reaches the target.
    double effective_per_pass_ratio() const;
};

/// Sets (alpha, beta) for vggnet | resnet | densenet. Returns false for
/// unknown names.
bool apply_preset(Config& config, std::string_view preset);

/// key = value lines, '#' comments. Unknown keys are rejected.
std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path);
void apply_setting(Config& config, std::string_view key, std::string_view value);

}  // namespace prunekit
