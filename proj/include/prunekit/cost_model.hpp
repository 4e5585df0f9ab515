// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0
//
// Parameter and FLOP accounting. Two separate paths: per-unit costs that
// feed the importance score (formula evaluated as written, with the input
// spatial size), and exact whole-model totals used for budgets and reports.

#pragma once

#include "prunekit/config.hpp"
#include "prunekit/coupling.hpp"
#include "prunekit/model_ir.hpp"

#include <cstdint>

namespace prunekit {

struct UnitCost {
    std::int64_t out_params = 0;  // filter rows of the members
    std::int64_t in_params = 0;   // consumer kernel slices
    std::int64_t out_flops = 0;
    std::int64_t in_flops = 0;

    std::int64_t params() const { return out_params + in_params; }
    std::int64_t flops() const { return out_flops + in_flops; }
};

/// Throws ValidationError when the unit references a missing layer or an
/// out-of-range channel.
UnitCost unit_cost(const ModelGraph& graph, const PruneUnit& unit, FlopsConvention convention);
std::int64_t unit_param_cost(const ModelGraph& graph, const PruneUnit& unit);
std::int64_t unit_flop_cost(const ModelGraph& graph, const PruneUnit& unit, FlopsConvention convention);

/// Exact cost of one node evaluated at the given channel widths. For Linear
/// nodes in_width counts input features. Spatial sizes come from the node's
/// shape annotations, which pruning never changes. Returned in MACs.
std::int64_t node_flops(const LayerNode& node, int in_width, int out_width, bool count_aux_flops);
std::int64_t node_params(const LayerNode& node, int in_width, int out_width, bool count_aux_params);

std::int64_t model_param_count(const ModelGraph& graph, bool count_aux_params = true);
std::int64_t model_flop_count(const ModelGraph& graph, FlopsConvention convention = FlopsConvention::Macs,
                              bool count_aux_flops = true);

inline std::int64_t apply_convention(std::int64_t macs, FlopsConvention convention) {
    return convention == FlopsConvention::TwoMacs ? 2 * macs : macs;
}

}  // namespace prunekit
