// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/cost_model.hpp"

#include "prunekit/error.hpp"

namespace prunekit {

namespace {

const LayerNode& weighted(const ModelGraph& g, const std::string& id) {
    auto idx = g.index_of(id);
    if (!idx) throw ValidationError("unit references unknown layer '" + id + "'");
    const auto& n = g.at(*idx);
    if (!n.is_weighted()) throw ValidationError("unit references non-weighted layer '" + id + "'");
    return n;
}

std::int64_t sq(std::int64_t v) { return v * v; }

}  // namespace

UnitCost unit_cost(const ModelGraph& g, const PruneUnit& unit, FlopsConvention convention) {
    if (!g.shapes_inferred()) throw ValidationError("unit cost requires shape-annotated graph");
    UnitCost c;
    for (const auto& m : unit.members) {
        const auto& n = weighted(g, m.layer);
        if (m.channel < 0 || m.channel >= n.out_channels)
            throw ValidationError("channel " + std::to_string(m.channel) + " out of range for '" + m.layer + "'");
        const std::int64_t k = n.kind == NodeKind::Linear ? 1 : n.kernel;
        const std::int64_t i = n.kind == NodeKind::Linear ? 1 : n.in_shape.size;
        c.out_params += sq(k) * n.in_channels;
        c.out_flops += sq(i) * sq(k) * n.in_channels;
    }
    for (const auto& s : unit.in_slices) {
        const auto& n = weighted(g, s.consumer);
        if (s.index < 0 || s.count < 1 || s.index + s.count > n.in_channels)
            throw ValidationError("input slice out of range for '" + s.consumer + "'");
        const std::int64_t k = n.kind == NodeKind::Linear ? 1 : n.kernel;
        const std::int64_t i = n.kind == NodeKind::Linear ? 1 : n.in_shape.size;
        c.in_params += sq(k) * n.out_channels * s.count;
        c.in_flops += sq(i) * sq(k) * n.out_channels * s.count;
    }
    c.out_flops = apply_convention(c.out_flops, convention);
    c.in_flops = apply_convention(c.in_flops, convention);
    return c;
}

std::int64_t unit_param_cost(const ModelGraph& g, const PruneUnit& unit) {
    return unit_cost(g, unit, FlopsConvention::Macs).params();
}

std::int64_t unit_flop_cost(const ModelGraph& g, const PruneUnit& unit, FlopsConvention convention) {
    return unit_cost(g, unit, convention).flops();
}

std::int64_t node_flops(const LayerNode& n, int in_width, int out_width, bool aux) {
    // Only weighted layers depend on the input width; everything else is
    // priced by what it emits.
    const std::int64_t in = in_width, out = out_width;
    switch (n.kind) {
    case NodeKind::Conv2d: return sq(n.out_shape.size) * sq(n.kernel) * in * out;
    case NodeKind::Linear: return in * out;
    case NodeKind::BatchNorm2d: return aux ? 2 * out * sq(n.out_shape.size) : 0;
    case NodeKind::ReLU: return aux ? out * sq(n.out_shape.size) : 0;
    case NodeKind::Pool:
        if (!aux) return 0;
        if (n.pool == PoolKind::GlobalAvg) return out * sq(n.in_shape.size);  // one add per input element
        return sq(n.kernel) * out * sq(n.out_shape.size);
    default: return 0;
    }
}

std::int64_t node_params(const LayerNode& n, int in_width, int out_width, bool aux) {
    const std::int64_t in = in_width, out = out_width;
    switch (n.kind) {
    case NodeKind::Conv2d: return sq(n.kernel) * in * out + (aux && n.bias ? out : 0);
    case NodeKind::Linear: return in * out + (aux && n.bias ? out : 0);
    case NodeKind::BatchNorm2d: return aux ? 2 * out : 0;
    default: return 0;
    }
}

namespace {

std::pair<int, int> widths_of(const LayerNode& n) {
    switch (n.kind) {
    case NodeKind::Conv2d:
    case NodeKind::Linear: return {n.in_channels, n.out_channels};
    default: return {n.in_shape.channels, n.out_shape.channels};
    }
}

}  // namespace

std::int64_t model_param_count(const ModelGraph& g, bool count_aux_params) {
    std::int64_t total = 0;
    for (const auto& n : g.nodes()) {
        auto [in, out] = widths_of(n);
        total += node_params(n, in, out, count_aux_params);
    }
    return total;
}

std::int64_t model_flop_count(const ModelGraph& g, FlopsConvention convention, bool count_aux_flops) {
    if (!g.shapes_inferred()) throw ValidationError("FLOP count requires shape-annotated graph");
    std::int64_t total = 0;
    for (const auto& n : g.nodes()) {
        auto [in, out] = widths_of(n);
        total += node_flops(n, in, out, count_aux_flops);
    }
    return apply_convention(total, convention);
}

}  // namespace prunekit
