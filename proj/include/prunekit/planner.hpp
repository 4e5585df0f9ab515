// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "prunekit/config.hpp"
#include "prunekit/coupling.hpp"
#include "prunekit/error.hpp"
#include "prunekit/importance.hpp"
#include "prunekit/model_ir.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prunekit {

struct RemovedUnit {
    std::string unit_id;
    double imp = 0;
    std::vector<ChannelRef> members;
    std::vector<InSliceRef> in_slices;
};

struct LayerWidth {
    std::string layer;
    int in_before = 0, in_after = 0;
    int out_before = 0, out_after = 0;
};

struct PruningPlan {
    std::string checksum;  // of the graph the plan was computed for
    std::int64_t baseline_params = 0, baseline_flops = 0;
    std::int64_t predicted_params = 0, predicted_flops = 0;
    double prr = 0, frr = 0;
    double threshold = 0;
    std::vector<RemovedUnit> removed;  // ascending importance
    std::vector<LayerWidth> layer_widths;
    Config config;
};

/// Carries the best plan reachable under the floors.
class InfeasibleBudget : public Error {
public:
    InfeasibleBudget(const std::string& what, PruningPlan best)
        : Error(ErrorKind::Infeasible, what), best_(std::move(best)) {}
    const PruningPlan& best() const { return best_; }

private:
    PruningPlan best_;
};

/// Ascending Imp; ties by larger F, larger P, then unit id.
std::vector<ImportanceRecord> rank_global(std::span<const ImportanceRecord> records);

/// Channel widths of a hypothetical pruned graph, updated one unit at a
/// time, with exact recounts of the whole model.
class WidthModel {
public:
    WidthModel(const ModelGraph& graph, const CouplingAnalysis& analysis, const Config& config);

    /// False if removing the unit would push a layer below the floor.
    bool can_remove(std::size_t unit) const;
    void remove(std::size_t unit);

    std::int64_t flops() const;
    std::int64_t params() const;
    std::vector<LayerWidth> layer_widths() const;

private:
    int weighted_in_channels(std::size_t node) const;

    const ModelGraph& graph_;
    const CouplingAnalysis& analysis_;
    Config config_;
    std::vector<int> out_features_;  // per node: live channels x area
    std::vector<int> select_removed_;  // per weighted node: features dropped by an inserted select with no chain
    std::vector<int> family_live_;
    std::vector<int> in_channels_live_;  // per weighted node
    std::vector<bool> removed_;
};

/// Greedy ascending-prefix selection. Throws InfeasibleBudget when the
/// floors stop the budget from being met.
PruningPlan select_threshold(std::span<const ImportanceRecord> sorted, const ModelGraph& graph,
                             const CouplingAnalysis& analysis, const Config& config);

/// score -> rank -> select for one graph.
PruningPlan plan_pruning(const ModelGraph& graph, const Config& config);

std::string config_to_json(const Config& config);
Config config_from_json(std::string_view text);

std::string plan_to_json(const PruningPlan& plan);
PruningPlan plan_from_json(std::string_view text);

}  // namespace prunekit
