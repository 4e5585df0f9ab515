// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "prunekit/coupling.hpp"
#include "prunekit/model_ir.hpp"
#include "prunekit/planner.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prunekit {

struct LayerSurgery {
    std::string layer;
    std::vector<int> removed_out;  // pre-surgery output channel indices
    std::vector<int> removed_in;   // pre-surgery input channel positions
};

struct SurgeryReport {
    std::vector<LayerSurgery> layers;  // weighted layers that changed
    std::vector<std::string> inserted_selects;
    std::int64_t bytes_removed = 0;
    std::int64_t params = 0, flops = 0;  // recounted on the new graph
    bool matches_prediction = true;
    std::string checksum;
};

struct SurgeryResult {
    ModelGraph graph;
    SurgeryReport report;
};

/// Builds the pruned graph for a set of unit indices of `analysis`.
/// Counts in the report use the given config's accounting flags.
SurgeryResult apply_removal(const ModelGraph& graph, const CouplingAnalysis& analysis,
                            std::span<const std::size_t> units, const Config& config);

/// Rejects plans computed for a different graph.
SurgeryResult apply_plan(const ModelGraph& graph, const PruningPlan& plan);

/// Zeroes everything the unit feeds forward and compares the reference
/// evaluator on the zeroed graph with the pruned graph.
bool zero_equivalence_check(const ModelGraph& graph, const PruneUnit& unit, int trials, std::uint64_t seed = 7);

struct PassResult {
    PruningPlan plan;
    SurgeryReport report;
    ModelGraph graph;
};

/// Score, plan and prune `config.passes` times, each pass at the per-pass
/// ratio relative to its own input. No retraining between passes.
std::vector<PassResult> multi_pass(const ModelGraph& graph, const Config& config);

std::string surgery_report_to_json(const SurgeryReport& report);

}  // namespace prunekit
