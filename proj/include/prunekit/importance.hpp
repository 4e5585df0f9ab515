// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "prunekit/config.hpp"
#include "prunekit/coupling.hpp"
#include "prunekit/model_ir.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace prunekit {

struct ImportanceRecord {
    std::string unit_id;
    std::size_t unit = 0;  // index into the unit list that was scored
    std::string layer;     // producer (FullChannel) or consumer (InChannelOnly)
    int channel = 0;       // output channel, or consumer input position
    double L = 0, GL = 0, GP = 0, GF = 0, Imp = 0;
    std::int64_t P = 0, F = 0;
};

/// Sum of |w| over the unit's filter rows and, when use_in_channel is set,
/// its consumer kernel slices. Coupled groups report the mean per member.
double dependency_l1(const ModelGraph& graph, const PruneUnit& unit, bool use_in_channel);

std::vector<double> normalize_weight_scores(std::span<const double> layer_scores, WeightNorm mode);

struct CostScores {
    double GP = 0, GF = 0;
};

CostScores normalize_cost_scores(std::int64_t P, std::int64_t F, std::int64_t Pmax, std::int64_t Fmax, double alpha,
                                 double beta);

inline double combined_importance(double GL, double GP, double GF) { return GL + GP + GF; }

/// One record per unit, in unit order.
std::vector<ImportanceRecord> score_all(const ModelGraph& graph, std::span<const PruneUnit> units, const Config& config);

void write_records_csv(std::ostream& out, std::span<const ImportanceRecord> records);
std::string records_to_json(std::span<const ImportanceRecord> records);
std::string units_to_json(std::span<const PruneUnit> units);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace prunekit
