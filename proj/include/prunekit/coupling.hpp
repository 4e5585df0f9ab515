// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0
//
// Channel dependency analysis. Every edge of the graph carries a layout: the
// origin of each channel position, expressed as (family, channel). A family
// is the output space of one weighted layer, or several such spaces tied
// together by residual additions. Units are the atomic removable structures
// derived from those layouts.

#pragma once

#include "prunekit/model_ir.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prunekit {

/// One output channel of a weighted producer (Y_i of layer l).
struct ChannelRef {
    std::string layer;
    int channel = 0;
    bool operator==(const ChannelRef&) const = default;
};

/// Input positions [index, index + count) of a consumer's weight. count is
/// the flattened spatial area for Linear layers fed through Flatten, else 1.
struct InSliceRef {
    std::string consumer;
    int index = 0;
    int count = 1;
    bool operator==(const InSliceRef&) const = default;
};

/// A per-channel vector entry removed with the unit (BN entry or bias).
struct AuxRef {
    std::string node;
    int index = 0;
    bool operator==(const AuxRef&) const = default;
};

enum class UnitKind { FullChannel, InChannelOnly };

std::string_view to_string(UnitKind kind);

struct PruneUnit {
    std::string id;
    UnitKind kind = UnitKind::FullChannel;
    std::vector<ChannelRef> members;  // empty for InChannelOnly
    std::vector<InSliceRef> in_slices;
    std::vector<AuxRef> aux;
    std::string norm_group;  // scope of per-layer weight normalization
    // InChannelOnly: the surviving out-channel whose slice this is.
    ChannelRef source;
};

struct Origin {
    int family = -1;
    int channel = 0;

    std::uint64_t key() const { return (std::uint64_t(std::uint32_t(family)) << 32) | std::uint32_t(channel); }
    bool operator==(const Origin&) const = default;
};

enum class FamilyKind {
    Fixed,     // graph input or classifier output; never pruned
    Plain,     // single producer
    Residual,  // several producers tied through Add
    Dense,     // dense-block layer output; only consumer slices are removable
};

struct Family {
    std::string name;
    FamilyKind kind = FamilyKind::Plain;
    std::vector<std::size_t> producers;  // weighted node indices, topological order
    int width = 0;
};

struct NodeLayout {
    std::vector<Origin> channels;
    int area = 1;  // features per channel once flattened
};

/// Result of the structural analysis; valid only for the graph it was built from.
class CouplingAnalysis {
public:
    const std::vector<NodeLayout>& layouts() const { return layouts_; }
    const std::vector<Family>& families() const { return families_; }
    const std::vector<PruneUnit>& units() const { return units_; }

    /// Unit -> family (FullChannel) and channel, or consumer node and input
    /// channel position (InChannelOnly).
    int unit_family(std::size_t u) const { return unit_family_[u]; }
    int unit_channel(std::size_t u) const { return unit_channel_[u]; }
    std::size_t unit_consumer(std::size_t u) const { return unit_consumer_[u]; }

    /// Nodes whose layout contains `origin`, paired with the position.
    const std::vector<std::pair<std::size_t, int>>& occurrences(Origin origin) const;

    /// Exclusive pass-through chain feeding weighted node `consumer`, top
    /// first. The chain ends at the first node with fan-out or that is not a
    /// pass-through layer.
    const std::vector<std::size_t>& exclusive_chain(std::size_t consumer) const { return chains_[consumer]; }

    std::optional<std::size_t> find_unit(std::string_view id) const;

private:
    friend CouplingAnalysis analyze_coupling(const ModelGraph& graph);

    std::vector<NodeLayout> layouts_;
    std::vector<Family> families_;
    std::vector<PruneUnit> units_;
    std::vector<int> unit_family_, unit_channel_;
    std::vector<std::size_t> unit_consumer_;
    std::vector<std::vector<std::vector<std::pair<std::size_t, int>>>> occurrences_;  // [family][channel]
    std::vector<std::vector<std::size_t>> chains_;
    std::unordered_map<std::string, std::size_t> unit_index_;
};

/// Throws ValidationError for unsupported topologies.
CouplingAnalysis analyze_coupling(const ModelGraph& graph);

std::vector<PruneUnit> build_prune_units(const ModelGraph& graph);

/// Arithmetic mean of member scores.
double group_importance(std::span<const double> member_scores);

}  // namespace prunekit
