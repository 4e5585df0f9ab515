// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/coupling.hpp"

#include "prunekit/error.hpp"

#include <algorithm>
#include <numeric>

namespace prunekit {

std::string_view to_string(UnitKind kind) {
    return kind == UnitKind::FullChannel ? "full-channel" : "in-channel-only";
}

double group_importance(std::span<const double> member_scores) {
    if (member_scores.empty()) throw ValidationError("group_importance of an empty group");
    return std::accumulate(member_scores.begin(), member_scores.end(), 0.0) / double(member_scores.size());
}

const std::vector<std::pair<std::size_t, int>>& CouplingAnalysis::occurrences(Origin origin) const {
    return occurrences_.at(std::size_t(origin.family)).at(std::size_t(origin.channel));
}

std::optional<std::size_t> CouplingAnalysis::find_unit(std::string_view id) const {
    auto it = unit_index_.find(std::string(id));
    if (it == unit_index_.end()) return std::nullopt;
    return it->second;
}

namespace {

[[noreturn]] void unsupported(const std::string& what) { throw ValidationError("unsupported topology: " + what); }

bool is_pass_through(NodeKind k) {
    return k == NodeKind::BatchNorm2d || k == NodeKind::ReLU || k == NodeKind::Pool || k == NodeKind::Flatten ||
           k == NodeKind::ChannelSelect;
}

struct UnionFind {
    std::vector<int> parent;
    int add() {
        parent.push_back(int(parent.size()));
        return parent.back();
    }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a), b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);  // keep the earliest space as root
    }
};

std::vector<bool> ancestors_of(const ModelGraph& g, std::size_t node) {
    std::vector<bool> seen(g.size(), false);
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
        auto n = stack.back();
        stack.pop_back();
        for (auto p : g.producers(n))
            if (!seen[p]) {
                seen[p] = true;
                stack.push_back(p);
            }
    }
    return seen;
}

bool reaches_output(const ModelGraph& g, std::size_t node, std::vector<int>& memo) {
    if (memo[node] >= 0) return memo[node] == 1;
    bool r = g.at(node).kind == NodeKind::Output;
    for (auto c : g.consumers(node)) r = reaches_output(g, c, memo) || r;
    memo[node] = r ? 1 : 0;
    return r;
}

}  // namespace

CouplingAnalysis analyze_coupling(const ModelGraph& g) {
    if (!g.shapes_inferred()) throw ValidationError("coupling analysis requires shape-annotated graph");
    const std::size_t n_nodes = g.size();

    // Raw spaces: 0 = graph input, then one per weighted layer.
    UnionFind uf;
    std::vector<int> space_width;
    std::vector<std::size_t> space_producer;
    uf.add();
    space_width.push_back(g.input().channels);
    space_producer.push_back(SIZE_MAX);

    std::vector<NodeLayout> raw(n_nodes);
    std::vector<int> output_nodes;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto& n = g.at(i);
        const auto& prods = g.producers(i);
        for (auto p : prods)
            if (p >= i) unsupported("graph is not topologically ordered");
        NodeLayout& out = raw[i];
        switch (n.kind) {
        case NodeKind::Input:
            for (int c = 0; c < g.input().channels; ++c) out.channels.push_back({0, c});
            break;
        case NodeKind::Conv2d:
        case NodeKind::Linear: {
            int s = uf.add();
            space_width.push_back(n.out_channels);
            space_producer.push_back(i);
            for (int c = 0; c < n.out_channels; ++c) out.channels.push_back({s, c});
            break;
        }
        case NodeKind::Flatten:
            out = raw[prods[0]];
            if (!n.in_shape.flat) out.area = raw[prods[0]].area * n.in_shape.size * n.in_shape.size;
            break;
        case NodeKind::ChannelSelect:
            for (int idx : n.indices) out.channels.push_back(raw[prods[0]].channels[std::size_t(idx)]);
            out.area = raw[prods[0]].area;
            break;
        case NodeKind::Concat:
            for (auto p : prods) {
                if (raw[p].area != 1) unsupported("Concat of flattened features at '" + n.id + "'");
                out.channels.insert(out.channels.end(), raw[p].channels.begin(), raw[p].channels.end());
            }
            break;
        case NodeKind::Add: {
            for (auto p : prods) {
                const auto& ch = raw[p].channels;
                int s = ch.empty() ? -1 : ch.front().family;
                bool canonical = s >= 0 && int(ch.size()) == space_width[std::size_t(s)];
                for (std::size_t k = 0; canonical && k < ch.size(); ++k)
                    canonical = ch[k].family == s && ch[k].channel == int(k);
                if (!canonical || raw[p].area != 1)
                    unsupported("Add operand '" + g.at(p).id + "' of '" + n.id + "' is not a complete channel space");
                uf.unite(raw[prods[0]].channels.front().family, s);
            }
            out = raw[prods[0]];
            break;
        }
        default:  // BN, ReLU, Pool, Output
            out = raw[prods[0]];
            break;
        }
        if (n.kind == NodeKind::Output) output_nodes.push_back(int(i));
    }

    CouplingAnalysis a;

    // Families: dense renumbering of union roots in space order.
    std::vector<int> family_of_root(space_width.size(), -1);
    std::vector<int> family_of_space(space_width.size());
    for (std::size_t s = 0; s < space_width.size(); ++s) {
        int root = uf.find(int(s));
        if (family_of_root[std::size_t(root)] < 0) {
            family_of_root[std::size_t(root)] = int(a.families_.size());
            a.families_.push_back(Family{});
            a.families_.back().width = space_width[std::size_t(root)];
        }
        int f = family_of_root[std::size_t(root)];
        family_of_space[s] = f;
        if (space_width[s] != a.families_[std::size_t(f)].width) unsupported("residual operands differ in width");
        if (space_producer[s] != SIZE_MAX) a.families_[std::size_t(f)].producers.push_back(space_producer[s]);
    }
    a.layouts_ = std::move(raw);
    for (auto& l : a.layouts_)
        for (auto& o : l.channels) o.family = family_of_space[std::size_t(o.family)];

    std::vector<int> memo(n_nodes, -1);
    for (std::size_t i = 0; i < n_nodes; ++i)
        if (g.at(i).is_weighted() && !reaches_output(g, i, memo))
            unsupported("weighted layer '" + g.at(i).id + "' has no path to Output");

    // Classification.
    std::vector<bool> fixed(a.families_.size(), false);
    fixed[std::size_t(family_of_space[0])] = true;
    for (int out : output_nodes)
        for (const auto& o : a.layouts_[std::size_t(out)].channels) {
            const auto& fam = a.families_[std::size_t(o.family)];
            if (std::any_of(fam.producers.begin(), fam.producers.end(),
                            [&](auto p) { return g.at(p).kind == NodeKind::Linear; }))
                fixed[std::size_t(o.family)] = true;
        }

    for (std::size_t f = 0; f < a.families_.size(); ++f) {
        auto& fam = a.families_[f];
        if (fam.producers.empty()) {
            fam.name = "input";
            fam.kind = FamilyKind::Fixed;
            continue;
        }
        const auto& first = g.at(fam.producers.front());
        fam.name = first.id;
        if (fixed[f]) {
            fam.kind = FamilyKind::Fixed;
        } else if (fam.producers.size() > 1) {
            fam.kind = FamilyKind::Residual;
        } else {
            fam.kind = FamilyKind::Plain;
            // A dense-block layer feeds a Concat whose other operand precedes it.
            const auto anc = ancestors_of(g, fam.producers.front());
            for (std::size_t c = 0; c < n_nodes && fam.kind == FamilyKind::Plain; ++c) {
                if (g.at(c).kind != NodeKind::Concat) continue;
                const auto& ops = g.producers(c);
                for (std::size_t j = 0; j < ops.size(); ++j) {
                    const auto& ch = a.layouts_[ops[j]].channels;
                    bool holds = std::any_of(ch.begin(), ch.end(), [&](const Origin& o) { return o.family == int(f); });
                    if (!holds) continue;
                    for (std::size_t m = 0; m < ops.size(); ++m)
                        if (m != j && anc[ops[m]]) fam.kind = FamilyKind::Dense;
                }
            }
        }
    }

    // Occurrence index, rejecting duplicated channels within one layout.
    a.occurrences_.resize(a.families_.size());
    for (std::size_t f = 0; f < a.families_.size(); ++f) a.occurrences_[f].resize(std::size_t(a.families_[f].width));
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto& ch = a.layouts_[i].channels;
        for (std::size_t p = 0; p < ch.size(); ++p) {
            auto& occ = a.occurrences_[std::size_t(ch[p].family)][std::size_t(ch[p].channel)];
            if (!occ.empty() && occ.back().first == i) unsupported("channel duplicated within '" + g.at(i).id + "'");
            occ.emplace_back(i, int(p));
        }
    }

    // Exclusive pass-through chains above each weighted layer.
    a.chains_.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (!g.at(i).is_weighted()) continue;
        std::vector<std::size_t> chain;
        std::size_t cur = g.producers(i)[0];
        while (is_pass_through(g.at(cur).kind) && g.consumers(cur).size() == 1) {
            chain.push_back(cur);
            cur = g.producers(cur)[0];
        }
        std::reverse(chain.begin(), chain.end());
        a.chains_[i] = std::move(chain);
    }

    auto add_unit = [&](PruneUnit u, int family, int channel, std::size_t consumer) {
        a.unit_index_.emplace(u.id, a.units_.size());
        a.units_.push_back(std::move(u));
        a.unit_family_.push_back(family);
        a.unit_channel_.push_back(channel);
        a.unit_consumer_.push_back(consumer);
    };

    for (std::size_t f = 0; f < a.families_.size(); ++f) {
        const auto& fam = a.families_[f];
        if (fam.kind != FamilyKind::Plain && fam.kind != FamilyKind::Residual) continue;
        const std::string prefix = fam.kind == FamilyKind::Plain ? "out:" : "res:";
        for (int c = 0; c < fam.width; ++c) {
            PruneUnit u;
            u.id = prefix + fam.name + ":" + std::to_string(c);
            u.kind = UnitKind::FullChannel;
            u.norm_group = prefix + fam.name;
            for (auto p : fam.producers) {
                u.members.push_back({g.at(p).id, c});
                if (g.at(p).bias) u.aux.push_back({g.at(p).id, c});
            }
            for (auto [node, pos] : a.occurrences_[f][std::size_t(c)]) {
                if (g.at(node).kind == NodeKind::BatchNorm2d) u.aux.push_back({g.at(node).id, pos});
                const int area = a.layouts_[node].area;
                for (auto consumer : g.consumers(node))
                    if (g.at(consumer).is_weighted()) u.in_slices.push_back({g.at(consumer).id, pos * area, area});
            }
            u.source = u.members.front();
            add_unit(std::move(u), int(f), c, SIZE_MAX);
        }
    }

    for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto& consumer = g.at(i);
        if (!consumer.is_weighted()) continue;
        const std::size_t prod = g.producers(i)[0];
        const auto& layout = a.layouts_[prod];
        const auto& chain = a.chains_[i];
        for (std::size_t k = 0; k < layout.channels.size(); ++k) {
            const Origin o = layout.channels[k];
            const auto& fam = a.families_[std::size_t(o.family)];
            if (fam.kind != FamilyKind::Dense) continue;
            const std::size_t top = chain.empty() ? i : chain.front();
            if (g.at(top).in_shape.flat) unsupported("dense slice of '" + consumer.id + "' crosses flattened features");
            PruneUnit u;
            u.id = "in:" + consumer.id + ":" + std::to_string(k);
            u.kind = UnitKind::InChannelOnly;
            u.norm_group = "in:" + consumer.id;
            u.in_slices.push_back({consumer.id, int(k) * layout.area, layout.area});
            for (auto [node, pos] : a.occurrences_[std::size_t(o.family)][std::size_t(o.channel)]) {
                if (g.at(node).kind == NodeKind::BatchNorm2d && std::find(chain.begin(), chain.end(), node) != chain.end())
                    u.aux.push_back({g.at(node).id, pos});
            }
            u.source = {g.at(fam.producers.front()).id, o.channel};
            add_unit(std::move(u), o.family, int(k), i);
        }
    }
    return a;
}

std::vector<PruneUnit> build_prune_units(const ModelGraph& graph) { return analyze_coupling(graph).units(); }

}  // namespace prunekit
