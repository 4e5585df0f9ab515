// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/surgeon.hpp"

#include "prunekit/cost_model.hpp"
#include "prunekit/error.hpp"
#include "prunekit/importance.hpp"
#include "prunekit/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

namespace prunekit {

namespace {

using OriginSet = std::unordered_set<std::uint64_t>;

std::unordered_map<std::uint64_t, int> position_index(const std::vector<Origin>& layout) {
    std::unordered_map<std::uint64_t, int> pos;
    for (std::size_t p = 0; p < layout.size(); ++p) pos.emplace(layout[p].key(), int(p));
    return pos;
}

Tensor slice_vector(const Tensor& t, const std::vector<int>& keep) {
    Tensor out = Tensor::zeros({std::int64_t(keep.size())});
    for (std::size_t k = 0; k < keep.size(); ++k) out.data[k] = t.data[std::size_t(keep[k])];
    return out;
}

std::int64_t tensor_bytes(const ModelGraph& g) {
    std::int64_t bytes = 0;
    for (const auto& n : g.nodes())
        for (const auto& [name, t] : n.tensors()) bytes += 4 * t->numel();
    return bytes;
}

std::string unique_id(const ModelGraph& g, const std::vector<LayerNode>& built, const std::string& base) {
    auto taken = [&](const std::string& id) {
        return g.index_of(id).has_value() ||
               std::any_of(built.begin(), built.end(), [&](const LayerNode& n) { return n.id == id; });
    };
    std::string id = base;
    for (int k = 2; taken(id); ++k) id = base + "_" + std::to_string(k);
    return id;
}

}  // namespace

SurgeryResult apply_removal(const ModelGraph& g, const CouplingAnalysis& a, std::span<const std::size_t> units,
                            const Config& config) {
    const auto& layouts = a.layouts();
    OriginSet removed;
    std::map<std::size_t, OriginSet> dropped_at;  // select position -> origins filtered there
    std::map<std::size_t, bool> needs_insert;
    for (auto u : units) {
        if (u >= a.units().size()) throw ValidationError("unit index out of range");
        if (a.units()[u].kind == UnitKind::FullChannel) {
            removed.insert(Origin{a.unit_family(u), a.unit_channel(u)}.key());
            continue;
        }
        const std::size_t consumer = a.unit_consumer(u);
        const Origin o = layouts[g.producers(consumer)[0]].channels[std::size_t(a.unit_channel(u))];
        const auto& chain = a.exclusive_chain(consumer);
        const std::size_t top = chain.empty() ? consumer : chain.front();
        dropped_at[top].insert(o.key());
        needs_insert[top] = g.at(top).kind != NodeKind::ChannelSelect;
    }

    std::vector<LayerNode> built;
    built.reserve(g.size() + needs_insert.size());
    std::unordered_map<std::string, std::vector<Origin>> layout_of;
    SurgeryReport report;

    for (std::size_t i = 0; i < g.size(); ++i) {
        LayerNode n = g.at(i);
        const auto& prods = g.producers(i);
        const OriginSet* filter = nullptr;
        if (auto it = dropped_at.find(i); it != dropped_at.end()) filter = &it->second;

        if (filter && needs_insert[i]) {
            LayerNode sel;
            sel.id = unique_id(g, built, n.inputs[0] + ".select");
            sel.kind = NodeKind::ChannelSelect;
            sel.inputs = {n.inputs[0]};
            const auto& src = layout_of.at(n.inputs[0]);
            std::vector<Origin> kept;
            for (std::size_t p = 0; p < src.size(); ++p)
                if (!filter->count(src[p].key())) {
                    sel.indices.push_back(int(p));
                    kept.push_back(src[p]);
                }
            layout_of[sel.id] = std::move(kept);
            n.inputs[0] = sel.id;
            report.inserted_selects.push_back(sel.id);
            built.push_back(std::move(sel));
            filter = nullptr;
        }

        std::vector<Origin> out_layout;
        const std::vector<Origin>* in_layout = n.inputs.empty() ? nullptr : &layout_of.at(n.inputs[0]);
        switch (n.kind) {
        case NodeKind::Input: out_layout = layouts[i].channels; break;
        case NodeKind::Conv2d:
        case NodeKind::Linear: {
            const auto& old_in = layouts[prods[0]];
            const int area = old_in.area;
            const auto old_pos = position_index(old_in.channels);
            std::vector<int> cols;  // old input feature index for each new column
            std::vector<bool> in_kept(old_in.channels.size(), false);
            for (const auto& o : *in_layout) {
                const int p = old_pos.at(o.key());
                in_kept[std::size_t(p)] = true;
                for (int t = 0; t < area; ++t) cols.push_back(p * area + t);
            }
            std::vector<int> rows;
            for (int c = 0; c < n.out_channels; ++c) {
                if (removed.count(layouts[i].channels[std::size_t(c)].key())) continue;
                rows.push_back(c);
                out_layout.push_back(layouts[i].channels[std::size_t(c)]);
            }
            LayerSurgery ls{n.id, {}, {}};
            for (int c = 0; c < n.out_channels; ++c)
                if (!std::binary_search(rows.begin(), rows.end(), c)) ls.removed_out.push_back(c);
            for (std::size_t p = 0; p < in_kept.size(); ++p)
                if (!in_kept[p]) ls.removed_in.push_back(int(p));
            if (!ls.removed_out.empty() || !ls.removed_in.empty()) report.layers.push_back(std::move(ls));

            const std::size_t ka = n.kind == NodeKind::Linear ? 1 : std::size_t(n.kernel * n.kernel);
            const std::size_t old_m = std::size_t(n.in_channels);
            Tensor w;
            w.shape = n.weight.shape;
            w.shape[0] = std::int64_t(rows.size());
            w.shape[1] = std::int64_t(cols.size());
            w.data.reserve(rows.size() * cols.size() * ka);
            for (int r : rows)
                for (int c : cols) {
                    const float* src = n.weight.data.data() + (std::size_t(r) * old_m + std::size_t(c)) * ka;
                    w.data.insert(w.data.end(), src, src + ka);
                }
            n.weight = std::move(w);
            if (n.bias) n.bias = slice_vector(*n.bias, rows);
            n.out_channels = int(rows.size());
            n.in_channels = int(cols.size());
            break;
        }
        case NodeKind::BatchNorm2d: {
            const auto old_pos = position_index(layouts[i].channels);
            std::vector<int> keep;
            for (const auto& o : *in_layout) keep.push_back(old_pos.at(o.key()));
            n.gamma = slice_vector(n.gamma, keep);
            n.beta = slice_vector(n.beta, keep);
            n.running_mean = slice_vector(n.running_mean, keep);
            n.running_var = slice_vector(n.running_var, keep);
            n.channels = int(keep.size());
            out_layout = *in_layout;
            break;
        }
        case NodeKind::Add:
            for (const auto& id : n.inputs)
                if (layout_of.at(id) != *in_layout) throw ValidationError("surgery misaligned Add '" + n.id + "'");
            out_layout = *in_layout;
            break;
        case NodeKind::Concat:
            for (const auto& id : n.inputs) {
                const auto& l = layout_of.at(id);
                out_layout.insert(out_layout.end(), l.begin(), l.end());
            }
            break;
        case NodeKind::ChannelSelect: {
            const auto new_pos = position_index(*in_layout);
            n.indices.clear();
            for (const auto& o : layouts[i].channels) {
                auto it = new_pos.find(o.key());
                if (it == new_pos.end() || (filter && filter->count(o.key()))) continue;
                n.indices.push_back(it->second);
                out_layout.push_back(o);
            }
            break;
        }
        default: out_layout = *in_layout; break;  // ReLU, Pool, Flatten, Output
        }
        layout_of[n.id] = std::move(out_layout);
        built.push_back(std::move(n));
    }

    SurgeryResult result{prepare_graph(g.input(), std::move(built)), {}};
    report.bytes_removed = tensor_bytes(g) - tensor_bytes(result.graph);
    report.params = model_param_count(result.graph, config.count_aux_params);
    report.flops = model_flop_count(result.graph, config.flops_convention, config.count_aux_flops);
    report.checksum = graph_checksum(result.graph);
    result.report = std::move(report);
    return result;
}

SurgeryResult apply_plan(const ModelGraph& g, const PruningPlan& plan) {
    if (graph_checksum(g) != plan.checksum) throw ValidationError("plan/graph checksum mismatch");
    const auto analysis = analyze_coupling(g);
    WidthModel widths(g, analysis, plan.config);
    std::vector<std::size_t> units;
    for (const auto& r : plan.removed) {
        auto u = analysis.find_unit(r.unit_id);
        if (!u) throw ValidationError("plan references unknown unit '" + r.unit_id + "'");
        if (!widths.can_remove(*u)) throw ValidationError("plan removes '" + r.unit_id + "' past the layer floor");
        widths.remove(*u);
        units.push_back(*u);
    }
    auto result = apply_removal(g, analysis, units, plan.config);
    result.report.matches_prediction =
        result.report.params == plan.predicted_params && result.report.flops == plan.predicted_flops;
    return result;
}

bool zero_equivalence_check(const ModelGraph& g, const PruneUnit& unit, int trials, std::uint64_t seed) {
    const auto analysis = analyze_coupling(g);
    const auto u = analysis.find_unit(unit.id);
    if (!u) throw ValidationError("unknown unit '" + unit.id + "'");
    const std::size_t units[] = {*u};
    const auto pruned = apply_removal(g, analysis, units, Config{}).graph;

    auto nodes = g.copy_nodes();
    auto find = [&](const std::string& id) -> LayerNode& {
        return *std::find_if(nodes.begin(), nodes.end(), [&](const LayerNode& n) { return n.id == id; });
    };
    for (const auto& m : unit.members) {
        auto& n = find(m.layer);
        const std::size_t row = n.weight.data.size() / std::size_t(n.out_channels);
        std::fill_n(n.weight.data.begin() + std::ptrdiff_t(std::size_t(m.channel) * row), row, 0.0f);
    }
    for (const auto& x : unit.aux) {
        auto& n = find(x.node);
        if (n.kind == NodeKind::BatchNorm2d) {
            n.gamma.data[std::size_t(x.index)] = 0.0f;
            n.beta.data[std::size_t(x.index)] = 0.0f;
        } else if (n.bias) {
            n.bias->data[std::size_t(x.index)] = 0.0f;
        }
    }
    for (const auto& s : unit.in_slices) {
        auto& n = find(s.consumer);
        const std::size_t ka = n.kind == NodeKind::Linear ? 1 : std::size_t(n.kernel * n.kernel);
        for (int oc = 0; oc < n.out_channels; ++oc) {
            auto first = n.weight.data.begin() +
                         std::ptrdiff_t((std::size_t(oc) * std::size_t(n.in_channels) + std::size_t(s.index)) * ka);
            std::fill_n(first, ka * std::size_t(s.count), 0.0f);
        }
    }
    const auto zeroed = prepare_graph(g.input(), std::move(nodes));

    // A channel that reaches the graph output disappears from it; compare
    // the remaining blocks and require the removed block to be zero.
    std::size_t out_node = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.at(i).kind == NodeKind::Output) out_node = i;
    const auto& out_layout = analysis.layouts()[out_node];
    std::vector<bool> dropped(out_layout.channels.size(), false);
    if (unit.kind == UnitKind::FullChannel) {
        const Origin o{analysis.unit_family(*u), analysis.unit_channel(*u)};
        for (std::size_t p = 0; p < dropped.size(); ++p) dropped[p] = out_layout.channels[p] == o;
    }
    const std::size_t block = std::size_t(g.at(out_node).out_shape.size * g.at(out_node).out_shape.size) *
                              std::size_t(out_layout.area);

    std::mt19937_64 rng(seed);
    const auto& in = g.input();
    for (int t = 0; t < trials; ++t) {
        Tensor x = Tensor::zeros({in.channels, in.size, in.size});
        for (auto& v : x.data) v = uniform(rng, -1.0f, 1.0f);
        const auto a = forward_eval(zeroed, x), b = forward_eval(pruned, x);
        std::vector<float> expected;
        for (std::size_t p = 0; p < dropped.size(); ++p) {
            auto first = a.data.begin() + std::ptrdiff_t(p * block);
            if (!dropped[p]) expected.insert(expected.end(), first, first + std::ptrdiff_t(block));
            else if (std::any_of(first, first + std::ptrdiff_t(block), [](float v) { return v != 0.0f; })) return false;
        }
        if (expected.size() != b.data.size()) return false;
        for (std::size_t e = 0; e < expected.size(); ++e)
            if (std::fabs(expected[e] - b.data[e]) > 1e-5f * std::max(1.0f, std::fabs(expected[e]))) return false;
    }
    return true;
}

std::vector<PassResult> multi_pass(const ModelGraph& graph, const Config& config) {
    config.validate();
    Config per_pass = config;
    per_pass.flop_target_ratio = config.effective_per_pass_ratio();
    per_pass.passes = 1;
    per_pass.per_pass_ratio.reset();
    std::vector<PassResult> trajectory;
    trajectory.reserve(std::size_t(config.passes));  // `current` points into it
    const ModelGraph* current = &graph;
    for (int p = 0; p < config.passes; ++p) {
        auto plan = plan_pruning(*current, per_pass);
        auto surgery = apply_plan(*current, plan);
        trajectory.push_back({std::move(plan), std::move(surgery.report), std::move(surgery.graph)});
        current = &trajectory.back().graph;
    }
    return trajectory;
}

std::string surgery_report_to_json(const SurgeryReport& r) {
    nlohmann::ordered_json j;
    auto& layers = j["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : r.layers)
        layers.push_back({{"layer", l.layer},
                          {"removed_out_count", l.removed_out.size()},
                          {"removed_out", l.removed_out},
                          {"removed_in_count", l.removed_in.size()},
                          {"removed_in", l.removed_in}});
    j["inserted_selects"] = r.inserted_selects;
    j["bytes_removed"] = r.bytes_removed;
    j["params"] = r.params;
    j["flops"] = r.flops;
    j["matches_prediction"] = r.matches_prediction;
    j["checksum"] = r.checksum;
    return j.dump(2) + "\n";
}

}  // namespace prunekit
