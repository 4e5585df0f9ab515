// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/error.hpp"
#include "prunekit/model_ir.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <queue>
#include <sstream>

namespace prunekit {

Tensor::Tensor(std::vector<std::int64_t> dims, std::vector<float> values)
    : shape(std::move(dims)), data(std::move(values)) {}

Tensor Tensor::zeros(std::vector<std::int64_t> dims) {
    Tensor t;
    t.shape = std::move(dims);
    t.data.assign(static_cast<std::size_t>(t.numel()), 0.0f);
    return t;
}

std::int64_t Tensor::numel() const {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

namespace {

constexpr std::array<std::pair<NodeKind, std::string_view>, 11> kKindNames{{
    {NodeKind::Input, "Input"},
    {NodeKind::Conv2d, "Conv2d"},
    {NodeKind::Linear, "Linear"},
    {NodeKind::BatchNorm2d, "BatchNorm2d"},
    {NodeKind::ReLU, "ReLU"},
    {NodeKind::Pool, "Pool"},
    {NodeKind::Flatten, "Flatten"},
    {NodeKind::Add, "Add"},
    {NodeKind::Concat, "Concat"},
    {NodeKind::ChannelSelect, "ChannelSelect"},
    {NodeKind::Output, "Output"},
}};

constexpr std::array<std::pair<PoolKind, std::string_view>, 3> kPoolNames{{
    {PoolKind::Max, "max"},
    {PoolKind::Avg, "avg"},
    {PoolKind::GlobalAvg, "global-avg"},
}};

}  // namespace

std::string_view to_string(NodeKind kind) {
    for (auto [k, name] : kKindNames)
        if (k == kind) return name;
    return "?";
}

std::string_view to_string(PoolKind kind) {
    for (auto [k, name] : kPoolNames)
        if (k == kind) return name;
    return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view name) {
    for (auto [k, n] : kKindNames)
        if (n == name) return k;
    return std::nullopt;
}

std::optional<PoolKind> parse_pool_kind(std::string_view name) {
    for (auto [k, n] : kPoolNames)
        if (n == name) return k;
    return std::nullopt;
}

std::vector<std::pair<std::string_view, const Tensor*>> LayerNode::tensors() const {
    std::vector<std::pair<std::string_view, const Tensor*>> out;
    if (is_weighted()) {
        out.emplace_back("weight", &weight);
        if (bias) out.emplace_back("bias", &*bias);
    } else if (kind == NodeKind::BatchNorm2d) {
        out.emplace_back("gamma", &gamma);
        out.emplace_back("beta", &beta);
        out.emplace_back("running_mean", &running_mean);
        out.emplace_back("running_var", &running_var);
    }
    return out;
}

std::vector<std::pair<std::string_view, Tensor*>> LayerNode::tensors() {
    std::vector<std::pair<std::string_view, Tensor*>> out;
    for (auto [name, t] : std::as_const(*this).tensors()) out.emplace_back(name, const_cast<Tensor*>(t));
    return out;
}

ModelGraph::ModelGraph(InputSpec input, std::vector<LayerNode> nodes)
    : input_(input), nodes_(std::move(nodes)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_.try_emplace(nodes_[i].id, i);
    producers_.resize(nodes_.size());
    consumers_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        for (const auto& name : nodes_[i].inputs) {
            auto it = index_.find(name);
            if (it == index_.end()) continue;
            producers_[i].push_back(it->second);
            consumers_[it->second].push_back(i);
        }
    }
}

std::optional<std::size_t> ModelGraph::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const LayerNode& ModelGraph::node(std::string_view id) const {
    auto idx = index_of(id);
    if (!idx) throw ValidationError("unknown node '" + std::string(id) + "'");
    return nodes_[*idx];
}

std::int64_t ModelGraph::total_output_channels() const {
    std::int64_t s = 0;
    for (const auto& n : nodes_)
        if (n.is_weighted()) s += n.out_channels;
    return s;
}

namespace {

std::optional<std::vector<std::size_t>> topo_order(const ModelGraph& g) {
    std::vector<std::size_t> indegree(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) indegree[i] = g.producers(i).size();
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (indegree[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        auto i = ready.top();
        ready.pop();
        order.push_back(i);
        for (auto c : g.consumers(i))
            if (--indegree[c] == 0) ready.push(c);
    }
    if (order.size() != g.size()) return std::nullopt;
    return order;
}

std::string shape_str(const std::vector<std::int64_t>& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

void check_tensor(const LayerNode& n, std::string_view name, const Tensor& t,
                  std::vector<std::int64_t> expected, std::vector<Violation>& out) {
    if (t.shape != expected) {
        out.push_back({n.id, std::string(name) + " shape " + shape_str(t.shape) + " != expected " +
                                 shape_str(expected)});
    } else if (std::int64_t(t.data.size()) != t.numel()) {
        out.push_back({n.id, std::string(name) + " is unbound"});
    }
}

void check_attributes(const LayerNode& n, std::vector<Violation>& out) {
    auto bad = [&](std::string msg) { out.push_back({n.id, std::move(msg)}); };
    switch (n.kind) {
    case NodeKind::Conv2d:
        if (n.in_channels < 1 || n.out_channels < 1 || n.kernel < 1 || n.stride < 1 || n.padding < 0) {
            bad("invalid Conv2d attributes");
            return;
        }
        check_tensor(n, "weight", n.weight, {n.out_channels, n.in_channels, n.kernel, n.kernel}, out);
        if (n.bias) check_tensor(n, "bias", *n.bias, {n.out_channels}, out);
        break;
    case NodeKind::Linear:
        if (n.in_channels < 1 || n.out_channels < 1) {
            bad("invalid Linear attributes");
            return;
        }
        check_tensor(n, "weight", n.weight, {n.out_channels, n.in_channels}, out);
        if (n.bias) check_tensor(n, "bias", *n.bias, {n.out_channels}, out);
        break;
    case NodeKind::BatchNorm2d:
        if (n.channels < 1 || !(n.epsilon > 0)) {
            bad("invalid BatchNorm2d attributes");
            return;
        }
        for (auto [name, t] : n.tensors()) check_tensor(n, name, *t, {n.channels}, out);
        break;
    case NodeKind::Pool:
        if (n.pool != PoolKind::GlobalAvg && (n.kernel < 1 || n.stride < 1)) bad("invalid Pool attributes");
        break;
    case NodeKind::ChannelSelect:
        if (n.indices.empty()) bad("ChannelSelect keeps no channels");
        for (std::size_t i = 0; i < n.indices.size(); ++i) {
            if (n.indices[i] < 0 || (i > 0 && n.indices[i] <= n.indices[i - 1])) {
                bad("ChannelSelect indices must be non-negative and strictly increasing");
                break;
            }
        }
        break;
    default:
        break;
    }
}

std::pair<std::size_t, std::size_t> arity(NodeKind k) {
    switch (k) {
    case NodeKind::Input: return {0, 0};
    case NodeKind::Add:
    case NodeKind::Concat: return {2, SIZE_MAX};
    default: return {1, 1};
    }
}

// Propagates shapes along `order`; reports inconsistencies into `out`.
std::vector<std::pair<FeatureShape, FeatureShape>> propagate(const ModelGraph& g, int input_size,
                                                             const std::vector<std::size_t>& order,
                                                             std::vector<Violation>& out) {
    std::vector<std::pair<FeatureShape, FeatureShape>> shapes(g.size());
    std::vector<bool> ok(g.size(), false);
    for (auto i : order) {
        const auto& n = g.at(i);
        auto bad = [&](std::string msg) { out.push_back({n.id, std::move(msg)}); };
        const auto& prods = g.producers(i);
        if (prods.size() != n.inputs.size()) continue;
        bool inputs_ok = std::all_of(prods.begin(), prods.end(), [&](auto p) { return ok[p]; });
        if (!inputs_ok) continue;
        FeatureShape in = prods.empty() ? FeatureShape{} : shapes[prods[0]].second;
        FeatureShape o;
        switch (n.kind) {
        case NodeKind::Input:
            if (input_size < 1 || g.input().channels < 1) {
                bad("input shape must be positive");
                continue;
            }
            in = {g.input().channels, input_size, false};
            o = in;
            break;
        case NodeKind::Conv2d: {
            if (in.flat) { bad("Conv2d input is flat"); continue; }
            if (in.channels != n.in_channels) {
                bad("Conv2d in_channels " + std::to_string(n.in_channels) + " != producer channels " +
                    std::to_string(in.channels));
                continue;
            }
            int span = in.size + 2 * n.padding - n.kernel;
            if (span < 0) { bad("computed output size is negative"); continue; }
            o = {n.out_channels, span / n.stride + 1, false};
            break;
        }
        case NodeKind::Linear:
            if (!in.flat || in.channels != n.in_channels) {
                bad("Linear in_features " + std::to_string(n.in_channels) + " != producer flat features " +
                    std::to_string(in.flat ? in.channels : -1));
                continue;
            }
            o = {n.out_channels, 1, true};
            break;
        case NodeKind::BatchNorm2d:
            if (in.flat || in.channels != n.channels) {
                bad("BatchNorm2d channels " + std::to_string(n.channels) + " != producer channels " +
                    std::to_string(in.channels));
                continue;
            }
            o = in;
            break;
        case NodeKind::ReLU:
        case NodeKind::Output:
            o = in;
            break;
        case NodeKind::Pool: {
            if (in.flat) { bad("Pool input is flat"); continue; }
            if (n.pool == PoolKind::GlobalAvg) {
                o = {in.channels, 1, false};
            } else {
                int span = in.size - n.kernel;
                if (span < 0) { bad("computed output size is negative"); continue; }
                o = {in.channels, span / n.stride + 1, false};
            }
            break;
        }
        case NodeKind::Flatten:
            o = in.flat ? in : FeatureShape{int(in.elements()), 1, true};
            break;
        case NodeKind::Add: {
            bool same = std::all_of(prods.begin(), prods.end(), [&](auto p) { return shapes[p].second == in; });
            if (!same) { bad("Add operands have mismatched shapes"); continue; }
            o = in;
            break;
        }
        case NodeKind::Concat: {
            int total = 0;
            bool good = true;
            for (auto p : prods) {
                const auto& s = shapes[p].second;
                if (s.flat || s.size != in.size) good = false;
                total += s.channels;
            }
            if (!good) { bad("Concat operands must be spatial maps of equal size"); continue; }
            o = {total, in.size, false};
            break;
        }
        case NodeKind::ChannelSelect:
            if (in.flat) { bad("ChannelSelect input is flat"); continue; }
            if (!n.indices.empty() && n.indices.back() >= in.channels) {
                bad("ChannelSelect index out of range");
                continue;
            }
            o = {int(n.indices.size()), in.size, false};
            break;
        }
        shapes[i] = {in, o};
        ok[i] = true;
    }
    return shapes;
}

}  // namespace

std::vector<Violation> validate(const ModelGraph& g) {
    std::vector<Violation> out;
    std::unordered_map<std::string, int> seen;
    int inputs = 0, outputs = 0;
    for (const auto& n : g.nodes()) {
        if (n.id.empty()) out.push_back({"", "node with empty id"});
        if (++seen[n.id] == 2) out.push_back({n.id, "duplicate node id"});
        if (n.kind == NodeKind::Input) ++inputs;
        if (n.kind == NodeKind::Output) ++outputs;
        auto [lo, hi] = arity(n.kind);
        if (n.inputs.size() < lo || n.inputs.size() > hi) out.push_back({n.id, "wrong number of inputs"});
        for (const auto& in : n.inputs)
            if (!g.index_of(in)) out.push_back({n.id, "input '" + in + "' does not exist"});
        check_attributes(n, out);
    }
    if (inputs != 1) out.push_back({"", "graph must have exactly one Input node"});
    if (outputs != 1) out.push_back({"", "graph must have exactly one Output node"});

    auto order = topo_order(g);
    if (!order) {
        out.push_back({"", "graph is cyclic"});
        return out;
    }
    propagate(g, g.input().size, *order, out);
    return out;
}

ModelGraph infer_shapes(ModelGraph graph, int input_size) {
    auto order = topo_order(graph);
    if (!order) throw ValidationError("graph is cyclic");
    std::vector<Violation> violations;
    auto shapes = propagate(graph, input_size, *order, violations);
    if (!violations.empty())
        throw ValidationError("shape inference failed at '" + violations.front().node +
                              "': " + violations.front().message);
    ModelGraph out = std::move(graph);
    out.input_.size = input_size;
    for (std::size_t i = 0; i < out.nodes_.size(); ++i) {
        out.nodes_[i].in_shape = shapes[i].first;
        out.nodes_[i].out_shape = shapes[i].second;
    }
    out.shapes_inferred_ = true;
    return out;
}

ModelGraph prepare_graph(InputSpec input, std::vector<LayerNode> nodes) {
    ModelGraph raw(input, std::move(nodes));
    auto violations = validate(raw);
    if (!violations.empty()) {
        std::string msg = "model validation failed:";
        for (const auto& v : violations) msg += "\n  " + (v.node.empty() ? std::string("<graph>") : v.node) + ": " + v.message;
        throw ValidationError(msg);
    }
    auto order = topo_order(raw);
    std::vector<LayerNode> sorted;
    sorted.reserve(raw.size());
    auto all = std::move(raw).release_nodes();
    for (auto i : *order) sorted.push_back(std::move(all[i]));
    return infer_shapes(ModelGraph(input, std::move(sorted)), input.size);
}

}  // namespace prunekit
