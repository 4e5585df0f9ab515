// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0
//
// In-memory model representation: layer DAG, weight tensors, shape
// annotations, manifest/container serialization and a naive reference
// evaluator used as a functional oracle in tests.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prunekit {

/// Dense float32 tensor, row-major.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<std::int64_t> dims, std::vector<float> values);

    static Tensor zeros(std::vector<std::int64_t> dims);

    std::int64_t numel() const;
    bool operator==(const Tensor&) const = default;
};

enum class NodeKind {
    Input,
    Conv2d,
    Linear,
    BatchNorm2d,
    ReLU,
    Pool,
    Flatten,
    Add,
    Concat,
    ChannelSelect,
    Output,
};

enum class PoolKind { Max, Avg, GlobalAvg };

std::string_view to_string(NodeKind kind);
std::string_view to_string(PoolKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view name);
std::optional<PoolKind> parse_pool_kind(std::string_view name);

/// Activation shape on an edge. Spatial maps are square (size x size);
/// flat feature vectors have size 1 and flat = true.
struct FeatureShape {
    int channels = 0;
    int size = 0;
    bool flat = false;

    std::int64_t elements() const { return std::int64_t(channels) * size * size; }
    bool operator==(const FeatureShape&) const = default;
};

struct LayerNode {
    std::string id;
    NodeKind kind = NodeKind::Input;
    std::vector<std::string> inputs;

    // Conv2d (M, N, K, stride, padding) and Linear (M, N).
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;
    Tensor weight;
    std::optional<Tensor> bias;

    // BatchNorm2d
    int channels = 0;
    double epsilon = 1e-5;
    Tensor gamma, beta, running_mean, running_var;

    // Pool reuses kernel and stride; GlobalAvg ignores both.
    PoolKind pool = PoolKind::Max;

    // ChannelSelect: kept input channel positions, strictly increasing.
    std::vector<int> indices;

    // Filled by shape inference.
    FeatureShape in_shape;
    FeatureShape out_shape;

    bool is_weighted() const { return kind == NodeKind::Conv2d || kind == NodeKind::Linear; }

    /// Tensors in canonical serialization order.
    std::vector<std::pair<std::string_view, const Tensor*>> tensors() const;
    std::vector<std::pair<std::string_view, Tensor*>> tensors();
};

struct InputSpec {
    int channels = 0;
    int size = 0;
};

/// Immutable-by-convention DAG of layers. Nodes are stored in the order
/// given at construction; prepare_graph() produces a topologically sorted,
/// validated, shape-annotated instance.
class ModelGraph {
public:
    ModelGraph() = default;
    ModelGraph(InputSpec input, std::vector<LayerNode> nodes);

    const InputSpec& input() const { return input_; }
    std::span<const LayerNode> nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    const LayerNode& at(std::size_t i) const { return nodes_[i]; }

    std::optional<std::size_t> index_of(std::string_view id) const;
    const LayerNode& node(std::string_view id) const;

    /// Indices of resolvable inputs / consumers. Dangling names are skipped.
    const std::vector<std::size_t>& producers(std::size_t i) const { return producers_[i]; }
    const std::vector<std::size_t>& consumers(std::size_t i) const { return consumers_[i]; }

    bool shapes_inferred() const { return shapes_inferred_; }

    /// Total output channels over all Conv2d/Linear layers (S).
    std::int64_t total_output_channels() const;

    std::vector<LayerNode> copy_nodes() const { return nodes_; }
    std::vector<LayerNode> release_nodes() && { return std::move(nodes_); }

private:
    friend ModelGraph infer_shapes(ModelGraph, int);

    InputSpec input_;
    std::vector<LayerNode> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> producers_;
    std::vector<std::vector<std::size_t>> consumers_;
    bool shapes_inferred_ = false;
};

struct Violation {
    std::string node;  // empty for graph-level violations
    std::string message;
};

/// Checks every structural invariant; empty result iff the graph is valid.
std::vector<Violation> validate(const ModelGraph& graph);

/// Annotates I/O sizes on every node. Throws ValidationError on inconsistent
/// operands or non-positive computed sizes.
ModelGraph infer_shapes(ModelGraph graph, int input_size);

/// Topologically sorts, validates (throwing with the violation list) and
/// infers shapes.
ModelGraph prepare_graph(InputSpec input, std::vector<LayerNode> nodes);

struct SerializedModel {
    std::string manifest;               // UTF-8 JSON
    std::vector<std::uint8_t> weights;  // little-endian float32 container
};

SerializedModel serialize(const ModelGraph& graph, std::string_view weights_file_name);
ModelGraph deserialize(std::string_view manifest, std::span<const std::uint8_t> weights);

/// When weights_path is empty, the manifest's weights_file is resolved
/// relative to the manifest directory.
ModelGraph load_model(const std::filesystem::path& manifest_path,
                      const std::filesystem::path& weights_path = {});
void save_model(const ModelGraph& graph, const std::filesystem::path& manifest_path,
                const std::filesystem::path& weights_path);

/// SHA-256 (hex) over the canonical serialization.
std::string graph_checksum(const ModelGraph& graph);

/// Reference forward pass on a single C x H x W input.
Tensor forward_eval(const ModelGraph& graph, const Tensor& input);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace prunekit
