// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0
//
// Programmatic model construction: a small builder plus the benchmark
// architectures and tiny fixtures used by tests and the `fixture` command.
// Weights are seeded pseudo-random, not trained.

#pragma once

#include "prunekit/model_ir.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace prunekit {

class NetBuilder {
public:
    NetBuilder(InputSpec input, std::uint64_t seed);

    static constexpr const char* kInput = "input";

    std::string conv(const std::string& id, const std::string& from, int out_channels, int kernel, int stride = 1,
                     int padding = -1, bool bias = false);  // padding -1: kernel / 2
    std::string linear(const std::string& id, const std::string& from, int out_features, bool bias = true);
    std::string bn(const std::string& id, const std::string& from);
    std::string relu(const std::string& id, const std::string& from);
    std::string max_pool(const std::string& id, const std::string& from, int kernel, int stride);
    std::string avg_pool(const std::string& id, const std::string& from, int kernel, int stride);
    std::string global_avg_pool(const std::string& id, const std::string& from);
    std::string flatten(const std::string& id, const std::string& from);
    std::string add(const std::string& id, std::vector<std::string> from);
    std::string concat(const std::string& id, std::vector<std::string> from);

    /// Appends the Output node and returns the prepared graph.
    ModelGraph build(const std::string& from);

    std::mt19937_64& rng() { return rng_; }

private:
    struct Shape {
        int channels = 0, size = 0;
        bool flat = false;
    };

    std::string push(LayerNode node, Shape shape);
    Tensor random_tensor(std::vector<std::int64_t> dims, float lo, float hi);

    InputSpec input_;
    std::mt19937_64 rng_;
    std::vector<LayerNode> nodes_;
    std::unordered_map<std::string, Shape> shapes_;
};

/// 13 conv (BN, ReLU) + 1 classifier, CIFAR-10 input.
ModelGraph vgg16_cifar(std::uint64_t seed = 1);
/// Depth 40, growth 12, three dense blocks.
ModelGraph densenet40(std::uint64_t seed = 1);
/// Pre-activation bottleneck ResNet for CIFAR; depth = 9n + 2.
ModelGraph resnet_bottleneck(int depth = 56, std::uint64_t seed = 1);

/// Input(3, 8) -> Conv2d(3 -> 4, K=3, pad 1) -> Output.
ModelGraph minimal_model(std::uint64_t seed = 1);
/// Conv(3->4) -> ReLU -> Conv(4->6) -> ReLU -> GAP -> Flatten -> Linear.
ModelGraph tiny_chain(std::uint64_t seed = 1);
/// Stem of width 8 followed by two identity bottleneck blocks.
ModelGraph tiny_bottleneck_stage(std::uint64_t seed = 1);
/// Stem of width 4 and a 3-layer dense block with growth 4.
ModelGraph tiny_dense_block(std::uint64_t seed = 1);
/// Conv -> ReLU -> Flatten (4x4 area) -> Linear.
ModelGraph tiny_conv_flatten_fc(std::uint64_t seed = 1);

/// Random plain chain: at most `max_weighted` weighted layers, at most
/// `max_channels` per layer, input side at most 8. Ends in
/// GAP -> Flatten -> Linear or Flatten -> Linear.
ModelGraph random_tiny_net(std::uint64_t seed, int max_weighted = 4, int max_channels = 8);

}  // namespace prunekit
