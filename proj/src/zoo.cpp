// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/zoo.hpp"

#include "prunekit/error.hpp"
#include "prunekit/random.hpp"

#include <cmath>

namespace prunekit {

NetBuilder::NetBuilder(InputSpec input, std::uint64_t seed) : input_(input), rng_(seed) {
    LayerNode in;
    in.id = kInput;
    in.kind = NodeKind::Input;
    push(std::move(in), {input.channels, input.size, false});
}

std::string NetBuilder::push(LayerNode node, Shape shape) {
    if (shapes_.count(node.id)) throw ValidationError("duplicate builder id '" + node.id + "'");
    for (const auto& i : node.inputs)
        if (!shapes_.count(i)) throw ValidationError("builder input '" + i + "' not defined");
    std::string id = node.id;
    shapes_.emplace(id, shape);
    nodes_.push_back(std::move(node));
    return id;
}

Tensor NetBuilder::random_tensor(std::vector<std::int64_t> dims, float lo, float hi) {
    Tensor t = Tensor::zeros(std::move(dims));
    for (auto& v : t.data) v = uniform(rng_, lo, hi);
    return t;
}

std::string NetBuilder::conv(const std::string& id, const std::string& from, int out, int kernel, int stride,
                             int padding, bool bias) {
    const Shape in = shapes_.at(from);
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::Conv2d;
    n.inputs = {from};
    n.in_channels = in.channels;
    n.out_channels = out;
    n.kernel = kernel;
    n.stride = stride;
    n.padding = padding < 0 ? kernel / 2 : padding;
    const float bound = 1.0f / std::sqrt(float(in.channels * kernel * kernel));
    n.weight = random_tensor({out, in.channels, kernel, kernel}, -bound, bound);
    if (bias) n.bias = random_tensor({out}, -bound, bound);
    const int size = (in.size + 2 * n.padding - kernel) / stride + 1;
    return push(std::move(n), {out, size, false});
}

std::string NetBuilder::linear(const std::string& id, const std::string& from, int out, bool bias) {
    const Shape in = shapes_.at(from);
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::Linear;
    n.inputs = {from};
    n.in_channels = in.channels;
    n.out_channels = out;
    const float bound = 1.0f / std::sqrt(float(in.channels));
    n.weight = random_tensor({out, in.channels}, -bound, bound);
    if (bias) n.bias = random_tensor({out}, -bound, bound);
    return push(std::move(n), {out, 1, true});
}

std::string NetBuilder::bn(const std::string& id, const std::string& from) {
    const Shape in = shapes_.at(from);
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::BatchNorm2d;
    n.inputs = {from};
    n.channels = in.channels;
    n.gamma = random_tensor({in.channels}, 0.5f, 1.5f);
    n.beta = random_tensor({in.channels}, -0.2f, 0.2f);
    n.running_mean = random_tensor({in.channels}, -0.1f, 0.1f);
    n.running_var = random_tensor({in.channels}, 0.5f, 1.5f);
    return push(std::move(n), in);
}

std::string NetBuilder::relu(const std::string& id, const std::string& from) {
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::ReLU;
    n.inputs = {from};
    return push(std::move(n), shapes_.at(from));
}

std::string NetBuilder::max_pool(const std::string& id, const std::string& from, int kernel, int stride) {
    Shape s = shapes_.at(from);
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::Pool;
    n.pool = PoolKind::Max;
    n.inputs = {from};
    n.kernel = kernel;
    n.stride = stride;
    s.size = (s.size - kernel) / stride + 1;
    return push(std::move(n), s);
}

std::string NetBuilder::avg_pool(const std::string& id, const std::string& from, int kernel, int stride) {
    Shape s = shapes_.at(from);
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::Pool;
    n.pool = PoolKind::Avg;
    n.inputs = {from};
    n.kernel = kernel;
    n.stride = stride;
    s.size = (s.size - kernel) / stride + 1;
    return push(std::move(n), s);
}

std::string NetBuilder::global_avg_pool(const std::string& id, const std::string& from) {
    Shape s = shapes_.at(from);
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::Pool;
    n.pool = PoolKind::GlobalAvg;
    n.inputs = {from};
    s.size = 1;
    return push(std::move(n), s);
}

std::string NetBuilder::flatten(const std::string& id, const std::string& from) {
    const Shape s = shapes_.at(from);
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::Flatten;
    n.inputs = {from};
    return push(std::move(n), {s.channels * s.size * s.size, 1, true});
}

std::string NetBuilder::add(const std::string& id, std::vector<std::string> from) {
    const Shape s = shapes_.at(from.at(0));
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::Add;
    n.inputs = std::move(from);
    return push(std::move(n), s);
}

std::string NetBuilder::concat(const std::string& id, std::vector<std::string> from) {
    Shape s = shapes_.at(from.at(0));
    s.channels = 0;
    for (const auto& f : from) s.channels += shapes_.at(f).channels;
    LayerNode n;
    n.id = id;
    n.kind = NodeKind::Concat;
    n.inputs = std::move(from);
    return push(std::move(n), s);
}

ModelGraph NetBuilder::build(const std::string& from) {
    LayerNode out;
    out.id = "output";
    out.kind = NodeKind::Output;
    out.inputs = {from};
    push(std::move(out), shapes_.at(from));
    return prepare_graph(input_, std::move(nodes_));
}

ModelGraph vgg16_cifar(std::uint64_t seed) {
    NetBuilder b({3, 32}, seed);
    const int widths[5][3] = {{64, 64, 0}, {128, 128, 0}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
    std::string x = NetBuilder::kInput;
    for (int blk = 0; blk < 5; ++blk) {
        for (int k = 0; k < 3 && widths[blk][k]; ++k) {
            const std::string name = "conv" + std::to_string(blk + 1) + "_" + std::to_string(k + 1);
            x = b.conv(name, x, widths[blk][k], 3);
            x = b.bn(name + ".bn", x);
            x = b.relu(name + ".relu", x);
        }
        const std::string pool = "pool" + std::to_string(blk + 1);
        x = blk < 4 ? b.max_pool(pool, x, 2, 2) : b.avg_pool(pool, x, 2, 2);
    }
    x = b.flatten("flatten", x);
    x = b.linear("fc", x, 10);
    return b.build(x);
}

ModelGraph densenet40(std::uint64_t seed) {
    constexpr int kGrowth = 12, kLayers = 12;
    NetBuilder b({3, 32}, seed);
    std::string x = b.conv("conv0", NetBuilder::kInput, 2 * kGrowth, 3);
    int channels = 2 * kGrowth;
    for (int blk = 1; blk <= 3; ++blk) {
        for (int l = 1; l <= kLayers; ++l) {
            const std::string p = "block" + std::to_string(blk) + ".layer" + std::to_string(l);
            std::string y = b.bn(p + ".bn", x);
            y = b.relu(p + ".relu", y);
            y = b.conv(p + ".conv", y, kGrowth, 3);
            x = b.concat(p + ".cat", {x, y});
            channels += kGrowth;
        }
        const std::string t = blk < 3 ? "trans" + std::to_string(blk) : "final";
        x = b.bn(t + ".bn", x);
        x = b.relu(t + ".relu", x);
        if (blk < 3) {
            x = b.conv(t + ".conv", x, channels, 1);
            x = b.avg_pool(t + ".pool", x, 2, 2);
        }
    }
    x = b.global_avg_pool("gap", x);
    x = b.flatten("flatten", x);
    x = b.linear("fc", x, 10);
    return b.build(x);
}

ModelGraph resnet_bottleneck(int depth, std::uint64_t seed) {
    if (depth < 11 || (depth - 2) % 9 != 0) throw ValidationError("bottleneck depth must be 9n + 2");
    const int blocks = (depth - 2) / 9;
    constexpr int kExpansion = 4;
    NetBuilder b({3, 32}, seed);
    std::string x = b.conv("conv1", NetBuilder::kInput, 16, 3);
    int in = 16;
    const int planes[3] = {16, 32, 64};
    for (int s = 0; s < 3; ++s) {
        for (int k = 0; k < blocks; ++k) {
            const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(k);
            const int stride = (s > 0 && k == 0) ? 2 : 1;
            const int width = planes[s] * kExpansion;
            std::string y = b.bn(p + ".bn1", x);
            y = b.relu(p + ".relu1", y);
            y = b.conv(p + ".conv1", y, planes[s], 1);
            y = b.bn(p + ".bn2", y);
            y = b.relu(p + ".relu2", y);
            y = b.conv(p + ".conv2", y, planes[s], 3, stride);
            y = b.bn(p + ".bn3", y);
            y = b.relu(p + ".relu3", y);
            y = b.conv(p + ".conv3", y, width, 1);
            std::string shortcut = x;
            if (stride != 1 || in != width) shortcut = b.conv(p + ".downsample", x, width, 1, stride);
            x = b.add(p + ".add", {shortcut, y});
            in = width;
        }
    }
    x = b.bn("bn_final", x);
    x = b.relu("relu_final", x);
    x = b.global_avg_pool("gap", x);
    x = b.flatten("flatten", x);
    x = b.linear("fc", x, 10);
    return b.build(x);
}

ModelGraph minimal_model(std::uint64_t seed) {
    NetBuilder b({3, 8}, seed);
    return b.build(b.conv("conv", NetBuilder::kInput, 4, 3, 1, 1));
}

ModelGraph tiny_chain(std::uint64_t seed) {
    NetBuilder b({3, 6}, seed);
    std::string x = b.conv("conv1", NetBuilder::kInput, 4, 3);
    x = b.relu("relu1", x);
    x = b.conv("conv2", x, 6, 3);
    x = b.relu("relu2", x);
    x = b.global_avg_pool("gap", x);
    x = b.flatten("flatten", x);
    return b.build(b.linear("fc", x, 3));
}

ModelGraph tiny_bottleneck_stage(std::uint64_t seed) {
    NetBuilder b({3, 6}, seed);
    std::string x = b.conv("stem", NetBuilder::kInput, 8, 3);
    for (int k = 1; k <= 2; ++k) {
        const std::string p = "block" + std::to_string(k);
        std::string y = b.bn(p + ".bn1", x);
        y = b.relu(p + ".relu1", y);
        y = b.conv(p + ".conv1", y, 4, 1);
        y = b.bn(p + ".bn2", y);
        y = b.relu(p + ".relu2", y);
        y = b.conv(p + ".conv2", y, 4, 3);
        y = b.bn(p + ".bn3", y);
        y = b.relu(p + ".relu3", y);
        y = b.conv(p + ".conv3", y, 8, 1);
        x = b.add(p + ".add", {x, y});
    }
    x = b.bn("bn_final", x);
    x = b.relu("relu_final", x);
    x = b.global_avg_pool("gap", x);
    x = b.flatten("flatten", x);
    return b.build(b.linear("fc", x, 3));
}

ModelGraph tiny_dense_block(std::uint64_t seed) {
    NetBuilder b({3, 5}, seed);
    std::string x = b.conv("stem", NetBuilder::kInput, 4, 3);
    for (int l = 1; l <= 3; ++l) {
        const std::string p = "layer" + std::to_string(l);
        std::string y = b.bn(p + ".bn", x);
        y = b.relu(p + ".relu", y);
        y = b.conv(p + ".conv", y, 4, 3);
        x = b.concat(p + ".cat", {x, y});
    }
    x = b.bn("final.bn", x);
    x = b.relu("final.relu", x);
    x = b.global_avg_pool("gap", x);
    x = b.flatten("flatten", x);
    return b.build(b.linear("fc", x, 3));
}

ModelGraph tiny_conv_flatten_fc(std::uint64_t seed) {
    NetBuilder b({2, 4}, seed);
    std::string x = b.conv("conv", NetBuilder::kInput, 4, 3, 1, 1, true);
    x = b.relu("relu", x);
    x = b.flatten("flatten", x);
    return b.build(b.linear("fc", x, 5));
}

ModelGraph random_tiny_net(std::uint64_t seed, int max_weighted, int max_channels) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    const int size = uniform_int(rng, 3, 8);
    NetBuilder b({uniform_int(rng, 1, 3), size}, seed);
    int spatial = size;
    const int convs = uniform_int(rng, 1, std::max(1, max_weighted - 1));
    std::string x = NetBuilder::kInput;
    for (int l = 1; l <= convs; ++l) {
        const std::string p = "conv" + std::to_string(l);
        const int k = spatial >= 3 && uniform_int(rng, 0, 1) ? 3 : 1;
        x = b.conv(p, x, uniform_int(rng, 2, max_channels), k, 1, -1, uniform_int(rng, 0, 1) == 1);
        if (uniform_int(rng, 0, 2) == 0) x = b.bn(p + ".bn", x);
        if (uniform_int(rng, 0, 1)) x = b.relu(p + ".relu", x);
        if (spatial >= 4 && uniform_int(rng, 0, 3) == 0) {
            x = b.max_pool(p + ".pool", x, 2, 2);
            spatial /= 2;
        }
    }
    if (uniform_int(rng, 0, 1)) x = b.global_avg_pool("gap", x);
    x = b.flatten("flatten", x);
    return b.build(b.linear("fc", x, uniform_int(rng, 2, max_channels)));
}

}  // namespace prunekit
