// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/error.hpp"
#include "prunekit/model_ir.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace prunekit {

namespace {

Tensor conv2d(const LayerNode& n, const Tensor& x) {
    const int M = n.in_channels, N = n.out_channels, K = n.kernel;
    const int I = int(x.shape[1]), O = n.out_shape.size;
    Tensor y = Tensor::zeros({N, O, O});
    for (int oc = 0; oc < N; ++oc) {
        const float b = n.bias ? n.bias->data[oc] : 0.0f;
        for (int oy = 0; oy < O; ++oy) {
            for (int ox = 0; ox < O; ++ox) {
                float acc = b;
                for (int ic = 0; ic < M; ++ic) {
                    for (int ky = 0; ky < K; ++ky) {
                        const int iy = oy * n.stride - n.padding + ky;
                        if (iy < 0 || iy >= I) continue;
                        for (int kx = 0; kx < K; ++kx) {
                            const int ix = ox * n.stride - n.padding + kx;
                            if (ix < 0 || ix >= I) continue;
                            acc += n.weight.data[((std::size_t(oc) * M + ic) * K + ky) * K + kx] *
                                   x.data[(std::size_t(ic) * I + iy) * I + ix];
                        }
                    }
                }
                y.data[(std::size_t(oc) * O + oy) * O + ox] = acc;
            }
        }
    }
    return y;
}

Tensor linear(const LayerNode& n, const Tensor& x) {
    Tensor y = Tensor::zeros({n.out_channels});
    for (int o = 0; o < n.out_channels; ++o) {
        float acc = n.bias ? n.bias->data[o] : 0.0f;
        for (int i = 0; i < n.in_channels; ++i) acc += n.weight.data[std::size_t(o) * n.in_channels + i] * x.data[i];
        y.data[o] = acc;
    }
    return y;
}

Tensor batch_norm(const LayerNode& n, const Tensor& x) {
    Tensor y = x;
    const std::size_t area = x.data.size() / n.channels;
    for (int c = 0; c < n.channels; ++c) {
        const float scale = n.gamma.data[c] / std::sqrt(n.running_var.data[c] + float(n.epsilon));
        for (std::size_t e = 0; e < area; ++e) {
            float& v = y.data[c * area + e];
            v = (v - n.running_mean.data[c]) * scale + n.beta.data[c];
        }
    }
    return y;
}

Tensor pool(const LayerNode& n, const Tensor& x) {
    const int C = int(x.shape[0]), I = int(x.shape[1]);
    if (n.pool == PoolKind::GlobalAvg) {
        Tensor y = Tensor::zeros({C, 1, 1});
        for (int c = 0; c < C; ++c) {
            float acc = 0.0f;
            for (int e = 0; e < I * I; ++e) acc += x.data[std::size_t(c) * I * I + e];
            y.data[c] = acc / float(I * I);
        }
        return y;
    }
    const int K = n.kernel, O = n.out_shape.size;
    Tensor y = Tensor::zeros({C, O, O});
    for (int c = 0; c < C; ++c) {
        for (int oy = 0; oy < O; ++oy) {
            for (int ox = 0; ox < O; ++ox) {
                float acc = n.pool == PoolKind::Max ? -std::numeric_limits<float>::infinity() : 0.0f;
                for (int ky = 0; ky < K; ++ky) {
                    for (int kx = 0; kx < K; ++kx) {
                        float v = x.data[(std::size_t(c) * I + oy * n.stride + ky) * I + ox * n.stride + kx];
                        acc = n.pool == PoolKind::Max ? std::max(acc, v) : acc + v;
                    }
                }
                if (n.pool == PoolKind::Avg) acc /= float(K * K);
                y.data[(std::size_t(c) * O + oy) * O + ox] = acc;
            }
        }
    }
    return y;
}

}  // namespace

Tensor forward_eval(const ModelGraph& graph, const Tensor& input) {
    if (!graph.shapes_inferred()) throw ValidationError("forward_eval requires shape-annotated graph");
    const auto& spec = graph.input();
    const std::vector<std::int64_t> expected{spec.channels, spec.size, spec.size};
    if (input.shape != expected || std::int64_t(input.data.size()) != input.numel())
        throw ValidationError("input shape mismatch");

    std::vector<Tensor> values(graph.size());
    std::optional<std::size_t> output;
    for (std::size_t i = 0; i < graph.size(); ++i) {
        const auto& n = graph.at(i);
        const auto& prods = graph.producers(i);
        auto in = [&](std::size_t k) -> const Tensor& { return values[prods[k]]; };
        switch (n.kind) {
        case NodeKind::Input: values[i] = input; break;
        case NodeKind::Conv2d: values[i] = conv2d(n, in(0)); break;
        case NodeKind::Linear: values[i] = linear(n, in(0)); break;
        case NodeKind::BatchNorm2d: values[i] = batch_norm(n, in(0)); break;
        case NodeKind::ReLU: {
            Tensor y = in(0);
            for (auto& v : y.data) v = std::max(v, 0.0f);
            values[i] = std::move(y);
            break;
        }
        case NodeKind::Pool: values[i] = pool(n, in(0)); break;
        case NodeKind::Flatten: {
            Tensor y = in(0);
            y.shape = {y.numel()};
            values[i] = std::move(y);
            break;
        }
        case NodeKind::Add: {
            Tensor y = in(0);
            for (std::size_t k = 1; k < prods.size(); ++k)
                for (std::size_t e = 0; e < y.data.size(); ++e) y.data[e] += in(k).data[e];
            values[i] = std::move(y);
            break;
        }
        case NodeKind::Concat: {
            Tensor y;
            std::int64_t channels = 0;
            for (std::size_t k = 0; k < prods.size(); ++k) {
                channels += in(k).shape[0];
                y.data.insert(y.data.end(), in(k).data.begin(), in(k).data.end());
            }
            y.shape = {channels, in(0).shape[1], in(0).shape[2]};
            values[i] = std::move(y);
            break;
        }
        case NodeKind::ChannelSelect: {
            const Tensor& x = in(0);
            const std::size_t area = std::size_t(x.shape[1] * x.shape[2]);
            Tensor y;
            y.shape = {std::int64_t(n.indices.size()), x.shape[1], x.shape[2]};
            for (int c : n.indices) y.data.insert(y.data.end(), x.data.begin() + c * area, x.data.begin() + (c + 1) * area);
            values[i] = std::move(y);
            break;
        }
        case NodeKind::Output:
            values[i] = in(0);
            output = i;
            break;
        }
        // free intermediate values no longer needed
        for (auto p : prods) {
            const auto& cons = graph.consumers(p);
            if (std::all_of(cons.begin(), cons.end(), [&](auto c) { return c <= i; })) values[p] = {};
        }
    }
    if (!output) throw ValidationError("graph has no Output node");
    return values[*output];
}

}  // namespace prunekit
