// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/error.hpp"
#include "prunekit/model_ir.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace prunekit {

using nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;

void append_le(std::vector<std::uint8_t>& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

float read_le(const std::uint8_t* p) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t(p[b]) << (8 * b);
    return std::bit_cast<float>(bits);
}

ordered_json attrs_json(const LayerNode& n) {
    ordered_json a = ordered_json::object();
    switch (n.kind) {
    case NodeKind::Conv2d:
        a["in_channels"] = n.in_channels;
        a["out_channels"] = n.out_channels;
        a["kernel"] = n.kernel;
        a["stride"] = n.stride;
        a["padding"] = n.padding;
        break;
    case NodeKind::Linear:
        a["in_features"] = n.in_channels;
        a["out_features"] = n.out_channels;
        break;
    case NodeKind::BatchNorm2d:
        a["channels"] = n.channels;
        a["epsilon"] = n.epsilon;
        break;
    case NodeKind::Pool:
        a["kind"] = to_string(n.pool);
        if (n.pool != PoolKind::GlobalAvg) {
            a["kernel"] = n.kernel;
            a["stride"] = n.stride;
        }
        break;
    case NodeKind::ChannelSelect:
        a["indices"] = n.indices;
        break;
    default:
        break;
    }
    return a;
}

[[noreturn]] void malformed(const std::string& what) { throw ValidationError("malformed manifest: " + what); }

const ordered_json& require(const ordered_json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) malformed(where + " is missing '" + key + "'");
    return obj.at(key);
}

int require_int(const ordered_json& obj, const char* key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_number_integer()) malformed(where + "." + key + " must be an integer");
    return v.get<int>();
}

int optional_int(const ordered_json& obj, const char* key, int fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    return require_int(obj, key, where);
}

void parse_attrs(LayerNode& n, const ordered_json& a) {
    const std::string where = "node '" + n.id + "' attrs";
    switch (n.kind) {
    case NodeKind::Conv2d:
        n.in_channels = require_int(a, "in_channels", where);
        n.out_channels = require_int(a, "out_channels", where);
        n.kernel = require_int(a, "kernel", where);
        n.stride = optional_int(a, "stride", 1, where);
        n.padding = optional_int(a, "padding", 0, where);
        break;
    case NodeKind::Linear:
        n.in_channels = require_int(a, "in_features", where);
        n.out_channels = require_int(a, "out_features", where);
        break;
    case NodeKind::BatchNorm2d:
        n.channels = require_int(a, "channels", where);
        if (a.contains("epsilon")) {
            if (!a["epsilon"].is_number()) malformed(where + ".epsilon must be a number");
            n.epsilon = a["epsilon"].get<double>();
        }
        break;
    case NodeKind::Pool: {
        const auto& k = require(a, "kind", where);
        auto pk = k.is_string() ? parse_pool_kind(k.get<std::string>()) : std::nullopt;
        if (!pk) malformed(where + ".kind must be one of max|avg|global-avg");
        n.pool = *pk;
        if (n.pool != PoolKind::GlobalAvg) {
            n.kernel = require_int(a, "kernel", where);
            n.stride = optional_int(a, "stride", n.kernel, where);
        }
        break;
    }
    case NodeKind::ChannelSelect: {
        const auto& idx = require(a, "indices", where);
        if (!idx.is_array()) malformed(where + ".indices must be an array");
        for (const auto& v : idx) {
            if (!v.is_number_integer()) malformed(where + ".indices must hold integers");
            n.indices.push_back(v.get<int>());
        }
        break;
    }
    default:
        break;
    }
}

struct Region {
    std::uint64_t begin, end;
    std::string owner;
};

}  // namespace

SerializedModel serialize(const ModelGraph& graph, std::string_view weights_file_name) {
    SerializedModel out;
    ordered_json m;
    m["version"] = kManifestVersion;
    m["input"] = {{"channels", graph.input().channels}, {"size", graph.input().size}};
    ordered_json nodes = ordered_json::array();
    for (const auto& n : graph.nodes()) {
        ordered_json j;
        j["id"] = n.id;
        j["kind"] = to_string(n.kind);
        j["inputs"] = n.inputs;
        j["attrs"] = attrs_json(n);
        ordered_json tensors = ordered_json::object();
        for (auto [name, t] : n.tensors()) {
            tensors[std::string(name)] = {{"offset", out.weights.size()}, {"shape", t->shape}};
            for (float v : t->data) append_le(out.weights, v);
        }
        if (!tensors.empty()) j["tensors"] = std::move(tensors);
        nodes.push_back(std::move(j));
    }
    m["nodes"] = std::move(nodes);
    m["weights_file"] = weights_file_name;
    m["total_bytes"] = out.weights.size();
    out.manifest = m.dump(2) + "\n";
    return out;
}

ModelGraph deserialize(std::string_view manifest, std::span<const std::uint8_t> weights) {
    ordered_json m;
    try {
        m = ordered_json::parse(manifest);
    } catch (const ordered_json::parse_error& e) {
        malformed(e.what());
    }
    if (!m.is_object()) malformed("top level must be an object");
    if (require_int(m, "version", "manifest") != kManifestVersion) malformed("unsupported version");

    const auto& input = require(m, "input", "manifest");
    InputSpec spec;
    spec.channels = require_int(input, "channels", "input");
    const auto& size = require(input, "size", "input");
    if (size.is_array()) {
        if (size.size() != 2 || !size[0].is_number_integer() || !size[1].is_number_integer())
            malformed("input.size must be an integer or [h, w]");
        if (size[0] != size[1]) throw ValidationError("non-square input " + size.dump() + " is not supported");
        spec.size = size[0].get<int>();
    } else if (size.is_number_integer()) {
        spec.size = size.get<int>();
    } else {
        malformed("input.size must be an integer");
    }

    const auto& total = require(m, "total_bytes", "manifest");
    if (!total.is_number_unsigned() && !total.is_number_integer()) malformed("total_bytes must be an integer");
    if (total.get<std::int64_t>() < 0) malformed("total_bytes must be non-negative");
    const auto region_end = std::min<std::uint64_t>(total.get<std::uint64_t>(), weights.size());
    if (total.get<std::uint64_t>() > weights.size())
        throw ValidationError("weights container is shorter than declared total_bytes");

    const auto& nodes_json = require(m, "nodes", "manifest");
    if (!nodes_json.is_array()) malformed("nodes must be an array");
    std::vector<LayerNode> nodes;
    std::vector<Region> regions;
    for (const auto& j : nodes_json) {
        LayerNode n;
        const auto& id = require(j, "id", "node");
        if (!id.is_string()) malformed("node id must be a string");
        n.id = id.get<std::string>();
        const std::string where = "node '" + n.id + "'";
        const auto& kind = require(j, "kind", where);
        auto k = kind.is_string() ? parse_node_kind(kind.get<std::string>()) : std::nullopt;
        if (!k) malformed(where + " has unknown kind " + kind.dump());
        n.kind = *k;
        const auto& inputs = require(j, "inputs", where);
        if (!inputs.is_array()) malformed(where + ".inputs must be an array");
        for (const auto& in : inputs) {
            if (!in.is_string()) malformed(where + ".inputs must hold strings");
            n.inputs.push_back(in.get<std::string>());
        }
        parse_attrs(n, j.contains("attrs") ? j["attrs"] : ordered_json::object());

        if (j.contains("tensors")) {
            const auto& tensors = j["tensors"];
            if (!tensors.is_object()) malformed(where + ".tensors must be an object");
            auto slots = n.tensors();
            // bias is optional and not listed by tensors() until present
            if (n.is_weighted() && tensors.contains("bias")) {
                n.bias = Tensor{};
                slots = n.tensors();
            }
            for (const auto& [name, entry] : tensors.items()) {
                auto slot = std::find_if(slots.begin(), slots.end(), [&](auto& s) { return s.first == name; });
                if (slot == slots.end()) throw ValidationError(where + " references unknown tensor '" + name + "'");
                const auto& off = require(entry, "offset", where + "." + name);
                const auto& shape = require(entry, "shape", where + "." + name);
                if (!off.is_number_integer() || off.get<std::int64_t>() < 0)
                    malformed(where + "." + name + ".offset must be a non-negative integer");
                if (!shape.is_array() || shape.empty()) malformed(where + "." + name + ".shape must be a non-empty array");
                Tensor& t = *slot->second;
                for (const auto& d : shape) {
                    if (!d.is_number_integer() || d.get<std::int64_t>() < 1)
                        malformed(where + "." + name + ".shape must hold positive integers");
                    t.shape.push_back(d.get<std::int64_t>());
                }
                const auto begin = off.get<std::uint64_t>();
                const auto bytes = std::uint64_t(t.numel()) * 4;
                if (begin > region_end || bytes > region_end - begin)
                    throw ValidationError("tensor out of bounds: " + where + "." + name);
                t.data.resize(std::size_t(t.numel()));
                for (std::size_t e = 0; e < t.data.size(); ++e) t.data[e] = read_le(weights.data() + begin + 4 * e);
                regions.push_back({begin, begin + bytes, where + "." + name});
            }
        }
        for (auto [name, t] : n.tensors())
            if (t->shape.empty()) throw ValidationError("dangling tensor reference: " + where + " has no '" + std::string(name) + "'");
        nodes.push_back(std::move(n));
    }

    std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) { return a.begin < b.begin; });
    for (std::size_t i = 1; i < regions.size(); ++i)
        if (regions[i].begin < regions[i - 1].end)
            throw ValidationError("overlapping tensor regions: " + regions[i - 1].owner + " and " + regions[i].owner);

    return prepare_graph(spec, std::move(nodes));
}

namespace {

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const void* data, std::size_t n) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out.write(static_cast<const char*>(data), std::streamsize(n));
    if (!out) throw IoError("write failed for '" + p.string() + "'");
}

}  // namespace

ModelGraph load_model(const std::filesystem::path& manifest_path, const std::filesystem::path& weights_path) {
    auto text = read_text(manifest_path);
    auto weights = weights_path;
    if (weights.empty()) {
        ordered_json m;
        try {
            m = ordered_json::parse(text);
        } catch (const ordered_json::parse_error& e) {
            malformed(e.what());
        }
        const auto& wf = require(m, "weights_file", "manifest");
        if (!wf.is_string()) malformed("weights_file must be a string");
        weights = manifest_path.parent_path() / wf.get<std::string>();
    }
    auto blob = read_text(weights);
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size());
    return deserialize(text, bytes);
}

void save_model(const ModelGraph& graph, const std::filesystem::path& manifest_path,
                const std::filesystem::path& weights_path) {
    auto s = serialize(graph, weights_path.filename().string());
    write_bytes(weights_path, s.weights.data(), s.weights.size());
    write_bytes(manifest_path, s.manifest.data(), s.manifest.size());
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Io, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

std::string graph_checksum(const ModelGraph& graph) {
    auto s = serialize(graph, "");
    std::vector<std::uint8_t> all(s.manifest.begin(), s.manifest.end());
    all.insert(all.end(), s.weights.begin(), s.weights.end());
    return sha256_hex(all);
}

}  // namespace prunekit
