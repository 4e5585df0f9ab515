// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "prunekit/model_ir.hpp"
#include "prunekit/random.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline prunekit::Tensor random_input(const prunekit::ModelGraph& g, std::mt19937_64& rng) {
    const auto& in = g.input();
    auto t = prunekit::Tensor::zeros({in.channels, in.size, in.size});
    for (auto& v : t.data) v = prunekit::uniform(rng, -1.0f, 1.0f);
    return t;
}

inline bool close_rel(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

/// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("prunekit_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing
