// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "helpers.hpp"
#include "oracles.hpp"
#include "prunekit/coupling.hpp"
#include "prunekit/error.hpp"
#include "prunekit/importance.hpp"
#include "prunekit/planner.hpp"
#include "prunekit/zoo.hpp"

#include <cmath>
#include <sstream>

using namespace prunekit;

namespace {

ModelGraph pair_net(std::vector<float> filter, std::vector<float> consumer) {
    NetBuilder b({2, 3}, 1);
    auto x = b.conv("a", NetBuilder::kInput, 1, 1);
    x = b.conv("b", x, 2, 1);
    auto nodes = b.build(x).copy_nodes();
    for (auto& n : nodes) {
        if (n.id == "a") n.weight.data = filter;
        if (n.id == "b") n.weight.data = consumer;
    }
    return prepare_graph({2, 3}, std::move(nodes));
}

oracle::Norm to_oracle(WeightNorm m) {
    return m == WeightNorm::MaxMin ? oracle::Norm::MaxMin : m == WeightNorm::Max ? oracle::Norm::Max : oracle::Norm::Log;
}

ModelGraph scale_layer(const ModelGraph& g, const std::string& layer, const std::string& next, float c) {
    auto nodes = g.copy_nodes();
    for (auto& n : nodes)
        if (n.id == layer || n.id == next)
            for (auto& v : n.weight.data) v *= c;
    return prepare_graph(g.input(), std::move(nodes));
}

}  // namespace

TEST_CASE("dependency L1 examples") {
    const auto zero = pair_net({0.0f, 0.0f}, {0.0f, 0.0f});
    const auto za = analyze_coupling(zero);
    CHECK(dependency_l1(zero, za.units()[0], true) == 0.0);

    const auto g = pair_net({0.5f, -0.5f}, {-0.25f, -0.25f});
    const auto a = analyze_coupling(g);
    const auto& u = a.units()[*a.find_unit("out:a:0")];
    CHECK(dependency_l1(g, u, true) == doctest::Approx(1.5));
    CHECK(dependency_l1(g, u, false) == doctest::Approx(1.0));
}

TEST_CASE("dependency L1 matches the offset-walking oracle") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto g = random_tiny_net(seed, 4, 8);
        const auto net = oracle::Net::from(g);
        const auto a = analyze_coupling(g);
        for (bool in : {true, false}) {
            const auto want = oracle::score_chain(net, 1, 1, oracle::Norm::MaxMin, in, false);
            REQUIRE(want.size() == a.units().size());
            for (const auto& e : want) {
                const auto u = a.find_unit(e.id);
                REQUIRE(u.has_value());
                CHECK(testing::close_rel(dependency_l1(g, a.units()[*u], in), e.L, 1e-6));
            }
        }
    }
}

TEST_CASE("residual groups report the member mean") {
    const auto g = tiny_bottleneck_stage();
    const auto a = analyze_coupling(g);
    const auto& u = a.units()[*a.find_unit("res:stem:0")];
    REQUIRE(u.members.size() == 3);
    double total = 0;
    for (const auto& m : u.members) {
        PruneUnit single;
        single.members = {m};
        total += dependency_l1(g, single, false);
    }
    PruneUnit slices;
    slices.in_slices = u.in_slices;
    total += dependency_l1(g, slices, true);
    CHECK(dependency_l1(g, u, true) == doctest::Approx(total / 3));
    CHECK(group_importance(std::vector<double>{2.0}) == 2.0);
    CHECK(group_importance(std::vector<double>{1.0, 3.0}) == 2.0);
    CHECK(group_importance(std::vector<double>{0, 0, 0}) == 0.0);
    CHECK_THROWS_AS(group_importance(std::vector<double>{}), ValidationError);
}

TEST_CASE("weight normalization") {
    using V = std::vector<double>;
    CHECK(normalize_weight_scores(V{2, 4, 6}, WeightNorm::MaxMin) == V{0, 0.5, 1});
    CHECK(normalize_weight_scores(V{2, 4}, WeightNorm::Max) == V{0.5, 1});
    CHECK(normalize_weight_scores(V{3, 3, 3}, WeightNorm::MaxMin) == V{0.5, 0.5, 0.5});
    const auto lg = normalize_weight_scores(V{0, 1, 3}, WeightNorm::Log);
    CHECK(lg[0] == 0.0);
    CHECK(lg[1] == doctest::Approx(std::log(2.0) / std::log(4.0)));
    CHECK(lg[2] == 1.0);
    CHECK_THROWS_AS(normalize_weight_scores(V{0, 0}, WeightNorm::Max), ValidationError);
    CHECK_THROWS_AS(normalize_weight_scores(V{0, 0}, WeightNorm::Log), ValidationError);
    CHECK_THROWS_AS(normalize_weight_scores(V{}, WeightNorm::MaxMin), ValidationError);
    CHECK_THROWS_AS(normalize_weight_scores(V{-1, 2}, WeightNorm::MaxMin), ValidationError);
}

TEST_CASE("cost normalization") {
    CHECK(normalize_cost_scores(500, 7, 500, 900, 3, 1).GP == 0.0);
    CHECK(normalize_cost_scores(100, 7, 10000, 900, 3, 1).GP == doctest::Approx(1.5));
    CHECK(normalize_cost_scores(100, 1, 10000, 900, 3, 1).GF == 1.0);
    CHECK_THROWS_AS(normalize_cost_scores(1, 1, 1, 9, 1, 1), ValidationError);
    CHECK_THROWS_AS(normalize_cost_scores(1, 1, 9, 1, 1, 1), ValidationError);
}

TEST_CASE("combined importance") {
    CHECK(combined_importance(0, 0, 0) == 0.0);
    CHECK(combined_importance(1, 3, 1) == 5.0);
    CHECK(combined_importance(0.5, 1.5, 0.25) == 2.25);
}

TEST_CASE("score_all matches the composed oracles") {
    std::mt19937_64 rng(5);
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto g = random_tiny_net(seed, 4, 8);
        const auto net = oracle::Net::from(g);
        Config c;
        c.alpha = uniform(rng, 0, 3);
        c.beta = uniform(rng, 0, 3);
        c.weight_norm = WeightNorm(uniform_int(rng, 0, 2));
        c.use_in_channel = uniform_int(rng, 0, 1) == 1;
        c.flops_convention = uniform_int(rng, 0, 1) ? FlopsConvention::TwoMacs : FlopsConvention::Macs;
        const auto a = analyze_coupling(g);
        const auto got = score_all(g, a.units(), c);
        const auto want = oracle::score_chain(net, c.alpha, c.beta, to_oracle(c.weight_norm), c.use_in_channel,
                                              c.flops_convention == FlopsConvention::TwoMacs);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].unit_id == want[k].id);
            CHECK(got[k].P == want[k].P);
            CHECK(got[k].F == want[k].F);
            CHECK(testing::close_rel(got[k].GL, want[k].GL, 1e-6));
            CHECK(testing::close_rel(got[k].GP, want[k].GP, 1e-6));
            CHECK(testing::close_rel(got[k].GF, want[k].GF, 1e-6));
            CHECK(testing::close_rel(got[k].Imp, want[k].Imp, 1e-6));
        }
    }
}

TEST_CASE("with alpha = beta = 0 ranking follows GL alone") {
    const auto g = tiny_chain(4);
    Config c;
    c.alpha = c.beta = 0;
    const auto rec = score_all(g, analyze_coupling(g).units(), c);
    for (const auto& r : rec) CHECK(r.Imp == r.GL);
    const auto ranked = rank_global(rec);
    for (std::size_t k = 1; k < ranked.size(); ++k) CHECK(ranked[k - 1].GL <= ranked[k].GL);
}

TEST_CASE("VGG-16 importances stay within [0, 1 + alpha + beta]") {
    const auto g = vgg16_cifar();
    Config c;
    apply_preset(c, "vggnet");
    const auto rec = score_all(g, analyze_coupling(g).units(), c);
    CHECK(rec.size() == 4224);
    for (const auto& r : rec) {
        CHECK(r.Imp >= 0.0);
        CHECK(r.Imp <= 5.0);
        CHECK(r.Imp == r.GL + r.GP + r.GF);
    }
}

TEST_CASE("max-min GL attains 0 and 1 per layer and ignores per-layer scale") {
    const auto g = tiny_chain(6);
    const Config c;
    const auto base = score_all(g, analyze_coupling(g).units(), c);
    for (const std::string layer : {"conv1", "conv2"}) {
        double lo = 1, hi = 0;
        for (const auto& r : base)
            if (r.layer == layer) lo = std::min(lo, r.GL), hi = std::max(hi, r.GL);
        CHECK(lo == 0.0);
        CHECK(hi == 1.0);
    }
    const auto scaled = scale_layer(g, "conv1", "conv2", 4.0f);
    const auto rec = score_all(scaled, analyze_coupling(scaled).units(), c);
    for (std::size_t k = 0; k < rec.size(); ++k)
        if (rec[k].layer == "conv1") CHECK(rec[k].GL == doctest::Approx(base[k].GL).epsilon(1e-9));
}

TEST_CASE("permuting a layer's channels permutes its records") {
    const auto g = tiny_chain(8);
    auto nodes = g.copy_nodes();
    const std::vector<int> perm{2, 0, 3, 1};
    for (auto& n : nodes) {
        if (n.id == "conv1") {
            const auto row = n.weight.data.size() / 4;
            auto w = n.weight.data;
            for (std::size_t k = 0; k < 4; ++k)
                std::copy_n(w.begin() + std::ptrdiff_t(perm[k] * row), row, n.weight.data.begin() + std::ptrdiff_t(k * row));
        }
        if (n.id == "conv2") {
            auto w = n.weight.data;
            for (int o = 0; o < 6; ++o)
                for (int k = 0; k < 4; ++k)
                    std::copy_n(w.begin() + (o * 4 + perm[std::size_t(k)]) * 9, 9, n.weight.data.begin() + (o * 4 + k) * 9);
        }
    }
    const auto p = prepare_graph(g.input(), std::move(nodes));
    const Config c;
    const auto a = score_all(g, analyze_coupling(g).units(), c);
    const auto b = score_all(p, analyze_coupling(p).units(), c);
    for (int k = 0; k < 4; ++k) CHECK(b[std::size_t(k)].Imp == a[std::size_t(perm[std::size_t(k)])].Imp);
    for (std::size_t k = 4; k < a.size(); ++k) CHECK(b[k].Imp == a[k].Imp);
}

TEST_CASE("out-channel-only mode changes L but not the cost terms") {
    const auto g = tiny_dense_block();
    const auto units = analyze_coupling(g).units();
    Config full, ablate;
    ablate.use_in_channel = false;
    const auto a = score_all(g, units, full);
    const auto b = score_all(g, units, ablate);
    REQUIRE(a.size() == b.size());
    bool any_differs = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].unit_id == b[k].unit_id);
        CHECK(a[k].P == b[k].P);
        CHECK(a[k].F == b[k].F);
        CHECK(a[k].GP == b[k].GP);
        CHECK(a[k].GF == b[k].GF);
        CHECK(a[k].L >= b[k].L);
        any_differs |= a[k].L != b[k].L;
    }
    CHECK(any_differs);
}

TEST_CASE("record export") {
    const auto g = minimal_model();
    const auto rec = score_all(g, analyze_coupling(g).units(), Config{});
    std::ostringstream csv;
    write_records_csv(csv, rec);
    const auto text = csv.str();
    CHECK(text.rfind("unit_id,layer,channel,L,GL,GP,GF,Imp\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    CHECK(records_to_json(rec).find("\"unit_id\": \"out:conv:3\"") != std::string::npos);
}
