// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "helpers.hpp"
#include "oracles.hpp"
#include "prunekit/cost_model.hpp"
#include "prunekit/planner.hpp"
#include "prunekit/random.hpp"
#include "prunekit/zoo.hpp"

#include <algorithm>

using namespace prunekit;

namespace {

ImportanceRecord rec(std::string id, double imp, std::int64_t P, std::int64_t F) {
    ImportanceRecord r;
    r.unit_id = std::move(id);
    r.Imp = imp;
    r.P = P;
    r.F = F;
    return r;
}

std::vector<std::string> ids(const PruningPlan& p) {
    std::vector<std::string> out;
    for (const auto& r : p.removed) out.push_back(r.unit_id);
    return out;
}

// The plan, or the best plan carried by InfeasibleBudget.
PruningPlan plan_or_best(const ModelGraph& g, const Config& c, bool* feasible = nullptr) {
    try {
        auto p = plan_pruning(g, c);
        if (feasible) *feasible = true;
        return p;
    } catch (const InfeasibleBudget& e) {
        if (feasible) *feasible = false;
        return e.best();
    }
}

}  // namespace

TEST_CASE("ranking order") {
    const std::vector<ImportanceRecord> v{rec("a", 0.3, 1, 1), rec("b", 0.1, 1, 1), rec("c", 0.2, 1, 1)};
    const auto r = rank_global(v);
    CHECK(r[0].unit_id == "b");
    CHECK(r[1].unit_id == "c");
    CHECK(r[2].unit_id == "a");

    // equal Imp: larger F first, then larger P, then id
    const std::vector<ImportanceRecord> t{rec("z", 0.5, 10, 100), rec("y", 0.5, 10, 200), rec("x", 0.5, 20, 100),
                                          rec("w", 0.5, 10, 100)};
    const auto s = rank_global(t);
    CHECK(s[0].unit_id == "y");
    CHECK(s[1].unit_id == "x");
    CHECK(s[2].unit_id == "w");
    CHECK(s[3].unit_id == "z");
}

TEST_CASE("ranking agrees with an insertion sort on 1000 records with ties") {
    std::mt19937_64 rng(99);
    std::vector<ImportanceRecord> v;
    std::vector<oracle::Ranked> naive;
    for (int k = 0; k < 1000; ++k) {
        // coarse values force plenty of ties at every level
        const double imp = double(uniform_int(rng, 0, 20)) / 8.0;
        const auto P = uniform_int(rng, 1, 4), F = uniform_int(rng, 1, 4);
        v.push_back(rec("u" + std::to_string(uniform_int(rng, 0, 1 << 20)) + "_" + std::to_string(k), imp, P, F));
        naive.push_back({v.back().unit_id, imp, P, F});
    }
    const auto got = rank_global(v);
    const auto want = oracle::naive_rank(naive);
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k].unit_id == want[k].id);
}

TEST_CASE("selection equals the exhaustive prefix-closed optimum on small nets") {
    std::mt19937_64 rng(2024);
    int compared = 0, infeasible = 0;
    for (std::uint64_t seed = 1; seed <= 80; ++seed) {
        const auto g = random_tiny_net(seed, 3, 6);
        const auto a = analyze_coupling(g);
        if (a.units().size() > 12) continue;
        Config c;
        c.flop_target_ratio = uniform(rng, 0.05, 0.9);
        c.min_channels_per_layer = uniform_int(rng, 1, 2);
        c.alpha = uniform(rng, 0, 3);
        c.beta = uniform(rng, 0, 3);
        const auto records = score_all(g, a.units(), c);
        const auto net = oracle::Net::from(g);
        const auto expected = oracle::score_chain(net, c.alpha, c.beta, oracle::Norm::MaxMin, true, false);
        std::vector<oracle::Ranked> in;
        for (const auto& r : records) in.push_back({r.unit_id, r.Imp, r.P, r.F});
        const auto ranked = oracle::naive_rank(in);
        std::vector<int> layer_of;
        for (const auto& r : ranked)
            for (const auto& e : expected)
                if (e.id == r.id) layer_of.push_back(e.layer_index);
        REQUIRE(layer_of.size() == ranked.size());
        bool oracle_ok = false, ok = false;
        const auto want = oracle::exhaustive_plan(net, ranked, layer_of, c.flop_target_ratio, c.min_channels_per_layer,
                                                  true, &oracle_ok);
        const auto plan = plan_or_best(g, c, &ok);
        CHECK(ok == oracle_ok);
        if (ok) CHECK(ids(plan) == want);
        ++compared;
        infeasible += !ok;
    }
    CHECK(compared >= 50);
    MESSAGE("compared ", compared, " nets, ", infeasible, " infeasible");
}

TEST_CASE("larger targets extend the removed prefix") {
    const auto g = tiny_bottleneck_stage();
    Config c;
    std::vector<std::string> prev;
    for (double r : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
        c.flop_target_ratio = r;
        const auto p = plan_or_best(g, c);
        const auto now = ids(p);
        CHECK(now.size() >= prev.size());
        CHECK(std::equal(prev.begin(), prev.end(), now.begin()));
        CHECK(p.frr >= r - 1e-12);
        prev = now;
    }
}

TEST_CASE("plans are minimal: undoing the last removal misses the budget") {
    for (const auto& g : {tiny_chain(), tiny_dense_block(), tiny_bottleneck_stage(), vgg16_cifar()}) {
        Config c;
        c.flop_target_ratio = 0.4;
        const auto p = plan_pruning(g, c);
        REQUIRE(!p.removed.empty());
        const auto a = analyze_coupling(g);
        WidthModel w(g, a, c);
        for (std::size_t k = 0; k + 1 < p.removed.size(); ++k) w.remove(*a.find_unit(p.removed[k].unit_id));
        CHECK(double(w.flops()) > 0.6 * double(p.baseline_flops));
        w.remove(*a.find_unit(p.removed.back().unit_id));
        CHECK(w.flops() == p.predicted_flops);
        CHECK(p.threshold == p.removed.back().imp);
        // ascending importance
        for (std::size_t k = 1; k < p.removed.size(); ++k) CHECK(p.removed[k - 1].imp <= p.removed[k].imp);
    }
}

TEST_CASE("floors hold for every layer") {
    for (int floor : {1, 2, 3}) {
        for (const auto& g : {tiny_chain(), tiny_dense_block(), tiny_bottleneck_stage()}) {
            Config c;
            c.flop_target_ratio = 0.95;
            c.min_channels_per_layer = floor;
            const auto p = plan_or_best(g, c);
            for (const auto& lw : p.layer_widths) {
                CHECK(lw.in_after >= std::min(floor, lw.in_before));
                CHECK(lw.out_after >= std::min(floor, lw.out_before));
            }
            // the classifier keeps every output
            const auto fc = std::find_if(p.layer_widths.begin(), p.layer_widths.end(),
                                         [](const LayerWidth& l) { return l.layer == "fc"; });
            REQUIRE(fc != p.layer_widths.end());
            CHECK(fc->out_after == fc->out_before);
        }
    }
}

TEST_CASE("infeasible budgets report the best plan") {
    const auto g = vgg16_cifar();
    Config c;
    c.flop_target_ratio = 0.999;
    c.min_channels_per_layer = 8;
    try {
        plan_pruning(g, c);
        FAIL("expected InfeasibleBudget");
    } catch (const InfeasibleBudget& e) {
        CHECK(e.kind() == ErrorKind::Infeasible);
        CHECK(e.best().frr < 0.999);
        CHECK(e.best().frr > 0.9);
        for (const auto& lw : e.best().layer_widths)
            if (lw.layer != "fc") CHECK(lw.out_after == 8);
    }
    // the same target is reachable with the default floor
    c.min_channels_per_layer = 1;
    CHECK(plan_pruning(g, c).frr >= 0.999);
}

TEST_CASE("parameter target is honoured alongside the FLOP target") {
    const auto g = tiny_bottleneck_stage();
    Config c;
    c.flop_target_ratio = 0.1;
    c.param_target_ratio = 0.5;
    const auto p = plan_pruning(g, c);
    CHECK(p.prr >= 0.5);
    CHECK(p.frr >= 0.1);
}

TEST_CASE("planning is deterministic and serializes losslessly") {
    const auto g = vgg16_cifar();
    Config c;
    apply_preset(c, "vggnet");
    c.flop_target_ratio = 0.66;
    const auto p1 = plan_pruning(g, c);
    const auto p2 = plan_pruning(vgg16_cifar(), c);
    const auto text = plan_to_json(p1);
    CHECK(text == plan_to_json(p2));
    CHECK(plan_to_json(plan_from_json(text)) == text);
    CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));

    // frozen for the seeded fixture
    CHECK(p1.removed.size() == 2563);
    CHECK(p1.predicted_flops == 106663610);
    CHECK(p1.predicted_params == 1537671);
    CHECK(p1.frr >= 0.66);
}

TEST_CASE("2macs scales every FLOP figure by two") {
    const auto g = tiny_dense_block();
    Config a, b;
    b.flops_convention = FlopsConvention::TwoMacs;
    const auto pa = plan_pruning(g, a);
    CHECK(plan_pruning(g, b).baseline_flops == 2 * pa.baseline_flops);
    const auto an = analyze_coupling(g);
    WidthModel w(g, an, b);
    for (const auto& r : pa.removed) w.remove(*an.find_unit(r.unit_id));
    CHECK(w.flops() == 2 * pa.predicted_flops);
    CHECK(w.params() == pa.predicted_params);
}
