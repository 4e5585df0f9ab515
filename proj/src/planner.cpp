// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/planner.hpp"

#include "prunekit/cost_model.hpp"

#include "json.hpp"

#include <algorithm>

namespace prunekit {

using nlohmann::ordered_json;

std::vector<ImportanceRecord> rank_global(std::span<const ImportanceRecord> records) {
    std::vector<ImportanceRecord> out(records.begin(), records.end());
    std::sort(out.begin(), out.end(), [](const ImportanceRecord& a, const ImportanceRecord& b) {
        if (a.Imp != b.Imp) return a.Imp < b.Imp;
        if (a.F != b.F) return a.F > b.F;
        if (a.P != b.P) return a.P > b.P;
        return a.unit_id < b.unit_id;
    });
    return out;
}

WidthModel::WidthModel(const ModelGraph& graph, const CouplingAnalysis& analysis, const Config& config)
    : graph_(graph), analysis_(analysis), config_(config) {
    const auto& layouts = analysis.layouts();
    out_features_.resize(graph.size());
    for (std::size_t i = 0; i < graph.size(); ++i)
        out_features_[i] = int(layouts[i].channels.size()) * layouts[i].area;
    select_removed_.assign(graph.size(), 0);
    in_channels_live_.assign(graph.size(), 0);
    for (std::size_t i = 0; i < graph.size(); ++i)
        if (graph.at(i).is_weighted()) in_channels_live_[i] = int(layouts[graph.producers(i)[0]].channels.size());
    for (const auto& f : analysis.families()) family_live_.push_back(f.width);
    removed_.assign(analysis.units().size(), false);
}

bool WidthModel::can_remove(std::size_t u) const {
    if (removed_.at(u)) return false;
    const int floor = config_.min_channels_per_layer;
    if (analysis_.units()[u].kind == UnitKind::InChannelOnly)
        return in_channels_live_[analysis_.unit_consumer(u)] - 1 >= floor;
    const int f = analysis_.unit_family(u);
    if (family_live_[std::size_t(f)] - 1 < floor) return false;
    for (auto [node, pos] : analysis_.occurrences({f, analysis_.unit_channel(u)}))
        for (auto c : graph_.consumers(node))
            if (graph_.at(c).is_weighted() && in_channels_live_[c] - 1 < floor) return false;
    return true;
}

void WidthModel::remove(std::size_t u) {
    if (!can_remove(u)) throw ValidationError("unit '" + analysis_.units()[u].id + "' cannot be removed");
    removed_[u] = true;
    const auto& layouts = analysis_.layouts();
    if (analysis_.units()[u].kind == UnitKind::InChannelOnly) {
        const std::size_t consumer = analysis_.unit_consumer(u);
        const auto& chain = analysis_.exclusive_chain(consumer);
        if (chain.empty()) {
            select_removed_[consumer] += layouts[graph_.producers(consumer)[0]].area;
        } else {
            for (auto n : chain) out_features_[n] -= layouts[n].area;
        }
        --in_channels_live_[consumer];
        return;
    }
    const int f = analysis_.unit_family(u);
    --family_live_[std::size_t(f)];
    for (auto [node, pos] : analysis_.occurrences({f, analysis_.unit_channel(u)})) {
        out_features_[node] -= layouts[node].area;
        for (auto c : graph_.consumers(node))
            if (graph_.at(c).is_weighted()) --in_channels_live_[c];
    }
}

int WidthModel::weighted_in_channels(std::size_t node) const {
    return out_features_[graph_.producers(node)[0]] - select_removed_[node];
}

std::int64_t WidthModel::flops() const {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < graph_.size(); ++i) {
        const auto& n = graph_.at(i);
        const int in = n.is_weighted() ? weighted_in_channels(i) : 0;
        total += node_flops(n, in, out_features_[i], config_.count_aux_flops);
    }
    return apply_convention(total, config_.flops_convention);
}

std::int64_t WidthModel::params() const {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < graph_.size(); ++i) {
        const auto& n = graph_.at(i);
        const int in = n.is_weighted() ? weighted_in_channels(i) : 0;
        total += node_params(n, in, out_features_[i], config_.count_aux_params);
    }
    return total;
}

std::vector<LayerWidth> WidthModel::layer_widths() const {
    std::vector<LayerWidth> out;
    for (std::size_t i = 0; i < graph_.size(); ++i) {
        const auto& n = graph_.at(i);
        if (!n.is_weighted()) continue;
        out.push_back({n.id, n.in_channels, weighted_in_channels(i), n.out_channels, out_features_[i]});
    }
    return out;
}

namespace {

bool budget_met(const WidthModel& w, std::int64_t base_flops, std::int64_t base_params, const Config& c) {
    if (double(w.flops()) > (1.0 - c.flop_target_ratio) * double(base_flops)) return false;
    if (c.param_target_ratio && double(w.params()) > (1.0 - *c.param_target_ratio) * double(base_params)) return false;
    return true;
}

}  // namespace

PruningPlan select_threshold(std::span<const ImportanceRecord> sorted, const ModelGraph& graph,
                             const CouplingAnalysis& analysis, const Config& config) {
    config.validate();
    WidthModel widths(graph, analysis, config);
    PruningPlan plan;
    plan.config = config;
    plan.checksum = graph_checksum(graph);
    plan.baseline_flops = model_flop_count(graph, config.flops_convention, config.count_aux_flops);
    plan.baseline_params = model_param_count(graph, config.count_aux_params);
    if (plan.baseline_flops <= 0) throw ValidationError("model has no countable FLOPs");

    bool met = false;
    for (const auto& r : sorted) {
        if (!widths.can_remove(r.unit)) continue;
        widths.remove(r.unit);
        const auto& unit = analysis.units()[r.unit];
        plan.removed.push_back({r.unit_id, r.Imp, unit.members, unit.in_slices});
        plan.threshold = r.Imp;
        if (budget_met(widths, plan.baseline_flops, plan.baseline_params, config)) {
            met = true;
            break;
        }
    }
    plan.predicted_flops = widths.flops();
    plan.predicted_params = widths.params();
    plan.frr = 1.0 - double(plan.predicted_flops) / double(plan.baseline_flops);
    plan.prr = plan.baseline_params > 0 ? 1.0 - double(plan.predicted_params) / double(plan.baseline_params) : 0.0;
    plan.layer_widths = widths.layer_widths();
    if (!met)
        throw InfeasibleBudget("infeasible budget: best achievable Frr " + format_double(plan.frr) + " under floor " +
                                   std::to_string(config.min_channels_per_layer),
                               std::move(plan));
    return plan;
}

PruningPlan plan_pruning(const ModelGraph& graph, const Config& config) {
    const auto analysis = analyze_coupling(graph);
    const auto records = score_all(graph, analysis.units(), config);
    return select_threshold(rank_global(records), graph, analysis, config);
}

std::string config_to_json(const Config& c) {
    ordered_json j{{"alpha", c.alpha},
                   {"beta", c.beta},
                   {"flop_target_ratio", c.flop_target_ratio},
                   {"weight_norm", to_string(c.weight_norm)},
                   {"use_in_channel", c.use_in_channel},
                   {"flops_convention", to_string(c.flops_convention)},
                   {"min_channels_per_layer", c.min_channels_per_layer},
                   {"passes", c.passes},
                   {"per_pass_ratio", c.per_pass_ratio ? ordered_json(*c.per_pass_ratio) : ordered_json(nullptr)},
                   {"count_aux_params", c.count_aux_params},
                   {"count_aux_flops", c.count_aux_flops},
                   {"param_target_ratio",
                    c.param_target_ratio ? ordered_json(*c.param_target_ratio) : ordered_json(nullptr)}};
    return j.dump();
}

namespace {

Config config_from(const ordered_json& j) {
    Config c;
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.flop_target_ratio = j.at("flop_target_ratio").get<double>();
    auto wn = parse_weight_norm(j.at("weight_norm").get<std::string>());
    auto fc = parse_flops_convention(j.at("flops_convention").get<std::string>());
    if (!wn || !fc) throw ValidationError("malformed config echo");
    c.weight_norm = *wn;
    c.flops_convention = *fc;
    c.use_in_channel = j.at("use_in_channel").get<bool>();
    c.min_channels_per_layer = j.at("min_channels_per_layer").get<int>();
    c.passes = j.at("passes").get<int>();
    if (!j.at("per_pass_ratio").is_null()) c.per_pass_ratio = j.at("per_pass_ratio").get<double>();
    c.count_aux_params = j.at("count_aux_params").get<bool>();
    c.count_aux_flops = j.at("count_aux_flops").get<bool>();
    if (!j.at("param_target_ratio").is_null()) c.param_target_ratio = j.at("param_target_ratio").get<double>();
    return c;
}

}  // namespace

Config config_from_json(std::string_view text) {
    try {
        return config_from(ordered_json::parse(text));
    } catch (const ordered_json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
}

std::string plan_to_json(const PruningPlan& p) {
    ordered_json j;
    j["checksum"] = p.checksum;
    j["baseline"] = {{"params", p.baseline_params}, {"flops", p.baseline_flops}};
    j["predicted"] = {{"params", p.predicted_params}, {"flops", p.predicted_flops}, {"prr", p.prr}, {"frr", p.frr}};
    j["threshold"] = p.threshold;
    auto& removed = j["removed_units"] = ordered_json::array();
    for (const auto& r : p.removed) {
        ordered_json u{{"unit_id", r.unit_id}, {"imp", r.imp}};
        auto& m = u["members"] = ordered_json::array();
        for (const auto& c : r.members) m.push_back({{"layer", c.layer}, {"channel", c.channel}});
        auto& s = u["in_slices"] = ordered_json::array();
        for (const auto& c : r.in_slices) s.push_back({{"consumer", c.consumer}, {"index", c.index}, {"count", c.count}});
        removed.push_back(std::move(u));
    }
    auto& widths = j["layer_widths"] = ordered_json::array();
    for (const auto& w : p.layer_widths)
        widths.push_back({{"layer", w.layer},
                          {"in_before", w.in_before},
                          {"in_after", w.in_after},
                          {"out_before", w.out_before},
                          {"out_after", w.out_after}});
    j["config"] = ordered_json::parse(config_to_json(p.config));
    return j.dump(2) + "\n";
}

PruningPlan plan_from_json(std::string_view text) {
    PruningPlan p;
    try {
        const auto j = ordered_json::parse(text);
        p.checksum = j.at("checksum").get<std::string>();
        p.baseline_params = j.at("baseline").at("params").get<std::int64_t>();
        p.baseline_flops = j.at("baseline").at("flops").get<std::int64_t>();
        const auto& pred = j.at("predicted");
        p.predicted_params = pred.at("params").get<std::int64_t>();
        p.predicted_flops = pred.at("flops").get<std::int64_t>();
        p.prr = pred.at("prr").get<double>();
        p.frr = pred.at("frr").get<double>();
        p.threshold = j.at("threshold").get<double>();
        for (const auto& u : j.at("removed_units")) {
            RemovedUnit r{u.at("unit_id").get<std::string>(), u.at("imp").get<double>(), {}, {}};
            for (const auto& m : u.at("members")) r.members.push_back({m.at("layer").get<std::string>(), m.at("channel").get<int>()});
            for (const auto& s : u.at("in_slices"))
                r.in_slices.push_back({s.at("consumer").get<std::string>(), s.at("index").get<int>(), s.at("count").get<int>()});
            p.removed.push_back(std::move(r));
        }
        for (const auto& w : j.at("layer_widths"))
            p.layer_widths.push_back({w.at("layer").get<std::string>(), w.at("in_before").get<int>(),
                                      w.at("in_after").get<int>(), w.at("out_before").get<int>(),
                                      w.at("out_after").get<int>()});
        p.config = config_from(j.at("config"));
    } catch (const ordered_json::exception& e) {
        throw ValidationError(std::string("malformed plan: ") + e.what());
    }
    return p;
}

}  // namespace prunekit
