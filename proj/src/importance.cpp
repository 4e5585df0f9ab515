// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/importance.hpp"

#include "prunekit/cost_model.hpp"
#include "prunekit/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

namespace prunekit {

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

namespace {

const LayerNode& weighted(const ModelGraph& g, const std::string& id) {
    auto idx = g.index_of(id);
    if (!idx || !g.at(*idx).is_weighted()) throw ValidationError("unit references unknown layer '" + id + "'");
    const auto& n = g.at(*idx);
    if (std::int64_t(n.weight.data.size()) != n.weight.numel() || n.weight.data.empty())
        throw ValidationError("unbound weight tensor on '" + id + "'");
    return n;
}

std::size_t kernel_area(const LayerNode& n) { return n.kind == NodeKind::Linear ? 1 : std::size_t(n.kernel * n.kernel); }

}  // namespace

double dependency_l1(const ModelGraph& g, const PruneUnit& unit, bool use_in_channel) {
    double total = 0.0;
    for (const auto& m : unit.members) {
        const auto& n = weighted(g, m.layer);
        if (m.channel < 0 || m.channel >= n.out_channels) throw ValidationError("channel out of range for '" + m.layer + "'");
        const std::size_t row = std::size_t(n.in_channels) * kernel_area(n);
        const float* w = n.weight.data.data() + std::size_t(m.channel) * row;
        for (std::size_t e = 0; e < row; ++e) total += std::fabs(double(w[e]));
    }
    if (use_in_channel) {
        for (const auto& s : unit.in_slices) {
            const auto& n = weighted(g, s.consumer);
            if (s.index < 0 || s.index + s.count > n.in_channels)
                throw ValidationError("input slice out of range for '" + s.consumer + "'");
            const std::size_t ka = kernel_area(n);
            for (int oc = 0; oc < n.out_channels; ++oc) {
                const float* w = n.weight.data.data() + (std::size_t(oc) * n.in_channels + s.index) * ka;
                for (std::size_t e = 0; e < ka * std::size_t(s.count); ++e) total += std::fabs(double(w[e]));
            }
        }
    }
    // Every slice belongs to exactly one member's successor set, so the mean
    // of per-member scores is the total over the member count.
    return unit.members.size() > 1 ? total / double(unit.members.size()) : total;
}

std::vector<double> normalize_weight_scores(std::span<const double> scores, WeightNorm mode) {
    if (scores.empty()) throw ValidationError("cannot normalize an empty layer");
    for (double s : scores)
        if (!(s >= 0) || !std::isfinite(s)) throw ValidationError("weight scores must be finite and nonnegative");
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(scores.size());
    switch (mode) {
    case WeightNorm::MaxMin:
        for (std::size_t i = 0; i < scores.size(); ++i) out[i] = hi == lo ? 0.5 : (scores[i] - lo) / (hi - lo);
        break;
    case WeightNorm::Max:
        if (hi == 0) throw ValidationError("max normalization of an all-zero layer");
        for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] / hi;
        break;
    case WeightNorm::Log:
        if (hi == 0) throw ValidationError("log normalization of an all-zero layer");
        for (std::size_t i = 0; i < scores.size(); ++i) out[i] = std::log1p(scores[i]) / std::log1p(hi);
        break;
    }
    return out;
}

CostScores normalize_cost_scores(std::int64_t P, std::int64_t F, std::int64_t Pmax, std::int64_t Fmax, double alpha,
                                 double beta) {
    if (Pmax <= 1 || Fmax <= 1) throw ValidationError("degenerate model: maximum unit cost must exceed 1");
    if (P < 1 || F < 1 || P > Pmax || F > Fmax) throw ValidationError("unit cost outside [1, max]");
    return {alpha * (1.0 - std::log(double(P)) / std::log(double(Pmax))),
            beta * (1.0 - std::log(double(F)) / std::log(double(Fmax)))};
}

std::vector<ImportanceRecord> score_all(const ModelGraph& g, std::span<const PruneUnit> units, const Config& config) {
    config.validate();
    if (units.empty()) throw ValidationError("model has no prunable units");
    std::vector<ImportanceRecord> records(units.size());
    std::int64_t Pmax = 0, Fmax = 0;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t u = 0; u < units.size(); ++u) {
        const auto& unit = units[u];
        auto& r = records[u];
        r.unit_id = unit.id;
        r.unit = u;
        if (unit.kind == UnitKind::FullChannel) {
            r.layer = unit.source.layer;
            r.channel = unit.source.channel;
        } else {
            r.layer = unit.in_slices.front().consumer;
            r.channel = unit.in_slices.front().index / unit.in_slices.front().count;
        }
        r.L = dependency_l1(g, unit, config.use_in_channel);
        const auto cost = unit_cost(g, unit, config.flops_convention);
        r.P = cost.params();
        r.F = cost.flops();
        Pmax = std::max(Pmax, r.P);
        Fmax = std::max(Fmax, r.F);
        groups[unit.norm_group].push_back(u);
    }
    for (const auto& [name, members] : groups) {
        std::vector<double> raw;
        raw.reserve(members.size());
        for (auto u : members) raw.push_back(records[u].L);
        const auto gl = normalize_weight_scores(raw, config.weight_norm);
        for (std::size_t k = 0; k < members.size(); ++k) records[members[k]].GL = gl[k];
    }
    for (auto& r : records) {
        const auto c = normalize_cost_scores(r.P, r.F, Pmax, Fmax, config.alpha, config.beta);
        r.GP = c.GP;
        r.GF = c.GF;
        r.Imp = combined_importance(r.GL, r.GP, r.GF);
    }
    return records;
}

void write_records_csv(std::ostream& out, std::span<const ImportanceRecord> records) {
    out << "unit_id,layer,channel,L,GL,GP,GF,Imp\n";
    for (const auto& r : records)
        out << r.unit_id << ',' << r.layer << ',' << r.channel << ',' << format_double(r.L) << ','
            << format_double(r.GL) << ',' << format_double(r.GP) << ',' << format_double(r.GF) << ','
            << format_double(r.Imp) << '\n';
}

std::string records_to_json(std::span<const ImportanceRecord> records) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : records)
        arr.push_back({{"unit_id", r.unit_id}, {"layer", r.layer}, {"channel", r.channel}, {"L", r.L}, {"GL", r.GL},
                       {"GP", r.GP}, {"GF", r.GF}, {"Imp", r.Imp}, {"P", r.P}, {"F", r.F}});
    return arr.dump(2) + "\n";
}

std::string units_to_json(std::span<const PruneUnit> units) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& u : units) {
        nlohmann::ordered_json j{{"id", u.id}, {"kind", to_string(u.kind)}, {"norm_group", u.norm_group}};
        auto& members = j["members"] = nlohmann::ordered_json::array();
        for (const auto& m : u.members) members.push_back({{"layer", m.layer}, {"channel", m.channel}});
        auto& slices = j["in_slices"] = nlohmann::ordered_json::array();
        for (const auto& s : u.in_slices) slices.push_back({{"consumer", s.consumer}, {"index", s.index}, {"count", s.count}});
        auto& aux = j["aux"] = nlohmann::ordered_json::array();
        for (const auto& a : u.aux) aux.push_back({{"node", a.node}, {"index", a.index}});
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

}  // namespace prunekit
