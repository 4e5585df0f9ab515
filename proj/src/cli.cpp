// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/cli.hpp"

#include "prunekit/config.hpp"
#include "prunekit/cost_model.hpp"
#include "prunekit/coupling.hpp"
#include "prunekit/error.hpp"
#include "prunekit/importance.hpp"
#include "prunekit/model_ir.hpp"
#include "prunekit/planner.hpp"
#include "prunekit/surgeon.hpp"
#include "prunekit/zoo.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace prunekit {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct ConfigFlags {
    std::string config_file;
    std::string preset;
    std::optional<double> alpha, beta, flop_target, per_pass, param_target;
    std::string weight_norm, mode, flops_convention;
    std::optional<int> min_channels, passes;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "key = value configuration file");
        app->add_option("--preset", preset, "vggnet | resnet | densenet");
        app->add_option("--alpha", alpha);
        app->add_option("--beta", beta);
        app->add_option("--flop-target", flop_target, "fraction of FLOPs to remove");
        app->add_option("--weight-norm", weight_norm)->check(CLI::IsMember({"max-min", "max", "log"}));
        app->add_option("--mode", mode)->check(CLI::IsMember({"cpmc", "cpmc-a"}));
        app->add_option("--flops-convention", flops_convention)->check(CLI::IsMember({"macs", "2macs"}));
        app->add_option("--min-channels", min_channels);
        app->add_option("--passes", passes);
        app->add_option("--per-pass", per_pass);
        app->add_option("--param-target", param_target);
    }

    // defaults < file < flags; a preset is applied before explicit alpha/beta
    // at each level.
    Config resolve() const {
        Config c;
        if (!config_file.empty()) {
            auto kv = read_kv_file(config_file);
            if (auto it = kv.find("preset"); it != kv.end()) apply_setting(c, "preset", it->second);
            for (const auto& [k, v] : kv)
                if (k != "preset") apply_setting(c, k, v);
        }
        if (!preset.empty()) apply_setting(c, "preset", preset);
        if (alpha) c.alpha = *alpha;
        if (beta) c.beta = *beta;
        if (flop_target) c.flop_target_ratio = *flop_target;
        if (!weight_norm.empty()) apply_setting(c, "weight_norm", weight_norm);
        if (!mode.empty()) apply_setting(c, "mode", mode);
        if (!flops_convention.empty()) apply_setting(c, "flops_convention", flops_convention);
        if (min_channels) c.min_channels_per_layer = *min_channels;
        if (passes) c.passes = *passes;
        if (per_pass) c.per_pass_ratio = *per_pass;
        if (param_target) c.param_target_ratio = *param_target;
        c.validate();
        return c;
    }
};

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string file_sha(const fs::path& p) { return sha256_hex(read_bytes(p)); }

/// Collects produced files and writes run_manifest.json last.
class Run {
public:
    Run(std::string command, fs::path out_dir) : command_(std::move(command)), out_dir_(std::move(out_dir)) {
        std::error_code ec;
        fs::create_directories(out_dir_, ec);
        if (ec) throw IoError("cannot create '" + out_dir_.string() + "': " + ec.message());
    }

    fs::path path(const std::string& name) const { return out_dir_ / name; }

    void write(const std::string& name, const std::string& content) {
        const auto p = path(name);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        out << content;
        if (!out) throw IoError("cannot write '" + p.string() + "'");
        produced_.push_back(name);
    }

    void save(const std::string& manifest_name, const std::string& weights_name, const ModelGraph& g) {
        save_model(g, path(manifest_name), path(weights_name));
        produced_.push_back(manifest_name);
        produced_.push_back(weights_name);
    }

    void input(const std::string& role, const fs::path& p) { inputs_.emplace_back(role, p); }
    void config(const Config& c) { config_ = ordered_json::parse(config_to_json(c)); }

    void finish() {
        ordered_json j;
        j["tool"] = "prunekit";
        j["version"] = kToolVersion;
        j["command"] = command_;
        j["config"] = config_;
        auto& in = j["inputs"] = ordered_json::array();
        for (const auto& [role, p] : inputs_) in.push_back({{"role", role}, {"path", p.string()}, {"sha256", file_sha(p)}});
        auto& out = j["artifacts"] = ordered_json::array();
        for (const auto& name : produced_) out.push_back({{"path", name}, {"sha256", file_sha(path(name))}});
        j["elapsed_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream f(path("run_manifest.json"));
        f << j.dump(2) << "\n";
        if (!f) throw IoError("cannot write run manifest");
    }

private:
    std::string command_;
    fs::path out_dir_;
    std::vector<std::string> produced_;
    std::vector<std::pair<std::string, fs::path>> inputs_;
    ordered_json config_ = nullptr;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct ModelPaths {
    std::string manifest, weights;

    void attach(CLI::App* app, const char* flag = "--model", const char* weights_flag = "--weights") {
        app->add_option(flag, manifest, "model manifest (JSON)")->required();
        app->add_option(weights_flag, weights, "weight container (defaults to the manifest's weights_file)");
    }

    ModelGraph load(Run& run, const std::string& role) const {
        auto g = load_model(manifest, weights);
        run.input(role + "_manifest", manifest);
        fs::path w = weights;
        if (w.empty()) {
            std::ifstream in(manifest);
            auto j = ordered_json::parse(in, nullptr, false);
            if (!j.is_discarded() && j.contains("weights_file"))
                w = fs::path(manifest).parent_path() / j["weights_file"].get<std::string>();
        }
        if (!w.empty()) run.input(role + "_weights", w);
        return g;
    }
};

std::string pct(double ratio) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * ratio << "%";
    return s.str();
}

void print_summary(std::ostream& out, const ModelGraph& g, const Config& c) {
    out << "S (scored output channels): " << g.total_output_channels() << "\n";
    out << "baseline params: " << model_param_count(g, c.count_aux_params)
        << "  FLOPs (" << to_string(c.flops_convention) << "): "
        << model_flop_count(g, c.flops_convention, c.count_aux_flops) << "\n";
    out << "layer widths:\n";
    for (const auto& n : g.nodes())
        if (n.is_weighted()) out << "  " << n.id << "  " << n.in_channels << " -> " << n.out_channels << "\n";
}

int cmd_analyze(const ModelPaths& model, const ConfigFlags& flags, const std::string& out_dir, bool dump_units,
                std::ostream& out) {
    const Config c = flags.resolve();
    Run run("analyze", out_dir);
    run.config(c);
    const auto g = model.load(run, "model");
    const auto analysis = analyze_coupling(g);
    const auto records = score_all(g, analysis.units(), c);
    std::ostringstream csv;
    write_records_csv(csv, records);
    run.write("records.csv", csv.str());
    run.write("records.json", records_to_json(records));
    const auto units = units_to_json(analysis.units());
    run.write("units.json", units);
    print_summary(out, g, c);
    out << "units: " << analysis.units().size() << "  records: " << run.path("records.csv").string() << "\n";
    if (dump_units) out << units;
    run.finish();
    return 0;
}

void print_plan(std::ostream& out, const PruningPlan& p) {
    out << "threshold: " << format_double(p.threshold) << "  removed units: " << p.removed.size() << "\n";
    out << "params " << p.baseline_params << " -> " << p.predicted_params << "  Prr " << pct(p.prr) << "\n";
    out << "FLOPs  " << p.baseline_flops << " -> " << p.predicted_flops << "  Frr " << pct(p.frr) << "\n";
}

int cmd_plan(const ModelPaths& model, const ConfigFlags& flags, const std::string& out_dir, std::ostream& out) {
    const Config c = flags.resolve();
    Run run("plan", out_dir);
    run.config(c);
    const auto g = model.load(run, "model");
    try {
        const auto plan = plan_pruning(g, c);
        run.write("plan.json", plan_to_json(plan));
        print_plan(out, plan);
    } catch (const InfeasibleBudget& e) {
        run.write("plan.best.json", plan_to_json(e.best()));
        run.finish();
        throw;
    }
    run.finish();
    return 0;
}

int cmd_prune(const ModelPaths& model, const ConfigFlags& flags, const std::string& plan_path,
              const std::string& out_dir, std::ostream& out) {
    Run run("prune", out_dir);
    const auto g = model.load(run, "model");
    if (!plan_path.empty()) {
        std::ifstream in(plan_path);
        if (!in) throw IoError("cannot read plan '" + plan_path + "'");
        std::stringstream text;
        text << in.rdbuf();
        const auto plan = plan_from_json(text.str());
        run.input("plan", plan_path);
        run.config(plan.config);
        auto result = apply_plan(g, plan);
        run.save("pruned.json", "pruned.bin", result.graph);
        run.write("surgery_report.json", surgery_report_to_json(result.report));
        out << "params " << result.report.params << "  FLOPs " << result.report.flops
            << "  matches plan: " << (result.report.matches_prediction ? "yes" : "NO") << "\n";
        run.finish();
        return result.report.matches_prediction ? 0 : 2;
    }
    const Config c = flags.resolve();
    run.config(c);
    const auto trajectory = multi_pass(g, c);
    const auto base_flops = model_flop_count(g, c.flops_convention, c.count_aux_flops);
    const auto base_params = model_param_count(g, c.count_aux_params);
    for (std::size_t p = 0; p < trajectory.size(); ++p) {
        const std::string dir = "pass" + std::to_string(p + 1) + "/";
        run.write(dir + "plan.json", plan_to_json(trajectory[p].plan));
        run.write(dir + "surgery_report.json", surgery_report_to_json(trajectory[p].report));
        out << "pass " << p + 1 << ": FLOPs " << trajectory[p].report.flops << "  cumulative Frr "
            << pct(1.0 - double(trajectory[p].report.flops) / double(base_flops)) << "\n";
    }
    const auto& last = trajectory.back();
    run.save("pruned.json", "pruned.bin", last.graph);
    run.write("surgery_report.json", surgery_report_to_json(last.report));
    out << "final: params " << last.report.params << " (Prr " << pct(1.0 - double(last.report.params) / double(base_params))
        << ")  FLOPs " << last.report.flops << " (Frr " << pct(1.0 - double(last.report.flops) / double(base_flops))
        << ")\n";
    run.finish();
    return 0;
}

int cmd_report(const ModelPaths& base, const ModelPaths& pruned, const ConfigFlags& flags, const std::string& out_dir,
               std::ostream& out) {
    const Config c = flags.resolve();
    Run run("report", out_dir);
    run.config(c);
    const auto a = base.load(run, "baseline");
    const auto b = pruned.load(run, "pruned");
    const auto pa = model_param_count(a, c.count_aux_params), pb = model_param_count(b, c.count_aux_params);
    const auto fa = model_flop_count(a, c.flops_convention, c.count_aux_flops);
    const auto fb = model_flop_count(b, c.flops_convention, c.count_aux_flops);
    const double prr = pa > 0 ? 1.0 - double(pb) / double(pa) : 0.0;
    const double frr = fa > 0 ? 1.0 - double(fb) / double(fa) : 0.0;

    ordered_json j;
    j["baseline"] = {{"params", pa}, {"flops", fa}};
    j["pruned"] = {{"params", pb}, {"flops", fb}};
    j["prr"] = prr;
    j["frr"] = frr;
    auto& layers = j["layers"] = ordered_json::array();
    std::ostringstream txt;
    txt << "params " << pa << " -> " << pb << "  Prr " << pct(prr) << "\n";
    txt << "FLOPs  " << fa << " -> " << fb << "  Frr " << pct(frr) << "  (" << to_string(c.flops_convention) << ")\n\n";
    txt << std::left << std::setw(28) << "layer" << std::right << std::setw(8) << "before" << std::setw(8) << "after"
        << std::setw(10) << "removed" << "\n";
    for (const auto& n : a.nodes()) {
        if (!n.is_weighted()) continue;
        const auto idx = b.index_of(n.id);
        const int after = idx ? b.at(*idx).out_channels : 0;
        const double frac = 1.0 - double(after) / double(n.out_channels);
        layers.push_back({{"layer", n.id}, {"before", n.out_channels}, {"after", after}, {"removed_fraction", frac}});
        txt << std::left << std::setw(28) << n.id << std::right << std::setw(8) << n.out_channels << std::setw(8) << after
            << std::setw(10) << pct(frac) << "\n";
    }
    const char* note = "fine-tuning required to recover accuracy (out of scope)";
    j["note"] = note;
    txt << "\nnote: " << note << "\n";
    run.write("report.json", j.dump(2) + "\n");
    run.write("report.txt", txt.str());
    out << txt.str();
    run.finish();
    return 0;
}

int cmd_fixture(const std::string& name, std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
    static const std::map<std::string, ModelGraph (*)(std::uint64_t)> builders{
        {"vgg16", vgg16_cifar},
        {"densenet40", densenet40},
        {"resnet56", [](std::uint64_t s) { return resnet_bottleneck(56, s); }},
        {"resnet164", [](std::uint64_t s) { return resnet_bottleneck(164, s); }},
        {"minimal", minimal_model},
        {"tiny-chain", tiny_chain},
        {"tiny-bottleneck", tiny_bottleneck_stage},
        {"tiny-dense", tiny_dense_block},
        {"tiny-flatten", tiny_conv_flatten_fc},
    };
    auto it = builders.find(name);
    if (it == builders.end()) throw ValidationError("unknown fixture '" + name + "'");
    Run run("fixture", out_dir);
    const auto g = it->second(seed);
    run.save(name + ".json", name + ".bin", g);
    out << "wrote " << run.path(name + ".json").string() << " (" << g.size() << " nodes, S=" << g.total_output_channels()
        << ")\n";
    run.finish();
    return 0;
}

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::Validation: return 2;
    case ErrorKind::Infeasible: return 3;
    case ErrorKind::Io: return 4;
    }
    return 2;
}

std::string_view kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Io: return "io";
    }
    return "validation";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Structured channel pruning for serialized CNNs", "prunekit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    ModelPaths model, pruned;
    ConfigFlags flags;
    std::string out_dir = ".", plan_path, fixture_name;
    bool dump_units = false;
    std::uint64_t seed = 1;

    auto* analyze = app.add_subcommand("analyze", "score every prune unit");
    model.attach(analyze);
    flags.attach(analyze);
    analyze->add_flag("--dump-units", dump_units, "print the unit inventory");
    auto* plan = app.add_subcommand("plan", "select the removal set for a FLOP target");
    model.attach(plan);
    flags.attach(plan);
    auto* prune = app.add_subcommand("prune", "apply a plan, or run the multi-pass driver");
    model.attach(prune);
    flags.attach(prune);
    prune->add_option("--plan", plan_path, "plan.json from `prunekit plan`");
    auto* report = app.add_subcommand("report", "compare baseline and pruned models");
    model.attach(report);
    pruned.attach(report, "--pruned", "--pruned-weights");
    flags.attach(report);
    auto* fixture = app.add_subcommand("fixture", "write a built-in architecture with seeded weights");
    fixture->add_option("--name", fixture_name)->required();
    fixture->add_option("--seed", seed);
    for (auto* sub : {analyze, plan, prune, report, fixture}) sub->add_option("--out-dir", out_dir);

    auto fail = [&](std::string_view kind, const std::string& message, ordered_json extra, int code) {
        ordered_json j{{"error", kind}, {"message", message}};
        for (auto& [k, v] : extra.items()) j[k] = v;
        err << j.dump() << "\n";
        return code;
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), ordered_json::object(), 2);
    }

    try {
        if (*analyze) return cmd_analyze(model, flags, out_dir, dump_units, out);
        if (*plan) return cmd_plan(model, flags, out_dir, out);
        if (*prune) return cmd_prune(model, flags, plan_path, out_dir, out);
        if (*report) return cmd_report(model, pruned, flags, out_dir, out);
        if (*fixture) return cmd_fixture(fixture_name, seed, out_dir, out);
    } catch (const InfeasibleBudget& e) {
        return fail("infeasible", e.what(), {{"best_frr", e.best().frr}, {"best_prr", e.best().prr}}, 3);
    } catch (const Error& e) {
        return fail(kind_name(e.kind()), e.what(), ordered_json::object(), exit_code(e.kind()));
    } catch (const fs::filesystem_error& e) {
        return fail("io", e.what(), ordered_json::object(), 4);
    }
    return 2;
}

}  // namespace prunekit
