// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "helpers.hpp"
#include "prunekit/cli.hpp"
#include "prunekit/model_ir.hpp"
#include "prunekit/planner.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

using namespace prunekit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "prunekit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), p.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fixture(const fs::path& dir, const std::string& name) {
    const auto r = run({"fixture", "--name", name, "--out-dir", dir.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return dir / (name + ".json");
}

nlohmann::json json_of(const std::string& text) { return nlohmann::json::parse(text); }

std::size_t lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("analyze writes one record per unit") {
    const auto dir = testing::scratch_dir("cli_analyze");
    const auto m = fixture(dir, "minimal");
    const auto r = run({"analyze", "--model", m.string(), "--out-dir", (dir / "a").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(lines(slurp(dir / "a" / "records.csv")) == 5);
    CHECK(r.out.find("S (scored output channels): 4") != std::string::npos);
    const auto manifest = json_of(slurp(dir / "a" / "run_manifest.json"));
    CHECK(manifest["tool"] == "prunekit");
    CHECK(manifest["command"] == "analyze");
    CHECK(manifest["inputs"].size() == 2);
    for (const auto& a : manifest["artifacts"]) CHECK(a["sha256"].get<std::string>().size() == 64);
}

TEST_CASE("analyze modes differ only where they should") {
    const auto dir = testing::scratch_dir("cli_modes");
    const auto m = fixture(dir, "tiny-dense");
    std::map<std::string, nlohmann::json> rec;
    for (const std::string norm : {"max-min", "max", "log"}) {
        const auto r = run({"analyze", "--model", m.string(), "--weight-norm", norm, "--out-dir", (dir / norm).string()});
        REQUIRE(r.code == 0);
        rec[norm] = json_of(slurp(dir / norm / "records.json"));
    }
    const auto r = run({"analyze", "--model", m.string(), "--mode", "cpmc-a", "--out-dir", (dir / "oc").string()});
    REQUIRE(r.code == 0);
    const auto oc = json_of(slurp(dir / "oc" / "records.json"));
    const auto& base = rec["max-min"];
    REQUIRE(base.size() == 28);
    bool gl_differs = false;
    for (std::size_t k = 0; k < base.size(); ++k) {
        for (const auto& other : {rec["max"], rec["log"]}) {
            CHECK(other[k]["unit_id"] == base[k]["unit_id"]);
            CHECK(other[k]["L"] == base[k]["L"]);
            CHECK(other[k]["GP"] == base[k]["GP"]);
            CHECK(other[k]["GF"] == base[k]["GF"]);
            gl_differs |= other[k]["GL"] != base[k]["GL"];
        }
        CHECK(oc[k]["GP"] == base[k]["GP"]);
        CHECK(oc[k]["L"].get<double>() <= base[k]["L"].get<double>());
    }
    CHECK(gl_differs);
}

TEST_CASE("plan, prune and report round trip") {
    const auto dir = testing::scratch_dir("cli_pipeline");
    const auto m = fixture(dir, "tiny-bottleneck");
    auto r = run({"plan", "--model", m.string(), "--flop-target", "0.3", "--out-dir", (dir / "p").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto plan = plan_from_json(slurp(dir / "p" / "plan.json"));
    CHECK(plan.frr >= 0.3);
    CHECK(r.out.find("Frr") != std::string::npos);

    r = run({"prune", "--model", m.string(), "--plan", (dir / "p" / "plan.json").string(), "--out-dir",
             (dir / "q").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto pruned = load_model(dir / "q" / "pruned.json");
    CHECK(validate(pruned).empty());
    CHECK(json_of(slurp(dir / "q" / "surgery_report.json"))["matches_prediction"] == true);

    r = run({"report", "--model", m.string(), "--pruned", (dir / "q" / "pruned.json").string(), "--out-dir",
             (dir / "r").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto rep = json_of(slurp(dir / "r" / "report.json"));
    CHECK(rep["frr"].get<double>() == doctest::Approx(plan.frr).epsilon(1e-12));
    CHECK(rep["prr"].get<double>() == doctest::Approx(plan.prr).epsilon(1e-12));
    CHECK(slurp(dir / "r" / "report.txt").find("fine-tuning required to recover accuracy (out of scope)") !=
          std::string::npos);
}

TEST_CASE("report on identical models gives zero reductions") {
    const auto dir = testing::scratch_dir("cli_identity");
    const auto m = fixture(dir, "tiny-chain");
    const auto r = run({"report", "--model", m.string(), "--pruned", m.string(), "--out-dir", (dir / "r").string()});
    REQUIRE(r.code == 0);
    const auto rep = json_of(slurp(dir / "r" / "report.json"));
    CHECK(rep["prr"] == 0.0);
    CHECK(rep["frr"] == 0.0);
}

TEST_CASE("multi-pass driver compounds") {
    const auto dir = testing::scratch_dir("cli_passes");
    const auto m = fixture(dir, "tiny-bottleneck");
    const auto r = run({"prune", "--model", m.string(), "--passes", "3", "--per-pass", "0.2", "--out-dir",
                        (dir / "mp").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (int k = 1; k <= 3; ++k) CHECK(fs::exists(dir / "mp" / ("pass" + std::to_string(k)) / "plan.json"));
    const auto rep = run({"report", "--model", m.string(), "--pruned", (dir / "mp" / "pruned.json").string(),
                          "--out-dir", (dir / "r").string()});
    REQUIRE(rep.code == 0);
    CHECK(json_of(slurp(dir / "r" / "report.json"))["frr"].get<double>() >= 1.0 - 0.8 * 0.8 * 0.8);
}

TEST_CASE("the pipeline is byte-for-byte deterministic") {
    const auto dir = testing::scratch_dir("cli_determinism");
    std::vector<std::map<std::string, std::string>> runs;
    for (const std::string tag : {"one", "two"}) {
        const auto d = dir / tag;
        const auto m = fixture(d, "tiny-dense");
        REQUIRE(run({"analyze", "--model", m.string(), "--out-dir", (d / "a").string()}).code == 0);
        REQUIRE(run({"plan", "--model", m.string(), "--flop-target", "0.4", "--out-dir", (d / "p").string()}).code == 0);
        REQUIRE(run({"prune", "--model", m.string(), "--plan", (d / "p" / "plan.json").string(), "--out-dir",
                     (d / "q").string()})
                    .code == 0);
        REQUIRE(run({"report", "--model", m.string(), "--pruned", (d / "q" / "pruned.json").string(), "--out-dir",
                     (d / "r").string()})
                    .code == 0);
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(d))
            if (e.is_regular_file() && e.path().filename() != "run_manifest.json")
                files[fs::relative(e.path(), d).string()] = slurp(e.path());
        runs.push_back(std::move(files));
    }
    CHECK(runs[0].size() == runs[1].size());
    CHECK(runs[0].size() == 11);  // fixture 2, analyze 3, plan 1, prune 3, report 2
    for (const auto& [name, bytes] : runs[0]) CHECK_MESSAGE(runs[1][name] == bytes, name);
}

TEST_CASE("config precedence: defaults < file < flags") {
    const auto dir = testing::scratch_dir("cli_config");
    const auto m = fixture(dir, "tiny-chain");
    {
        std::ofstream f(dir / "c.toml");
        f << "# test settings\nalpha = 2.5\nbeta = 0.5\nflop_target_ratio = 0.3\n";
    }
    REQUIRE(run({"plan", "--model", m.string(), "--config", (dir / "c.toml").string(), "--beta", "0.75", "--out-dir",
                 (dir / "p").string()})
                .code == 0);
    const auto c = plan_from_json(slurp(dir / "p" / "plan.json")).config;
    CHECK(c.alpha == 2.5);
    CHECK(c.beta == 0.75);
    CHECK(c.flop_target_ratio == 0.3);

    REQUIRE(run({"plan", "--model", m.string(), "--preset", "vggnet", "--out-dir", (dir / "v").string()}).code == 0);
    const auto v = plan_from_json(slurp(dir / "v" / "plan.json")).config;
    CHECK(v.alpha == 3.0);
    CHECK(v.beta == 1.0);
}

TEST_CASE("error paths exit nonzero with a JSON object on stderr") {
    const auto dir = testing::scratch_dir("cli_errors");
    const auto m = fixture(dir, "vgg16");

    auto r = run({"plan", "--model", m.string(), "--flop-target", "0.999", "--min-channels", "8", "--out-dir",
                  (dir / "p").string()});
    CHECK(r.code == 3);
    auto e = json_of(r.err);
    CHECK(e["error"] == "infeasible");
    CHECK(e["best_frr"].get<double>() < 0.999);
    CHECK(fs::exists(dir / "p" / "plan.best.json"));

    r = run({"analyze", "--model", (dir / "missing.json").string(), "--out-dir", dir.string()});
    CHECK(r.code == 4);
    CHECK(json_of(r.err)["error"] == "io");

    {
        std::ofstream f(dir / "bad.json");
        f << "{\"version\": 1";
    }
    r = run({"analyze", "--model", (dir / "bad.json").string(), "--weights", (dir / "vgg16.bin").string(),
             "--out-dir", dir.string()});
    CHECK(r.code == 2);
    CHECK(json_of(r.err)["error"] == "validation");

    r = run({"plan", "--model", m.string(), "--flop-target", "1.5", "--out-dir", dir.string()});
    CHECK(r.code == 2);
    CHECK_NOTHROW(json_of(r.err));

    r = run({"analyze", "--model", m.string(), "--weight-norm", "median"});
    CHECK(r.code == 2);
    CHECK(json_of(r.err)["error"] == "usage");

    const auto other = fixture(dir / "x", "tiny-chain");
    REQUIRE(run({"plan", "--model", other.string(), "--out-dir", (dir / "xp").string()}).code == 0);
    r = run({"prune", "--model", fixture(dir / "y", "tiny-dense").string(), "--plan",
             (dir / "xp" / "plan.json").string(), "--out-dir", (dir / "yq").string()});
    CHECK(r.code == 2);
    CHECK(json_of(r.err)["message"].get<std::string>().find("checksum mismatch") != std::string::npos);
}
