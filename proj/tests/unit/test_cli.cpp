#include "nste/checkpoint.hpp"
#include "nste/model.hpp"
#include "nste/run_manifest.hpp"
#include "nste_cli/commands.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

using namespace nste;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string output;
};

Result run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(NSTE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, test::file_bytes(log)};
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

/// One 20-pair desk dataset shared by the tests below.
const fs::path& shared_dataset() {
    static const fs::path dir = [] {
        const auto root = test::temp_dir("cli_shared");
        const auto r = run_cli("generate --preset easy --pairs 20 --seed 3 --setup-id s --out " + (root / "gen").string(),
                               root / "gen.log");
        EXPECT_EQ(r.code, 0) << r.output;
        return root / "gen" / "setup_s";
    }();
    return dir;
}

}  // namespace

TEST(Cli, GenerateIsFastAndReproducible) {
    const auto root = test::temp_dir("cli_generate");
    const auto t0 = std::chrono::steady_clock::now();
    const auto a = run_cli("generate --preset medium --pairs 20 --seed 9 --setup-id m --out " + (root / "a").string(),
                           root / "a.log");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ASSERT_EQ(a.code, 0) << a.output;
    EXPECT_LT(secs, 30.0);
    const auto b = run_cli("generate --preset medium --pairs 20 --seed 9 --setup-id m --out " + (root / "b").string(),
                           root / "b.log");
    ASSERT_EQ(b.code, 0) << b.output;
    EXPECT_EQ(read_json(root / "a" / "dataset.json").at("hash"), read_json(root / "b" / "dataset.json").at("hash"));
    const auto rm = read_run_manifest(root / "a");
    EXPECT_EQ(rm.subcommand, "generate");
    EXPECT_FALSE(rm.tool_version.empty());
    EXPECT_EQ(rm.config.at("manifest").at("pair_count"), 20);
}

TEST(Cli, ConfigFileIsUsedAndFlagsOverrideIt) {
    const auto root = test::temp_dir("cli_config");
    std::ofstream(root / "cfg.json") << R"({"preset": "hard", "pairs": 12, "seed": 4, "setup_id": "c"})";
    const auto r = run_cli("generate --config " + (root / "cfg.json").string() + " --pairs 10 --out " +
                               (root / "out").string(),
                           root / "log");
    ASSERT_EQ(r.code, 0) << r.output;
    const auto rm = read_run_manifest(root / "out");
    EXPECT_EQ(rm.config.at("manifest").at("pair_count"), 10);
    EXPECT_EQ(rm.config.at("manifest").at("preset"), "hard");
    EXPECT_TRUE(fs::exists(root / "out" / "setup_c"));
}

TEST(Cli, InvalidInputsExitWithUsageError) {
    const auto root = test::temp_dir("cli_bad");
    std::ofstream(root / "broken.json") << "{ not json";
    std::ofstream(root / "unknown.json") << R"({"envelope": {"k_q": 1}})";
    EXPECT_EQ(run_cli("generate --config " + (root / "broken.json").string(), root / "1.log").code, 1);
    EXPECT_EQ(run_cli("generate --config " + (root / "unknown.json").string() + " --out " + (root / "u").string(),
                      root / "2.log")
                  .code,
              1);
    EXPECT_EQ(run_cli("generate --preset bogus --out " + (root / "p").string(), root / "3.log").code, 1);
    EXPECT_EQ(run_cli("frobnicate", root / "4.log").code, 1);
    EXPECT_EQ(run_cli("train --dataset " + (root / "missing").string() + " --out " + (root / "t").string(),
                      root / "5.log")
                  .code,
              1);
}

TEST(Cli, EvalRejectsMismatchedCheckpoints) {
    const auto root = test::temp_dir("cli_eval");
    const auto data = shared_dataset();
    const ModelGeometry other{{32, 32}, {64, 48}, 4};
    save_checkpoint(root / "small.ckpt", {NeuralSte(ModelVariant::no_refine, other).init(1), std::nullopt, 0, ""});
    const auto r = run_cli("eval --dataset " + data.string() + " --checkpoint " + (root / "small.ckpt").string() +
                               " --out " + (root / "e1").string(),
                           root / "e1.log");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("resolution"), std::string::npos) << r.output;

    const ModelGeometry desk{{64, 64}, {160, 120}, 4};
    save_checkpoint(root / "nr.ckpt", {NeuralSte(ModelVariant::no_refine, desk).init(1), std::nullopt, 0, ""});
    const auto v = run_cli("eval --dataset " + data.string() + " --checkpoint " + (root / "nr.ckpt").string() +
                               " --variant full --out " + (root / "e2").string(),
                           root / "e2.log");
    EXPECT_EQ(v.code, 1);
    EXPECT_NE(v.output.find("no_refine"), std::string::npos) << v.output;

    const auto ok = run_cli("eval --dataset " + data.string() + " --checkpoint " + (root / "nr.ckpt").string() +
                                " --variant no_refine --out " + (root / "e3").string(),
                            root / "e3.log");
    EXPECT_EQ(ok.code, 0) << ok.output;
    EXPECT_TRUE(fs::exists(root / "e3" / "metrics.json"));
}

TEST(Cli, TrainRecordsVariantAndRerunReproducesMetrics) {
    const auto root = test::temp_dir("cli_train");
    const auto data = shared_dataset();
    const auto r = run_cli("train --dataset " + data.string() +
                               " --variant no_refine --iterations 3 --batch-size 2 --seed 5 --out " +
                               (root / "t").string(),
                           root / "t.log");
    ASSERT_EQ(r.code, 0) << r.output;
    const auto rm = read_run_manifest(root / "t");
    EXPECT_EQ(rm.config.at("train").at("variant"), "no_refine");
    EXPECT_EQ(rm.seeds.at("train"), 5);
    EXPECT_TRUE(rm.input_hashes.contains("dataset"));
    EXPECT_TRUE(fs::exists(root / "t" / "final.ckpt"));

    const auto again = run_cli("rerun " + (root / "t" / "run_manifest.json").string() + " --out " + (root / "t2").string(),
                               root / "t2.log");
    ASSERT_EQ(again.code, 0) << again.output;
    EXPECT_EQ(test::file_bytes(root / "t" / "metrics.json"), test::file_bytes(root / "t2" / "metrics.json"));
}

TEST(Cli, ExecuteRejectsUnknownSubcommand) {
    const auto root = test::temp_dir("cli_exec");
    EXPECT_THROW(cli::execute("nope", nlohmann::json::object(), root), std::exception);
}

TEST(Cli, OutputRootFromEnvironment) {
    ::setenv("NSTE_OUTPUT_ROOT", "/tmp/nste_root_probe", 1);
    EXPECT_EQ(cli::output_root(), fs::path("/tmp/nste_root_probe"));
    EXPECT_EQ(cli::default_run_dir("audit", 7).parent_path(), fs::path("/tmp/nste_root_probe"));
    ::unsetenv("NSTE_OUTPUT_ROOT");
    EXPECT_EQ(cli::output_root(), fs::path("nste_runs"));
}
