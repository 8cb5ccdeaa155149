#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stormbench/storage/dataset.hpp"

namespace fs = std::filesystem;
using namespace stormbench;

namespace {

const char* kTinyConfig = R"([simulation]
nu = 1e-3
dt = 1e-2
T = 8
height = 16
width = 16
seed = 3
n_samples = 8

[model]
family = tfno2d
width = 4
n_layers = 2
modes = 2,3
history = 2
lifting = 8

[training]
lr = {lr}
batch_size = 2
total_updates = 2
n_train = 4
n_val = 2
n_test = 2

[evaluation]
stability_steps = 10
)";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("stormbench_cli_" + std::string(info->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        write_config("tiny.cfg", "1e-3");
    }
    void TearDown() override { fs::remove_all(dir); }

    void write_config(const std::string& name, const std::string& lr) {
        std::string text = kTinyConfig;
        text.replace(text.find("{lr}"), 4, lr);
        std::ofstream(dir / name) << text;
    }

    int run(const std::string& args) {
        const std::string cmd = "cd '" + dir.string() + "' && STORMBENCH_WORKERS=1 '" STORMBENCH_CLI "' " + args +
                                " > out.txt 2> err.txt";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string out() const { return slurp(dir / "out.txt"); }

    nlohmann::json manifest(const std::string& rel) const { return nlohmann::json::parse(slurp(dir / rel)); }

    void generate() { ASSERT_EQ(run("generate --config tiny.cfg --out d.dwb"), 0) << slurp(dir / "err.txt"); }
};

}  // namespace

TEST_F(Cli, GenerateZeroSamplesIsConfigError) { EXPECT_EQ(run("generate --config tiny.cfg --out d.dwb --samples 0"), 2); }

TEST_F(Cli, UnknownFlagIsConfigError) { EXPECT_EQ(run("generate --config tiny.cfg --out d.dwb --bogus 1"), 2); }

TEST_F(Cli, GenerateWritesDatasetAndSummary) {
    generate();
    DatasetReader r((dir / "d.dwb").string());
    EXPECT_EQ(r.size(), 8u);
    EXPECT_EQ(r.header().T, 8u);
    EXPECT_EQ(r.header().H, 16u);
    EXPECT_NE(out().find("enstrophy"), std::string::npos);
    EXPECT_NE(out().find("divergence"), std::string::npos);
    const auto m = manifest("d.dwb.manifest.json");
    EXPECT_EQ(m["status"], "complete");
    EXPECT_TRUE(m.contains("build"));
}

TEST_F(Cli, GenerateSameSeedByteIdentical) {
    ASSERT_EQ(run("generate --config tiny.cfg --out a.dwb --seed 11 --samples 3"), 0);
    ASSERT_EQ(run("generate --config tiny.cfg --out b.dwb --seed 11 --samples 3"), 0);
    EXPECT_EQ(slurp(dir / "a.dwb"), slurp(dir / "b.dwb"));
    ASSERT_EQ(run("generate --config tiny.cfg --out c.dwb --seed 12 --samples 3"), 0);
    EXPECT_NE(slurp(dir / "a.dwb"), slurp(dir / "c.dwb"));
}

TEST_F(Cli, GenerateRerunSkips) {
    generate();
    generate();
    EXPECT_NE(out().find("up to date"), std::string::npos);
}

TEST_F(Cli, GenerateBlowUpExitsThree) {
    std::string text = slurp(dir / "tiny.cfg");
    text.replace(text.find("dt = 1e-2"), 9, "dt = 0.5");
    text.replace(text.find("nu = 1e-3"), 9, "nu = 1e-9");
    text.replace(text.find("T = 8"), 5, "T = 40");
    std::ofstream(dir / "blow.cfg") << text;
    EXPECT_EQ(run("generate --config blow.cfg --out b.dwb --samples 1"), 3);
}

TEST_F(Cli, TrainOneCell) {
    generate();
    ASSERT_EQ(run("train --config tiny.cfg --data d.dwb --model tfno2d --budget 1k --seed 0 --out run"), 0);
    const auto m = manifest("run/manifest.json");
    ASSERT_EQ(m["cells"].size(), 1u);
    const auto& cell = m["cells"]["tfno2d-1k-s0"];
    EXPECT_EQ(cell["status"], "done");
    EXPECT_TRUE(fs::exists(cell["checkpoint"].get<std::string>()) ||
                fs::exists(dir / cell["checkpoint"].get<std::string>()));
    const std::string hist = slurp(dir / "run/tfno2d-1k-s0/history_updates.csv");
    EXPECT_EQ(hist.rfind("update,loss,lr\n", 0), 0u);
    EXPECT_EQ(count(hist, "\n"), 3u);
}

TEST_F(Cli, SweepCardinalityUnreachableAndResume) {
    generate();
    ASSERT_EQ(run("sweep --config tiny.cfg --data d.dwb --model tfno2d,unet --budgets 1k,1500,2k --seeds 3 --out sw"), 0);
    const auto m = manifest("sw/manifest.json");
    ASSERT_EQ(m["cells"].size(), 18u);
    std::size_t done = 0, unreachable = 0;
    for (const auto& [id, c] : m["cells"].items()) {
        if (c["status"] == "done") ++done;
        if (c["status"] == "unreachable") ++unreachable;
    }
    EXPECT_EQ(done, 9u);
    EXPECT_EQ(unreachable, 9u);

    ASSERT_EQ(run("sweep --config tiny.cfg --data d.dwb --model tfno2d,unet --budgets 1k,1500,2k --seeds 3 --out sw"), 0);
    EXPECT_EQ(count(out(), "skipped"), 18u);
    EXPECT_EQ(out().find("parameters"), std::string::npos);

    ASSERT_EQ(run("report --sweep-dir sw"), 0);
    const std::string summary = slurp(dir / "sw/report/summary.csv");
    EXPECT_EQ(count(summary, "\n"), 1u + 9u + 1u);
    const std::string svg = slurp(dir / "sw/report/rmse_vs_params.svg");
    EXPECT_EQ(count(svg, "<circle"), 3u);
    EXPECT_GE(count(svg, "<polygon"), 1u);
    EXPECT_TRUE(fs::exists(dir / "sw/report/ranking.csv"));
    EXPECT_TRUE(fs::exists(dir / "sw/report/lead.csv"));
}

TEST_F(Cli, EvalTwiceIsByteIdentical) {
    generate();
    ASSERT_EQ(run("train --config tiny.cfg --data d.dwb --model tfno2d --budget 1k --out run"), 0);
    ASSERT_EQ(run("eval --ckpt run/tfno2d-1k-s0/model.ckpt --data d.dwb --report r1"), 0);
    ASSERT_EQ(run("eval --ckpt run/tfno2d-1k-s0/model.ckpt --data d.dwb --report r2"), 0);
    for (const char* f : {"lead.csv", "summary.csv", "rmse_vs_lead.svg"})
        EXPECT_EQ(slurp(dir / "r1" / f), slurp(dir / "r2" / f)) << f;
}

TEST_F(Cli, MissingCheckpointExitsFive) {
    generate();
    EXPECT_EQ(run("eval --ckpt nowhere/model.ckpt --data d.dwb --report r"), 5);
    EXPECT_EQ(run("eval --sweep-dir nowhere --data d.dwb --report r"), 5);
}

TEST_F(Cli, PersistenceEvalHasZeroParams) {
    generate();
    ASSERT_EQ(run("eval --model persistence --data d.dwb --report p"), 0);
    const std::string summary = slurp(dir / "p/summary.csv");
    EXPECT_NE(summary.find("\npersistence,0,"), std::string::npos);
}

TEST_F(Cli, AllSeedsUnstableExitsFour) {
    generate();
    write_config("hot.cfg", "1e6");
    EXPECT_EQ(run("sweep --config hot.cfg --data d.dwb --model tfno2d --budgets 1k --seeds 2 --out sw"), 4);
    const auto m = manifest("sw/manifest.json");
    for (const auto& [id, c] : m["cells"].items()) EXPECT_EQ(c["status"], "unstable") << id;
}

TEST_F(Cli, BenchPrintsTiming) {
    generate();
    ASSERT_EQ(run("bench --config tiny.cfg --data d.dwb --model tfno2d --budget 1k --batch 2 --out b.csv"), 0);
    EXPECT_NE(out().find("s/epoch"), std::string::npos);
    EXPECT_EQ(slurp(dir / "b.csv").rfind("model,params,batch,", 0), 0u);
}
