#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
    static const fs::path dir = [] {
        auto p = fs::temp_directory_path() / "lumiforge_test_cli";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(LUMIFORGE_CLI) + " " + args + " >" + (scratch() / "stdout.txt").string() +
                            " 2>" + (scratch() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST(Cli, HelpExitsZero) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_NE(slurp(scratch() / "stdout.txt").find("optics"), std::string::npos);
    EXPECT_EQ(run("train --help"), 0);
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("optics sweep --d-min 0"), 1);
    EXPECT_EQ(run("optics sweep --d-min 0 --d-max 1 --steps many"), 1);
}

TEST(Cli, RuntimeErrorsExitTwo) {
    EXPECT_EQ(run("optics sweep --d-min 0 --d-max 1 --steps 0"), 2);
    EXPECT_NE(slurp(scratch() / "stderr.txt").find("event=error"), std::string::npos);
    const auto bad = scratch() / "bad.toml";
    std::ofstream(bad) << "[camera]\nn_views = 1\n";
    EXPECT_EQ(run("optics sweep --d-min 0 --d-max 1 --steps 3 --config " + bad.string()), 2);
}

TEST(Cli, OpticsSweepWritesOneRowPerStep) {
    const auto out = scratch() / "sweep.csv";
    ASSERT_EQ(run("optics sweep --d-min 0.1 --d-max 2.0 --steps 20 --out " + out.string()), 0);
    std::ifstream is(out);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "disparity,effective_count");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        if (rows == 20) EXPECT_EQ(line, "2,100");
    }
    EXPECT_EQ(rows, 20u);
}

TEST(Cli, GenThenTrainThenInfer) {
    const auto data = scratch() / "data";
    ASSERT_EQ(run("gen --count 4 --views 3 --pixels 12 --d-min -1 --d-max 1 --seed 5 --out " + data.string()), 0);
    const auto ckpt = scratch() / "net.ckpt";
    const auto cfg = scratch() / "tiny.toml";
    std::ofstream(cfg) << "[network]\nlevels = 1\npre_layers = 1\npre_channels_per_level = 2\nlstm_hidden = 2\n"
                          "post_channels = [2]\npost_kernel = 3\n";
    ASSERT_EQ(run("train --config " + cfg.string() + " --data " + data.string() + " --steps 3 --batch 2 --ckpt-out " +
                  ckpt.string()),
              0)
        << slurp(scratch() / "stderr.txt");
    EXPECT_TRUE(fs::exists(ckpt));
    const auto lr_png = scratch() / "lr.png";
    const auto sr_png = scratch() / "sr.png";
    fs::path first_lr;
    for (const auto& e : fs::recursive_directory_iterator(data))
        if (e.path().extension() == ".png" && e.path().filename().string().find("lr") != std::string::npos) {
            first_lr = e.path();
            break;
        }
    ASSERT_FALSE(first_lr.empty());
    EXPECT_EQ(run("infer --ckpt " + ckpt.string() + " --epi-in " + first_lr.string() + " --epi-out " + sr_png.string()),
              0)
        << slurp(scratch() / "stderr.txt");
    EXPECT_TRUE(fs::exists(sr_png));
    EXPECT_EQ(run("infer --ckpt " + ckpt.string() + " --epi-in " + (scratch() / "missing.png").string() +
                  " --epi-out " + lr_png.string()),
              1);
}
