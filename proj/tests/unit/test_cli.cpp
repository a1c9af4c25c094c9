#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(CROWDNAV_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "crowdnav_unit_cli";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const std::string tiny =
        "--set sensing.rays=16 --set sensing.history=2 --set training.num_envs=2 "
        "--set training.horizon=32 --set training.minibatch=32 --set training.epochs=1 "
        "--set training.total_steps=64 --set reward.max_steps=30";
    train_rc_ = run("train " + tiny + " --out " + (dir_ / "run").string());
  }

  static fs::path dir_;
  static int train_rc_;
};

fs::path Cli::dir_;
int Cli::train_rc_ = -1;

TEST_F(Cli, TrainWritesArtifacts) {
  ASSERT_EQ(train_rc_, 0);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "checkpoint.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "config.cfg"));
}

TEST_F(Cli, EvalLogsReplayAndPlot) {
  ASSERT_EQ(train_rc_, 0);
  const std::string ckpt = (dir_ / "run" / "checkpoint.ckpt").string();
  const fs::path logs = dir_ / "logs";
  ASSERT_EQ(run("eval --checkpoint " + ckpt +
                " --set evaluation.densities=0.0,1.0 --set evaluation.trials_per_density=1"
                " --out " + (dir_ / "report.json").string() + " --log-dir " + logs.string()),
            0);
  int replayed = 0;
  for (const auto& entry : fs::directory_iterator(logs)) {
    EXPECT_EQ(run("replay " + entry.path().string() + " --checkpoint " + ckpt), 0)
        << entry.path();
    ++replayed;
  }
  EXPECT_EQ(replayed, 2);
  EXPECT_EQ(run("plot --report " + (dir_ / "report.json").string() + " --metrics " +
                (dir_ / "run" / "metrics.csv").string() + " --out-dir " +
                (dir_ / "plots").string()),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "plots" / "success.svg"));
  EXPECT_TRUE(fs::exists(dir_ / "plots" / "training.svg"));
}

TEST_F(Cli, ExitCodes) {
  ASSERT_EQ(train_rc_, 0);
  const std::string ckpt = (dir_ / "run" / "checkpoint.ckpt").string();
  EXPECT_EQ(run("nosuch"), 2);
  EXPECT_EQ(run("train --set nosuch.key=1 --out " + (dir_ / "bad").string()), 2);
  EXPECT_EQ(run("eval --checkpoint " + ckpt + " --set sensing.rays=20"), 3);
  std::ofstream(dir_ / "empty.jsonl").close();
  EXPECT_EQ(run("replay " + (dir_ / "empty.jsonl").string()), 2);
  EXPECT_EQ(run("eval --checkpoint " + (dir_ / "missing.ckpt").string()), 2);
}

}  // namespace
