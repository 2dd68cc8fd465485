#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path d = [] {
    const fs::path p = fs::path(::testing::TempDir()) / "rlac_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

int run(const std::string& args) {
  const std::string cmd = "RLAC_OUTPUT_ROOT='" + (work_dir() / "root").string() + "' '" + RLAC_CLI_PATH + "' " + args +
                          " > '" + (work_dir() / "last.log").string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() {
  std::ifstream f(work_dir() / "last.log");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string s; std::getline(f, s);) ++n;
  return n;
}

const std::string kTiny = "--minibatch 32 --n_c 40 --n_u 2 --total_env_steps 240 --checkpoint_interval 2";

}  // namespace

TEST(Cli, UsageAndConfigErrorsExitTwo) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("certify"), 2);
  EXPECT_EQ(run("train --gamma -1"), 2);
  EXPECT_NE(last_log().find("trainer.gamma"), std::string::npos);
  EXPECT_EQ(run("train --no_such_key 3"), 2);
  EXPECT_NE(last_log().find("no_such_key"), std::string::npos);
  EXPECT_EQ(run("train --algo ppo"), 2);
}

TEST(Cli, MissingOrCorruptCheckpointExitsFour) {
  EXPECT_EQ(run("eval impulse --checkpoint '" + (work_dir() / "absent.bin").string() + "'"), 4);
  std::ofstream(work_dir() / "junk.bin") << "definitely not a checkpoint";
  EXPECT_EQ(run("certify --checkpoint '" + (work_dir() / "junk.bin").string() + "'"), 4);
}

TEST(Cli, TrainCertifyEvalPipeline) {
  const fs::path rlac_dir = work_dir() / "rlac";
  ASSERT_EQ(run("train --output_dir '" + rlac_dir.string() + "' " + kTiny), 0) << last_log();
  const fs::path ck = rlac_dir / "seed-1" / "checkpoint.bin";
  ASSERT_TRUE(fs::exists(ck));
  EXPECT_TRUE(fs::exists(rlac_dir / "config.txt"));
  EXPECT_EQ(lines(rlac_dir / "seed-1" / "log.csv"), 1u + 6u);

  const fs::path lqr_dir = work_dir() / "lqr";
  ASSERT_EQ(run("train --algo lqr --output_dir '" + lqr_dir.string() + "'"), 0) << last_log();
  ASSERT_TRUE(fs::exists(lqr_dir / "lqr.ckpt"));
  const nlohmann::json lqr = nlohmann::json::parse(std::ifstream(lqr_dir / "lqr.json"));
  EXPECT_LT(lqr["closed_loop_spectral_radius"].get<double>(), 1.0);

  const fs::path cert = work_dir() / "cert";
  ASSERT_EQ(run("certify --checkpoint '" + ck.string() + "' --episodes 2 --batches 2 --out '" + cert.string() + "'"), 0)
      << last_log();
  const nlohmann::json c = nlohmann::json::parse(std::ifstream(cert / "certificate.json"));
  EXPECT_TRUE(c.contains("drift"));
  EXPECT_EQ(c["batches"]["count"], 2);

  const fs::path imp = work_dir() / "impulse";
  ASSERT_EQ(run("eval impulse --checkpoint '" + ck.string() + "' --checkpoint '" + (lqr_dir / "lqr.ckpt").string() +
                "' --episodes 2 --magnitudes 80,100 --out '" + imp.string() + "'"),
            0)
      << last_log();
  EXPECT_EQ(lines(imp / "impulse.csv"), 1u + 4u);
  EXPECT_TRUE(fs::exists(imp / "impulse_death_rate.svg"));

  const fs::path grid = work_dir() / "grid";
  ASSERT_EQ(run("eval grid --checkpoint '" + (lqr_dir / "lqr.ckpt").string() +
                "' --episodes 2 --lengths 0.5,1.0 --cart-masses 1.0 --out '" + grid.string() + "'"),
            0)
      << last_log();
  EXPECT_EQ(lines(grid / "grid.csv"), 1u + 2u);
  EXPECT_TRUE(fs::exists(grid / "grid_total_cost.svg"));
}

TEST(Cli, ResumeFromIntermediateCheckpoint) {
  const fs::path dir = work_dir() / "short";
  ASSERT_EQ(run("train --algo sac --output_dir '" + dir.string() + "' " + kTiny), 0) << last_log();
  const fs::path ck = dir / "seed-1" / "checkpoint.bin";
  ASSERT_EQ(run("train --resume '" + ck.string() + "'"), 0) << last_log();
  bool found = false;
  for (const auto& e : fs::directory_iterator(work_dir() / "root"))
    if (e.path().filename().string().find("sac-resume") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}
