#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "rlac/io/checkpoint.hpp"
#include "rlac/io/config.hpp"
#include "rlac/io/json_reports.hpp"

using namespace rlac;
using namespace rlac::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::path(::testing::TempDir()) / ("rlac_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

train::TrainerConfig tiny_trainer() {
  train::TrainerConfig c;
  c.minibatch = 32;
  c.collect_steps = 40;
  c.update_rounds = 2;
  c.total_env_steps = 480;
  return c;
}

std::string expect_config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.key;
  }
  ADD_FAILURE() << "no ConfigError";
  return "";
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config_text("");
  EXPECT_EQ(c.algorithm, "rlac");
  EXPECT_EQ(c.trainer.minibatch, 256u);
  EXPECT_DOUBLE_EQ(c.trainer.gamma, 0.995);
  EXPECT_EQ(c.trainer.horizon, 10);
  EXPECT_EQ(c.env.max_steps, 250);
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{1});
}

TEST(Config, FileKeysOverridesAndComments) {
  const RunConfig c = parse_config_text(
      "# run\n"
      "algo = sac\n"
      "env.l = 0.8   # longer pole\n"
      "trainer.tau = 0.01\n"
      "seeds = 1,2,3\n"
      "gamma = 0.99\n",
      {{"env.l", "1.1"}, {"minibatch", "64"}});
  EXPECT_EQ(c.algorithm, "sac");
  EXPECT_DOUBLE_EQ(c.env.half_pole_length, 1.1);
  EXPECT_DOUBLE_EQ(c.trainer.tau, 0.01);
  EXPECT_DOUBLE_EQ(c.trainer.gamma, 0.99);
  EXPECT_EQ(c.trainer.minibatch, 64u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(expect_config_error([] { parse_config_text("gamma = -1"); }), "trainer.gamma");
  EXPECT_EQ(expect_config_error([] { parse_config_text("trainer.gamma = 2"); }), "trainer.gamma");
  EXPECT_EQ(expect_config_error([] { parse_config_text("bogus = 1"); }), "bogus");
  EXPECT_EQ(expect_config_error([] { parse_config_text("env.nope = 1"); }), "env.nope");
  EXPECT_EQ(expect_config_error([] { parse_config_text("env.l = abc"); }), "env.l");
  EXPECT_EQ(expect_config_error([] { parse_config_text("algo = ppo"); }), "algo");
  EXPECT_EQ(expect_config_error([] { parse_config_text("minibatch = -3"); }), "trainer.minibatch");
  EXPECT_EQ(expect_config_error([] { parse_config_text("just words"); }), "config:1");
  EXPECT_THROW(parse_config("/nonexistent/dir/run.cfg"), IoError);
}

TEST(Config, TextRoundTripAndHash) {
  RunConfig c = parse_config_text("env.m_c = 1.7\ntrainer.actor_lr = 3.3e-5\ndisturber_enabled = false\n");
  const RunConfig back = parse_config_text(to_text(c));
  EXPECT_EQ(to_text(back), to_text(c));
  EXPECT_EQ(back.env, c.env);
  EXPECT_EQ(config_hash(back), config_hash(c));
  RunConfig moved = c;
  moved.output_dir = "elsewhere";
  moved.seeds = {9};
  EXPECT_EQ(config_hash(moved), config_hash(c));
  moved.trainer.tau = 0.02;
  EXPECT_NE(config_hash(moved), config_hash(c));
}

TEST(Config, FileOnDisk) {
  const fs::path d = scratch("cfg");
  std::ofstream(d / "run.cfg") << "env.l = 0.9\n";
  EXPECT_DOUBLE_EQ(parse_config(d / "run.cfg").env.half_pole_length, 0.9);
  EXPECT_DOUBLE_EQ(parse_config(d / "run.cfg", {{"env.l", "0.3"}}).env.half_pole_length, 0.3);
  fs::remove_all(d);
}

TEST(Archive, RoundTripAndErrors) {
  Archive a;
  a.meta["kind"] = "test";
  a.put("xs", std::vector<double>{1.5, -2.0, 1e-300});
  a.put_u64("ns", std::vector<std::uint64_t>{0, ~0ULL});
  a.put("one", 3.25);
  const std::string bytes = a.serialize();
  const Archive b = Archive::deserialize(bytes);
  EXPECT_EQ(b.get("xs"), a.get("xs"));
  EXPECT_EQ(b.get_u64("ns"), a.get_u64("ns"));
  EXPECT_EQ(b.scalar("one"), 3.25);
  EXPECT_EQ(b.meta["kind"], "test");
  EXPECT_THROW(b.get("ns"), IoError);
  EXPECT_THROW(b.get("missing"), IoError);

  EXPECT_THROW(Archive::deserialize(bytes.substr(0, bytes.size() - 5)), IoError);
  EXPECT_THROW(Archive::deserialize(bytes.substr(0, 10)), IoError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(Archive::deserialize(bad_magic), IoError);
  std::string bad_version = bytes;
  bad_version[8] = 7;
  EXPECT_THROW(Archive::deserialize(bad_version), IoError);
  std::string flipped = bytes;
  flipped[bytes.size() - 20] ^= 0x40;
  EXPECT_THROW(Archive::deserialize(flipped), IoError);
}

TEST(Checkpoint, RlacResumeContinuesTheSameRun) {
  const fs::path d = scratch("resume");
  train::RlacTrainer full(tiny_trainer(), env::CartpoleParams{}, 4);
  full.train();

  train::RlacTrainer first(tiny_trainer(), env::CartpoleParams{}, 4);
  for (int i = 0; i < 5; ++i) first.run_iteration();
  save_checkpoint(d / "ck.bin", first.state());
  train::RlacTrainer resumed(load_rlac_checkpoint(d / "ck.bin"));
  EXPECT_EQ(resumed.state().iteration, 5u);
  resumed.train();

  EXPECT_EQ(resumed.log(), full.log());
  EXPECT_EQ(resumed.state().bundle.actor.net().weight(2).data, full.state().bundle.actor.net().weight(2).data);
  EXPECT_EQ(resumed.state().bundle.lambda, full.state().bundle.lambda);
  EXPECT_FALSE(fs::exists(d / "ck.bin.tmp"));
  fs::remove_all(d);
}

TEST(Checkpoint, SacResumeContinuesTheSameRun) {
  const fs::path d = scratch("sac");
  baselines::SacTrainer full(tiny_trainer(), env::CartpoleParams{}, 2);
  full.train();
  baselines::SacTrainer first(tiny_trainer(), env::CartpoleParams{}, 2);
  for (int i = 0; i < 7; ++i) first.run_iteration();
  save_checkpoint(d / "ck.bin", first.state());
  baselines::SacTrainer resumed(load_sac_checkpoint(d / "ck.bin"));
  resumed.train();
  EXPECT_EQ(resumed.log(), full.log());
  EXPECT_EQ(resumed.bundle().q2.weight(0).data, full.bundle().q2.weight(0).data);
  EXPECT_THROW(load_rlac_checkpoint(d / "ck.bin"), IoError);
  fs::remove_all(d);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const fs::path d = scratch("corrupt");
  train::RlacTrainer t(tiny_trainer(), env::CartpoleParams{}, 1);
  t.run_iteration();
  save_checkpoint(d / "ck.bin", t.state());
  std::string bytes = read_file(d / "ck.bin");
  std::ofstream(d / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_rlac_checkpoint(d / "short.bin"), IoError);
  EXPECT_THROW(load_rlac_checkpoint(d / "absent.bin"), IoError);

  // A hand-edited config no longer matches its hash.
  Archive a = Archive::load(d / "ck.bin");
  a.meta["config"] = a.meta["config"].get<std::string>() + "env.l = 0.9\n";
  a.save(d / "edited.bin");
  EXPECT_THROW(load_rlac_checkpoint(d / "edited.bin"), IoError);
  fs::remove_all(d);
}

TEST(Checkpoint, LqrArchiveRoundTrip) {
  env::CartpoleParams p;
  p.half_pole_length = 0.7;
  const baselines::LqrController c = baselines::make_lqr(p);
  const Archive a = Archive::deserialize(to_archive(c, p).serialize());
  EXPECT_EQ(checkpoint_kind(a), "lqr");
  env::CartpoleParams q;
  const baselines::LqrController back = lqr_from_archive(a, &q);
  EXPECT_EQ(back.K, c.K);
  EXPECT_EQ(back.A, c.A);
  EXPECT_EQ(back.Q, c.Q);
  EXPECT_EQ(q, p);
  const nlohmann::json j = to_json(back);
  EXPECT_LT(j["closed_loop_spectral_radius"].get<double>(), 1.0);
  EXPECT_EQ(j["K"][0].size(), 4u);
}

TEST(JsonReport, CertificateFields) {
  certify::CertificateReport r;
  r.drift.margin.mean = -0.5;
  r.batches.batches = 4;
  r.batches.passed = 3;
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j["drift"]["margin"]["mean"], -0.5);
  EXPECT_EQ(j["batches"]["pass_fraction"], 0.75);
  EXPECT_EQ(j["config"]["eta"], 1.0);
  EXPECT_FALSE(j["pass"].get<bool>());
}
