#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlac/baselines/lqr.hpp"
#include "rlac/eval/harness.hpp"
#include "rlac/eval/report.hpp"

using namespace rlac;
using namespace rlac::eval;
namespace fs = std::filesystem;

namespace {

Controller lqr_controller(std::uint64_t seed = 0) {
  const auto c = std::make_shared<baselines::LqrController>(baselines::make_lqr(env::CartpoleParams{}));
  return {"lqr", seed, [c](const env::StateVec& s) { return baselines::lqr_act(*c, s); }};
}

Controller idle_controller() {
  return {"idle", 0, [](const env::StateVec&) { return 0.0; }};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::path(::testing::TempDir()) / ("rlac_eval_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Impulse, ForcePointsAwayFromOrigin) {
  EXPECT_EQ(impulse_force(1.5, 80), 80);
  EXPECT_EQ(impulse_force(-0.1, 80), -80);
  EXPECT_EQ(impulse_force(0.0, 80), 80);
}

TEST(Impulse, EpisodeMatchesHandLoop) {
  const env::CartpoleParams p;
  const Controller c = lqr_controller();
  Rng reset_rng(3);
  const Impulse imp{100, 90};
  const EpisodeOutcome o = run_episode(p, c, reset_rng, &imp);
  env::CartpoleState s = env::reset(p, reset_rng);
  double total = 0.0;
  bool died = false;
  while (!s.done) {
    const double w = s.step == 100 ? (s.x < 0 ? -90.0 : 90.0) : 0.0;
    const env::StepResult r = env::step(p, s, c.act(s.vec()), w);
    total += r.cost;
    died = r.died;
    s = r.state;
  }
  EXPECT_DOUBLE_EQ(o.total_cost, total);
  EXPECT_EQ(o.died, died);
  EXPECT_EQ(o.length, s.step);
}

TEST(Impulse, ZeroMagnitudeEqualsNominalRun) {
  const Controller cs[] = {lqr_controller()};
  ImpulseProtocol proto;
  proto.magnitudes = {0.0};
  proto.episodes = 20;
  GridProtocol grid;
  grid.lengths = {0.5};
  grid.cart_masses = {1.0};
  grid.episodes = 20;
  const auto imp = run_impulse(cs, proto, env::CartpoleParams{}, 99);
  const auto nom = run_grid(cs, grid, env::CartpoleParams{}, 99);
  ASSERT_EQ(imp.size(), 1u);
  ASSERT_EQ(nom.size(), 1u);
  EXPECT_EQ(imp[0].deaths, nom[0].deaths);
  EXPECT_DOUBLE_EQ(imp[0].mean_total_cost, nom[0].mean_total_cost);
}

TEST(Impulse, HugeImpulseKillsEveryEpisode) {
  const Controller cs[] = {lqr_controller()};
  ImpulseProtocol proto;
  proto.magnitudes = {1e6};
  proto.episodes = 20;
  const auto r = run_impulse(cs, proto, env::CartpoleParams{}, 1);
  EXPECT_EQ(r[0].death_rate, 1.0);
  EXPECT_EQ(r[0].deaths, 20u);
}

TEST(Impulse, RecordsCarryProtocolPoints) {
  const Controller cs[] = {lqr_controller(1), idle_controller()};
  ImpulseProtocol proto;
  proto.episodes = 4;
  const auto r = run_impulse(cs, proto, env::CartpoleParams{}, 1);
  ASSERT_EQ(r.size(), 10u);
  EXPECT_EQ(r[0].controller, "lqr");
  EXPECT_EQ(r[0].seed, 1u);
  EXPECT_EQ(r[4].magnitude, 120.0);
  EXPECT_EQ(r[5].controller, "idle");
  EXPECT_EQ(r[5].death_rate, 1.0);  // an unactuated pole falls before the push
  EXPECT_EQ(ImpulseProtocol::full().episodes, 500u);
}

TEST(Grid, FullGridDimensions) {
  const GridProtocol g = GridProtocol::full();
  ASSERT_EQ(g.lengths.size(), 19u);
  ASSERT_EQ(g.cart_masses.size(), 9u);
  EXPECT_DOUBLE_EQ(g.lengths.front(), 0.2);
  EXPECT_DOUBLE_EQ(g.lengths.back(), 2.0);
  EXPECT_DOUBLE_EQ(g.cart_masses.front(), 0.4);
  EXPECT_DOUBLE_EQ(g.cart_masses.back(), 2.0);
  const GridProtocol d = GridProtocol::desk();
  EXPECT_NE(std::find(d.lengths.begin(), d.lengths.end(), 0.5), d.lengths.end());
  EXPECT_NE(std::find(d.cart_masses.begin(), d.cart_masses.end(), 1.0), d.cart_masses.end());
}

TEST(Grid, CellsUseTheirOwnDynamics) {
  const Controller cs[] = {idle_controller()};
  GridProtocol g;
  g.lengths = {0.2, 2.0};
  g.cart_masses = {1.0};
  g.episodes = 6;
  const auto r = run_grid(cs, g, env::CartpoleParams{}, 5);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].length, 0.2);
  EXPECT_EQ(r[1].length, 2.0);
  EXPECT_NE(r[0].mean_total_cost, r[1].mean_total_cost);
  EXPECT_EQ(r[0].experiment, Experiment::kGrid);
}

TEST(Grid, CommonInitialStatesAcrossPoints) {
  // The first episode of every point starts from reset stream 0.
  const env::CartpoleParams p;
  const Rng root = Rng(7).substream("eval");
  Rng a = root.substream(0), b = root.substream(0);
  EXPECT_EQ(env::reset(p, a), env::reset(p, b));
}

TEST(Summary, MeanAndSampleSdAcrossSeeds) {
  std::vector<EvalRecord> rs;
  for (int s = 0; s < 3; ++s) {
    EvalRecord r;
    r.controller = "x";
    r.seed = s;
    r.magnitude = 80;
    r.episodes = 10;
    r.deaths = s * 2;
    r.death_rate = s * 0.2;
    r.mean_total_cost = 10.0 * s;
    rs.push_back(r);
  }
  const auto out = summarize(rs);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].mean_death_rate, 0.2, 1e-15);
  EXPECT_NEAR(out[0].sd_death_rate, 0.2, 1e-15);
  EXPECT_NEAR(out[0].mean_total_cost, 10.0, 1e-15);
  EXPECT_EQ(out[0].deaths, 6u);
  EXPECT_EQ(out[0].episodes, 30u);
  EXPECT_EQ(out[0].seeds, 3u);
}

TEST(Reports, CsvRowCountsAndPlots) {
  const Controller cs[] = {lqr_controller(1), lqr_controller(2)};
  ImpulseProtocol proto;
  proto.magnitudes = {80, 120};
  proto.episodes = 3;
  const auto imp = run_impulse(cs, proto, env::CartpoleParams{}, 1);
  GridProtocol g;
  g.lengths = {0.5, 1.0};
  g.cart_masses = {1.0, 2.0};
  g.episodes = 2;
  const auto grid = run_grid(cs, g, env::CartpoleParams{}, 1);
  const fs::path dir = scratch_dir("rows");
  const auto wi = emit_reports(Experiment::kImpulse, imp, dir);
  const auto wg = emit_reports(Experiment::kGrid, grid, dir);
  ASSERT_EQ(wi.size(), 2u);
  ASSERT_EQ(wg.size(), 3u);
  const std::string icsv = slurp(dir / "impulse.csv");
  EXPECT_EQ(line_count(icsv), 1u + 4u);
  EXPECT_EQ(icsv.substr(0, icsv.find('\n')), "controller,seed,magnitude,episodes,deaths,death_rate,mean_total_cost");
  const std::string gcsv = slurp(dir / "grid.csv");
  EXPECT_EQ(line_count(gcsv), 1u + 8u);
  EXPECT_EQ(gcsv.substr(0, gcsv.find('\n')), "controller,seed,l,m_c,episodes,deaths,death_rate,mean_total_cost");
  EXPECT_NE(slurp(dir / "impulse_death_rate.svg").find("<svg"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "grid_death_rate.svg"));
  EXPECT_TRUE(fs::exists(dir / "grid_total_cost.svg"));
  fs::remove_all(dir);
}

TEST(Reports, EmptyRecordsGiveHeaderOnly) {
  const fs::path dir = scratch_dir("empty");
  const auto w = emit_reports(Experiment::kGrid, std::vector<EvalRecord>{}, dir);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(line_count(slurp(dir / "grid.csv")), 1u);
  EXPECT_FALSE(fs::exists(dir / "grid_death_rate.svg"));
  fs::remove_all(dir);
}

TEST(Reports, ReEmissionIsByteIdentical) {
  const Controller cs[] = {lqr_controller(3)};
  ImpulseProtocol proto;
  proto.episodes = 2;
  const auto recs = run_impulse(cs, proto, env::CartpoleParams{}, 4);
  std::vector<EvalRecord> reversed(recs.rbegin(), recs.rend());
  const fs::path a = scratch_dir("a"), b = scratch_dir("b");
  emit_reports(Experiment::kImpulse, recs, a);
  emit_reports(Experiment::kImpulse, reversed, b);
  EXPECT_EQ(slurp(a / "impulse.csv"), slurp(b / "impulse.csv"));
  EXPECT_EQ(slurp(a / "impulse_death_rate.svg"), slurp(b / "impulse_death_rate.svg"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Reports, UnwritablePathIsAnIoError) {
  const fs::path dir = scratch_dir("blocked");
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_reports(Experiment::kGrid, std::vector<EvalRecord>{}, dir / "file" / "sub"), IoError);
  fs::remove_all(dir);
}
