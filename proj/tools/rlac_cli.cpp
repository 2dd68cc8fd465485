// Command-line front end: train, eval impulse, eval grid, certify.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "rlac/certify/certifier.hpp"
#include "rlac/eval/harness.hpp"
#include "rlac/eval/report.hpp"
#include "rlac/io/checkpoint.hpp"
#include "rlac/io/config.hpp"
#include "rlac/io/json_reports.hpp"

namespace fs = std::filesystem;
using namespace rlac;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3, kIo = 4 };

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path output_root() {
  const char* env = std::getenv("RLAC_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

// A fresh timestamped directory under the output root, or `explicit_dir`.
fs::path make_run_dir(const std::string& explicit_dir, const std::string& label) {
  fs::path dir = explicit_dir.empty() ? output_root() / (timestamp() + "-" + label) : fs::path(explicit_dir);
  if (explicit_dir.empty()) {
    for (int k = 1; fs::exists(dir); ++k) dir = output_root() / (timestamp() + "-" + label + "-" + std::to_string(k));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

// "--key value" and "--key=value" pairs left over after option parsing.
std::vector<std::pair<std::string, std::string>> override_pairs(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0) throw ConfigError(a, "unexpected argument");
    const std::string body = a.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError(body, "missing value");
      out.emplace_back(body, extras[++i]);
    }
  }
  return out;
}

std::string log_csv(const std::vector<train::LogRow>& log) {
  std::string out =
      "iteration,env_steps,mean_return,death_rate,mean_delta_l,lambda,beta,entropy,critic_loss,policy_loss,"
      "disturber_objective\n";
  for (const auto& r : log) {
    out += std::to_string(r.iteration) + "," + std::to_string(r.env_steps);
    for (double v : {r.mean_return, r.death_rate, r.mean_delta_l, r.lambda, r.beta, r.entropy, r.critic_loss,
                     r.policy_loss, r.disturber_objective})
      out += "," + eval::fmt(v);
    out += "\n";
  }
  return out;
}

void print_row(const std::string& algo, std::uint64_t seed, const train::LogRow& r) {
  std::printf("[%s seed %llu] it %llu steps %llu return %.2f deaths %.2f dL %.3f mult %.3f/%.3f entropy %.2f\n",
              algo.c_str(), static_cast<unsigned long long>(seed), static_cast<unsigned long long>(r.iteration),
              static_cast<unsigned long long>(r.env_steps), r.mean_return, r.death_rate, r.mean_delta_l, r.lambda,
              r.beta, r.entropy);
  std::fflush(stdout);
}

template <class Trainer>
void run_trainer(Trainer& trainer, const std::string& algo, std::uint64_t seed, std::uint64_t interval,
                 const fs::path& seed_dir) {
  trainer.train([&](const train::LogRow& row) {
    if (row.iteration % 50 == 0) print_row(algo, seed, row);
    if (interval > 0 && (row.iteration + 1) % interval == 0)
      io::save_checkpoint(seed_dir / "checkpoint.bin", trainer.state());
  });
  io::save_checkpoint(seed_dir / "checkpoint.bin", trainer.state());
  eval::write_text(seed_dir / "log.csv", log_csv(trainer.log()));
  if (!trainer.log().empty()) print_row(algo, seed, trainer.log().back());
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& extras, const std::string& resume) {
  if (!resume.empty()) {
    const io::Archive ar = io::Archive::load(resume);
    const std::string kind = io::checkpoint_kind(ar);
    const fs::path dir = make_run_dir("", kind + "-resume");
    if (kind == "rlac") {
      train::RlacTrainer t(io::rlac_from_archive(ar));
      const io::RunConfig rc = io::codec::get_header(ar, kind);
      eval::write_text(dir / "config.txt", io::to_text(rc));
      run_trainer(t, kind, t.state().seed, rc.checkpoint_interval, dir);
    } else if (kind == "sac") {
      baselines::SacTrainer t(io::sac_from_archive(ar));
      const io::RunConfig rc = io::codec::get_header(ar, kind);
      eval::write_text(dir / "config.txt", io::to_text(rc));
      run_trainer(t, kind, t.state().seed, rc.checkpoint_interval, dir);
    } else {
      throw ConfigError("resume", "checkpoint kind '" + kind + "' cannot be resumed");
    }
    std::printf("run directory: %s\n", dir.string().c_str());
    return kOk;
  }

  const io::RunConfig cfg = io::parse_config(config_path, override_pairs(extras));
  const fs::path dir = make_run_dir(cfg.output_dir, cfg.algorithm);
  eval::write_text(dir / "config.txt", io::to_text(cfg));

  if (cfg.algorithm == "lqr") {
    const baselines::LqrController c = baselines::make_lqr(cfg.env);
    io::to_archive(c, cfg.env).save(dir / "lqr.ckpt");
    eval::write_text(dir / "lqr.json", io::to_json(c).dump(2) + "\n");
    std::printf("LQR gain K = [%g %g %g %g], closed-loop spectral radius %.6f\n", c.K(0), c.K(1), c.K(2), c.K(3),
                baselines::closed_loop_radius(c));
  } else {
    for (std::uint64_t seed : cfg.seeds) {
      const fs::path seed_dir = dir / ("seed-" + std::to_string(seed));
      if (cfg.algorithm == "rlac") {
        train::RlacTrainer t(cfg.trainer, cfg.env, seed);
        run_trainer(t, cfg.algorithm, seed, cfg.checkpoint_interval, seed_dir);
      } else {
        baselines::SacTrainer t(cfg.trainer, cfg.env, seed);
        run_trainer(t, cfg.algorithm, seed, cfg.checkpoint_interval, seed_dir);
      }
    }
  }
  std::printf("run directory: %s\n", dir.string().c_str());
  return kOk;
}

struct LoadedController {
  eval::Controller controller;
  env::CartpoleParams params;
};

LoadedController load_controller(const std::string& path) {
  const io::Archive ar = io::Archive::load(path);
  const std::string kind = io::checkpoint_kind(ar);
  LoadedController out;
  if (kind == "rlac") {
    const train::RlacState st = io::rlac_from_archive(ar);
    out.params = st.env;
    out.controller = {"rlac", st.seed, [actor = st.bundle.actor](const env::StateVec& s) { return actor.act_deterministic(s); }};
  } else if (kind == "sac") {
    const baselines::SacState st = io::sac_from_archive(ar);
    out.params = st.env;
    out.controller = {"sac", st.seed, [actor = st.bundle.actor](const env::StateVec& s) { return actor.act_deterministic(s); }};
  } else if (kind == "lqr") {
    const baselines::LqrController c = io::lqr_from_archive(ar, &out.params);
    out.controller = {"lqr", 0, [c](const env::StateVec& s) { return baselines::lqr_act(c, s); }};
  } else {
    throw IoError(path + ": unknown checkpoint kind '" + kind + "'");
  }
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const std::string t = io::detail::trim(item);
    if (!t.empty()) out.push_back(io::detail::parse_double(key, t));
  }
  return out;
}

struct EvalOptions {
  std::vector<std::string> checkpoints;
  std::string out_dir;
  std::uint64_t eval_seed = 2024;
  std::size_t episodes = 0;  // 0: protocol default
  bool full_scale = false;
  std::string magnitudes;
  std::string lengths, cart_masses;
};

std::vector<LoadedController> load_all(const EvalOptions& o, env::CartpoleParams& nominal) {
  std::vector<LoadedController> out;
  for (const auto& p : o.checkpoints) out.push_back(load_controller(p));
  nominal = out.front().params;
  for (const auto& c : out)
    if (!(c.params == nominal)) throw ConfigError("checkpoint", "checkpoints were trained on different environments");
  return out;
}

void print_summary(std::span<const eval::EvalRecord> records, bool grid) {
  for (const eval::PointSummary& p : eval::summarize(records)) {
    if (grid) {
      std::printf("%-5s l %.2f m_c %.2f: death rate %.3f +- %.3f, total cost %.2f (%zu seeds)\n", p.controller.c_str(),
                  p.length, p.cart_mass, p.mean_death_rate, p.sd_death_rate, p.mean_total_cost, p.seeds);
    } else {
      std::printf("%-5s magnitude %6.1f: death rate %.3f +- %.3f (%zu seeds)\n", p.controller.c_str(), p.magnitude,
                  p.mean_death_rate, p.sd_death_rate, p.seeds);
    }
  }
}

int cmd_eval_impulse(const EvalOptions& o) {
  env::CartpoleParams nominal;
  const auto loaded = load_all(o, nominal);
  eval::ImpulseProtocol proto = o.full_scale ? eval::ImpulseProtocol::full() : eval::ImpulseProtocol{};
  if (o.episodes > 0) proto.episodes = o.episodes;
  if (!o.magnitudes.empty()) proto.magnitudes = parse_list("magnitudes", o.magnitudes);
  std::vector<eval::Controller> cs;
  for (const auto& l : loaded) cs.push_back(l.controller);
  const auto records = eval::run_impulse(cs, proto, nominal, o.eval_seed);
  const fs::path dir = make_run_dir(o.out_dir, "eval-impulse");
  for (const auto& p : eval::emit_reports(eval::Experiment::kImpulse, records, dir)) std::printf("wrote %s\n", p.string().c_str());
  print_summary(records, false);
  return kOk;
}

int cmd_eval_grid(const EvalOptions& o) {
  env::CartpoleParams nominal;
  const auto loaded = load_all(o, nominal);
  eval::GridProtocol proto = o.full_scale ? eval::GridProtocol::full() : eval::GridProtocol::desk();
  if (o.episodes > 0) proto.episodes = o.episodes;
  if (!o.lengths.empty()) proto.lengths = parse_list("lengths", o.lengths);
  if (!o.cart_masses.empty()) proto.cart_masses = parse_list("cart_masses", o.cart_masses);
  std::vector<eval::Controller> cs;
  for (const auto& l : loaded) cs.push_back(l.controller);
  const auto records = eval::run_grid(cs, proto, nominal, o.eval_seed);
  const fs::path dir = make_run_dir(o.out_dir, "eval-grid");
  for (const auto& p : eval::emit_reports(eval::Experiment::kGrid, records, dir)) std::printf("wrote %s\n", p.string().c_str());
  print_summary(records, true);
  return kOk;
}

int cmd_certify(const std::string& checkpoint, const certify::CertificateConfig& cfg, const std::string& out_dir) {
  const io::Archive ar = io::Archive::load(checkpoint);
  if (io::checkpoint_kind(ar) != "rlac")
    throw ConfigError("checkpoint", "certify needs an rlac checkpoint, got '" + io::checkpoint_kind(ar) + "'");
  const train::RlacState st = io::rlac_from_archive(ar);
  const certify::CertificateReport rep = certify::certify(st.bundle, st.env, cfg);
  const fs::path dir = make_run_dir(out_dir, "certify");
  eval::write_text(dir / "certificate.json", io::to_json(rep).dump(2) + "\n");
  std::printf("drift margin %.4f (95%% CI %.4f .. %.4f) = drift %.4f - gain %.4f + cost %.4f over %zu states\n",
              rep.drift.margin.mean, rep.drift.margin.ci_low, rep.drift.margin.ci_high, rep.drift.drift_term,
              rep.drift.gain_term, rep.drift.cost_term, rep.samples);
  std::printf("envelope alpha1 %.4f alpha2 %.4f%s\n", rep.envelope.alpha1, rep.envelope.alpha2,
              rep.envelope.inconclusive ? " (inconclusive)" : "");
  std::printf("batches passing %zu / %zu, l2 gain ratio %.4f (bound %.4f)\n", rep.batches.passed, rep.batches.batches,
              rep.gain.ratio, rep.gain.bound);
  std::printf("certificate %s\nwrote %s\n", rep.pass ? "PASS" : "FAIL", (dir / "certificate.json").string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov actor-critic training, baselines, certification and robustness evaluation"};
  app.require_subcommand(1);

  std::string config_path, resume;
  CLI::App* train_cmd = app.add_subcommand("train", "train a controller (rlac, sac) or solve lqr");
  train_cmd->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", resume, "continue training from a checkpoint");
  train_cmd->allow_extras();
  train_cmd->footer("Any config key is accepted as a flag: --algo sac --env.l 0.2 --gamma 0.99 --seeds 1,2,3");

  EvalOptions eo;
  CLI::App* eval_cmd = app.add_subcommand("eval", "robustness evaluation");
  eval_cmd->require_subcommand(1);
  CLI::App* impulse_cmd = eval_cmd->add_subcommand("impulse", "death rate under a single impulsive push");
  CLI::App* grid_cmd = eval_cmd->add_subcommand("grid", "death rate over pole length and cart mass");
  for (CLI::App* c : {impulse_cmd, grid_cmd}) {
    c->add_option("--checkpoint", eo.checkpoints, "checkpoint file (repeatable)")->required();
    c->add_option("--out", eo.out_dir, "output directory");
    c->add_option("--eval-seed", eo.eval_seed, "seed for initial states");
    c->add_option("--episodes", eo.episodes, "episodes per protocol point");
    c->add_flag("--full-scale", eo.full_scale, "500 episodes per magnitude / full 19x9 grid");
  }
  impulse_cmd->add_option("--magnitudes", eo.magnitudes, "comma-separated impulse magnitudes");
  grid_cmd->add_option("--lengths", eo.lengths, "comma-separated pole lengths");
  grid_cmd->add_option("--cart-masses", eo.cart_masses, "comma-separated cart masses");

  std::string cert_checkpoint, cert_out;
  certify::CertificateConfig cc;
  CLI::App* cert_cmd = app.add_subcommand("certify", "sample-based stability certificate for an rlac checkpoint");
  cert_cmd->add_option("--checkpoint", cert_checkpoint, "rlac checkpoint")->required();
  cert_cmd->add_option("--episodes", cc.episodes, "rollouts pooled for the drift estimate");
  cert_cmd->add_option("--eta", cc.eta);
  cert_cmd->add_option("--alpha3", cc.alpha3);
  cert_cmd->add_option("--confidence", cc.confidence);
  cert_cmd->add_option("--batches", cc.batches);
  cert_cmd->add_option("--seed", cc.seed);
  cert_cmd->add_option("--out", cert_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, train_cmd->remaining(), resume);
    if (*impulse_cmd) return cmd_eval_impulse(eo);
    if (*grid_cmd) return cmd_eval_grid(eo);
    if (*cert_cmd) {
      cc.validate();
      return cmd_certify(cert_checkpoint, cc, cert_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
