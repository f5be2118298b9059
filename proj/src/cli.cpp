#include "kendama/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <ostream>

#include "kendama/config.hpp"
#include "kendama/harness.hpp"
#include "kendama/io.hpp"
#include "kendama/noise.hpp"
#include "kendama/report.hpp"
#include "kendama/swingup.hpp"

namespace kendama::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Child-stream tags under the experiment seed used only by the CLI.
constexpr std::uint64_t kSingleRollouts = 3;
constexpr std::uint64_t kSwingupPool = 4;

struct Context {
  config::RunConfig cfg;
  fs::path out;
};

Context setup(const Options& opts) {
  Context ctx;
  if (opts.config_path.empty()) {
    ctx.cfg.validate();
  } else {
    ctx.cfg = config::load(opts.config_path);
  }
  if (opts.seed) ctx.cfg.experiment.seed = *opts.seed;
  ctx.out = opts.out_dir.empty() ? fs::path(ctx.cfg.output_dir) : fs::path(opts.out_dir);
  return ctx;
}

void stamp(json& j, const Options& opts) {
  if (!opts.timestamp) return;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["generated_at"] = buf;
}

std::vector<sets::Vec2> calibration_samples(const config::RunConfig& cfg) {
  if (!cfg.calibration.samples_path.empty()) {
    return io::parse_samples_csv(io::read_text(cfg.calibration.samples_path));
  }
  rng::Engine gen = rng::make_engine(harness::calibration_seed(cfg.experiment.seed, cfg.calibration.n));
  return noise::sample_noise(cfg.experiment.truth, gen, cfg.calibration.n);
}

json sets_json(const controller::TightenedSets& ts) {
  json j{{"empty", ts.empty}};
  if (ts.empty && ts.R_est.order() == 0) return j;
  j["R_est"] = sets::to_json(ts.R_est);
  j["R_con"] = sets::to_json(ts.R_con);
  j["E_bar"] = sets::to_json(ts.E_bar);
  j["U_bar"] = sets::to_json(ts.U_bar);
  return j;
}

json learned_json(const harness::LearnedSupport& l) {
  return {{"support", noise::to_json(l.support)},
          {"epsilon_used", l.epsilon_used},
          {"escalations", l.escalations},
          {"tightened_sets", sets_json(l.sets)}};
}

noise::ConfidenceSupport support_from_file(const fs::path& path) {
  const json j = io::read_json(path);
  return noise::confidence_support_from_json(j.contains("support") ? j.at("support") : j);
}

swingup::SwingupSolution plan(const config::RunConfig& cfg) {
  return swingup::solve_swingup(cfg.physical, cfg.swingup, cfg.solver);
}

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const swingup::InfeasibleBounds& e) {
    log << "error: infeasible swing-up bounds: " << e.what() << "\n";
    return kExitSolver;
  } catch (const sets::NoConvergence& e) {
    log << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const swingup::NoRelease& e) {
    log << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const config::ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const io::IoError& e) {
    log << "io error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    log << "json error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    log << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    log << "io error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int plan_swingup(const Options& opts, std::ostream& log) {
  return guarded(log, [&] {
    const Context ctx = setup(opts);
    const auto& cfg = ctx.cfg;
    const swingup::SwingupSolution sol = plan(cfg);
    const auto x_N = dynamics::GeneralizedState::from(sol.x_traj.back());
    const swingup::TerminalCheck check = swingup::verify_terminal(cfg.physical, x_N, 0.5);

    io::write_text(ctx.out / "F_star.csv", io::input_sequence_csv(sol, cfg.swingup.Ts));
    io::write_text(ctx.out / "swingup_states.csv", io::state_trajectory_csv(sol, cfg.swingup.Ts));
    json m{{"converged", sol.converged},
           {"cost", sol.cost},
           {"terminal_residual", sol.terminal_residual},
           {"bound_violation", sol.bound_violation},
           {"kkt_residual", sol.kkt_residual},
           {"outer_iterations", sol.outer_iterations},
           {"inner_iterations", sol.inner_iterations},
           {"terminal_state", std::vector<double>(sol.x_traj.back().data(), sol.x_traj.back().data() + 6)},
           {"gap_vanish_time", check.vanish_time ? json(*check.vanish_time) : json(nullptr)},
           {"min_gap", check.min_gap},
           {"min_gap_time", check.min_gap_time}};
    const auto rc =
        dynamics::check_release_consistency(cfg.physical, cfg.swingup.x_f.q(2), cfg.swingup.x_f.qdot(2));
    m["release_consistency"] = {{"tension", rc.tension},
                                {"zero_tension_length", rc.zero_tension_length},
                                {"consistent", rc.consistent}};
    stamp(m, opts);
    io::write_json(ctx.out / "swingup_manifest.json", m);
    if (!rc.consistent) {
      log << "target release state is not a tension zero-crossing (zero-tension length " << rc.zero_tension_length
          << " m)\n";
    }
    log << "swing-up " << (sol.converged ? "converged" : "did not converge") << ": cost " << sol.cost
        << ", terminal residual " << sol.terminal_residual << ", " << sol.outer_iterations << " outer iterations\n";
    return sol.converged ? kExitOk : kExitSolver;
  });
}

int calibrate_noise(const Options& opts, std::ostream& log) {
  return guarded(log, [&] {
    const Context ctx = setup(opts);
    const auto samples = calibration_samples(ctx.cfg);
    io::write_text(ctx.out / "noise_samples.csv", io::samples_csv(samples));
    json m{{"n", samples.size()},
           {"seed", ctx.cfg.experiment.seed},
           {"true_model", noise::to_json(ctx.cfg.experiment.truth)},
           {"true_support", sets::to_json(ctx.cfg.experiment.truth.support())}};
    stamp(m, opts);
    io::write_json(ctx.out / "calibration.json", m);
    log << "wrote " << samples.size() << " noise samples\n";
    return kExitOk;
  });
}

int learn_support(const Options& opts, std::ostream& log) {
  return guarded(log, [&] {
    const Context ctx = setup(opts);
    const auto samples = calibration_samples(ctx.cfg);
    const auto learned = harness::learn_support(ctx.cfg.experiment, ctx.cfg.controller, samples);
    json m = learned_json(learned);
    stamp(m, opts);
    io::write_json(ctx.out / "support.json", m);
    log << "learned support from " << samples.size() << " samples at epsilon " << learned.epsilon_used
        << (learned.sets.empty ? " (tightened sets empty)" : "") << "\n";
    return kExitOk;
  });
}

int rollout(const Options& opts, std::ostream& log) {
  return guarded(log, [&] {
    const Context ctx = setup(opts);
    const auto& cfg = ctx.cfg;
    controller::ControllerConfig ccfg = cfg.controller;
    json support;
    if (!cfg.rollout.support_path.empty()) {
      const auto cs = support_from_file(cfg.rollout.support_path);
      ccfg.Vhat = cs.box;
      support = noise::to_json(cs);
    } else {
      const auto learned = harness::learn_support(cfg.experiment, cfg.controller, calibration_samples(cfg));
      ccfg = learned.cfg;
      support = noise::to_json(learned.support);
    }
    const auto ts = controller::build_tightened_sets(ccfg);
    const std::uint64_t root = rng::child_seed(cfg.experiment.seed, kSingleRollouts);
    std::vector<harness::RolloutRecord> recs(static_cast<std::size_t>(cfg.rollout.count));
    harness::parallel_for(recs.size(), cfg.experiment.threads, [&](std::size_t i) {
      recs[i] = harness::run_rollout(cfg.experiment, ccfg, ts, rng::child_seed(root, i), cfg.rollout.traces);
      recs[i].n = 0;
      recs[i].index = static_cast<int>(i);
    });
    for (const auto& r : recs) {
      if (!cfg.rollout.traces) break;
      char name[32];
      std::snprintf(name, sizeof name, "rollout_%04d.csv", r.index);
      io::write_text(ctx.out / "traces" / name, io::trace_csv(r.trace));
    }
    io::write_text(ctx.out / "records.csv", io::records_csv(recs));
    const auto s = harness::summarize(0, recs);
    json m{{"support", support}, {"tightened_sets", sets_json(ts)}, {"summary", io::to_json(s)}};
    stamp(m, opts);
    io::write_json(ctx.out / "rollout_summary.json", m);
    log << recs.size() << " roll-outs: " << s.catches << " catches, " << s.p1 << " P1, " << s.p2 << " P2, "
        << s.violations << " violations\n";
    return kExitOk;
  });
}

int sweep(const Options& opts, std::ostream& log) {
  return guarded(log, [&] {
    Context ctx = setup(opts);
    auto& cfg = ctx.cfg;
    if (cfg.e0.source == "swingup") {
      const auto sol = plan(cfg);
      if (!sol.converged) {
        log << "swing-up did not converge; cannot build the e0 pool\n";
        return kExitSolver;
      }
      const std::uint64_t root = rng::child_seed(cfg.experiment.seed, kSwingupPool);
      std::vector<sets::Vec2> pool(static_cast<std::size_t>(cfg.e0.swingup_rollouts));
      harness::parallel_for(pool.size(), cfg.experiment.threads, [&](std::size_t i) {
        rng::Engine gen = rng::make_engine(rng::child_seed(root, i));
        pool[i] = swingup::rollout_openloop(cfg.physical, cfg.swingup, sol.F_star, cfg.perturbation, gen).release.e0;
      });
      cfg.experiment.e0_pool = std::move(pool);
      log << "e0 pool: " << cfg.experiment.e0_pool.size() << " swing-up releases\n";
    }
    const auto result = harness::run_sweep(cfg.experiment, cfg.controller, [&](std::size_t n, const harness::NSummary& s) {
      log << "n = " << n << ": catch " << s.pct(s.catches) << "%, hit center " << s.pct(s.hit_center)
          << "%, P1 " << s.p1 << ", P2 " << s.p2 << ", mean impact vz " << s.impact_vz.mean << "\n";
    });
    io::write_text(ctx.out / "records.csv", io::records_csv(result.records));
    json m = io::to_json(result.summary);
    m["config"] = config::to_json(cfg);
    stamp(m, opts);
    io::write_json(ctx.out / "summary.json", m);
    const auto& t = result.summary.trend;
    log << "trend: catch gain " << t.catch_gain_pp << " pp, spearman " << t.spearman_rho << " (p = " << t.p_value
        << ")\n";
    return kExitOk;
  });
}

int report(const Options& opts, std::ostream& log) {
  return guarded(log, [&] {
    const fs::path out = opts.out_dir.empty() ? fs::path(setup(opts).out) : fs::path(opts.out_dir);
    const fs::path src = opts.summary_path.empty() ? out / "summary.json" : fs::path(opts.summary_path);
    const auto summary = io::sweep_summary_from_json(io::read_json(src));
    for (const auto& p : report::write_report(summary, out)) log << "wrote " << p.string() << "\n";
    return kExitOk;
  });
}

int run(const std::string& command, const Options& opts, std::ostream& log) {
  if (command == "plan-swingup") return plan_swingup(opts, log);
  if (command == "calibrate-noise") return calibrate_noise(opts, log);
  if (command == "learn-support") return learn_support(opts, log);
  if (command == "rollout") return rollout(opts, log);
  if (command == "sweep") return sweep(opts, log);
  if (command == "report") return report(opts, log);
  log << "unknown command '" << command << "'\n";
  return kExitConfig;
}

}  // namespace kendama::cli
