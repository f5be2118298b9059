#pragma once

/**
 * @file harness.hpp
 * @brief Closed-loop Monte Carlo roll-outs of the catch phase.
 */

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kendama/controller.hpp"
#include "kendama/noise.hpp"
#include "kendama/rng.hpp"
#include "kendama/sets.hpp"

namespace kendama::harness {

using sets::Box;
using sets::Vec2;

struct ExperimentConfig {
  std::vector<std::size_t> n_schedule{50, 100, 200, 400, 800, 1400, 2000};
  int rollouts_per_n = 1000;
  double epsilon = 0.1;
  double epsilon_growth = 1.5;
  double epsilon_max = 0.5;
  std::uint64_t seed = 20240521;
  noise::NoiseModel truth{};
  Box W_m = Box::symmetric(Vec2(0.002, 0.002));
  Box E_tr{Vec2(-0.316, -0.2095), Vec2(0.349, 0.2457)};
  double cup_radius = 0.035;
  double ball_radius = 0.0;
  double center_radius = 0.005;
  double max_impact_vz = 0.1;
  int threads = 0;  // 0: hardware concurrency
  /// Share roll-out seeds (and hence e₀ and noise draws) across sample sizes.
  bool paired_rollouts = true;
  /// Optional empirical e₀ cloud; sampled uniformly instead of E_tr when non-empty.
  std::vector<Vec2> e0_pool;

  void validate() const;
};

enum class Outcome { Catch, Miss, TrialFailureP1, TrialFailureP2, ConstraintViolation };
std::string to_string(Outcome o);

struct TraceRow {
  int t = 0;
  Vec2 y = Vec2::Zero();
  Vec2 e_hat = Vec2::Zero();
  Vec2 e_bar = Vec2::Zero();
  Vec2 u_bar = Vec2::Zero();
  Vec2 u = Vec2::Zero();
  Vec2 e_true = Vec2::Zero();
  std::string qp_status;
};

struct RolloutRecord {
  std::size_t n = 0;
  int index = 0;
  std::uint64_t seed = 0;
  Vec2 e0 = Vec2::Zero();
  Outcome outcome = Outcome::Miss;
  bool p1 = false;
  bool p2 = false;
  bool violation = false;
  bool impacted = false;  // false: no plane crossing, the impact is taken at the deadline T
  int impact_step = 0;
  double impact_rel_vz = 0.0;
  double impact_ex = 0.0;
  double impact_ez = 0.0;
  bool hit = false;
  bool hit_center = false;
  bool caught = false;
  int est_tube_violations = 0;
  int con_tube_violations = 0;
  int input_violations = 0;
  std::vector<TraceRow> trace;  // filled only on request

  bool trial_failure() const { return p1 || p2 || violation; }
};

/// Seed of the calibration samples drawn for sample size n.
std::uint64_t calibration_seed(std::uint64_t experiment_seed, std::size_t n);
/// Seed of roll-out i at sample size n; with pairing every n shares the same roll-out seeds.
std::uint64_t rollout_seed(std::uint64_t experiment_seed, std::size_t n, std::size_t i, bool paired);

/**
 * One closed-loop trial. e₀ comes from E_tr (or the pool), w from W_m and v
 * from the true noise model, each on its own child stream of `seed`.
 */
RolloutRecord run_rollout(const ExperimentConfig& exp, const controller::ControllerConfig& cfg,
                          const controller::TightenedSets& ts, std::uint64_t seed, bool keep_trace = false);

/// Fits V̂ from the samples, raising ε by epsilon_growth (capped at epsilon_max) while the tightened sets are empty.
struct LearnedSupport {
  noise::ConfidenceSupport support;
  double epsilon_used = 0.0;
  int escalations = 0;
  controller::ControllerConfig cfg;
  controller::TightenedSets sets;
};
LearnedSupport learn_support(const ExperimentConfig& exp, const controller::ControllerConfig& base,
                             const std::vector<Vec2>& samples);

struct ImpactStats {
  int count = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct NSummary {
  std::size_t n = 0;
  double epsilon_used = 0.0;
  int escalations = 0;
  Box vhat;
  bool sets_empty = false;
  int rollouts = 0;
  int catches = 0;
  int misses = 0;
  int p1 = 0;
  int p2 = 0;
  int violations = 0;
  int impacts = 0;
  int hits = 0;
  int hit_center = 0;
  /// Over roll-outs without a trial failure.
  ImpactStats impact_vz;

  double pct(int count) const { return rollouts > 0 ? 100.0 * count / rollouts : 0.0; }
};

struct TrendStats {
  double spearman_rho = 0.0;
  double p_value = 1.0;  // one-sided, positive association
  double catch_gain_pp = 0.0;
  double hit_center_gain_pp = 0.0;
  double impact_vz_change = 0.0;
};

struct SweepSummary {
  std::vector<NSummary> per_n;
  TrendStats trend;
};

struct SweepResult {
  SweepSummary summary;
  std::vector<RolloutRecord> records;
};

using ProgressFn = std::function<void(std::size_t n, const NSummary&)>;

SweepResult run_sweep(const ExperimentConfig& exp, const controller::ControllerConfig& base,
                      const ProgressFn& progress = {});

NSummary summarize(std::size_t n, const std::vector<RolloutRecord>& records);
TrendStats trend_stats(const std::vector<NSummary>& per_n);

struct FailureEstimate {
  int refits = 0;
  double failure_rate = 0.0;   // violation or P1
  double feasible_rate = 0.0;  // no P1 and no P2
  double p1_rate = 0.0;
  double p2_rate = 0.0;
  double violation_rate = 0.0;
};

/// Each refit draws fresh calibration samples at fixed ε (no escalation) and runs one roll-out.
FailureEstimate empirical_failure_rate(const ExperimentConfig& exp, const controller::ControllerConfig& base,
                                       std::size_t n, double epsilon, int refits, std::uint64_t seed);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);
/// One-sided p-value of a Spearman correlation at least as large as observed; exact by permutation up to 9 points.
double spearman_p_value(const std::vector<double>& x, const std::vector<double>& y);

/// Calls fn(i) for i in [0, count) on `threads` workers.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace kendama::harness
