#include "kendama/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

namespace kendama::harness {

namespace {

// Child-stream tags under a roll-out seed.
constexpr std::uint64_t kStreamE0 = 0;
constexpr std::uint64_t kStreamV = 1;
constexpr std::uint64_t kStreamW = 2;

// Child-stream tags under the experiment seed.
constexpr std::uint64_t kCalibration = 1;
constexpr std::uint64_t kRollouts = 2;

Vec2 uniform_in(const Box& b, rng::Engine& g) {
  return {rng::uniform(g, b.lo.x(), b.hi.x()), rng::uniform(g, b.lo.y(), b.hi.y())};
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_schedule.empty()) throw std::invalid_argument("n_schedule must not be empty");
  for (std::size_t i = 0; i < n_schedule.size(); ++i) {
    if (n_schedule[i] < 8) throw std::invalid_argument("every n in n_schedule must be at least 8");
    if (i > 0 && n_schedule[i] <= n_schedule[i - 1]) {
      throw std::invalid_argument("n_schedule must be strictly increasing");
    }
  }
  if (rollouts_per_n < 1) throw std::invalid_argument("rollouts_per_n must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (!(epsilon_growth > 1.0)) throw std::invalid_argument("epsilon_growth must exceed 1");
  if (!(epsilon_max >= epsilon && epsilon_max < 1.0)) throw std::invalid_argument("epsilon_max must lie in [epsilon, 1)");
  truth.validate();
  if (W_m.is_empty() || E_tr.is_empty()) throw std::invalid_argument("W_m and E_tr must be non-empty");
  if (!(cup_radius > ball_radius && ball_radius >= 0.0)) throw std::invalid_argument("cup radius must exceed ball radius");
  if (!(center_radius >= 0.0)) throw std::invalid_argument("center_radius must be non-negative");
}

std::uint64_t calibration_seed(std::uint64_t experiment_seed, std::size_t n) {
  return rng::child_seed(rng::child_seed(experiment_seed, kCalibration), n);
}

std::uint64_t rollout_seed(std::uint64_t experiment_seed, std::size_t n, std::size_t i, bool paired) {
  const std::uint64_t root = rng::child_seed(experiment_seed, kRollouts);
  return rng::child_seed(paired ? root : rng::child_seed(root, n), i);
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Catch: return "catch";
    case Outcome::Miss: return "miss";
    case Outcome::TrialFailureP1: return "P1";
    case Outcome::TrialFailureP2: return "P2";
    case Outcome::ConstraintViolation: return "violation";
  }
  return "unknown";
}

RolloutRecord run_rollout(const ExperimentConfig& exp, const controller::ControllerConfig& cfg,
                          const controller::TightenedSets& ts, std::uint64_t seed, bool keep_trace) {
  rng::Engine g_e0 = rng::make_engine(rng::child_seed(seed, kStreamE0));
  rng::Engine g_v = rng::make_engine(rng::child_seed(seed, kStreamV));
  rng::Engine g_w = rng::make_engine(rng::child_seed(seed, kStreamW));

  RolloutRecord rec;
  rec.seed = seed;
  if (exp.e0_pool.empty()) {
    rec.e0 = uniform_in(exp.E_tr, g_e0);
  } else {
    const auto k = static_cast<std::size_t>(rng::uniform01(g_e0) * static_cast<double>(exp.e0_pool.size()));
    rec.e0 = exp.e0_pool[std::min(k, exp.e0_pool.size() - 1)];
  }

  const int T = cfg.T;
  const sets::HPolytope E_h(cfg.E);
  const double r_hit = exp.cup_radius - exp.ball_radius;
  controller::CatchController ctrl(cfg, ts);
  Vec2 e = rec.e0;
  Vec2 u_prev = Vec2::Zero();
  // Impact: first step at which e_z touches or crosses the cup plane, from either side.
  bool impact_found = e.y() == 0.0;
  Vec2 e_im = e;

  // Exits from E count only while the controller is in charge.
  auto in_charge = [&] {
    return ctrl.status() == controller::Status::Running || ctrl.status() == controller::Status::Done;
  };
  for (int t = 0; t < T; ++t) {
    if (in_charge() && !E_h.contains(e)) rec.violation = true;
    const Vec2 v = sample_noise(exp.truth, g_v, 1).front();
    const Vec2 y = e + v;
    const Vec2 u = ctrl.step(y);
    const auto& log = ctrl.last();
    if (log.active) {
      if (!ts.R_con_h.contains(log.e_hat - log.e_bar)) ++rec.con_tube_violations;
      if (!ts.R_est_h.contains(e - log.e_hat)) ++rec.est_tube_violations;
      if (!cfg.U.contains(u)) ++rec.input_violations;
    }
    if (keep_trace) {
      rec.trace.push_back({t, y, log.e_hat, log.e_bar, log.u_bar, u, e,
                           log.active || t == 0 ? qp::to_string(log.qp_status) : "inactive"});
    }
    const Vec2 w = uniform_in(exp.W_m, g_w);
    const Vec2 e_next = e + cfg.dt * u + w;
    const bool crossed = (e.y() < 0.0 && e_next.y() >= 0.0) || (e.y() > 0.0 && e_next.y() <= 0.0);
    if (!impact_found && crossed) {
      impact_found = true;
      rec.impact_step = t + 1;
      rec.impact_rel_vz = u.y();
      e_im = e_next;
    }
    e = e_next;
    u_prev = u;
  }
  if (in_charge() && !E_h.contains(e)) rec.violation = true;
  if (keep_trace) {
    TraceRow last;
    last.t = T;
    last.e_hat = ctrl.e_hat();
    last.e_true = e;
    last.qp_status = "end";
    rec.trace.push_back(last);
  }
  // Without a crossing the ball meets the plane at the deadline, where the plan puts it.
  if (!impact_found) {
    rec.impact_step = T;
    rec.impact_rel_vz = u_prev.y();
    e_im = e;
  }
  rec.impact_ex = e_im.x();
  rec.impact_ez = e_im.y();
  rec.impacted = impact_found;
  rec.p2 = ctrl.status() == controller::Status::TrialFailureP2;
  rec.p1 = ctrl.status() == controller::Status::TrialFailureP1;
  rec.hit = std::abs(rec.impact_ex) <= r_hit && std::abs(rec.impact_ez) <= r_hit;
  rec.hit_center = rec.hit && std::abs(rec.impact_ex) <= exp.center_radius;
  rec.caught = rec.hit && rec.impact_rel_vz <= exp.max_impact_vz && !rec.trial_failure();

  if (rec.p2) {
    rec.outcome = Outcome::TrialFailureP2;
  } else if (rec.p1) {
    rec.outcome = Outcome::TrialFailureP1;
  } else if (rec.violation) {
    rec.outcome = Outcome::ConstraintViolation;
  } else if (rec.caught) {
    rec.outcome = Outcome::Catch;
  } else {
    rec.outcome = Outcome::Miss;
  }
  return rec;
}

LearnedSupport learn_support(const ExperimentConfig& exp, const controller::ControllerConfig& base,
                             const std::vector<Vec2>& samples) {
  LearnedSupport out;
  out.cfg = base;
  double eps = exp.epsilon;
  for (;;) {
    out.support = noise::fit_confidence_support(samples, eps);
    out.cfg.Vhat = out.support.box;
    out.sets = controller::build_tightened_sets(out.cfg);
    out.epsilon_used = eps;
    if (!out.sets.empty || eps >= exp.epsilon_max) break;
    eps = std::min(exp.epsilon_max, eps * exp.epsilon_growth);
    ++out.escalations;
  }
  return out;
}

NSummary summarize(std::size_t n, const std::vector<RolloutRecord>& records) {
  NSummary s;
  s.n = n;
  std::vector<double> vz;
  for (const auto& r : records) {
    ++s.rollouts;
    switch (r.outcome) {
      case Outcome::Catch: ++s.catches; break;
      case Outcome::Miss: ++s.misses; break;
      case Outcome::TrialFailureP1: ++s.p1; break;
      case Outcome::TrialFailureP2: ++s.p2; break;
      case Outcome::ConstraintViolation: ++s.violations; break;
    }
    if (r.impacted) ++s.impacts;
    if (!r.trial_failure()) vz.push_back(r.impact_rel_vz);
    if (r.hit) ++s.hits;
    if (r.hit_center) ++s.hit_center;
  }
  s.impact_vz.count = static_cast<int>(vz.size());
  if (!vz.empty()) {
    double sum = 0.0;
    for (double v : vz) sum += v;
    s.impact_vz.mean = sum / static_cast<double>(vz.size());
    double ss = 0.0;
    for (double v : vz) ss += (v - s.impact_vz.mean) * (v - s.impact_vz.mean);
    s.impact_vz.std = vz.size() > 1 ? std::sqrt(ss / static_cast<double>(vz.size() - 1)) : 0.0;
  }
  return s;
}

TrendStats trend_stats(const std::vector<NSummary>& per_n) {
  TrendStats t;
  if (per_n.empty()) return t;
  std::vector<double> n, c;
  for (const auto& s : per_n) {
    n.push_back(static_cast<double>(s.n));
    c.push_back(s.pct(s.catches));
  }
  t.spearman_rho = spearman(n, c);
  t.p_value = spearman_p_value(n, c);
  const NSummary& a = per_n.front();
  const NSummary& b = per_n.back();
  t.catch_gain_pp = b.pct(b.catches) - a.pct(a.catches);
  t.hit_center_gain_pp = b.pct(b.hit_center) - a.pct(a.hit_center);
  t.impact_vz_change = b.impact_vz.mean - a.impact_vz.mean;
  return t;
}

SweepResult run_sweep(const ExperimentConfig& exp, const controller::ControllerConfig& base,
                      const ProgressFn& progress) {
  exp.validate();
  base.validate();
  SweepResult result;
  for (std::size_t n : exp.n_schedule) {
    rng::Engine calib = rng::make_engine(calibration_seed(exp.seed, n));
    const auto samples = noise::sample_noise(exp.truth, calib, n);
    const LearnedSupport learned = learn_support(exp, base, samples);

    std::vector<RolloutRecord> recs(static_cast<std::size_t>(exp.rollouts_per_n));
    parallel_for(recs.size(), exp.threads, [&](std::size_t i) {
      recs[i] = run_rollout(exp, learned.cfg, learned.sets, rollout_seed(exp.seed, n, i, exp.paired_rollouts));
      recs[i].n = n;
      recs[i].index = static_cast<int>(i);
    });

    NSummary s = summarize(n, recs);
    s.epsilon_used = learned.epsilon_used;
    s.escalations = learned.escalations;
    s.vhat = learned.support.box;
    s.sets_empty = learned.sets.empty;
    if (progress) progress(n, s);
    result.summary.per_n.push_back(s);
    result.records.insert(result.records.end(), recs.begin(), recs.end());
  }
  result.summary.trend = trend_stats(result.summary.per_n);
  return result;
}

FailureEstimate empirical_failure_rate(const ExperimentConfig& exp, const controller::ControllerConfig& base,
                                       std::size_t n, double epsilon, int refits, std::uint64_t seed) {
  if (refits < 1) throw std::invalid_argument("refits must be positive");
  std::vector<RolloutRecord> recs(static_cast<std::size_t>(refits));
  parallel_for(recs.size(), exp.threads, [&](std::size_t i) {
    const std::uint64_t root = rng::child_seed(seed, i);
    rng::Engine calib = rng::make_engine(rng::child_seed(root, 0));
    controller::ControllerConfig cfg = base;
    cfg.Vhat = noise::fit_confidence_support(noise::sample_noise(exp.truth, calib, n), epsilon).box;
    const controller::TightenedSets ts = controller::build_tightened_sets(cfg);
    recs[i] = run_rollout(exp, cfg, ts, rng::child_seed(root, 1));
  });
  FailureEstimate f;
  f.refits = refits;
  int fail = 0, feasible = 0, p1 = 0, p2 = 0, viol = 0;
  for (const auto& r : recs) {
    if (r.violation || r.p1) ++fail;
    if (!r.p1 && !r.p2) ++feasible;
    p1 += r.p1;
    p2 += r.p2;
    viol += r.violation;
  }
  const double m = static_cast<double>(refits);
  f.failure_rate = fail / m;
  f.feasible_rate = feasible / m;
  f.p1_rate = p1 / m;
  f.p2_rate = p2 / m;
  f.violation_rate = viol / m;
  return f;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: size mismatch");
  if (x.size() < 2) return 0.0;
  return pearson(ranks(x), ranks(y));
}

double spearman_p_value(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman_p_value: size mismatch");
  const std::size_t m = x.size();
  if (m < 3) return 1.0;
  const double observed = spearman(x, y);
  const std::vector<double> rx = ranks(x);
  std::vector<double> ry = ranks(y);
  if (m <= 9) {
    std::sort(ry.begin(), ry.end());
    long total = 0, extreme = 0;
    do {
      ++total;
      if (pearson(rx, ry) >= observed - 1e-12) ++extreme;
    } while (std::next_permutation(ry.begin(), ry.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
  }
  if (observed >= 1.0) return 0.0;
  const double dof = static_cast<double>(m) - 2.0;
  const double tstat = observed * std::sqrt(dof / (1.0 - observed * observed));
  return boost::math::cdf(boost::math::complement(boost::math::students_t(dof), tstat));
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace kendama::harness
