#include "kendama/swingup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Cholesky>

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <ceres/jet.h>

namespace kendama::swingup {

namespace {

using Mat63 = Eigen::Matrix<double, 6, 3>;

bool is_spd(const Eigen::MatrixXd& M) {
  if (!M.isApprox(M.transpose(), 1e-12)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  return llt.info() == Eigen::Success;
}

// PHR term for g ≤ 0: value and dψ/dg.
std::pair<double, double> phr(double g, double mu, double rho) {
  const double s = mu + rho * g;
  if (s > 0.0) return {(s * s - mu * mu) / (2.0 * rho), s};
  return {-mu * mu / (2.0 * rho), 0.0};
}

class InnerProblem : public ceres::FirstOrderFunction {
 public:
  explicit InnerProblem(const AugmentedLagrangian& al) : al_(al) {}
  bool Evaluate(const double* z, double* cost, double* gradient) const override {
    *cost = al_.evaluate(z, gradient);
    return std::isfinite(*cost);
  }
  int NumParameters() const override { return al_.num_free(); }

 private:
  const AugmentedLagrangian& al_;
};

class CostRecorder : public ceres::IterationCallback {
 public:
  explicit CostRecorder(std::vector<double>& out) : out_(out) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override {
    if (s.step_is_successful) out_.push_back(s.cost);
    return ceres::SOLVER_CONTINUE;
  }

 private:
  std::vector<double>& out_;
};

}  // namespace

void SwingupProblem::validate() const {
  if (N < 1) throw std::invalid_argument("swing-up horizon N must be at least 1");
  if (!(Ts > 0.0)) throw std::invalid_argument("swing-up sampling time must be positive");
  if (!is_spd(Q)) throw std::invalid_argument("Q_s must be symmetric positive definite");
  if (!is_spd(R)) throw std::invalid_argument("R_s must be symmetric positive definite");
  if ((x_lo.array() > x_hi.array()).any()) throw InfeasibleBounds("state bounds have lo > hi");
  if ((F_lo.array() > F_hi.array()).any()) throw InfeasibleBounds("input bounds have lo > hi");
  const Vector6d xi = x_init.stacked();
  const Vector6d xf = x_f.stacked();
  if ((xi.array() < x_lo.array()).any() || (xi.array() > x_hi.array()).any()) {
    throw InfeasibleBounds("x_init lies outside the state bounds");
  }
  if ((xf.array() < x_lo.array()).any() || (xf.array() > x_hi.array()).any()) {
    throw InfeasibleBounds("x_f lies outside the state bounds");
  }
}

std::vector<Vector6d> shoot(const PhysicalParams& p, const SwingupProblem& prob, const std::vector<Eigen::Vector3d>& F) {
  std::vector<Vector6d> x(F.size() + 1);
  x[0] = prob.x_init.stacked();
  for (std::size_t i = 0; i < F.size(); ++i) {
    x[i + 1] = x[i] + prob.Ts * dynamics::cart_pendulum_rhs<double>(p, x[i], F[i]);
  }
  return x;
}

double objective(const SwingupProblem& prob, const std::vector<Vector6d>& x, const std::vector<Eigen::Vector3d>& F) {
  double J = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) J += x[i].dot(prob.Q * x[i]) + F[i].dot(prob.R * F[i]);
  return J;
}

double bound_violation(const SwingupProblem& prob, const std::vector<Vector6d>& x,
                       const std::vector<Eigen::Vector3d>& F) {
  double v = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    v = std::max(v, (x[i] - prob.x_hi).maxCoeff());
    v = std::max(v, (prob.x_lo - x[i]).maxCoeff());
  }
  for (const auto& f : F) {
    v = std::max(v, (f - prob.F_hi).maxCoeff());
    v = std::max(v, (prob.F_lo - f).maxCoeff());
  }
  return v;
}

void step_jacobians(const PhysicalParams& p, const Vector6d& x, const Eigen::Vector3d& F, double Ts, Matrix6d& A,
                    Mat63& B) {
  using J = ceres::Jet<double, 9>;
  Eigen::Matrix<J, 6, 1> xj;
  Eigen::Matrix<J, 3, 1> fj;
  for (int k = 0; k < 6; ++k) xj(k) = J(x(k), k);
  for (int k = 0; k < 3; ++k) fj(k) = J(F(k), 6 + k);
  const Eigen::Matrix<J, 6, 1> d = dynamics::cart_pendulum_rhs<J>(p, xj, fj);
  for (int r = 0; r < 6; ++r) {
    A.row(r) = Ts * d(r).v.head<6>().transpose();
    B.row(r) = Ts * d(r).v.tail<3>().transpose();
  }
  A += Matrix6d::Identity();
}

AugmentedLagrangian::AugmentedLagrangian(PhysicalParams p, SwingupProblem prob)
    : params_(p), problem_(std::move(prob)) {
  for (int c = 0; c < 3; ++c) {
    if (problem_.F_lo(c) < problem_.F_hi(c)) free_channels_.push_back(c);
  }
  const auto n = static_cast<std::size_t>(problem_.N);
  mu_state_lo_.assign(n + 1, Vector6d::Zero());
  mu_state_hi_.assign(n + 1, Vector6d::Zero());
  mu_input_lo_.assign(n, Eigen::Vector3d::Zero());
  mu_input_hi_.assign(n, Eigen::Vector3d::Zero());
}

std::vector<Eigen::Vector3d> AugmentedLagrangian::expand(const double* z) const {
  std::vector<Eigen::Vector3d> F(static_cast<std::size_t>(problem_.N));
  const int nf = static_cast<int>(free_channels_.size());
  for (int i = 0; i < problem_.N; ++i) {
    Eigen::Vector3d f = problem_.F_lo;
    for (int k = 0; k < nf; ++k) f(free_channels_[k]) = z[i * nf + k];
    F[i] = f;
  }
  return F;
}

std::vector<double> AugmentedLagrangian::compress(const std::vector<Eigen::Vector3d>& F) const {
  const int nf = static_cast<int>(free_channels_.size());
  std::vector<double> z(static_cast<std::size_t>(num_free()));
  for (int i = 0; i < problem_.N; ++i) {
    for (int k = 0; k < nf; ++k) z[i * nf + k] = F[i](free_channels_[k]);
  }
  return z;
}

double AugmentedLagrangian::evaluate(const double* z, double* grad) const {
  const auto& P = problem_;
  const auto F = expand(z);
  const auto x = shoot(params_, P, F);
  const int N = P.N;
  const int nf = static_cast<int>(free_channels_.size());

  double value = objective(P, x, F);
  std::vector<Vector6d> gx(static_cast<std::size_t>(N) + 1, Vector6d::Zero());
  std::vector<Eigen::Vector3d> gF(static_cast<std::size_t>(N), Eigen::Vector3d::Zero());

  for (int i = 0; i < N; ++i) {
    gx[i] = 2.0 * P.Q * x[i];
    gF[i] = 2.0 * P.R * F[i];
    for (int c : free_channels_) {
      auto [vh, dh] = phr(F[i](c) - P.F_hi(c), mu_input_hi_[i](c), rho_);
      auto [vl, dl] = phr(P.F_lo(c) - F[i](c), mu_input_lo_[i](c), rho_);
      value += vh + vl;
      gF[i](c) += dh - dl;
    }
  }
  for (int i = 1; i <= N; ++i) {
    for (int k = 0; k < 6; ++k) {
      auto [vh, dh] = phr(x[i](k) - P.x_hi(k), mu_state_hi_[i](k), rho_);
      auto [vl, dl] = phr(P.x_lo(k) - x[i](k), mu_state_lo_[i](k), rho_);
      value += vh + vl;
      gx[i](k) += dh - dl;
    }
  }
  const Vector6d c = x[N] - P.x_f.stacked();
  value += lambda_.dot(c) + 0.5 * rho_ * c.squaredNorm();
  gx[N] += lambda_ + rho_ * c;

  if (grad != nullptr) {
    Vector6d adj = gx[N];
    Matrix6d A;
    Mat63 B;
    for (int i = N - 1; i >= 0; --i) {
      step_jacobians(params_, x[i], F[i], P.Ts, A, B);
      const Eigen::Vector3d gi = gF[i] + B.transpose() * adj;
      for (int k = 0; k < nf; ++k) grad[i * nf + k] = gi(free_channels_[k]);
      adj = gx[i] + A.transpose() * adj;
    }
  }
  return value;
}

void AugmentedLagrangian::update_multipliers(const std::vector<Eigen::Vector3d>& F) {
  const auto& P = problem_;
  const auto x = shoot(params_, P, F);
  for (int i = 0; i < P.N; ++i) {
    for (int c : free_channels_) {
      mu_input_hi_[i](c) = std::max(0.0, mu_input_hi_[i](c) + rho_ * (F[i](c) - P.F_hi(c)));
      mu_input_lo_[i](c) = std::max(0.0, mu_input_lo_[i](c) + rho_ * (P.F_lo(c) - F[i](c)));
    }
  }
  for (int i = 1; i <= P.N; ++i) {
    for (int k = 0; k < 6; ++k) {
      mu_state_hi_[i](k) = std::max(0.0, mu_state_hi_[i](k) + rho_ * (x[i](k) - P.x_hi(k)));
      mu_state_lo_[i](k) = std::max(0.0, mu_state_lo_[i](k) + rho_ * (P.x_lo(k) - x[i](k)));
    }
  }
  lambda_ += rho_ * (x[P.N] - P.x_f.stacked());
}

SwingupSolution solve_swingup(const PhysicalParams& p, const SwingupProblem& prob, const SolverOptions& opts,
                              const std::optional<std::vector<Eigen::Vector3d>>& warm_start) {
  p.validate();
  prob.validate();

  std::vector<Eigen::Vector3d> F0;
  if (warm_start) {
    if (static_cast<int>(warm_start->size()) != prob.N) {
      throw std::invalid_argument("warm start length differs from the horizon");
    }
    F0 = *warm_start;
  } else {
    const Eigen::Vector3d hold = dynamics::cup_hold_input(p, prob.x_init);
    F0.assign(static_cast<std::size_t>(prob.N), hold.cwiseMax(prob.F_lo).cwiseMin(prob.F_hi));
  }

  AugmentedLagrangian al(p, prob);
  al.set_rho(opts.rho_init);
  std::vector<double> z = al.compress(F0);

  SwingupSolution sol;
  double prev_violation = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    std::vector<double> history;
    if (!z.empty()) {
      CostRecorder recorder(history);
      ceres::GradientProblemSolver::Options o;
      o.line_search_direction_type = ceres::LBFGS;
      o.max_num_iterations = opts.max_inner;
      o.function_tolerance = 1e-15;
      o.parameter_tolerance = 1e-15;
      o.gradient_tolerance = 0.1 * opts.tol * (1.0 + std::abs(al.evaluate(z.data(), nullptr)));
      o.logging_type = ceres::SILENT;
      o.minimizer_progress_to_stdout = false;
      o.callbacks.push_back(&recorder);
      ceres::GradientProblem problem(new InnerProblem(al));
      ceres::GradientProblemSolver::Summary summary;
      ceres::Solve(o, problem, z.data(), &summary);
      sol.inner_iterations += static_cast<int>(summary.iterations.size());
    }
    sol.inner_cost_history.push_back(std::move(history));
    sol.outer_iterations = outer + 1;

    std::vector<double> g(z.size());
    al.evaluate(z.data(), g.data());
    const auto F = al.expand(z.data());
    const auto x = shoot(p, prob, F);
    sol.cost = objective(prob, x, F);
    sol.terminal_residual = (x.back() - prob.x_f.stacked()).lpNorm<Eigen::Infinity>();
    sol.bound_violation = std::max(0.0, bound_violation(prob, x, F));
    double gmax = 0.0;
    for (double gi : g) gmax = std::max(gmax, std::abs(gi));
    sol.kkt_residual = gmax / (1.0 + std::abs(sol.cost));
    sol.F_star = F;
    sol.x_traj = x;

    if (sol.terminal_residual <= opts.term_tol && sol.bound_violation <= opts.bound_tol &&
        sol.kkt_residual <= opts.tol) {
      sol.converged = true;
      break;
    }
    const double violation = std::max(sol.terminal_residual, sol.bound_violation);
    al.update_multipliers(F);
    if (violation > 0.25 * prev_violation) al.set_rho(std::min(opts.rho_max, al.rho() * opts.rho_growth));
    prev_violation = violation;
  }
  return sol;
}

TerminalCheck verify_terminal(const PhysicalParams& p, const GeneralizedState& x_N, double horizon, double dt,
                              double threshold) {
  if (!(dt > 0.0)) throw std::invalid_argument("verify_terminal: dt must be positive");
  const Eigen::Vector2d ball0 = dynamics::ball_position(p, x_N);
  const Eigen::Vector2d vel0 = dynamics::ball_velocity(p, x_N);
  const Eigen::Vector2d cup = x_N.cup_position();
  TerminalCheck out;
  out.min_gap = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<long>(std::floor(horizon / dt + 1e-9));
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Eigen::Vector2d gap = dynamics::predict_ballistic(ball0, vel0, t, p.gravity).position - cup;
    out.times.push_back(t);
    out.gap.push_back(gap);
    const double n = gap.norm();
    if (n < out.min_gap) {
      out.min_gap = n;
      out.min_gap_time = t;
    }
    if (!out.vanish_time && n < threshold) out.vanish_time = t;
  }
  return out;
}

OpenLoopRollout rollout_openloop(const PhysicalParams& nominal, const SwingupProblem& prob,
                                 const std::vector<Eigen::Vector3d>& F_star, const PerturbationSpec& spec,
                                 rng::Engine& gen) {
  if (!(spec.sim_dt > 0.0)) throw std::invalid_argument("rollout_openloop: sim_dt must be positive");
  PhysicalParams real = nominal;
  real.cup_mass *= 1.0 + rng::uniform(gen, -spec.mass_rel, spec.mass_rel);
  real.ball_mass *= 1.0 + rng::uniform(gen, -spec.mass_rel, spec.mass_rel);
  real.length *= 1.0 + rng::uniform(gen, -spec.length_rel, spec.length_rel);
  real.validate();

  const int sub = std::max(1, static_cast<int>(std::lround(prob.Ts / spec.sim_dt)));
  const double h = prob.Ts / sub;
  const int n_plan = static_cast<int>(F_star.size());
  const int max_steps = 2 * prob.N;

  OpenLoopRollout out;
  GeneralizedState x = prob.x_init;
  double t = 0.0;
  auto input_at = [&](int i, const GeneralizedState& s, const Eigen::Vector3d& noise) -> Eigen::Vector3d {
    if (i < n_plan) return F_star[static_cast<std::size_t>(i)] + noise;
    return dynamics::cup_hold_input(real, s);
  };

  Eigen::Vector3d noise = Eigen::Vector3d::Zero();
  double tension = dynamics::string_tension(real, x, input_at(0, x, noise));
  out.times.push_back(t);
  out.states.push_back(x.stacked());
  out.tension.push_back(tension);

  auto finish = [&](const GeneralizedState& s, double time) {
    ReleaseState& r = out.release;
    r.time = time;
    r.state = s;
    r.ball_position = dynamics::ball_position(real, s);
    r.ball_velocity = dynamics::ball_velocity(real, s);
    r.e0 = s.cup_position() - r.ball_position;
    r.realized_params = real;
    return out;
  };
  if (tension <= 0.0) return finish(x, t);

  for (int i = 0; i < max_steps; ++i) {
    noise = Eigen::Vector3d::Zero();
    if (i < n_plan && spec.force_std > 0.0) {
      noise(0) = spec.force_std * rng::standard_normal(gen);
      noise(1) = spec.force_std * rng::standard_normal(gen);
    }
    for (int s = 0; s < sub; ++s) {
      const Eigen::Vector3d F = input_at(i, x, noise);
      const GeneralizedState next = dynamics::rk4_step(real, x, F, h);
      const double next_tension = dynamics::string_tension(real, next, input_at(i, next, noise));
      if (next_tension <= 0.0) {
        const double a = tension / (tension - next_tension);
        const GeneralizedState rel = GeneralizedState::from(x.stacked() + a * (next.stacked() - x.stacked()));
        out.times.push_back(t + a * h);
        out.states.push_back(rel.stacked());
        out.tension.push_back(0.0);
        return finish(rel, t + a * h);
      }
      x = next;
      t += h;
      tension = next_tension;
      out.times.push_back(t);
      out.states.push_back(x.stacked());
      out.tension.push_back(tension);
    }
  }
  throw NoRelease("string tension never vanished during the open-loop roll-out");
}

}  // namespace kendama::swingup
