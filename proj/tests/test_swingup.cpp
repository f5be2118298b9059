#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "kendama/swingup.hpp"

using namespace kendama;
using namespace kendama::swingup;

namespace {

const SwingupSolution& default_solution() {
  static const SwingupSolution sol = solve_swingup(PhysicalParams{}, SwingupProblem{});
  return sol;
}

// d x_N / d (F_x, F_z) for every step, built by chaining the step Jacobians.
Eigen::MatrixXd terminal_jacobian(const PhysicalParams& p, const SwingupProblem& prob,
                                  const std::vector<Eigen::Vector3d>& F) {
  const auto x = shoot(p, prob, F);
  Eigen::MatrixXd J(6, 2 * prob.N);
  Matrix6d Phi = Matrix6d::Identity();
  for (int i = prob.N - 1; i >= 0; --i) {
    Matrix6d A;
    Eigen::Matrix<double, 6, 3> B;
    step_jacobians(p, x[static_cast<std::size_t>(i)], F[static_cast<std::size_t>(i)], prob.Ts, A, B);
    J.block<6, 2>(0, 2 * i) = Phi * B.leftCols<2>();
    Phi = Phi * A;
  }
  return J;
}

// Minimum-norm Gauss-Newton steps onto x_N = x_f.
std::vector<Eigen::Vector3d> project_terminal(const PhysicalParams& p, const SwingupProblem& prob,
                                              std::vector<Eigen::Vector3d> F) {
  for (int it = 0; it < 20; ++it) {
    const Vector6d r = shoot(p, prob, F).back() - prob.x_f.stacked();
    if (r.lpNorm<Eigen::Infinity>() < 1e-10) break;
    const Eigen::MatrixXd J = terminal_jacobian(p, prob, F);
    const Eigen::VectorXd d = J.transpose() * (J * J.transpose()).ldlt().solve(r);
    for (int i = 0; i < prob.N; ++i) F[static_cast<std::size_t>(i)].head<2>() -= d.segment<2>(2 * i);
  }
  return F;
}

}  // namespace

TEST(Swingup, ProblemValidation) {
  SwingupProblem prob;
  EXPECT_NO_THROW(prob.validate());
  prob.x_hi(2) = 2.0;  // target φ = 2.44 now outside
  EXPECT_THROW(prob.validate(), InfeasibleBounds);
  prob = SwingupProblem{};
  prob.N = 0;
  EXPECT_THROW(prob.validate(), std::invalid_argument);
}

TEST(Swingup, StaysPutWithoutGravity) {
  PhysicalParams p;
  p.gravity = 1e-300;
  SwingupProblem prob;
  prob.N = 10;
  prob.x_f = GeneralizedState{};
  const auto sol = solve_swingup(p, prob);
  ASSERT_TRUE(sol.converged);
  EXPECT_LT(sol.cost, 1e-12);
  for (const auto& F : sol.F_star) EXPECT_LT(F.norm(), 1e-6);
}

TEST(Swingup, DefaultTargetConverges) {
  const auto& sol = default_solution();
  ASSERT_TRUE(sol.converged);
  EXPECT_LT(sol.terminal_residual, 1e-3);
  EXPECT_LE(sol.bound_violation, 1e-6);
  EXPECT_LE(sol.kkt_residual, 1e-6);
  ASSERT_EQ(sol.F_star.size(), 150U);
  ASSERT_EQ(sol.x_traj.size(), 151U);
}

TEST(Swingup, TrajectoryFollowsRecursionAndBounds) {
  const PhysicalParams p;
  const SwingupProblem prob;
  const auto& sol = default_solution();
  for (int i = 0; i < prob.N; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Vector6d next = dynamics::discretize_step(p, GeneralizedState::from(sol.x_traj[k]), sol.F_star[k], prob.Ts)
                              .stacked();
    EXPECT_LT((next - sol.x_traj[k + 1]).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE((sol.F_star[k].array() >= prob.F_lo.array() - 1e-6).all());
    EXPECT_TRUE((sol.F_star[k].array() <= prob.F_hi.array() + 1e-6).all());
    EXPECT_TRUE((sol.x_traj[k + 1].array() >= prob.x_lo.array() - 1e-6).all());
    EXPECT_TRUE((sol.x_traj[k + 1].array() <= prob.x_hi.array() + 1e-6).all());
  }
  EXPECT_NEAR(sol.cost, objective(prob, sol.x_traj, sol.F_star), 1e-9 * sol.cost);
}

TEST(Swingup, GapVanishesAfterRelease) {
  const PhysicalParams p;
  const auto& sol = default_solution();
  const auto check = verify_terminal(p, GeneralizedState::from(sol.x_traj.back()), 0.5);
  ASSERT_TRUE(check.vanish_time.has_value());
  EXPECT_LE(*check.vanish_time, 0.5);
  EXPECT_LT(check.min_gap, 5e-3);
}

TEST(Swingup, AdjointGradientMatchesFiniteDifferences) {
  const PhysicalParams p;
  const SwingupProblem prob;
  AugmentedLagrangian al(p, prob);
  al.set_rho(100.0);
  rng::Engine g = rng::make_engine(41);
  std::vector<double> z = al.compress(default_solution().F_star);
  for (double& zi : z) zi += rng::uniform(g, -0.5, 0.5);
  al.update_multipliers(al.expand(z.data()));  // non-zero multipliers in every term
  std::vector<double> grad(z.size());
  al.evaluate(z.data(), grad.data());
  for (int c = 0; c < 40; ++c) {
    const auto k = static_cast<std::size_t>(rng::uniform01(g) * static_cast<double>(z.size()));
    const double h = 1e-6;
    std::vector<double> zp = z, zm = z;
    zp[k] += h;
    zm[k] -= h;
    const double fd = (al.evaluate(zp.data(), nullptr) - al.evaluate(zm.data(), nullptr)) / (2 * h);
    EXPECT_NEAR(grad[k], fd, 1e-5 * (1.0 + std::abs(fd))) << "coordinate " << k;
  }
}

TEST(Swingup, ProjectedPerturbationsCostNoLess) {
  const PhysicalParams p;
  const SwingupProblem prob;
  const auto& sol = default_solution();
  rng::Engine g = rng::make_engine(42);
  int feasible = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Eigen::Vector3d> F = sol.F_star;
    const double scale = 0.5 * (trial % 10 + 1) / 10.0;
    for (auto& f : F) f.head<2>() += scale * Eigen::Vector2d(rng::standard_normal(g), rng::standard_normal(g));
    F = project_terminal(p, prob, F);
    const auto x = shoot(p, prob, F);
    if ((x.back() - prob.x_f.stacked()).lpNorm<Eigen::Infinity>() > 1e-8) continue;
    if (bound_violation(prob, x, F) > 0.0) continue;
    ++feasible;
    EXPECT_GE(objective(prob, x, F), sol.cost - 1e-4 * sol.cost) << "trial " << trial;
  }
  EXPECT_GE(feasible, 50);
}

TEST(VerifyTerminal, DropFromAbove) {
  const PhysicalParams p;
  GeneralizedState x;
  x.q(2) = std::numbers::pi;  // ball straight above the cup at height r
  const auto check = verify_terminal(p, x, 1.0, 1e-5);
  ASSERT_TRUE(check.vanish_time.has_value());
  EXPECT_NEAR(*check.vanish_time, std::sqrt(2.0 * (p.length - 5e-3) / p.gravity), 2e-5);
}

TEST(VerifyTerminal, MovingAwayNeverVanishes) {
  const PhysicalParams p;
  GeneralizedState x;
  x.q(2) = std::numbers::pi / 2;  // ball level with the cup, flying outward
  x.qdot(2) = -5.0;
  const auto check = verify_terminal(p, x, 1.0);
  EXPECT_FALSE(check.vanish_time.has_value());
  EXPECT_NEAR(check.min_gap, p.length, 1e-12);
  EXPECT_EQ(check.min_gap_time, 0.0);
}

TEST(Rollout, NominalReleaseNearPlan) {
  const PhysicalParams p;
  const SwingupProblem prob;
  const auto& sol = default_solution();
  PerturbationSpec spec;
  spec.mass_rel = spec.length_rel = 0.0;
  rng::Engine g = rng::make_engine(43);
  const auto r = rollout_openloop(p, prob, sol.F_star, spec, g);
  EXPECT_GT(r.release.time, 0.0);
  EXPECT_LE(r.release.time, 2 * prob.N * prob.Ts);
  EXPECT_NEAR(r.tension.back(), 0.0, 1e-12);
  for (std::size_t i = 0; i + 1 < r.tension.size(); ++i) EXPECT_GT(r.tension[i], 0.0);
  EXPECT_TRUE(r.release.e0.isApprox(r.release.state.cup_position() - dynamics::ball_position(p, r.release.state)));
  // The RK4 truth tracks the Euler plan up to discretization error.
  const auto k = static_cast<std::size_t>(r.release.time / prob.Ts);
  ASSERT_LT(k + 1, sol.x_traj.size());
  const double a = r.release.time / prob.Ts - static_cast<double>(k);
  const Vector6d planned = (1 - a) * sol.x_traj[k] + a * sol.x_traj[k + 1];
  EXPECT_NEAR(r.release.state.q(2), planned(2), 0.1);
  EXPECT_LT((r.release.state.q.head<2>() - planned.head<2>()).norm(), 0.02);
}

TEST(Rollout, PerturbedReleasesStayBounded) {
  const PhysicalParams p;
  const SwingupProblem prob;
  const auto& sol = default_solution();
  const PerturbationSpec spec;
  rng::Engine g = rng::make_engine(44);
  for (int i = 0; i < 100; ++i) {
    const auto r = rollout_openloop(p, prob, sol.F_star, spec, g);
    EXPECT_LE(r.release.e0.norm(), 1.06 * p.length + 1e-12);  // rod length within the 5 % spread
    EXPECT_NEAR(r.release.realized_params.length, p.length, 0.05 * p.length + 1e-15);
  }
}

TEST(Rollout, SeedDeterminism) {
  const PhysicalParams p;
  const SwingupProblem prob;
  const auto& sol = default_solution();
  rng::Engine a = rng::make_engine(45), b = rng::make_engine(45);
  const auto ra = rollout_openloop(p, prob, sol.F_star, PerturbationSpec{}, a);
  const auto rb = rollout_openloop(p, prob, sol.F_star, PerturbationSpec{}, b);
  EXPECT_EQ(ra.release.time, rb.release.time);
  EXPECT_EQ(ra.release.e0, rb.release.e0);
}
