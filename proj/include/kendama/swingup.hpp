#pragma once

/**
 * @file swingup.hpp
 * @brief Offline swing-up planner for the cart-pendulum model.
 *
 * Single shooting over the forward-Euler model. The terminal equality and the
 * state and input bounds enter through an augmented Lagrangian; each inner
 * problem is solved with L-BFGS using an adjoint gradient.
 */

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "kendama/dynamics.hpp"
#include "kendama/rng.hpp"

namespace kendama::swingup {

using dynamics::GeneralizedState;
using dynamics::PhysicalParams;
using dynamics::Vector6d;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

class InfeasibleBounds : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoRelease : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SwingupProblem {
  int N = 150;
  double Ts = 0.01;
  Matrix6d Q = Vector6d((Vector6d() << 1, 1, 1, 0.1, 0.1, 0.1).finished()).asDiagonal();
  Eigen::Matrix3d R = 0.01 * Eigen::Matrix3d::Identity();
  Vector6d x_lo = (Vector6d() << -0.5, -0.5, -1.0, -3.0, -3.0, -20.0).finished();
  Vector6d x_hi = (Vector6d() << 0.5, 0.5, 4.0, 3.0, 3.0, 20.0).finished();
  Eigen::Vector3d F_lo{-20.0, -20.0, 0.0};
  Eigen::Vector3d F_hi{20.0, 20.0, 0.0};
  GeneralizedState x_init{};
  GeneralizedState x_f{Eigen::Vector3d(0.0, 0.0, 2.44), Eigen::Vector3d(0.0, 0.0, 4.18)};

  /// Throws std::invalid_argument on bad sizes or weights, InfeasibleBounds if x_init or x_f lie outside the bounds.
  void validate() const;
};

struct SolverOptions {
  double tol = 1e-6;        // stationarity, ‖∇L‖∞ / (1 + |cost|)
  double term_tol = 1e-4;   // ‖x_N − x_f‖∞
  double bound_tol = 1e-6;  // state and input bound violation
  int max_outer = 40;
  int max_inner = 2000;
  double rho_init = 10.0;
  double rho_growth = 10.0;
  double rho_max = 1e9;
};

struct SwingupSolution {
  std::vector<Eigen::Vector3d> F_star;
  std::vector<Vector6d> x_traj;
  double cost = 0.0;
  double terminal_residual = 0.0;
  double bound_violation = 0.0;
  double kkt_residual = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
  /// Inner objective value at every accepted L-BFGS iterate, one list per outer iteration.
  std::vector<std::vector<double>> inner_cost_history;
};

/// Forward-Euler roll-out x_{i+1} = x_i + Ts·f(x_i, F_i).
std::vector<Vector6d> shoot(const PhysicalParams& p, const SwingupProblem& prob, const std::vector<Eigen::Vector3d>& F);

/// Σ_{i<N} x_iᵀ Q x_i + F_iᵀ R F_i.
double objective(const SwingupProblem& prob, const std::vector<Vector6d>& x, const std::vector<Eigen::Vector3d>& F);

/// Largest violation of the state bounds (i ≥ 1) and input bounds.
double bound_violation(const SwingupProblem& prob, const std::vector<Vector6d>& x,
                       const std::vector<Eigen::Vector3d>& F);

/// Jacobians of one Euler step with respect to state and input.
void step_jacobians(const PhysicalParams& p, const Vector6d& x, const Eigen::Vector3d& F, double Ts,
                    Matrix6d& A, Eigen::Matrix<double, 6, 3>& B);

/**
 * Augmented-Lagrangian view of the problem for fixed multipliers. Exposed so
 * the adjoint gradient can be checked against finite differences.
 */
class AugmentedLagrangian {
 public:
  AugmentedLagrangian(PhysicalParams p, SwingupProblem prob);

  int num_free() const { return static_cast<int>(free_channels_.size()) * problem_.N; }
  std::vector<Eigen::Vector3d> expand(const double* z) const;
  std::vector<double> compress(const std::vector<Eigen::Vector3d>& F) const;

  /// Value and (optionally) gradient with respect to the free input channels.
  double evaluate(const double* z, double* grad) const;

  void update_multipliers(const std::vector<Eigen::Vector3d>& F);
  double rho() const { return rho_; }
  void set_rho(double rho) { rho_ = rho; }
  const Vector6d& terminal_multiplier() const { return lambda_; }

 private:
  PhysicalParams params_;
  SwingupProblem problem_;
  std::vector<int> free_channels_;
  Vector6d lambda_ = Vector6d::Zero();
  std::vector<Vector6d> mu_state_lo_, mu_state_hi_;
  std::vector<Eigen::Vector3d> mu_input_lo_, mu_input_hi_;
  double rho_ = 10.0;
};

/// Plans F⋆. Throws InfeasibleBounds when x_init is outside the state bounds.
SwingupSolution solve_swingup(const PhysicalParams& p, const SwingupProblem& prob, const SolverOptions& opts = {},
                              const std::optional<std::vector<Eigen::Vector3d>>& warm_start = std::nullopt);

/// Ball-minus-cup gap after release with the cup held fixed.
struct TerminalCheck {
  std::vector<double> times;
  std::vector<Eigen::Vector2d> gap;
  std::optional<double> vanish_time;
  double min_gap = 0.0;
  double min_gap_time = 0.0;
};

/// Samples the gap every `dt` seconds up to `horizon`; vanish_time is the first time the gap norm drops below `threshold`.
TerminalCheck verify_terminal(const PhysicalParams& p, const GeneralizedState& x_N, double horizon,
                              double dt = 1e-4, double threshold = 5e-3);

struct PerturbationSpec {
  double mass_rel = 0.05;    // uniform multiplicative spread on m_c and m_b
  double length_rel = 0.05;  // same for r
  double force_std = 0.0;    // N, zero-mean Gaussian added per planner step to F_x, F_z
  double sim_dt = 1e-3;      // RK4 step
};

struct ReleaseState {
  double time = 0.0;
  GeneralizedState state;
  Eigen::Vector2d ball_position;
  Eigen::Vector2d ball_velocity;
  Eigen::Vector2d e0;  // cup minus ball at release
  PhysicalParams realized_params;
};

struct OpenLoopRollout {
  std::vector<double> times;
  std::vector<Vector6d> states;
  std::vector<double> tension;
  ReleaseState release;
};

/**
 * RK4 ground-truth roll-out of F⋆ with perturbed parameters and forces.
 * After the plan ends the cup is held fixed. Stops at the first tension
 * zero-crossing, located by linear interpolation inside the step. Throws
 * NoRelease if none occurs within 2N planner steps.
 */
OpenLoopRollout rollout_openloop(const PhysicalParams& nominal, const SwingupProblem& prob,
                                 const std::vector<Eigen::Vector3d>& F_star, const PerturbationSpec& spec,
                                 rng::Engine& gen);

}  // namespace kendama::swingup
