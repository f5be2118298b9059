#pragma once

/**
 * @file controller.hpp
 * @brief Output-feedback tube MPC for the catch phase.
 *
 * Error system e⁺ = e + dt·u + w, y = e + v. A Luenberger observer tracks ê;
 * a shrinking-horizon QP plans a nominal (ē, ū) that must reach ē_T = 0, and
 * the applied input is u = ū + K(ê − ē). Constraint sets are tightened by the
 * estimation tube R_est and the control tube R_con.
 */

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kendama/qp.hpp"
#include "kendama/sets.hpp"

namespace kendama::controller {

using sets::Box;
using sets::HPolytope;
using sets::Mat2;
using sets::Vec2;
using sets::Zonotope;

struct ControllerConfig {
  int T = 25;
  double dt = 0.01;
  Mat2 L = 0.4 * Mat2::Identity();
  Mat2 K = -30.0 * Mat2::Identity();
  Box E = Box::symmetric(Vec2(0.349, 0.2457));
  HPolytope U = HPolytope(Box::symmetric(Vec2(8.0, 8.0)));
  sets::ConvexSet W = Box::symmetric(Vec2(0.002, 0.002));
  Box Vhat = Box::symmetric(Vec2(0.012, 0.018));
  double q_e = 500.0;
  double r_u = 0.4;
  double rpi_tol = 1e-4;

  Mat2 A() const { return Mat2::Identity(); }
  Mat2 B() const { return dt * Mat2::Identity(); }

  /// Throws std::invalid_argument unless A − L and A + BK are Schur stable and E, U, W, Vhat contain the origin.
  void validate() const;
};

/// Observer gain placing the eigenvalues of A − L at `pole`.
Mat2 observer_gain(double pole);
/// Feedback gain placing the eigenvalues of A + BK at `pole`.
Mat2 feedback_gain(double pole, double dt);

/// E, U and W as boxes: the symmetric box of the largest vertex coordinate of E_tr.
Box error_box_from(const Box& E_tr);

struct TightenedSets {
  Zonotope R_est;
  Zonotope R_con;
  HPolytope R_est_h;
  HPolytope R_con_h;
  HPolytope E_h;
  HPolytope E_bar;
  HPolytope U_bar;
  bool empty = false;
};

/// Never throws on empty results; sets `empty` instead.
TightenedSets build_tightened_sets(const ControllerConfig& cfg);

/**
 * Initial estimate from the first measurement y₀: the centroid of
 * (E ⊖ R_est) ∩ (y₀ − (R_est ⊖ (−V̂))). Every point of that set keeps
 * e₀ − ê₀ ∈ R_est for any noise in V̂ and e₀ ∈ E for any estimation error in
 * R_est. Empty means the trial cannot start.
 */
std::optional<Vec2> observer_init(const ControllerConfig& cfg, const TightenedSets& ts, const Vec2& y0);

/// ê⁺ = A ê + B u + L (y − ê).
Vec2 observer_update(const ControllerConfig& cfg, const Vec2& e_hat, const Vec2& u, const Vec2& y);

/// u = ū + K (ê − ē).
inline Vec2 control_law(const Vec2& u_bar, const Vec2& e_bar, const Vec2& e_hat, const Mat2& K) {
  return u_bar + K * (e_hat - e_bar);
}

/// Dense QP in z = [ē_t, ū_t, …, ū_{T−1}].
qp::Problem build_shrinking_qp(const ControllerConfig& cfg, const TightenedSets& ts, const Vec2& e_hat, int t);

struct NominalPlan {
  qp::Status status = qp::Status::Infeasible;
  std::vector<Vec2> e_bar;  // ē_t … ē_T
  std::vector<Vec2> u_bar;  // ū_t … ū_{T−1}
  double cost = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;

  bool feasible() const { return status == qp::Status::Optimal; }
};

/// Requires 0 ≤ t < T.
NominalPlan solve_shrinking_qp(const ControllerConfig& cfg, const TightenedSets& ts, const Vec2& e_hat, int t);

/// Rebuilds the nominal trajectory from ē_t and ū.
std::vector<Vec2> nominal_states(const ControllerConfig& cfg, const Vec2& e_bar_t, const std::vector<Vec2>& u_bar);

/// Σ q_e‖ē_k‖² + r_u‖ū_k‖² over k = t … T−1.
double nominal_cost(const ControllerConfig& cfg, const std::vector<Vec2>& e_bar, const std::vector<Vec2>& u_bar);

enum class Status { Running, TrialFailureP1, TrialFailureP2, Done };
std::string to_string(Status s);

struct StepLog {
  int t = 0;
  Vec2 y = Vec2::Zero();
  Vec2 e_hat = Vec2::Zero();
  Vec2 e_bar = Vec2::Zero();
  Vec2 u_bar = Vec2::Zero();
  Vec2 u = Vec2::Zero();
  qp::Status qp_status = qp::Status::Infeasible;
  bool active = false;  // false once the trial has failed
};

/**
 * One controller per roll-out. Call step() once per sample with the current
 * measurement; after a failure it returns zero input and the status stays put.
 */
class CatchController {
 public:
  CatchController(const ControllerConfig& cfg, const TightenedSets& ts);

  Vec2 step(const Vec2& y);

  Status status() const { return status_; }
  int t() const { return t_; }
  const Vec2& e_hat() const { return e_hat_; }
  const StepLog& last() const { return last_; }

 private:
  const ControllerConfig& cfg_;
  const TightenedSets& ts_;
  Status status_ = Status::Running;
  int t_ = 0;
  Vec2 e_hat_ = Vec2::Zero();
  StepLog last_;
};

}  // namespace kendama::controller
