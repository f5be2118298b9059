#pragma once

/**
 * @file dynamics.hpp
 * @brief Planar cup-and-ball models.
 *
 * Swing-up phase: the cup is a point mass m_c translating in x and z, the
 * ball a point mass m_b on a massless rigid rod of length r hinged at the
 * cup. With q = (x, z, φ), φ measured from the downward vertical, the ball
 * sits at (x + r sin φ, z − r cos φ) and the Lagrangian gives
 *
 *   M(q) = [ m_c+m_b      0          m_b r cos φ ]
 *          [ 0            m_c+m_b    m_b r sin φ ]
 *          [ m_b r cos φ  m_b r sin φ  m_b r²    ]
 *
 *   C(q, q̇) = [ 0 0 −m_b r φ̇ sin φ ]      G(q) = [ 0             ]
 *             [ 0 0  m_b r φ̇ cos φ ]             [ (m_c+m_b) g   ]
 *             [ 0 0  0             ]             [ m_b g r sin φ ]
 *
 * so that M q̈ + C q̇ + G = F with F = (F_x, F_z, τ). Ṁ − 2C is skew-symmetric.
 *
 * Catch phase: the cup-minus-ball position e follows a single integrator
 * e⁺ = e + dt·u + w, measured as y = e + v.
 */

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

#include <Eigen/Core>

namespace kendama::dynamics {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vec2 = Eigen::Vector2d;

class SingularInertia : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhysicalParams {
  double cup_mass = 0.2;     // kg
  double ball_mass = 0.03;   // kg
  double length = 0.153;     // m
  double gravity = 9.81;     // m/s²

  /// Throws std::invalid_argument unless every field is finite and strictly positive.
  void validate() const;
};

/// x̄ = [qᵀ, q̇ᵀ]ᵀ with q = (x_cup, z_cup, φ). φ is never wrapped.
struct GeneralizedState {
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  Eigen::Vector3d qdot = Eigen::Vector3d::Zero();

  Vector6d stacked() const {
    Vector6d x;
    x << q, qdot;
    return x;
  }
  static GeneralizedState from(const Vector6d& x) { return {x.head<3>(), x.tail<3>()}; }

  Vec2 cup_position() const { return q.head<2>(); }
  Vec2 cup_velocity() const { return qdot.head<2>(); }
};

Eigen::Matrix3d inertia_matrix(const PhysicalParams& p, const Eigen::Vector3d& q);
Eigen::Matrix3d coriolis_matrix(const PhysicalParams& p, const Eigen::Vector3d& q, const Eigen::Vector3d& qdot);
Eigen::Vector3d gravity_vector(const PhysicalParams& p, const Eigen::Vector3d& q);
/// dM/dt along q̇.
Eigen::Matrix3d inertia_rate(const PhysicalParams& p, const Eigen::Vector3d& q, const Eigen::Vector3d& qdot);

double kinetic_energy(const PhysicalParams& p, const GeneralizedState& x);
double potential_energy(const PhysicalParams& p, const GeneralizedState& x);
inline double total_energy(const PhysicalParams& p, const GeneralizedState& x) {
  return kinetic_energy(p, x) + potential_energy(p, x);
}

Vec2 ball_position(const PhysicalParams& p, const GeneralizedState& x);
Vec2 ball_velocity(const PhysicalParams& p, const GeneralizedState& x);

/**
 * ẋ̄ = f(x̄, F), solving M q̈ = F − C q̇ − G in closed form. Templated so the
 * planner can differentiate it with dual numbers; no conditioning check.
 */
template <typename T>
Eigen::Matrix<T, 6, 1> cart_pendulum_rhs(const PhysicalParams& p, const Eigen::Matrix<T, 6, 1>& x,
                                         const Eigen::Matrix<T, 3, 1>& F) {
  using std::cos;
  using std::sin;
  const double mt = p.cup_mass + p.ball_mass;
  const double b = p.ball_mass * p.length;
  const T c = cos(x(2));
  const T s = sin(x(2));
  const T phidot = x(5);
  // Right-hand side F − C q̇ − G.
  const T rx = F(0) + b * s * phidot * phidot;
  const T rz = F(1) - b * c * phidot * phidot - mt * p.gravity;
  const T rphi = F(2) - b * p.gravity * s;
  // Schur complement on φ: (m_b r² − b²/mt) φ̈ = rφ − b (c rx + s rz)/mt.
  const double schur = p.ball_mass * p.length * p.length * p.cup_mass / mt;
  const T phiddot = (rphi - b * (c * rx + s * rz) / mt) / schur;
  Eigen::Matrix<T, 6, 1> dx;
  dx(0) = x(3);
  dx(1) = x(4);
  dx(2) = x(5);
  dx(3) = (rx - b * c * phiddot) / mt;
  dx(4) = (rz - b * s * phiddot) / mt;
  dx(5) = phiddot;
  return dx;
}

/// f(x̄, F). Throws SingularInertia if cond(M) exceeds 1e12.
Vector6d continuous_dynamics(const PhysicalParams& p, const GeneralizedState& x, const Eigen::Vector3d& F);

/// Forward Euler: x̄ + Ts·f(x̄, F). This is the planner's discrete model f_d.
GeneralizedState discretize_step(const PhysicalParams& p, const GeneralizedState& x, const Eigen::Vector3d& F,
                                 double Ts);

/// Classic fourth-order Runge–Kutta step with F held constant.
GeneralizedState rk4_step(const PhysicalParams& p, const GeneralizedState& x, const Eigen::Vector3d& F, double h);

/// Input that keeps the cup unaccelerated for the current state (τ = 0).
Eigen::Vector3d cup_hold_input(const PhysicalParams& p, const GeneralizedState& x);

/// String tension for a prescribed cup acceleration: m_b (r φ̇² + g cos φ − a_x sin φ + a_z cos φ).
double string_tension(const PhysicalParams& p, const GeneralizedState& x, const Vec2& cup_accel);
/// String tension under input F, using the constrained dynamics for the cup acceleration.
double string_tension(const PhysicalParams& p, const GeneralizedState& x, const Eigen::Vector3d& F);

/// Checks whether a swing state (φ, φ̇) is a tension zero-crossing with the cup at rest.
struct ReleaseConsistency {
  double tension = 0.0;           // N, cup fixed
  double zero_tension_length = 0.0;  // rod length that would make the tension vanish
  bool consistent = false;        // |tension| ≤ tol·m_b·g
};
ReleaseConsistency check_release_consistency(const PhysicalParams& p, double phi, double phidot,
                                             double rel_tol = 1e-2);

/// Ballistic prediction under gravity along −z.
struct BallisticState {
  Vec2 position;
  Vec2 velocity;
};
BallisticState predict_ballistic(const Vec2& p0, const Vec2& v0, double t, double g);
/// Forward-Euler free-fall prediction with step dt; the last step is shortened to land on t.
BallisticState predict_ballistic_euler(const Vec2& p0, const Vec2& v0, double t, double dt, double g);

/// Catch-phase error system e⁺ = A e + B u + w with A = I₂, B = dt·I₂.
struct LtiModel {
  double dt = 0.01;

  explicit LtiModel(double dt_in = 0.01) : dt(dt_in) {
    if (!(dt > 0.0)) throw std::invalid_argument("LtiModel: dt must be positive");
  }
  Eigen::Matrix2d A() const { return Eigen::Matrix2d::Identity(); }
  Eigen::Matrix2d B() const { return dt * Eigen::Matrix2d::Identity(); }
};

inline Vec2 error_step(const LtiModel& m, const Vec2& e, const Vec2& u, const Vec2& w) {
  return e + m.dt * u + w;
}

inline Vec2 measure(const Vec2& e, const Vec2& v) { return e + v; }

}  // namespace kendama::dynamics
