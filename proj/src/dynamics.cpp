#include "kendama/dynamics.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace kendama::dynamics {

void PhysicalParams::validate() const {
  for (double v : {cup_mass, ball_mass, length, gravity}) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw std::invalid_argument("PhysicalParams: masses, length and gravity must be positive");
    }
  }
}

Eigen::Matrix3d inertia_matrix(const PhysicalParams& p, const Eigen::Vector3d& q) {
  const double mt = p.cup_mass + p.ball_mass;
  const double b = p.ball_mass * p.length;
  const double c = std::cos(q(2));
  const double s = std::sin(q(2));
  Eigen::Matrix3d M;
  M << mt, 0.0, b * c,
       0.0, mt, b * s,
       b * c, b * s, p.ball_mass * p.length * p.length;
  return M;
}

Eigen::Matrix3d coriolis_matrix(const PhysicalParams& p, const Eigen::Vector3d& q, const Eigen::Vector3d& qdot) {
  const double b = p.ball_mass * p.length;
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  C(0, 2) = -b * std::sin(q(2)) * qdot(2);
  C(1, 2) = b * std::cos(q(2)) * qdot(2);
  return C;
}

Eigen::Vector3d gravity_vector(const PhysicalParams& p, const Eigen::Vector3d& q) {
  return {0.0, (p.cup_mass + p.ball_mass) * p.gravity, p.ball_mass * p.gravity * p.length * std::sin(q(2))};
}

Eigen::Matrix3d inertia_rate(const PhysicalParams& p, const Eigen::Vector3d& q, const Eigen::Vector3d& qdot) {
  const double b = p.ball_mass * p.length;
  const double dc = -std::sin(q(2)) * qdot(2);
  const double ds = std::cos(q(2)) * qdot(2);
  Eigen::Matrix3d Md = Eigen::Matrix3d::Zero();
  Md(0, 2) = Md(2, 0) = b * dc;
  Md(1, 2) = Md(2, 1) = b * ds;
  return Md;
}

double kinetic_energy(const PhysicalParams& p, const GeneralizedState& x) {
  return 0.5 * x.qdot.dot(inertia_matrix(p, x.q) * x.qdot);
}

double potential_energy(const PhysicalParams& p, const GeneralizedState& x) {
  return p.cup_mass * p.gravity * x.q(1) + p.ball_mass * p.gravity * (x.q(1) - p.length * std::cos(x.q(2)));
}

Vec2 ball_position(const PhysicalParams& p, const GeneralizedState& x) {
  return {x.q(0) + p.length * std::sin(x.q(2)), x.q(1) - p.length * std::cos(x.q(2))};
}

Vec2 ball_velocity(const PhysicalParams& p, const GeneralizedState& x) {
  return {x.qdot(0) + p.length * std::cos(x.q(2)) * x.qdot(2), x.qdot(1) + p.length * std::sin(x.q(2)) * x.qdot(2)};
}

Vector6d continuous_dynamics(const PhysicalParams& p, const GeneralizedState& x, const Eigen::Vector3d& F) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(inertia_matrix(p, x.q), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo <= 0.0 || es.eigenvalues().maxCoeff() / lo > 1e12) {
    throw SingularInertia("inertia matrix is numerically singular");
  }
  return cart_pendulum_rhs<double>(p, x.stacked(), F);
}

GeneralizedState discretize_step(const PhysicalParams& p, const GeneralizedState& x, const Eigen::Vector3d& F,
                                 double Ts) {
  return GeneralizedState::from(x.stacked() + Ts * cart_pendulum_rhs<double>(p, x.stacked(), F));
}

GeneralizedState rk4_step(const PhysicalParams& p, const GeneralizedState& x, const Eigen::Vector3d& F, double h) {
  const Vector6d x0 = x.stacked();
  const Vector6d k1 = cart_pendulum_rhs<double>(p, x0, F);
  const Vector6d k2 = cart_pendulum_rhs<double>(p, Vector6d(x0 + 0.5 * h * k1), F);
  const Vector6d k3 = cart_pendulum_rhs<double>(p, Vector6d(x0 + 0.5 * h * k2), F);
  const Vector6d k4 = cart_pendulum_rhs<double>(p, Vector6d(x0 + h * k3), F);
  return GeneralizedState::from(x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Eigen::Vector3d cup_hold_input(const PhysicalParams& p, const GeneralizedState& x) {
  // With ẍ = z̈ = 0 and τ = 0 the pendulum row gives φ̈ = −(g/r) sin φ.
  const double b = p.ball_mass * p.length;
  const double c = std::cos(x.q(2));
  const double s = std::sin(x.q(2));
  const double w2 = x.qdot(2) * x.qdot(2);
  const double phiddot = -p.gravity / p.length * s;
  return {b * c * phiddot - b * s * w2, b * s * phiddot + b * c * w2 + (p.cup_mass + p.ball_mass) * p.gravity, 0.0};
}

double string_tension(const PhysicalParams& p, const GeneralizedState& x, const Vec2& cup_accel) {
  const double c = std::cos(x.q(2));
  const double s = std::sin(x.q(2));
  return p.ball_mass *
         (p.length * x.qdot(2) * x.qdot(2) + p.gravity * c - s * cup_accel.x() + c * cup_accel.y());
}

double string_tension(const PhysicalParams& p, const GeneralizedState& x, const Eigen::Vector3d& F) {
  const Vector6d dx = cart_pendulum_rhs<double>(p, x.stacked(), F);
  return string_tension(p, x, Vec2(dx(3), dx(4)));
}

ReleaseConsistency check_release_consistency(const PhysicalParams& p, double phi, double phidot, double rel_tol) {
  GeneralizedState x;
  x.q(2) = phi;
  x.qdot(2) = phidot;
  ReleaseConsistency out;
  out.tension = string_tension(p, x, Vec2(0.0, 0.0));
  out.zero_tension_length = phidot != 0.0 ? -p.gravity * std::cos(phi) / (phidot * phidot) : 0.0;
  out.consistent = std::abs(out.tension) <= rel_tol * p.ball_mass * p.gravity;
  return out;
}

BallisticState predict_ballistic(const Vec2& p0, const Vec2& v0, double t, double g) {
  const Vec2 acc(0.0, -g);
  return {p0 + v0 * t + 0.5 * acc * t * t, v0 + acc * t};
}

BallisticState predict_ballistic_euler(const Vec2& p0, const Vec2& v0, double t, double dt, double g) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict_ballistic_euler: dt must be positive");
  BallisticState s{p0, v0};
  double elapsed = 0.0;
  while (elapsed < t) {
    const double h = std::min(dt, t - elapsed);
    s.position += h * s.velocity;
    s.velocity.y() -= h * g;
    elapsed += h;
    if (t - elapsed < 1e-12 * std::max(1.0, t)) break;
  }
  return s;
}

}  // namespace kendama::dynamics
