#include "kendama/controller.hpp"

#include <cmath>
#include <stdexcept>

namespace kendama::controller {

namespace {

bool contains_origin(const sets::ConvexSet& s) { return sets::contains(s, Vec2::Zero()); }

}  // namespace

void ControllerConfig::validate() const {
  if (T < 1) throw std::invalid_argument("controller horizon T must be at least 1");
  if (!(dt > 0.0)) throw std::invalid_argument("controller dt must be positive");
  if (!(q_e > 0.0) || !(r_u > 0.0)) throw std::invalid_argument("stage weights must be positive");
  if (!(rpi_tol > 0.0)) throw std::invalid_argument("rpi_tol must be positive");
  if (sets::spectral_radius(A() - L) >= 1.0) throw std::invalid_argument("A - L is not Schur stable");
  if (sets::spectral_radius(A() + B() * K) >= 1.0) throw std::invalid_argument("A + BK is not Schur stable");
  if (E.is_empty() || !contains_origin(E)) throw std::invalid_argument("E must contain the origin");
  if (U.is_empty() || !contains_origin(U)) throw std::invalid_argument("U must contain the origin");
  if (!contains_origin(W)) throw std::invalid_argument("W must contain the origin");
  if (Vhat.is_empty() || !contains_origin(Vhat)) throw std::invalid_argument("Vhat must contain the origin");
}

Mat2 observer_gain(double pole) { return (1.0 - pole) * Mat2::Identity(); }

Mat2 feedback_gain(double pole, double dt) { return ((pole - 1.0) / dt) * Mat2::Identity(); }

Box error_box_from(const Box& E_tr) {
  return Box::symmetric(E_tr.lo.cwiseAbs().cwiseMax(E_tr.hi.cwiseAbs()));
}

TightenedSets build_tightened_sets(const ControllerConfig& cfg) {
  TightenedSets ts;
  ts.E_h = HPolytope(cfg.E);
  if (cfg.Vhat.is_empty() || !cfg.Vhat.contains_box(Box(Vec2::Zero(), Vec2::Zero()))) {
    ts.empty = true;
    return ts;
  }
  const Mat2 A = cfg.A();
  const sets::RpiOptions opts{cfg.rpi_tol, 2000};

  const Zonotope Vz(cfg.Vhat);
  const Zonotope D_est = sets::minkowski_sum(sets::to_zonotope(cfg.W), sets::linear_map(Mat2(-cfg.L), Vz));
  ts.R_est = sets::rpi_outer_approx(A - cfg.L, D_est, opts).compacted();
  const Zonotope D_con =
      sets::minkowski_sum(sets::linear_map(cfg.L, ts.R_est), sets::linear_map(cfg.L, Vz));
  ts.R_con = sets::rpi_outer_approx(A + cfg.B() * cfg.K, D_con, opts).compacted();

  ts.R_est_h = sets::to_hpolytope(ts.R_est);
  ts.R_con_h = sets::to_hpolytope(ts.R_con);
  ts.E_bar = sets::pontryagin_diff(ts.E_h, sets::minkowski_sum(ts.R_est, ts.R_con));
  ts.U_bar = sets::pontryagin_diff(cfg.U, sets::linear_map(cfg.K, ts.R_con));
  // ē_T = 0 has to be admissible as well.
  ts.empty = ts.E_bar.is_empty() || ts.U_bar.is_empty() || !ts.E_bar.contains(Vec2::Zero()) ||
             !ts.U_bar.contains(Vec2::Zero());
  return ts;
}

std::optional<Vec2> observer_init(const ControllerConfig& cfg, const TightenedSets& ts, const Vec2& y0) {
  if (ts.empty) return std::nullopt;
  const HPolytope inner = sets::pontryagin_diff(ts.E_h, ts.R_est);
  if (inner.is_empty()) return std::nullopt;
  const HPolytope slack = sets::pontryagin_diff(ts.R_est_h, cfg.Vhat.negated());
  if (slack.is_empty()) return std::nullopt;
  const HPolytope anchored = slack.negated().translated(y0);
  const HPolytope admissible = inner.intersected(anchored);
  return admissible.interior_point();
}

Vec2 observer_update(const ControllerConfig& cfg, const Vec2& e_hat, const Vec2& u, const Vec2& y) {
  return cfg.A() * e_hat + cfg.B() * u + cfg.L * (y - e_hat);
}

qp::Problem build_shrinking_qp(const ControllerConfig& cfg, const TightenedSets& ts, const Vec2& e_hat, int t) {
  if (t < 0 || t >= cfg.T) throw std::invalid_argument("build_shrinking_qp: need 0 <= t < T");
  const int M = cfg.T - t;
  const int nz = 2 + 2 * M;

  // Row block j maps z to ē_{t+j}.
  auto state_map = [&](int j) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, nz);
    S.leftCols(2).setIdentity();
    for (int i = 0; i < j; ++i) S.block(0, 2 + 2 * i, 2, 2) = cfg.dt * Eigen::Matrix2d::Identity();
    return S;
  };

  qp::Problem p;
  p.H = Eigen::MatrixXd::Zero(nz, nz);
  for (int j = 0; j < M; ++j) {
    const Eigen::MatrixXd S = state_map(j);
    p.H += 2.0 * cfg.q_e * S.transpose() * S;
  }
  p.H.bottomRightCorner(2 * M, 2 * M).diagonal().array() += 2.0 * cfg.r_u;
  p.g = Eigen::VectorXd::Zero(nz);

  p.A_eq = state_map(M);
  p.b_eq = Eigen::VectorXd::Zero(2);

  const auto& HE = ts.E_bar.H();
  const auto& HU = ts.U_bar.H();
  const auto& HR = ts.R_con_h.H();
  const Eigen::Index rows = M * (HE.rows() + HU.rows()) + HR.rows();
  p.A_in = Eigen::MatrixXd::Zero(rows, nz);
  p.b_in = Eigen::VectorXd::Zero(rows);
  Eigen::Index r = 0;
  for (int j = 0; j < M; ++j) {
    p.A_in.middleRows(r, HE.rows()) = HE * state_map(j);
    p.b_in.segment(r, HE.rows()) = ts.E_bar.h();
    r += HE.rows();
  }
  for (int j = 0; j < M; ++j) {
    p.A_in.block(r, 2 + 2 * j, HU.rows(), 2) = HU;
    p.b_in.segment(r, HU.rows()) = ts.U_bar.h();
    r += HU.rows();
  }
  // ê_t − ē_t ∈ R_con  ⇔  −H_R ē_t ≤ h_R − H_R ê_t
  p.A_in.block(r, 0, HR.rows(), 2) = -HR;
  p.b_in.segment(r, HR.rows()) = ts.R_con_h.h() - HR * e_hat;
  return p;
}

std::vector<Vec2> nominal_states(const ControllerConfig& cfg, const Vec2& e_bar_t, const std::vector<Vec2>& u_bar) {
  std::vector<Vec2> e(u_bar.size() + 1);
  e[0] = e_bar_t;
  for (std::size_t k = 0; k < u_bar.size(); ++k) e[k + 1] = cfg.A() * e[k] + cfg.B() * u_bar[k];
  return e;
}

double nominal_cost(const ControllerConfig& cfg, const std::vector<Vec2>& e_bar, const std::vector<Vec2>& u_bar) {
  double J = 0.0;
  for (std::size_t k = 0; k < u_bar.size(); ++k) {
    J += cfg.q_e * e_bar[k].squaredNorm() + cfg.r_u * u_bar[k].squaredNorm();
  }
  return J;
}

NominalPlan solve_shrinking_qp(const ControllerConfig& cfg, const TightenedSets& ts, const Vec2& e_hat, int t) {
  NominalPlan plan;
  if (ts.empty) return plan;
  const qp::Problem p = build_shrinking_qp(cfg, ts, e_hat, t);
  const qp::Solution s = qp::solve(p);
  plan.status = s.status;
  plan.iterations = s.iterations;
  plan.kkt_residual = s.kkt_residual;
  if (!s.optimal()) return plan;
  const int M = cfg.T - t;
  plan.u_bar.resize(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) plan.u_bar[static_cast<std::size_t>(j)] = s.x.segment<2>(2 + 2 * j);
  plan.e_bar = nominal_states(cfg, s.x.head<2>(), plan.u_bar);
  plan.cost = nominal_cost(cfg, plan.e_bar, plan.u_bar);
  return plan;
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::TrialFailureP1: return "P1";
    case Status::TrialFailureP2: return "P2";
    case Status::Done: return "done";
  }
  return "unknown";
}

CatchController::CatchController(const ControllerConfig& cfg, const TightenedSets& ts) : cfg_(cfg), ts_(ts) {}

Vec2 CatchController::step(const Vec2& y) {
  last_ = StepLog{};
  last_.t = t_;
  last_.y = y;
  last_.e_hat = e_hat_;
  if (status_ != Status::Running || t_ >= cfg_.T) {
    if (status_ == Status::Running) status_ = Status::Done;
    ++t_;
    return Vec2::Zero();
  }
  if (t_ == 0) {
    const auto init = observer_init(cfg_, ts_, y);
    if (!init) {
      status_ = Status::TrialFailureP2;
      ++t_;
      return Vec2::Zero();
    }
    e_hat_ = *init;
    last_.e_hat = e_hat_;
  }
  const NominalPlan plan = solve_shrinking_qp(cfg_, ts_, e_hat_, t_);
  last_.qp_status = plan.status;
  if (!plan.feasible()) {
    status_ = t_ == 0 ? Status::TrialFailureP2 : Status::TrialFailureP1;
    ++t_;
    return Vec2::Zero();
  }
  const Vec2 u = control_law(plan.u_bar.front(), plan.e_bar.front(), e_hat_, cfg_.K);
  last_.e_bar = plan.e_bar.front();
  last_.u_bar = plan.u_bar.front();
  last_.u = u;
  last_.active = true;
  e_hat_ = observer_update(cfg_, e_hat_, u, y);
  ++t_;
  if (t_ == cfg_.T) status_ = Status::Done;
  return u;
}

}  // namespace kendama::controller
