#include "kendama/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace kendama::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Factorization state of the dual method. J = L⁻ᵀ Q, R upper triangular,
// with the first `iq` columns of J spanning the active constraint normals.
struct Workspace {
  MatrixXd J;
  MatrixXd R;
  VectorXd d;
  VectorXd z;
  VectorXd r;
  std::vector<int> active;  // >= 0: inequality index, < 0: -(eq index) - 1
  VectorXd u;
  int iq = 0;
  double R_norm = 1.0;

  void compute_step(const VectorXd& np) {
    const Eigen::Index n = J.rows();
    d.noalias() = J.transpose() * np;
    z.noalias() = J.rightCols(n - iq) * d.tail(n - iq);
    if (iq > 0) {
      r.head(iq) = R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
    }
  }

  bool add_constraint() {
    const Eigen::Index n = J.rows();
    for (Eigen::Index j = n - 1; j >= iq + 1; --j) {
      double cc = d(j - 1);
      double ss = d(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(j - 1) = -h;
      } else {
        d(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = J(k, j - 1);
        const double t2 = J(k, j);
        J(k, j - 1) = t1 * cc + t2 * ss;
        J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
      }
    }
    ++iq;
    R.col(iq - 1).head(iq) = d.head(iq);
    if (std::abs(d(iq - 1)) <= kEps * R_norm) return false;
    R_norm = std::max(R_norm, std::abs(d(iq - 1)));
    return true;
  }

  void delete_constraint(int num_eq, int constraint) {
    const Eigen::Index n = J.rows();
    int qq = -1;
    for (int i = num_eq; i < iq; ++i) {
      if (active[static_cast<std::size_t>(i)] == constraint) {
        qq = i;
        break;
      }
    }
    if (qq < 0) throw std::logic_error("qp: constraint to delete is not active");
    for (int i = qq; i < iq - 1; ++i) {
      active[static_cast<std::size_t>(i)] = active[static_cast<std::size_t>(i + 1)];
      u(i) = u(i + 1);
      R.col(i) = R.col(i + 1);
    }
    active[static_cast<std::size_t>(iq - 1)] = active[static_cast<std::size_t>(iq)];
    u(iq - 1) = u(iq);
    active[static_cast<std::size_t>(iq)] = 0;
    u(iq) = 0.0;
    R.col(iq - 1).head(iq).setZero();
    --iq;
    if (iq == 0) return;
    for (int j = qq; j < iq; ++j) {
      double cc = R(j, j);
      double ss = R(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq; ++k) {
        const double t1 = R(j, k);
        const double t2 = R(j + 1, k);
        R(j, k) = t1 * cc + t2 * ss;
        R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = J(k, j);
        const double t2 = J(k, j + 1);
        J(k, j) = t1 * cc + t2 * ss;
        J(k, j + 1) = xny * (J(k, j) + t1) - t2;
      }
    }
  }
};

// Solve the equality-constrained KKT system on a fixed active set.
bool refine_on_active_set(const Problem& p, const std::vector<int>& in_active, VectorXd& x, VectorXd& nu,
                          VectorXd& lambda) {
  const Eigen::Index n = p.num_vars();
  const Eigen::Index ne = p.A_eq.rows();
  const Eigen::Index na = static_cast<Eigen::Index>(in_active.size());
  MatrixXd K = MatrixXd::Zero(n + ne + na, n + ne + na);
  VectorXd rhs(n + ne + na);
  K.topLeftCorner(n, n) = p.H;
  rhs.head(n) = -p.g;
  if (ne > 0) {
    K.block(0, n, n, ne) = p.A_eq.transpose();
    K.block(n, 0, ne, n) = p.A_eq;
    rhs.segment(n, ne) = p.b_eq;
  }
  for (Eigen::Index k = 0; k < na; ++k) {
    const int i = in_active[static_cast<std::size_t>(k)];
    K.block(0, n + ne + k, n, 1) = p.A_in.row(i).transpose();
    K.block(n + ne + k, 0, 1, n) = p.A_in.row(i);
    rhs(n + ne + k) = p.b_in(i);
  }
  Eigen::FullPivLU<MatrixXd> lu(K);
  if (lu.rank() < K.rows()) return false;
  VectorXd sol = lu.solve(rhs);
  sol += lu.solve(rhs - K * sol);  // one step of iterative refinement
  if (!sol.allFinite()) return false;

  VectorXd lam = VectorXd::Zero(p.A_in.rows());
  for (Eigen::Index k = 0; k < na; ++k) lam(in_active[static_cast<std::size_t>(k)]) = sol(n + ne + k);
  x = sol.head(n);
  nu = sol.segment(n, ne);
  lambda = lam;
  return true;
}

}  // namespace

std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

double kkt_residual(const Problem& p, const VectorXd& x, const VectorXd& nu, const VectorXd& lambda) {
  VectorXd stat = p.H * x + p.g;
  if (p.A_eq.rows() > 0) stat += p.A_eq.transpose() * nu;
  if (p.A_in.rows() > 0) stat += p.A_in.transpose() * lambda;
  double res = stat.cwiseAbs().maxCoeff();
  if (p.A_eq.rows() > 0) res = std::max(res, (p.A_eq * x - p.b_eq).cwiseAbs().maxCoeff());
  if (p.A_in.rows() > 0) {
    const VectorXd slack = p.A_in * x - p.b_in;
    res = std::max(res, slack.maxCoeff());
    res = std::max(res, (-lambda).maxCoeff());
    res = std::max(res, lambda.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  return std::max(res, 0.0);
}

Solution solve(const Problem& p, const Options& opts) {
  const Eigen::Index n = p.num_vars();
  const int ne = static_cast<int>(p.A_eq.rows());
  const int m = static_cast<int>(p.A_in.rows());
  if (p.g.size() != n || (ne > 0 && p.A_eq.cols() != n) || (m > 0 && p.A_in.cols() != n) ||
      p.b_eq.size() != ne || p.b_in.size() != m) {
    throw std::invalid_argument("qp::solve: inconsistent problem dimensions");
  }

  Solution sol;
  Eigen::LLT<MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("qp::solve: H is not positive definite");

  Workspace ws;
  ws.J = llt.matrixL().solve(MatrixXd::Identity(n, n)).transpose();
  ws.R = MatrixXd::Zero(n, n);
  ws.d = VectorXd::Zero(n);
  ws.z = VectorXd::Zero(n);
  ws.r = VectorXd::Zero(n + m);
  ws.u = VectorXd::Zero(n + m + 1);
  ws.active.assign(static_cast<std::size_t>(n + m + 1), 0);

  VectorXd x = llt.solve(-p.g);

  // Equality constraints, in GI form CEᵀx + ce0 = 0 with CE = A_eqᵀ, ce0 = -b_eq.
  for (int i = 0; i < ne; ++i) {
    const VectorXd np = p.A_eq.row(i).transpose();
    ws.compute_step(np);
    double t2 = 0.0;
    if (ws.z.squaredNorm() > kEps) t2 = (p.b_eq(i) - np.dot(x)) / ws.z.dot(np);
    x += t2 * ws.z;
    ws.u(ws.iq) = t2;
    if (ws.iq > 0) ws.u.head(ws.iq) -= t2 * ws.r.head(ws.iq);
    ws.active[static_cast<std::size_t>(ws.iq)] = -i - 1;
    if (!ws.add_constraint()) {
      sol.status = Status::Infeasible;  // linearly dependent equalities
      sol.x = x;
      return sol;
    }
  }

  // Inequalities in GI form: s_i = b_i - A_i x >= 0.
  auto slack = [&](int i, const VectorXd& xv) { return p.b_in(i) - p.A_in.row(i).dot(xv); };
  auto tol_of = [&](int i) { return opts.feasibility_tol * (1.0 + std::abs(p.b_in(i))); };

  std::vector<int> inactive(static_cast<std::size_t>(m));
  std::vector<char> excluded(static_cast<std::size_t>(m), 0);
  VectorXd s(m);
  VectorXd u_old(n + m + 1);
  std::vector<int> active_old;
  VectorXd x_old;
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(10 * (n + m) + 10);

  int iter = 0;
  bool done = false;
  while (!done) {
    if (++iter > max_iter) {
      sol.status = Status::IterationLimit;
      break;
    }
    // Step 1: recompute slacks and reset the inactive markers.
    for (int i = 0; i < m; ++i) inactive[static_cast<std::size_t>(i)] = i;
    for (int i = ne; i < ws.iq; ++i) inactive[static_cast<std::size_t>(ws.active[static_cast<std::size_t>(i)])] = -1;
    std::fill(excluded.begin(), excluded.end(), 0);
    for (int i = 0; i < m; ++i) s(i) = slack(i, x);
    u_old = ws.u;
    active_old = ws.active;
    x_old = x;

    bool pick_again = true;
    while (pick_again) {
      pick_again = false;
      // Step 2: most violated inactive constraint.
      int ip = -1;
      double worst = 0.0;
      for (int i = 0; i < m; ++i) {
        if (inactive[static_cast<std::size_t>(i)] != -1 && !excluded[static_cast<std::size_t>(i)] &&
            s(i) < -tol_of(i) && s(i) < worst) {
          worst = s(i);
          ip = i;
        }
      }
      if (ip < 0) {
        sol.status = Status::Optimal;
        done = true;
        break;
      }
      const VectorXd np = -p.A_in.row(ip).transpose();
      ws.u(ws.iq) = 0.0;
      ws.active[static_cast<std::size_t>(ws.iq)] = ip;

      for (;;) {  // Step 2a
        if (++iter > max_iter) {
          sol.status = Status::IterationLimit;
          done = true;
          break;
        }
        ws.compute_step(np);
        int l = -1;
        double t1 = kInf;
        for (int k = ne; k < ws.iq; ++k) {
          if (ws.r(k) > 0.0 && ws.u(k) / ws.r(k) < t1) {
            t1 = ws.u(k) / ws.r(k);
            l = ws.active[static_cast<std::size_t>(k)];
          }
        }
        const double znp = ws.z.dot(np);
        const double t2 = (ws.z.squaredNorm() > kEps && znp > 0.0) ? -s(ip) / znp : kInf;
        const double t = std::min(t1, t2);
        if (t >= kInf) {
          sol.status = Status::Infeasible;
          done = true;
          break;
        }
        if (t2 >= kInf) {
          // Dual step only.
          if (ws.iq > 0) ws.u.head(ws.iq) -= t * ws.r.head(ws.iq);
          ws.u(ws.iq) += t;
          inactive[static_cast<std::size_t>(l)] = l;
          ws.delete_constraint(ne, l);
          continue;
        }
        x += t * ws.z;
        if (ws.iq > 0) ws.u.head(ws.iq) -= t * ws.r.head(ws.iq);
        ws.u(ws.iq) += t;
        if (std::abs(t - t2) <= kEps * std::max(1.0, std::abs(t2))) {
          if (!ws.add_constraint()) {
            // Degenerate: exclude this constraint and restore the last state.
            excluded[static_cast<std::size_t>(ip)] = 1;
            ws.delete_constraint(ne, ip);
            for (int i = 0; i < m; ++i) inactive[static_cast<std::size_t>(i)] = i;
            for (int i = ne; i < ws.iq; ++i) {
              ws.active[static_cast<std::size_t>(i)] = active_old[static_cast<std::size_t>(i)];
              ws.u(i) = u_old(i);
              inactive[static_cast<std::size_t>(ws.active[static_cast<std::size_t>(i)])] = -1;
            }
            x = x_old;
            pick_again = true;
          } else {
            inactive[static_cast<std::size_t>(ip)] = -1;
          }
          break;
        }
        // Partial step: drop the blocking constraint and continue with ip.
        inactive[static_cast<std::size_t>(l)] = l;
        ws.delete_constraint(ne, l);
        s(ip) = slack(ip, x);
      }
      if (done) break;
    }
  }

  sol.iterations = iter;
  sol.x = x;
  sol.eq_multipliers = VectorXd::Zero(ne);
  sol.in_multipliers = VectorXd::Zero(m);
  std::vector<int> in_active;
  for (int k = 0; k < ws.iq; ++k) {
    const int a = ws.active[static_cast<std::size_t>(k)];
    if (a < 0) {
      sol.eq_multipliers(-a - 1) = -ws.u(k);
    } else {
      sol.in_multipliers(a) = ws.u(k);
      in_active.push_back(a);
    }
  }
  if (sol.status != Status::Optimal) return sol;

  sol.kkt_residual = kkt_residual(p, sol.x, sol.eq_multipliers, sol.in_multipliers);
  if (opts.refine) {
    VectorXd xr, nur, lamr;
    if (refine_on_active_set(p, in_active, xr, nur, lamr)) {
      const double res = kkt_residual(p, xr, nur, lamr);
      if (res < sol.kkt_residual) {
        sol.x = xr;
        sol.eq_multipliers = nur;
        sol.in_multipliers = lamr;
        sol.kkt_residual = res;
      }
    }
  }
  sol.objective = p.objective(sol.x);
  return sol;
}

}  // namespace kendama::qp
