#pragma once

#include <string>

#include <Eigen/Core>

namespace kendama::qp {

/// min ½ xᵀHx + gᵀx  s.t.  A_eq x = b_eq,  A_in x ≤ b_in.  H must be positive definite.
struct Problem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;

  Eigen::Index num_vars() const { return H.rows(); }
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

enum class Status { Optimal, Infeasible, IterationLimit };

std::string to_string(Status s);

struct Options {
  int max_iterations = 0;        // 0: 10·(n + m)
  double feasibility_tol = 1e-12;  // relative to 1 + |b_i|
  bool refine = true;            // re-solve the KKT system on the final active set
};

/// Multipliers follow L = f + νᵀ(A_eq x − b_eq) + λᵀ(A_in x − b_in), λ ≥ 0.
struct Solution {
  Status status = Status::Infeasible;
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd in_multipliers;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;

  bool optimal() const { return status == Status::Optimal; }
};

/**
 * Dense dual active-set solver (Goldfarb–Idnani). It needs no feasible
 * starting point and reports infeasibility when the dual becomes unbounded.
 */
Solution solve(const Problem& problem, const Options& options = {});

/// max of stationarity, primal infeasibility, dual infeasibility and
/// complementarity violations, all in absolute terms.
double kkt_residual(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                    const Eigen::VectorXd& lambda);

}  // namespace kendama::qp
