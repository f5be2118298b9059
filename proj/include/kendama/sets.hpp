#pragma once

/**
 * @file sets.hpp
 * @brief Planar convex-set algebra: boxes, zonotopes and H-polytopes.
 *
 * Sets flow through the controller as zonotopes, which are closed under
 * linear maps and Minkowski sums. H-polytopes appear only where a Pontryagin
 * difference is taken or where a set enters the QP as linear inequalities.
 * All values are immutable after construction.
 */

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace kendama::sets {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Generators = Eigen::Matrix<double, 2, Eigen::Dynamic>;
using Rows = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Absolute slack used by every membership and containment test.
inline constexpr double kMembershipSlack = 1e-9;

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box [lo, hi]. Empty when any lo > hi.
struct Box {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Zero();

  Box() = default;
  Box(const Vec2& lo_in, const Vec2& hi_in) : lo(lo_in), hi(hi_in) {}

  static Box symmetric(const Vec2& half_width) { return {-half_width, half_width}; }

  bool is_empty() const { return (lo.array() > hi.array()).any(); }
  Vec2 center() const { return 0.5 * (lo + hi); }
  Vec2 half_width() const { return 0.5 * (hi - lo); }
  double volume() const { return is_empty() ? 0.0 : (hi - lo).prod(); }
  Box negated() const { return {-hi, -lo}; }
  bool contains_box(const Box& other, double slack = kMembershipSlack) const;
};

/// Zonotope c ⊕ Σ [-1,1]·g_i, generators stored column-wise.
class Zonotope {
 public:
  Zonotope() = default;
  explicit Zonotope(const Vec2& center, Generators generators = Generators(2, 0));
  explicit Zonotope(const Box& box);

  static Zonotope point(const Vec2& p) { return Zonotope(p); }

  const Vec2& center() const { return center_; }
  const Generators& generators() const { return generators_; }
  Eigen::Index order() const { return generators_.cols(); }

  /// h(d) = dᵀc + Σ |dᵀ g_i|
  double support(const Vec2& direction) const;

  /// Same set with parallel generators summed and zero generators dropped.
  Zonotope compacted() const;

  /// Counter-clockwise vertex list (a single point or two endpoints when degenerate).
  std::vector<Vec2> vertices() const;

  /// Maximum Euclidean norm over the set.
  double radius() const;

  Box bounding_box() const;

 private:
  Vec2 center_ = Vec2::Zero();
  Generators generators_ = Generators(2, 0);
};

/// {x : H x ≤ h}. Emptiness is decided once, at construction.
class HPolytope {
 public:
  HPolytope() = default;
  HPolytope(Rows H, Eigen::VectorXd h);
  explicit HPolytope(const Box& box);

  const Rows& H() const { return H_; }
  const Eigen::VectorXd& h() const { return h_; }
  Eigen::Index rows() const { return H_.rows(); }
  bool is_empty() const { return empty_; }

  bool contains(const Vec2& x, double slack = kMembershipSlack) const;

  /// Support function via vertex enumeration; -inf when empty.
  double support(const Vec2& direction) const;

  /// Counter-clockwise vertices (possibly degenerate). Empty when the set is.
  const std::vector<Vec2>& vertices() const { return vertices_; }

  /// Area centroid, or the vertex mean for degenerate polygons.
  std::optional<Vec2> interior_point() const;

  HPolytope translated(const Vec2& offset) const;
  HPolytope negated() const;
  HPolytope intersected(const HPolytope& other) const;
  Box bounding_box() const;

 private:
  Rows H_ = Rows(0, 2);
  Eigen::VectorXd h_ = Eigen::VectorXd(0);
  std::vector<Vec2> vertices_;
  bool empty_ = false;
};

using ConvexSet = std::variant<Box, Zonotope, HPolytope>;

std::string type_name(const ConvexSet& s);

/// Box and zonotope promote to zonotope; HPolytope throws std::invalid_argument.
Zonotope to_zonotope(const ConvexSet& s);
/// Exact H-representation of any planar set in the union.
HPolytope to_hpolytope(const ConvexSet& s);

double support(const ConvexSet& s, const Vec2& direction);
Box bounding_box(const ConvexSet& s);

/// Exact Minkowski sum of two zonotopes.
Zonotope minkowski_sum(const Zonotope& a, const Zonotope& b);

/// outer ⊖ inner. Rows are kept; offsets shrink by the support of `inner`.
HPolytope pontryagin_diff(const HPolytope& outer, const ConvexSet& inner);

/// M·s. Boxes and zonotopes map to zonotopes; an H-polytope maps through an
/// invertible M and stays an H-polytope.
ConvexSet linear_map(const Mat2& M, const ConvexSet& s);
Zonotope linear_map(const Mat2& M, const Zonotope& z);

struct RpiOptions {
  double tol = 1e-4;
  int max_terms = 2000;
};

/**
 * Outer approximation of the minimal robust positive invariant set of
 * x⁺ = A x + d, d ∈ D.
 *
 * Finds the smallest k with Aᵏ D ⊆ α D such that α/(1−α)·radius(F_k) ≤ tol,
 * where F_k = ⊕_{i<k} Aⁱ D, and returns (1−α)⁻¹ F_k. The result satisfies
 * A R ⊕ D ⊆ R and lies within `tol` (Hausdorff) of the minimal RPI set.
 *
 * Throws NoConvergence when k exceeds opts.max_terms, std::invalid_argument
 * when A is not Schur stable.
 */
Zonotope rpi_outer_approx(const Mat2& A, const ConvexSet& D, const RpiOptions& opts = {});

bool contains(const ConvexSet& s, const Vec2& x, double slack = kMembershipSlack);

/// True when every point of `inner` lies in `outer` (up to slack), using
/// support functions on the facet normals of `outer`.
bool is_subset(const ConvexSet& inner, const ConvexSet& outer, double slack = kMembershipSlack);

double spectral_radius(const Mat2& A);

// JSON: {"type": "box"|"zonotope"|"hpoly", ...}
nlohmann::json to_json(const ConvexSet& s);
ConvexSet convex_set_from_json(const nlohmann::json& j);

}  // namespace kendama::sets
