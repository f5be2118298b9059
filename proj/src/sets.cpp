#include "kendama/sets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace kendama::sets {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Half-width of the initial square clipped down to an H-polytope's polygon.
constexpr double kClipBound = 1e4;
constexpr double kZeroGenerator = 1e-15;
constexpr double kParallelTol = 1e-12;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double row_slack(const Eigen::RowVector2d& row, double slack) {
  return slack * std::max(1.0, row.norm());
}

// Orient a generator into the upper half plane: angle in [0, pi).
Vec2 oriented(const Vec2& g) {
  if (g.y() < 0.0 || (g.y() == 0.0 && g.x() < 0.0)) return -g;
  return g;
}

std::vector<Vec2> clip_polygon(const Rows& H, const Eigen::VectorXd& h) {
  std::vector<Vec2> poly{Vec2(-kClipBound, -kClipBound), Vec2(kClipBound, -kClipBound),
                         Vec2(kClipBound, kClipBound), Vec2(-kClipBound, kClipBound)};
  for (Eigen::Index i = 0; i < H.rows() && !poly.empty(); ++i) {
    const Eigen::RowVector2d a = H.row(i);
    const double tol = row_slack(a, kMembershipSlack);
    if (a.norm() < kZeroGenerator) {
      if (h(i) < -tol) poly.clear();
      continue;
    }
    std::vector<Vec2> out;
    out.reserve(poly.size() + 1);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Vec2& p = poly[k];
      const Vec2& q = poly[(k + 1) % poly.size()];
      const double dp = a.dot(p) - h(i);
      const double dq = a.dot(q) - h(i);
      const bool p_in = dp <= tol;
      const bool q_in = dq <= tol;
      if (p_in) out.push_back(p);
      if (p_in != q_in) {
        const double t = dp / (dp - dq);
        out.push_back(p + std::clamp(t, 0.0, 1.0) * (q - p));
      }
    }
    // Drop consecutive duplicates.
    std::vector<Vec2> dedup;
    for (const auto& v : out) {
      if (dedup.empty() || (v - dedup.back()).norm() > 1e-12 * (1.0 + v.norm())) dedup.push_back(v);
    }
    while (dedup.size() > 1 && (dedup.front() - dedup.back()).norm() <= 1e-12 * (1.0 + dedup.front().norm())) {
      dedup.pop_back();
    }
    poly = std::move(dedup);
  }
  return poly;
}

Zonotope scaled(const Zonotope& z, double s) { return Zonotope(s * z.center(), s * z.generators()); }

}  // namespace

bool Box::contains_box(const Box& other, double slack) const {
  if (other.is_empty()) return true;
  return (other.lo.array() >= lo.array() - slack).all() && (other.hi.array() <= hi.array() + slack).all();
}

// ---------------------------------------------------------------------------
// Zonotope

Zonotope::Zonotope(const Vec2& center, Generators generators)
    : center_(center), generators_(std::move(generators)) {}

Zonotope::Zonotope(const Box& box) {
  if (box.is_empty()) throw std::invalid_argument("cannot promote an empty box to a zonotope");
  center_ = box.center();
  const Vec2 hw = box.half_width();
  generators_ = Generators::Zero(2, 2);
  generators_(0, 0) = hw.x();
  generators_(1, 1) = hw.y();
}

double Zonotope::support(const Vec2& d) const {
  return d.dot(center_) + (d.transpose() * generators_).cwiseAbs().sum();
}

Zonotope Zonotope::compacted() const {
  std::vector<Vec2> gens;
  gens.reserve(static_cast<std::size_t>(generators_.cols()));
  for (Eigen::Index i = 0; i < generators_.cols(); ++i) {
    const Vec2 g = generators_.col(i);
    if (g.norm() > kZeroGenerator) gens.push_back(oriented(g));
  }
  std::sort(gens.begin(), gens.end(), [](const Vec2& a, const Vec2& b) {
    return std::atan2(a.y(), a.x()) < std::atan2(b.y(), b.x());
  });
  std::vector<Vec2> merged;
  auto parallel = [](const Vec2& a, const Vec2& b) {
    return std::abs(cross(a, b)) <= kParallelTol * a.norm() * b.norm();
  };
  for (const auto& g : gens) {
    if (!merged.empty() && parallel(merged.back(), g)) {
      merged.back() += (merged.back().dot(g) >= 0.0 ? 1.0 : -1.0) * g;
    } else {
      merged.push_back(g);
    }
  }
  // Directions near 0 and near pi are parallel across the wrap-around.
  if (merged.size() > 1 && parallel(merged.front(), merged.back())) {
    merged.front() += (merged.front().dot(merged.back()) >= 0.0 ? 1.0 : -1.0) * merged.back();
    merged.pop_back();
  }
  Generators out(2, static_cast<Eigen::Index>(merged.size()));
  Eigen::Index col = 0;
  for (const auto& g : merged) {
    if (g.norm() > kZeroGenerator) out.col(col++) = g;
  }
  out.conservativeResize(2, col);
  return Zonotope(center_, out);
}

std::vector<Vec2> Zonotope::vertices() const {
  const Zonotope z = compacted();
  const Generators& G = z.generators();
  if (G.cols() == 0) return {center_};
  // Sort by angle in [0, pi) and walk the boundary counter-clockwise.
  std::vector<Vec2> gens;
  for (Eigen::Index i = 0; i < G.cols(); ++i) gens.push_back(oriented(G.col(i)));
  std::sort(gens.begin(), gens.end(), [](const Vec2& a, const Vec2& b) {
    return std::atan2(a.y(), a.x()) < std::atan2(b.y(), b.x());
  });
  Vec2 v = center_;
  for (const auto& g : gens) v -= g;
  if (gens.size() == 1) return {v, v + 2.0 * gens.front()};
  std::vector<Vec2> verts;
  verts.reserve(2 * gens.size());
  for (const auto& g : gens) {
    verts.push_back(v);
    v += 2.0 * g;
  }
  for (const auto& g : gens) {
    verts.push_back(v);
    v -= 2.0 * g;
  }
  return verts;
}

double Zonotope::radius() const {
  double r = 0.0;
  for (const auto& v : vertices()) r = std::max(r, v.norm());
  return r;
}

Box Zonotope::bounding_box() const {
  const Vec2 hw = generators_.cwiseAbs().rowwise().sum();
  return {center_ - hw, center_ + hw};
}

// ---------------------------------------------------------------------------
// HPolytope

HPolytope::HPolytope(Rows H, Eigen::VectorXd h) : H_(std::move(H)), h_(std::move(h)) {
  if (H_.rows() != h_.size()) throw std::invalid_argument("HPolytope: row count mismatch");
  if (!H_.allFinite() || !h_.allFinite()) throw std::invalid_argument("HPolytope: non-finite data");
  vertices_ = clip_polygon(H_, h_);
  empty_ = vertices_.empty();
}

HPolytope::HPolytope(const Box& box) {
  H_ = Rows(4, 2);
  H_ << 1, 0, 0, 1, -1, 0, 0, -1;
  h_ = Eigen::VectorXd(4);
  h_ << box.hi.x(), box.hi.y(), -box.lo.x(), -box.lo.y();
  vertices_ = clip_polygon(H_, h_);
  empty_ = vertices_.empty();
}

bool HPolytope::contains(const Vec2& x, double slack) const {
  if (empty_) return false;
  for (Eigen::Index i = 0; i < H_.rows(); ++i) {
    if (H_.row(i).dot(x) > h_(i) + row_slack(H_.row(i), slack)) return false;
  }
  return true;
}

double HPolytope::support(const Vec2& d) const {
  if (empty_) return -kInf;
  double best = -kInf;
  for (const auto& v : vertices_) {
    if (v.cwiseAbs().maxCoeff() >= kClipBound * (1.0 - 1e-9)) {
      throw std::domain_error("HPolytope::support: set is unbounded");
    }
    best = std::max(best, d.dot(v));
  }
  return best;
}

std::optional<Vec2> HPolytope::interior_point() const {
  if (empty_) return std::nullopt;
  double area2 = 0.0;
  Vec2 acc = Vec2::Zero();
  const std::size_t n = vertices_.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2& p = vertices_[k];
    const Vec2& q = vertices_[(k + 1) % n];
    const double c = cross(p, q);
    area2 += c;
    acc += c * (p + q);
  }
  if (std::abs(area2) > 1e-18) return Vec2(acc / (3.0 * area2));
  Vec2 mean = Vec2::Zero();
  for (const auto& v : vertices_) mean += v;
  return Vec2(mean / static_cast<double>(n));
}

HPolytope HPolytope::translated(const Vec2& offset) const {
  return HPolytope(H_, h_ + H_ * offset);
}

HPolytope HPolytope::negated() const { return HPolytope(-H_, h_); }

HPolytope HPolytope::intersected(const HPolytope& other) const {
  Rows H(H_.rows() + other.H_.rows(), 2);
  H << H_, other.H_;
  Eigen::VectorXd h(h_.size() + other.h_.size());
  h << h_, other.h_;
  return HPolytope(std::move(H), std::move(h));
}

Box HPolytope::bounding_box() const {
  if (empty_) return {Vec2::Constant(kInf), Vec2::Constant(-kInf)};
  Vec2 lo = Vec2::Constant(kInf);
  Vec2 hi = Vec2::Constant(-kInf);
  for (const auto& v : vertices_) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// Free functions

std::string type_name(const ConvexSet& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Box>) return "box";
        else if constexpr (std::is_same_v<T, Zonotope>) return "zonotope";
        else return "hpoly";
      },
      s);
}

Zonotope to_zonotope(const ConvexSet& s) {
  if (const auto* b = std::get_if<Box>(&s)) return Zonotope(*b);
  if (const auto* z = std::get_if<Zonotope>(&s)) return *z;
  throw std::invalid_argument("to_zonotope: H-polytopes have no zonotope form in general");
}

HPolytope to_hpolytope(const ConvexSet& s) {
  if (const auto* b = std::get_if<Box>(&s)) return HPolytope(*b);
  if (const auto* p = std::get_if<HPolytope>(&s)) return *p;
  const Zonotope z = std::get<Zonotope>(s).compacted();
  const Generators& G = z.generators();
  std::vector<Eigen::RowVector2d> rows;
  for (Eigen::Index i = 0; i < G.cols(); ++i) {
    const Vec2 g = G.col(i);
    const Eigen::RowVector2d n = Eigen::RowVector2d(-g.y(), g.x()) / g.norm();
    rows.push_back(n);
    rows.push_back(-n);
  }
  if (G.cols() < 2) {
    // Segment or point: close it off along the axes.
    rows.push_back(Eigen::RowVector2d(1, 0));
    rows.push_back(Eigen::RowVector2d(-1, 0));
    rows.push_back(Eigen::RowVector2d(0, 1));
    rows.push_back(Eigen::RowVector2d(0, -1));
  }
  Rows H(static_cast<Eigen::Index>(rows.size()), 2);
  Eigen::VectorXd h(H.rows());
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    H.row(i) = rows[static_cast<std::size_t>(i)];
    h(i) = z.support(H.row(i).transpose());
  }
  return HPolytope(std::move(H), std::move(h));
}

double support(const ConvexSet& s, const Vec2& d) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Box>) {
          if (v.is_empty()) return -kInf;
          return d.cwiseMax(0.0).dot(v.hi) + d.cwiseMin(0.0).dot(v.lo);
        } else {
          return v.support(d);
        }
      },
      s);
}

Box bounding_box(const ConvexSet& s) {
  return std::visit([](const auto& v) -> Box {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, Box>) return v;
    else return v.bounding_box();
  }, s);
}

Zonotope minkowski_sum(const Zonotope& a, const Zonotope& b) {
  Generators G(2, a.order() + b.order());
  G << a.generators(), b.generators();
  return Zonotope(a.center() + b.center(), std::move(G));
}

HPolytope pontryagin_diff(const HPolytope& outer, const ConvexSet& inner) {
  Eigen::VectorXd h = outer.h();
  for (Eigen::Index i = 0; i < outer.rows(); ++i) {
    const double s = support(inner, outer.H().row(i).transpose());
    if (s == -kInf) throw std::invalid_argument("pontryagin_diff: inner set is empty");
    h(i) -= s;
  }
  return HPolytope(outer.H(), std::move(h));
}

Zonotope linear_map(const Mat2& M, const Zonotope& z) {
  return Zonotope(M * z.center(), M * z.generators());
}

ConvexSet linear_map(const Mat2& M, const ConvexSet& s) {
  if (const auto* p = std::get_if<HPolytope>(&s)) {
    if (std::abs(M.determinant()) < 1e-14) {
      throw std::invalid_argument("linear_map: H-polytopes need an invertible map");
    }
    return HPolytope(p->H() * M.inverse(), p->h());
  }
  return linear_map(M, to_zonotope(s));
}

double spectral_radius(const Mat2& A) {
  Eigen::EigenSolver<Mat2> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Zonotope rpi_outer_approx(const Mat2& A, const ConvexSet& D, const RpiOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("rpi_outer_approx: tol must be positive");
  if (spectral_radius(A) >= 1.0) throw std::invalid_argument("rpi_outer_approx: A is not Schur stable");

  Zonotope d = to_zonotope(D).compacted();
  if (d.order() == 0 && d.center().norm() <= kMembershipSlack) return Zonotope::point(Vec2::Zero());

  HPolytope facets = to_hpolytope(d);
  // The contraction test divides by h_D(n); it needs the origin in the interior.
  if ((facets.h().array() <= 1e-12).any()) {
    const double inflate = std::max(1e-12, 1e-3 * opts.tol);
    d = minkowski_sum(d, Zonotope(Box::symmetric(Vec2::Constant(inflate)))).compacted();
    facets = to_hpolytope(d);
    if ((facets.h().array() <= 1e-12).any()) {
      throw std::invalid_argument("rpi_outer_approx: disturbance set must contain the origin");
    }
  }

  const Eigen::Index m = d.order();
  Generators sum_gens(2, 0);
  Vec2 sum_center = Vec2::Zero();
  double sum_norm_bound = 0.0;
  Mat2 Ak = Mat2::Identity();

  for (int k = 1; k <= opts.max_terms; ++k) {
    // Append A^{k-1} D to the partial sum F_k.
    const Generators mapped = Ak * d.generators();
    sum_gens.conservativeResize(2, sum_gens.cols() + m);
    sum_gens.rightCols(m) = mapped;
    sum_center += Ak * d.center();
    sum_norm_bound += mapped.colwise().norm().sum();
    Ak = A * Ak;

    const Zonotope ak_d = linear_map(Ak, d);
    double alpha = 0.0;
    for (Eigen::Index j = 0; j < facets.rows(); ++j) {
      alpha = std::max(alpha, ak_d.support(facets.H().row(j).transpose()) / facets.h()(j));
    }
    if (alpha >= 1.0) continue;
    const double radius_bound = sum_center.norm() + sum_norm_bound;
    if (alpha / (1.0 - alpha) * radius_bound <= opts.tol) {
      return scaled(Zonotope(sum_center, sum_gens), 1.0 / (1.0 - alpha)).compacted();
    }
  }
  throw NoConvergence("rpi_outer_approx: no contraction within " + std::to_string(opts.max_terms) + " terms");
}

bool contains(const ConvexSet& s, const Vec2& x, double slack) {
  if (const auto* b = std::get_if<Box>(&s)) {
    if (b->is_empty()) return false;
    return (x.array() >= b->lo.array() - slack).all() && (x.array() <= b->hi.array() + slack).all();
  }
  return to_hpolytope(s).contains(x, slack);
}

bool is_subset(const ConvexSet& inner, const ConvexSet& outer, double slack) {
  const HPolytope o = to_hpolytope(outer);
  for (Eigen::Index i = 0; i < o.rows(); ++i) {
    const Eigen::RowVector2d row = o.H().row(i);
    if (support(inner, row.transpose()) > o.h()(i) + row_slack(row, slack)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSON

namespace {
nlohmann::json vec_json(const Vec2& v) { return nlohmann::json::array({v.x(), v.y()}); }

Vec2 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected a 2-element array");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}
}  // namespace

nlohmann::json to_json(const ConvexSet& s) {
  using nlohmann::json;
  if (const auto* b = std::get_if<Box>(&s)) {
    return json{{"type", "box"}, {"lo", vec_json(b->lo)}, {"hi", vec_json(b->hi)}};
  }
  if (const auto* z = std::get_if<Zonotope>(&s)) {
    json gens = json::array();
    for (Eigen::Index i = 0; i < z->order(); ++i) gens.push_back(vec_json(z->generators().col(i)));
    return json{{"type", "zonotope"}, {"center", vec_json(z->center())}, {"generators", gens}};
  }
  const auto& p = std::get<HPolytope>(s);
  json rows = json::array();
  json offs = json::array();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    rows.push_back(vec_json(p.H().row(i).transpose()));
    offs.push_back(p.h()(i));
  }
  return json{{"type", "hpoly"}, {"H", rows}, {"h", offs}};
}

ConvexSet convex_set_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "box") return Box(json_vec(j.at("lo")), json_vec(j.at("hi")));
  if (type == "zonotope") {
    const auto& gens = j.at("generators");
    Generators G(2, static_cast<Eigen::Index>(gens.size()));
    for (std::size_t i = 0; i < gens.size(); ++i) G.col(static_cast<Eigen::Index>(i)) = json_vec(gens[i]);
    return Zonotope(json_vec(j.at("center")), G);
  }
  if (type == "hpoly") {
    const auto& rows = j.at("H");
    const auto& offs = j.at("h");
    if (rows.size() != offs.size()) throw std::invalid_argument("hpoly: H and h sizes differ");
    Rows H(static_cast<Eigen::Index>(rows.size()), 2);
    Eigen::VectorXd h(H.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      H.row(static_cast<Eigen::Index>(i)) = json_vec(rows[i]).transpose();
      h(static_cast<Eigen::Index>(i)) = offs[i].get<double>();
    }
    return HPolytope(std::move(H), std::move(h));
  }
  throw std::invalid_argument("unknown set type '" + type + "'");
}

}  // namespace kendama::sets
