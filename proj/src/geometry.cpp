#include "ttnav/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "ttnav/errors.hpp"

namespace ttnav {

Pose2D Pose2D::from_xytheta(double x, double y, double theta) {
  Pose2D pose;
  const double c = std::cos(theta), s = std::sin(theta);
  pose.R << c, -s, s, c;
  pose.t << x, y;
  return pose;
}

bool Pose2D::is_rigid(double tol) const {
  const Eigen::Matrix2d err = R.transpose() * R - Eigen::Matrix2d::Identity();
  return std::abs(R.determinant() - 1.0) <= tol &&
         err.cwiseAbs().maxCoeff() <= tol;
}

namespace {
constexpr double kDedupTol = 1e-9;

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}
}  // namespace

ConvexPolygon make_polygon(const std::vector<Eigen::Vector2d>& raw_vertices) {
  // Drop consecutive duplicates (cyclically) within 1e-9.
  std::vector<Eigen::Vector2d> v;
  for (const auto& p : raw_vertices) {
    if (v.empty() || (p - v.back()).norm() > kDedupTol) v.push_back(p);
  }
  while (v.size() >= 2 && (v.front() - v.back()).norm() <= kDedupTol) v.pop_back();

  if (v.size() < 3) throw DegeneratePolygon("polygon needs >= 3 distinct vertices");

  const int n = static_cast<int>(v.size());
  double area2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = v[i];
    const Eigen::Vector2d& b = v[(i + 1) % n];
    const Eigen::Vector2d& c = v[(i + 2) % n];
    const double turn = cross2(b - a, c - b);
    if (turn < -kDedupTol) throw NonConvex("clockwise turn at vertex");
    if (turn <= kDedupTol) throw DegeneratePolygon("collinear vertices");
    area2 += cross2(a, b);
  }
  if (area2 <= 0.0) throw DegeneratePolygon("non-positive area");

  ConvexPolygon poly;
  poly.vertices = v;
  poly.G.resize(n, 2);
  poly.h.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d e = v[(i + 1) % n] - v[i];
    const Eigen::Vector2d normal = Eigen::Vector2d(e.y(), -e.x()).normalized();
    poly.G.row(i) = normal.transpose();
    poly.h(i) = normal.dot(v[i]);
  }

  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : v) c += p;
  poly.center = c / n;
  poly.bounding_radius = 0.0;
  for (const auto& p : v)
    poly.bounding_radius = std::max(poly.bounding_radius, (p - poly.center).norm());
  return poly;
}

bool polygon_invariants_hold(const ConvexPolygon& poly, double tol) {
  const int n = poly.edge_count();
  if (n < 3 || poly.h.size() != n ||
      static_cast<int>(poly.vertices.size()) != n)
    return false;
  for (int i = 0; i < n; ++i) {
    if (std::abs(poly.G.row(i).norm() - 1.0) > tol) return false;
  }
  // Every vertex satisfies G x <= h + tol; each constraint is active
  // (within tol) at exactly two vertices.
  std::vector<int> active_count(n, 0);
  for (const auto& vert : poly.vertices) {
    for (int k = 0; k < n; ++k) {
      const double slack = poly.h(k) - poly.G.row(k).dot(vert);
      if (slack < -tol) return false;
      if (std::abs(slack) <= tol) ++active_count[k];
    }
  }
  for (int k = 0; k < n; ++k)
    if (active_count[k] != 2) return false;
  // Convexity and positive area.
  double area2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = poly.vertices[i];
    const Eigen::Vector2d& b = poly.vertices[(i + 1) % n];
    const Eigen::Vector2d& c = poly.vertices[(i + 2) % n];
    if (cross2(b - a, c - b) <= 0.0) return false;
    area2 += cross2(a, b);
  }
  return area2 > 0.0;
}

ClosestPointResult closed_form_distance(const ConvexPolygon& poly,
                                        const Eigen::Vector2d& p) {
  const int n = poly.edge_count();

  // Interior: negative penetration depth along the least-slack face.
  double min_slack = std::numeric_limits<double>::infinity();
  int min_face = 0;
  bool inside = true;
  for (int k = 0; k < n; ++k) {
    const double slack = poly.h(k) - poly.G.row(k).dot(p);
    if (slack < 0.0) inside = false;
    if (slack < min_slack) {
      min_slack = slack;
      min_face = k;
    }
  }
  if (inside) {
    ClosestPointResult r;
    r.distance = -min_slack;
    r.closest_point = p + poly.G.row(min_face).transpose() * min_slack;
    return r;
  }

  // Exterior: nearest point over the edge segments (vertices included as
  // segment endpoints). Ties keep the lower edge index.
  ClosestPointResult best;
  best.distance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = poly.vertices[i];
    const Eigen::Vector2d& b = poly.vertices[(i + 1) % n];
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    double s = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    const Eigen::Vector2d q = a + s * ab;
    const double d = (p - q).norm();
    if (d < best.distance) {
      best.distance = d;
      best.closest_point = q;
    }
  }
  return best;
}

DualSolution solve_dual_bcd(const ConvexPolygon& poly, const Eigen::Vector2d& p,
                            const Pose2D& pose, const BcdSettings& settings) {
  if (settings.penalty_weight <= 0.0)
    throw InvalidPenalty("penalty weight must be positive");
  const double w_p = settings.penalty_weight;
  const int n = poly.edge_count();

  // Work in the polygon frame with nu = R^T lambda; the penalty term
  // |G^T mu + R^T lambda| equals |G^T mu + nu| and the unit ball is
  // rotation invariant. lambda = R nu at the end.
  const Eigen::VectorXd c = poly.h - poly.G * p;  // h - G p
  // Lipschitz constant of the mu gradient: 2 w_p * lambda_max(G G^T); the
  // nonzero spectrum of G G^T equals that of the 2x2 G^T G.
  const Eigen::Matrix2d gtg = poly.G.transpose() * poly.G;
  const double tr = gtg.trace();
  const double det = gtg.determinant();
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  const double lip = 2.0 * w_p * (tr / 2.0 + disc);

  // Warm start on the most violated face; for face-region points this is
  // already the optimal support. Interior points (c >= 0) start at zero.
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  int most_violated = 0;
  c.minCoeff(&most_violated);
  if (c(most_violated) < 0.0) mu(most_violated) = 1.0;
  Eigen::Vector2d nu = Eigen::Vector2d::Zero();

  auto mu_objective = [&](const Eigen::VectorXd& m) {
    return m.dot(c) + w_p * (poly.G.transpose() * m + nu).squaredNorm();
  };

  const double grad_scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  bool converged = false;
  int iter = 0;
  double step = 1.0 / lip;
  for (; iter < settings.max_iter; ++iter) {
    // Exact lambda block: unit-ball projection of the unconstrained minimizer.
    const Eigen::Vector2d q = poly.G.transpose() * mu;
    const double qn = q.norm();
    nu = qn > 1.0 ? Eigen::Vector2d(-q / qn) : Eigen::Vector2d(-q);

    // Inexact mu block: projected gradient with Armijo backtracking. The
    // fixed 1/L step stalls while |G^T mu| < 1 (the penalty is flat there),
    // so the step is allowed to grow between iterations.
    Eigen::VectorXd grad(n);
    for (int s = 0; s < settings.mu_steps_per_iter; ++s) {
      grad = c + 2.0 * w_p * (poly.G * (poly.G.transpose() * mu + nu));
      const double f0 = mu_objective(mu);
      step = std::min(step * 4.0, 1e6 / lip);
      for (;;) {
        const Eigen::VectorXd trial = (mu - step * grad).cwiseMax(0.0);
        const Eigen::VectorXd delta = trial - mu;
        const double f1 = mu_objective(trial);
        if (f1 <= f0 + 1e-4 * grad.dot(delta) || step <= 1.0 / lip) {
          mu = trial;
          break;
        }
        step *= 0.5;
      }
    }

    if (settings.objective_trace)
      settings.objective_trace->push_back(mu_objective(mu));

    // Stationarity of the mu block at the reference step 1/L; the lambda
    // block is exact by construction.
    grad = c + 2.0 * w_p * (poly.G * (poly.G.transpose() * mu + nu));
    const Eigen::VectorXd mapped = (mu - grad / lip).cwiseMax(0.0);
    const double residual = lip * (mu - mapped).cwiseAbs().maxCoeff();
    if (residual <= settings.tol * grad_scale) {
      converged = true;
      ++iter;
      break;
    }
  }

  // The penalty lets |G^T mu| overshoot 1 by ~d/(2 w_p); projecting mu back
  // onto the constraint boundary removes that bias from the reported
  // distance, since the optimal dual direction is unaffected.
  const double qn = (poly.G.transpose() * mu).norm();
  if (qn > 1.0) mu /= qn;
  double dist = -mu.dot(c);

  // Exact minimization on the support identified by BCD (an active-set
  // finish of the same dual program; at most two faces can be active at a
  // non-degenerate optimum). Candidates are only accepted when they are
  // feasible and improve the dual value, so weak duality keeps this safe.
  // The KKT certificate c + d * G G^T mu >= 0 (equality on the support)
  // proves exact optimality when it holds.
  const double cert_tol = 1e-9 * grad_scale;
  std::vector<int> support;
  for (int k = 0; k < n; ++k)
    if (mu(k) > 1e-9) support.push_back(k);
  std::sort(support.begin(), support.end(),
            [&](int a, int b) { return mu(a) > mu(b); });
  if (support.size() > 2) support.resize(2);
  if (support.empty() && c(most_violated) < 0.0) support = {most_violated};

  bool certified = false;
  if (support.empty()) {
    // Interior or boundary query: mu = 0, d = 0 is optimal iff c >= 0.
    certified = c.minCoeff() >= -cert_tol;
    if (certified) {
      mu.setZero();
      dist = 0.0;
    }
  } else {
    for (int exchange = 0; exchange < 2 * n; ++exchange) {
      Eigen::VectorXd cand = Eigen::VectorXd::Zero(n);
      double cand_dist = 0.0;
      if (support.size() == 1) {
        cand(support[0]) = 1.0;  // unit normal rows: |G^T e_k| = 1
        cand_dist = -c(support[0]);
      } else {
        const int i = support[0], j = support[1];
        Eigen::Matrix2d m;
        m << poly.G.row(i).dot(poly.G.row(i)), poly.G.row(i).dot(poly.G.row(j)),
            poly.G.row(j).dot(poly.G.row(i)), poly.G.row(j).dot(poly.G.row(j));
        const Eigen::Vector2d rhs(-c(i), -c(j));
        if (std::abs(m.determinant()) < 1e-12) {
          support.resize(1);
          continue;
        }
        const Eigen::Vector2d v = m.inverse() * rhs;
        const double scale2 = v.dot(m * v);
        if (v.minCoeff() < 0.0 || scale2 <= 0.0) {
          // Pair infeasible: keep the better single face.
          support = {-c(i) >= -c(j) ? i : j};
          continue;
        }
        const Eigen::Vector2d mu_pair = v / std::sqrt(scale2);
        cand(i) = mu_pair(0);
        cand(j) = mu_pair(1);
        cand_dist = std::sqrt(rhs.dot(v));
      }

      if (cand_dist >= dist) {
        mu = cand;
        dist = cand_dist;
      }

      const Eigen::VectorXd slack = c + dist * (poly.G * (poly.G.transpose() * mu));
      int worst = 0;
      const double worst_slack = slack.minCoeff(&worst);
      if (worst_slack >= -cert_tol) {
        certified = true;
        break;
      }
      // Exchange: bring in the most violated face.
      if (std::find(support.begin(), support.end(), worst) != support.end())
        break;  // numerical stalemate; keep current best
      support.insert(support.begin(), worst);
      if (support.size() > 2) {
        support.resize(2);
      }
    }
  }

  DualSolution sol;
  sol.mu = mu;
  sol.lambda = recover_lambda(mu, poly, pose);
  const double ln = sol.lambda.norm();
  if (ln > 1.0) sol.lambda /= ln;
  sol.distance = dist;
  sol.converged = converged || certified;
  sol.iterations = iter;
  return sol;
}

Eigen::Vector2d recover_lambda(const Eigen::VectorXd& mu,
                               const ConvexPolygon& poly, const Pose2D& pose) {
  if (mu.size() != poly.edge_count())
    throw DimensionMismatch("mu length does not match polygon edge count");
  return -(pose.R * (poly.G.transpose() * mu));
}

double min_distance_to_cloud_exact(const ConvexPolygon& poly, const Pose2D& pose,
                                   const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyCloud("cannot take min over an empty cloud");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : cloud.points) {
    const Eigen::Vector2d local = transform_point_to_local(p, pose);
    best = std::min(best, closed_form_distance(poly, local).distance);
  }
  return best;
}

bool point_inside(const ConvexPolygon& poly, const Eigen::Vector2d& p,
                  double tol) {
  return ((poly.G * p - poly.h).array() <= tol).all();
}

bool polygons_overlap(const ConvexPolygon& a, const Pose2D& pose_a,
                      const ConvexPolygon& b, const Pose2D& pose_b) {
  std::vector<Eigen::Vector2d> va, vb;
  va.reserve(a.vertices.size());
  vb.reserve(b.vertices.size());
  for (const auto& p : a.vertices) va.push_back(transform_point_to_world(p, pose_a));
  for (const auto& p : b.vertices) vb.push_back(transform_point_to_world(p, pose_b));

  auto separated_by_edges = [](const std::vector<Eigen::Vector2d>& poly_pts,
                               const std::vector<Eigen::Vector2d>& other) {
    const int n = static_cast<int>(poly_pts.size());
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d e = poly_pts[(i + 1) % n] - poly_pts[i];
      const Eigen::Vector2d normal(e.y(), -e.x());  // outward for CCW
      const double edge_h = normal.dot(poly_pts[i]);
      bool all_outside = true;
      for (const auto& q : other) {
        if (normal.dot(q) <= edge_h) {
          all_outside = false;
          break;
        }
      }
      if (all_outside) return true;
    }
    return false;
  };
  return !separated_by_edges(va, vb) && !separated_by_edges(vb, va);
}

std::uint64_t polygon_hash(const ConvexPolygon& poly) {
  std::uint64_t hash = 1469598103934665603ULL;
  auto feed = [&hash](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ULL;
    }
  };
  const std::uint64_t n = poly.edge_count();
  feed(&n, sizeof(n));
  for (int i = 0; i < poly.edge_count(); ++i) {
    const double row[3] = {poly.G(i, 0), poly.G(i, 1), poly.h(i)};
    feed(row, sizeof(row));
  }
  return hash;
}

}  // namespace ttnav
