#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "uol/errors.hpp"

namespace uol {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Feasible set: a Euclidean ball or an axis-aligned box.
class Domain {
 public:
  enum class Kind { Ball, Box };

  static Domain ball(Vector center, double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
      throw ContractViolation("ball radius must be positive and finite");
    }
    if (center.size() == 0) throw ContractViolation("ball center has dimension 0");
    Domain d;
    d.kind_ = Kind::Ball;
    d.a_ = std::move(center);
    d.radius_ = radius;
    return d;
  }

  static Domain box(Vector lower, Vector upper) {
    if (lower.size() != upper.size() || lower.size() == 0) {
      throw ContractViolation("box bounds must share a positive dimension");
    }
    if (!((upper - lower).array() >= 0.0).all()) {
      throw ContractViolation("box lower bound exceeds upper bound");
    }
    if ((upper - lower).norm() <= 0.0) throw ContractViolation("box is a single point");
    Domain d;
    d.kind_ = Kind::Box;
    d.a_ = std::move(lower);
    d.b_ = std::move(upper);
    return d;
  }

  static Domain unit_ball(int dim) { return ball(Vector::Zero(dim), 1.0); }

  Kind kind() const { return kind_; }
  int dimension() const { return static_cast<int>(a_.size()); }

  double diameter() const {
    return kind_ == Kind::Ball ? 2.0 * radius_ : (b_ - a_).norm();
  }

  Vector center() const { return kind_ == Kind::Ball ? a_ : Vector(0.5 * (a_ + b_)); }

  // Ball accessors.
  double radius() const { return radius_; }
  // Box accessors.
  const Vector& lower() const { return a_; }
  const Vector& upper() const { return b_; }

  bool contains(const Vector& x, double tolerance = tol::kFeasibility) const {
    check_dim(x);
    if (kind_ == Kind::Ball) return (x - a_).norm() <= radius_ + tolerance;
    return ((x - a_).array() >= -tolerance).all() && ((b_ - x).array() >= -tolerance).all();
  }

  /// Euclidean projection.
  Vector project(const Vector& x) const {
    check_dim(x);
    if (kind_ == Kind::Ball) {
      Vector offset = x - a_;
      const double n = offset.norm();
      if (n <= radius_) return x;
      return a_ + offset * (radius_ / n);
    }
    return x.cwiseMax(a_).cwiseMin(b_);
  }

  void check_dim(const Vector& x) const {
    if (x.size() != a_.size()) {
      std::ostringstream os;
      os << "dimension mismatch: domain has " << a_.size() << ", vector has " << x.size();
      throw ContractViolation(os.str());
    }
  }

  std::string describe() const {
    std::ostringstream os;
    if (kind_ == Kind::Ball) {
      os << "ball(d=" << dimension() << ", radius=" << radius_ << ")";
    } else {
      os << "box(d=" << dimension() << ")";
    }
    return os.str();
  }

 private:
  Domain() = default;

  Kind kind_ = Kind::Ball;
  Vector a_;  // ball center or box lower corner
  Vector b_;  // box upper corner
  double radius_ = 0.0;
};

/// Problem constants: diameter D, gradient bound G, smoothness L and the
/// surrogate gradient bounds derived from them.
struct BoundsBundle {
  double D = 0.0;
  double G = 0.0;
  double L = 0.0;
  double G_sc = 0.0;   // G + D
  double G_exp = 0.0;  // G + G * D

  static BoundsBundle make(double D, double G, double L) {
    if (!(D > 0.0) || !(G > 0.0) || !(L > 0.0) || !std::isfinite(D) || !std::isfinite(G) ||
        !std::isfinite(L)) {
      std::ostringstream os;
      os << "degenerate bounds: D=" << D << " G=" << G << " L=" << L
         << " (all must be positive and finite)";
      throw ConfigError(os.str());
    }
    return BoundsBundle{D, G, L, G + D, G + G * D};
  }
};

inline Vector project(const Domain& domain, const Vector& x) {
  if (!x.allFinite()) throw ContractViolation("project: non-finite input");
  return domain.project(x);
}

namespace detail {

// Minimizes 0.5 (y - x)^T U (y - x) over the domain by projected gradient with
// step 1 / lambda_max. Caller guarantees U is symmetric positive definite.
/// Ball: y - c = (U + nu I)^{-1} U (x - c) with nu >= 0 chosen so that ||y - c|| = R.
/// The norm is decreasing in nu, so bisection in the eigenbasis of U is exact.
inline Vector ball_matrix_projection(const Domain& domain, const Vector& x, const Matrix& U) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(U);
  const Vector lam = eig.eigenvalues();
  const Vector r = eig.eigenvectors().transpose() * (x - domain.center());
  const double R = domain.radius();
  auto radius_at = [&](double nu) {
    return (lam.array() * r.array() / (lam.array() + nu)).matrix().norm();
  };
  double lo = 0.0, hi = lam.maxCoeff() * r.norm() / R;
  for (int it = 0; it < 300 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (radius_at(mid) > R) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Vector z = (lam.array() * r.array() / (lam.array() + hi)).matrix();
  return domain.project(domain.center() + eig.eigenvectors() * z);
}

/// Box: accelerated projected gradient on 0.5 (y - x)^T U (y - x) with step 1 / lambda_max,
/// stopped once the projected-gradient fixed point is reached to round-off.
inline Vector box_matrix_projection(const Domain& domain, const Vector& x, const Matrix& U,
                                    double lambda_max) {
  const double step = 1.0 / lambda_max;
  const double tol = 1e-14 * std::max(1.0, (x - domain.center()).norm() + domain.diameter());
  Vector y = domain.project(x);
  Vector w = y;
  double theta = 1.0;
  for (int it = 0; it < 200000; ++it) {
    const Vector next = domain.project(w - step * (U * (w - x)));
    const double moved = (next - y).norm();
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    // restart the momentum when it points uphill
    if ((w - next).dot(next - y) > 0.0) {
      w = next;
      theta = 1.0;
    } else {
      w = next + ((theta - 1.0) / theta_next) * (next - y);
      theta = theta_next;
    }
    y = next;
    if (moved <= tol) {
      const Vector check = domain.project(y - step * (U * (y - x)));
      if ((check - y).norm() <= tol) break;
    }
  }
  return y;
}

inline Vector projected_quadratic(const Domain& domain, const Vector& x, const Matrix& U,
                                  double lambda_max) {
  if (domain.contains(x, 0.0)) return x;
  if (domain.kind() == Domain::Kind::Ball) return ball_matrix_projection(domain, x, U);
  return box_matrix_projection(domain, x, U, lambda_max);
}

}  // namespace detail

/// argmin over the domain of (y - x)^T U (y - x).
inline Vector project_matrix_norm(const Domain& domain, const Vector& x, const Matrix& U) {
  domain.check_dim(x);
  const Eigen::Index d = x.size();
  if (U.rows() != d || U.cols() != d) throw ContractViolation("matrix norm: U has wrong shape");
  if (!x.allFinite() || !U.allFinite()) throw ContractViolation("matrix norm: non-finite input");
  const double asym = (U - U.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, U.cwiseAbs().maxCoeff())) {
    throw ContractViolation("matrix norm: U is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(U, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw ContractViolation("matrix norm: U is not positive definite");
  }
  return detail::projected_quadratic(domain, x, U, eig.eigenvalues().maxCoeff());
}

/// Checks ||sum p_i x_i - sum q_i y_i||^2 <= 2 sum p_i ||x_i - y_i||^2 + 2 D^2 ||p - q||_1^2.
inline bool combination_gap_bound_check(const Vector& p, const Vector& q,
                                        std::span<const Vector> xs, std::span<const Vector> ys,
                                        double D) {
  const auto n = static_cast<std::size_t>(p.size());
  if (static_cast<std::size_t>(q.size()) != n || xs.size() != n || ys.size() != n || n == 0) {
    throw ContractViolation("combination gap: size mismatch");
  }
  const Eigen::Index d = xs[0].size();
  Vector mx = Vector::Zero(d);
  Vector my = Vector::Zero(d);
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (xs[i].size() != d || ys[i].size() != d) {
      throw ContractViolation("combination gap: point dimension mismatch");
    }
    const auto k = static_cast<Eigen::Index>(i);
    mx += p[k] * xs[i];
    my += q[k] * ys[i];
    spread += p[k] * (xs[i] - ys[i]).squaredNorm();
  }
  const double l1 = (p - q).lpNorm<1>();
  const double lhs = (mx - my).squaredNorm();
  const double rhs = 2.0 * spread + 2.0 * D * D * l1 * l1;
  return lhs <= rhs + 1e-12 * std::max(1.0, rhs);
}

}  // namespace uol
