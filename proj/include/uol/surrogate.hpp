#pragma once

#include "uol/geometry.hpp"

namespace uol {

enum class SurrogateKind { StronglyConvex, ExpConcave, Convex };

/// Second-order surrogate built from the single gradient g = grad f_t(x_t):
///   StronglyConvex  <g, x> + (coef / 2) ||x - x_t||^2
///   ExpConcave      <g, x> + (coef / 2) <g, x - x_t>^2
///   Convex          <g, x>
/// Snapshots are immutable and shared by every base learner of the round.
class Surrogate {
 public:
  Surrogate(SurrogateKind kind, Vector gradient, Vector anchor, double coefficient = 0.0)
      : kind_(kind), g_(std::move(gradient)), anchor_(std::move(anchor)), coef_(coefficient) {
    if (g_.size() != anchor_.size()) throw ContractViolation("surrogate: g/x_t size mismatch");
    if (kind_ != SurrogateKind::Convex && !(coef_ > 0.0)) {
      throw ContractViolation("surrogate: curvature coefficient must be positive");
    }
  }

  SurrogateKind kind() const { return kind_; }
  const Vector& gradient() const { return g_; }
  const Vector& anchor() const { return anchor_; }
  double coefficient() const { return coef_; }

  double value(const Vector& x) const {
    check(x);
    const double linear = g_.dot(x);
    switch (kind_) {
      case SurrogateKind::StronglyConvex:
        return linear + 0.5 * coef_ * (x - anchor_).squaredNorm();
      case SurrogateKind::ExpConcave: {
        const double s = g_.dot(x - anchor_);
        return linear + 0.5 * coef_ * s * s;
      }
      case SurrogateKind::Convex:
        break;
    }
    return linear;
  }

  Vector grad(const Vector& x) const {
    check(x);
    switch (kind_) {
      case SurrogateKind::StronglyConvex:
        return g_ + coef_ * (x - anchor_);
      case SurrogateKind::ExpConcave:
        return g_ + coef_ * g_.dot(x - anchor_) * g_;
      case SurrogateKind::Convex:
        break;
    }
    return g_;
  }

  Matrix hessian() const {
    const Eigen::Index d = g_.size();
    switch (kind_) {
      case SurrogateKind::StronglyConvex:
        return coef_ * Matrix::Identity(d, d);
      case SurrogateKind::ExpConcave:
        return coef_ * g_ * g_.transpose();
      case SurrogateKind::Convex:
        break;
    }
    return Matrix::Zero(d, d);
  }

 private:
  void check(const Vector& x) const {
    if (x.size() != g_.size()) throw ContractViolation("surrogate: point has wrong dimension");
  }

  SurrogateKind kind_;
  Vector g_;
  Vector anchor_;
  double coef_;
};

inline double surrogate_eval(const Surrogate& s, const Vector& x) { return s.value(x); }
inline Vector surrogate_grad(const Surrogate& s, const Vector& x) { return s.grad(x); }

}  // namespace uol
