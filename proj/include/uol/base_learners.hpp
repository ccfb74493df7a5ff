#pragma once

#include <algorithm>
#include <cmath>
#include <variant>

#include "uol/geometry.hpp"

namespace uol {

/// Optimistic OGD for convex losses with step min{D / sqrt(1 + Vbar_{t-1}), 1 / gamma},
/// where Vbar accumulates ||g_s - g_{s-1}||^2 over received gradients from s = 2.
class ConvexOgd {
 public:
  ConvexOgd(Domain domain, double diameter, double gamma)
      : domain_(std::move(domain)), D_(diameter), gamma_(gamma) {
    if (!(D_ > 0.0) || !(gamma_ > 0.0)) throw ContractViolation("ConvexOgd: D, gamma must be > 0");
    pivot_ = domain_.center();
    played_ = pivot_;
    last_gradient_ = Vector::Zero(domain_.dimension());
  }

  double step_for(double variation) const {
    return std::min(D_ / std::sqrt(1.0 + variation), 1.0 / gamma_);
  }

  const Vector& predict(const Vector& optimism) {
    ++round_;
    step_ = step_for(variation_);
    played_ = domain_.project(pivot_ - step_ * optimism);
    return played_;
  }

  void update(const Vector& g) {
    pivot_ = domain_.project(pivot_ - step_ * g);
    if (round_ >= 2) variation_ += (g - last_gradient_).squaredNorm();
    last_gradient_ = g;
  }

  const Vector& pivot() const { return pivot_; }
  const Vector& played() const { return played_; }
  const Vector& last_gradient() const { return last_gradient_; }
  double step() const { return step_; }
  double variation() const { return variation_; }
  double gamma() const { return gamma_; }
  double diameter() const { return D_; }
  int round() const { return round_; }

 private:
  Domain domain_;
  double D_;
  double gamma_;
  Vector pivot_;
  Vector played_;
  Vector last_gradient_;
  double variation_ = 0.0;
  double step_ = 0.0;
  int round_ = 0;
};

/// Optimistic OGD for lambda-strongly convex losses with step 2 / (gamma + lambda t).
class StronglyConvexOgd {
 public:
  StronglyConvexOgd(Domain domain, double lambda, double gamma)
      : domain_(std::move(domain)), lambda_(lambda), gamma_(gamma) {
    if (!(lambda_ > 0.0) || !(gamma_ > 0.0)) {
      throw ContractViolation("StronglyConvexOgd: lambda, gamma must be > 0");
    }
    pivot_ = domain_.center();
    played_ = pivot_;
    last_gradient_ = Vector::Zero(domain_.dimension());
  }

  double step_at(int t) const { return 2.0 / (gamma_ + lambda_ * t); }

  const Vector& predict(const Vector& optimism) {
    ++round_;
    step_ = step_at(round_);
    played_ = domain_.project(pivot_ - step_ * optimism);
    return played_;
  }

  void update(const Vector& g) {
    pivot_ = domain_.project(pivot_ - step_ * g);
    last_gradient_ = g;
  }

  const Vector& pivot() const { return pivot_; }
  const Vector& played() const { return played_; }
  const Vector& last_gradient() const { return last_gradient_; }
  double step() const { return step_; }
  double lambda() const { return lambda_; }
  double gamma() const { return gamma_; }
  int round() const { return round_; }

 private:
  Domain domain_;
  double lambda_;
  double gamma_;
  Vector pivot_;
  Vector played_;
  Vector last_gradient_;
  double step_ = 0.0;
  int round_ = 0;
};

/// Optimistic online Newton step: mirror map 0.5 ||.||^2_{U_t} with
/// U_t = (gamma + alpha G^2 / 2) I + (alpha / 2) sum_{s<t} g_s g_s^T.
/// The inverse is tracked by Sherman-Morrison and refreshed from a fresh
/// Cholesky factorization every `refresh_period` updates.
class ExpConcaveOns {
 public:
  ExpConcaveOns(Domain domain, double alpha, double gamma, double gradient_bound,
                int refresh_period = 512)
      : domain_(std::move(domain)), alpha_(alpha), gamma_(gamma), refresh_(refresh_period) {
    if (!(alpha_ > 0.0) || !(gamma_ > 0.0) || !(gradient_bound > 0.0) || refresh_ < 1) {
      throw ContractViolation("ExpConcaveOns: alpha, gamma, G must be > 0");
    }
    const int d = domain_.dimension();
    const double diag = gamma_ + 0.5 * alpha_ * gradient_bound * gradient_bound;
    U_ = diag * Matrix::Identity(d, d);
    U_inv_ = (1.0 / diag) * Matrix::Identity(d, d);
    pivot_ = domain_.center();
    played_ = pivot_;
    last_gradient_ = Vector::Zero(d);
  }

  const Vector& predict(const Vector& optimism) {
    ++round_;
    played_ = mirror_step(optimism);
    return played_;
  }

  void update(const Vector& g) {
    pivot_ = mirror_step(g);
    last_gradient_ = g;
    // U_{t+1} = U_t + (alpha / 2) g g^T
    const double c = 0.5 * alpha_;
    U_.noalias() += c * g * g.transpose();
    const Vector Ug = U_inv_ * g;
    U_inv_.noalias() -= (c / (1.0 + c * g.dot(Ug))) * Ug * Ug.transpose();
    ++updates_;
    if (updates_ % refresh_ == 0) refresh();
  }

  const Vector& pivot() const { return pivot_; }
  const Vector& played() const { return played_; }
  const Vector& last_gradient() const { return last_gradient_; }
  const Matrix& U() const { return U_; }
  const Matrix& U_inverse() const { return U_inv_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  int round() const { return round_; }
  int refresh_period() const { return refresh_; }
  /// Largest |entry| gap between the rank-one inverse and a fresh one, over all refreshes.
  double max_refresh_deviation() const { return max_refresh_deviation_; }
  int refresh_count() const { return refreshes_; }

 private:
  Vector mirror_step(const Vector& direction) const {
    const Vector target = pivot_ - U_inv_ * direction;
    if (domain_.contains(target, 0.0)) return target;
    return project_matrix_norm(domain_, target, U_);
  }

  void refresh() {
    const Eigen::Index d = U_.rows();
    Eigen::LLT<Matrix> llt(U_);
    const Matrix fresh = llt.solve(Matrix::Identity(d, d));
    max_refresh_deviation_ =
        std::max(max_refresh_deviation_, (fresh - U_inv_).cwiseAbs().maxCoeff());
    U_inv_ = 0.5 * (fresh + fresh.transpose());
    ++refreshes_;
  }

  Domain domain_;
  double alpha_;
  double gamma_;
  int refresh_;
  Matrix U_;
  Matrix U_inv_;
  Vector pivot_;
  Vector played_;
  Vector last_gradient_;
  int round_ = 0;
  long updates_ = 0;
  int refreshes_ = 0;
  double max_refresh_deviation_ = 0.0;
};

/// Any of the three base-learner families behind one value type.
class BaseLearner {
 public:
  using Variant = std::variant<StronglyConvexOgd, ExpConcaveOns, ConvexOgd>;

  template <typename T>
  BaseLearner(T learner) : impl_(std::move(learner)) {}  // NOLINT(google-explicit-constructor)

  const Vector& predict(const Vector& optimism) {
    return std::visit([&](auto& l) -> const Vector& { return l.predict(optimism); }, impl_);
  }
  void update(const Vector& g) {
    std::visit([&](auto& l) { l.update(g); }, impl_);
  }
  const Vector& played() const {
    return std::visit([](const auto& l) -> const Vector& { return l.played(); }, impl_);
  }
  const Vector& pivot() const {
    return std::visit([](const auto& l) -> const Vector& { return l.pivot(); }, impl_);
  }
  const Vector& last_gradient() const {
    return std::visit([](const auto& l) -> const Vector& { return l.last_gradient(); }, impl_);
  }

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&impl_);
  }
  const Variant& variant() const { return impl_; }

 private:
  Variant impl_;
};

inline const Vector& base_predict(BaseLearner& learner, const Vector& optimism) {
  return learner.predict(optimism);
}
inline void base_update(BaseLearner& learner, const Vector& g) { learner.update(g); }

}  // namespace uol
