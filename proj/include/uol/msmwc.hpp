#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "uol/errors.hpp"
#include "uol/geometry.hpp"

namespace uol {

namespace detail {

inline double log_sum_exp(const Vector& z) {
  const double m = z.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace detail

/// Largest admissible per-coordinate step size.
inline constexpr double kMaxMsMwcStep = 1.0 / 32.0;

/// Returns mu with sum_i pivot_i * exp(-eta_i (v_i + mu)) = 1, the pivot given in
/// log space. The left side is strictly decreasing in mu, so bisection on
/// [-max v, -min v] converges; the bracket is exact because the pivot sums to one.
inline double solve_normalization(const Vector& log_pivot, const Vector& eta, const Vector& v) {
  const Eigen::Index n = log_pivot.size();
  if (eta.size() != n || v.size() != n || n == 0) {
    throw ContractViolation("solve_normalization: size mismatch");
  }
  if (!v.allFinite()) throw NumericalFailure("solve_normalization: non-finite effective loss");
  double lo = -v.maxCoeff();
  double hi = -v.minCoeff();
  if (lo < -1e6 || hi > 1e6) {
    throw NumericalFailure("solve_normalization: no bracket within [-1e6, 1e6]");
  }
  if (hi - lo == 0.0) return lo;
  if ((eta.array() == eta[0]).all()) {
    // Equal steps: mu = (1 / eta) ln sum_i pivot_i exp(-eta v_i).
    const Vector z = log_pivot.array() - eta[0] * v.array();
    return std::clamp(detail::log_sum_exp(z) / eta[0], lo, hi);
  }
  Vector z(n);
  auto residual = [&](double mu) {
    z = log_pivot.array() - eta.array() * (v.array() + mu);
    return detail::log_sum_exp(z);
  };
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// One multi-scale multiplicative-weights-with-correction learner on the
/// simplex. Regularizer sum_i p_i ln p_i / eta_i, time-invariant steps, fed
/// losses and optimisms are divided by `scale` before use.
class MsMwc {
 public:
  MsMwc(const Vector& prior, Vector eta, double scale)
      : eta_(std::move(eta)), scale_(scale) {
    const Eigen::Index n = prior.size();
    if (n == 0 || eta_.size() != n) throw ContractViolation("MsMwc: prior/eta size mismatch");
    if (!(scale_ > 0.0)) throw ContractViolation("MsMwc: scale must be positive");
    if (!(prior.array() > 0.0).all() || std::abs(prior.sum() - 1.0) > 1e-12) {
      throw ContractViolation("MsMwc: prior must be strictly positive and sum to one");
    }
    if (!(eta_.array() > 0.0).all() || !(eta_.array() <= kMaxMsMwcStep).all()) {
      throw ContractViolation("MsMwc: every step size must lie in (0, 1/32]");
    }
    log_pivot_ = prior.array().log();
    played_ = prior;
    previous_ = prior;
  }

  Eigen::Index size() const { return eta_.size(); }
  const Vector& eta() const { return eta_; }
  double scale() const { return scale_; }
  int rounds() const { return rounds_; }

  Vector pivot() const { return log_pivot_.array().exp(); }
  const Vector& log_pivot() const { return log_pivot_; }
  const Vector& played() const { return played_; }

  /// p_t = argmin <m / S, p> + D_psi(p, pivot).
  const Vector& predict(const Vector& optimism) {
    Vector p = preview(optimism);
    if (rounds_ > 0) previous_ = played_;
    played_ = std::move(p);
    ++rounds_;
    predicted_ = true;
    return played_;
  }

  /// The point predict would return for this optimism, without changing state.
  Vector preview(const Vector& optimism) const {
    const Vector m = rescale(optimism, "optimism");
    const double mu = solve_normalization(log_pivot_, eta_, m);
    Vector log_p = log_pivot_.array() - eta_.array() * (m.array() + mu);
    log_p.array() -= detail::log_sum_exp(log_p);
    return log_p.array().exp();
  }

  /// True between predict and update.
  bool awaiting_update() const { return predicted_; }

  /// pivot <- argmin <l / S + a, p> + D_psi(p, pivot), a_i = 16 eta_i (l_i - m_i)^2 after rescaling.
  void update(const Vector& loss, const Vector& optimism) {
    if (!predicted_) throw ProtocolError("MsMwc::update called without predict");
    const Vector l = rescale(loss, "loss");
    const Vector m = rescale(optimism, "optimism");
    const Vector effective = l.array() + bias(l, m).array();
    const double mu = solve_normalization(log_pivot_, eta_, effective);
    log_pivot_ = log_pivot_.array() - eta_.array() * (effective.array() + mu);
    log_pivot_.array() -= detail::log_sum_exp(log_pivot_);
    predicted_ = false;
  }

  /// Bias term for already-rescaled loss and optimism.
  Vector bias(const Vector& rescaled_loss, const Vector& rescaled_optimism) const {
    return 16.0 * eta_.array() * (rescaled_loss - rescaled_optimism).array().square();
  }

  /// ||p_t - p_{t-1}||_1^2 for the last two predictions; 0 before round 2.
  double stability() const {
    if (rounds_ < 2) return 0.0;
    const double l1 = (played_ - previous_).lpNorm<1>();
    return l1 * l1;
  }

 private:
  Vector rescale(const Vector& v, const char* what) const {
    if (v.size() != eta_.size()) throw ContractViolation("MsMwc: feed has wrong dimension");
    Vector r = v / scale_;
    const double worst = r.cwiseAbs().maxCoeff();
    if (!(worst <= 1.0 + 1e-12)) {
      std::ostringstream os;
      os << "MsMwc: rescaled " << what << " magnitude " << worst << " exceeds 1 (scale "
         << scale_ << ")";
      throw RangeViolation(os.str());
    }
    return r;
  }

  Vector eta_;
  double scale_;
  Vector log_pivot_;
  Vector played_;
  Vector previous_;
  int rounds_ = 0;
  bool predicted_ = false;
};

}  // namespace uol
