#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uol/errors.hpp"
#include "uol/geometry.hpp"
#include "uol/surrogate.hpp"

namespace uol {

/// Seeded generator with platform-independent uniform and normal draws
/// (std distributions are implementation-defined, which would break replay).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double sign() { return (engine_() >> 63) ? 1.0 : -1.0; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    while (u <= 0.0) u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(2.0 * M_PI * v);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * v);
  }

  Vector normal_vector(int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  Vector unit_vector(int d) {
    Vector v = normal_vector(d);
    double n = v.norm();
    while (n == 0.0) {
      v = normal_vector(d);
      n = v.norm();
    }
    return v / n;
  }

  Vector uniform_cube(int d, double half_width) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = uniform(-half_width, half_width);
    return v;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Curvature class a generated family satisfies analytically.
struct CurvatureClass {
  SurrogateKind kind;
  double coefficient;  // lambda for StronglyConvex, alpha for ExpConcave
};

struct VariationTotal {
  double value = 0.0;
  bool exact = true;
};

/// A fixed sequence f_1, ..., f_T of convex losses over a domain.
class Environment {
 public:
  Environment(std::string name, Domain domain, long T) : name_(std::move(name)), domain_(std::move(domain)), T_(T) {
    if (T_ < 1) throw ConfigError("environment: horizon must be >= 1");
  }
  virtual ~Environment() = default;

  const std::string& name() const { return name_; }
  const Domain& domain() const { return domain_; }
  long horizon() const { return T_; }

  virtual BoundsBundle bounds() const = 0;
  virtual CurvatureClass declared_class() const = 0;
  virtual Vector gradient(long t, const Vector& x) const = 0;
  virtual double value(long t, const Vector& x) const = 0;

  /// sup_x ||grad f_t(x) - grad f_{t-1}(x)||^2 for t >= 2.
  virtual VariationTotal sup_variation(long t) const = 0;

  /// argmin_x sum_t f_t(x) over the domain.
  virtual Vector comparator() const = 0;

  VariationTotal exact_VT() const {
    VariationTotal total;
    for (long t = 2; t <= T_; ++t) {
      const VariationTotal v = sup_variation(t);
      total.value += v.value;
      total.exact = total.exact && v.exact;
    }
    return total;
  }

  double exact_FT() const {
    const Vector x = comparator();
    double s = 0.0;
    for (long t = 1; t <= T_; ++t) s += value(t, x);
    return s;
  }

 protected:
  void check_round(long t) const {
    if (t < 1 || t > T_) {
      std::ostringstream os;
      os << name_ << ": round " << t << " outside [1, " << T_ << "]";
      throw ContractViolation(os.str());
    }
  }
  void check_point(const Vector& x) const { domain_.check_dim(x); }

 private:
  std::string name_;
  Domain domain_;
  long T_;
};

/// f_t(x) = (lambda / 2) ||x - c_t||^2 + <xi_t, x> with centers c_t and linear noise xi_t
/// (both optional). Covers fixed, drifting and SEA-model quadratics.
class QuadraticSequence : public Environment {
 public:
  QuadraticSequence(std::string name, Domain domain, double lambda, std::vector<Vector> centers,
                    std::vector<Vector> noise = {}, double noise_bound = 0.0)
      : Environment(std::move(name), std::move(domain), static_cast<long>(centers.size())),
        lambda_(lambda),
        centers_(std::move(centers)),
        noise_(std::move(noise)),
        noise_bound_(noise_bound) {
    if (!(lambda_ > 0.0)) throw ConfigError("quadratic: lambda must be positive");
    if (!noise_.empty() && noise_.size() != centers_.size()) {
      throw ConfigError("quadratic: noise length must match horizon");
    }
    for (const auto& c : centers_) this->domain().check_dim(c);
    double reach = 0.0;
    for (const auto& c : centers_) reach = std::max(reach, farthest_distance(c));
    G_ = lambda_ * reach + noise_bound_;
  }

  double lambda() const { return lambda_; }
  const Vector& center(long t) const { return centers_[t - 1]; }
  bool noisy() const { return !noise_.empty(); }
  const Vector& noise(long t) const { return noise_[t - 1]; }

  BoundsBundle bounds() const override { return BoundsBundle::make(domain().diameter(), G_, lambda_); }
  CurvatureClass declared_class() const override { return {SurrogateKind::StronglyConvex, lambda_}; }

  Vector gradient(long t, const Vector& x) const override {
    check_round(t);
    check_point(x);
    Vector g = lambda_ * (x - centers_[t - 1]);
    if (noisy()) g += noise_[t - 1];
    return g;
  }

  double value(long t, const Vector& x) const override {
    check_round(t);
    check_point(x);
    double v = 0.5 * lambda_ * (x - centers_[t - 1]).squaredNorm();
    if (noisy()) v += noise_[t - 1].dot(x);
    return v;
  }

  /// The expected function without the noise term.
  double expected_value(long t, const Vector& x) const {
    check_round(t);
    return 0.5 * lambda_ * (x - centers_[t - 1]).squaredNorm();
  }

  /// Gradient differences are x-independent: lambda (c_{t-1} - c_t) + xi_t - xi_{t-1}.
  VariationTotal sup_variation(long t) const override {
    check_round(t);
    if (t < 2) return {0.0, true};
    Vector diff = lambda_ * (centers_[t - 2] - centers_[t - 1]);
    if (noisy()) diff += noise_[t - 1] - noise_[t - 2];
    return {diff.squaredNorm(), true};
  }

  /// sum_t f_t = (lambda T / 2) ||x - (cbar - xibar / lambda)||^2 + const, so the
  /// minimizer is the projection of the shifted mean center.
  Vector comparator() const override {
    Vector target = Vector::Zero(domain().dimension());
    for (const auto& c : centers_) target += c;
    if (noisy()) {
      for (const auto& xi : noise_) target -= xi / lambda_;
    }
    target /= static_cast<double>(centers_.size());
    return domain().project(target);
  }

 private:
  double farthest_distance(const Vector& c) const {
    const Domain& dom = domain();
    if (dom.kind() == Domain::Kind::Ball) return (c - dom.center()).norm() + dom.radius();
    const Vector far = (dom.lower() - c).cwiseAbs().cwiseMax((dom.upper() - c).cwiseAbs());
    return far.norm();
  }

  double lambda_;
  std::vector<Vector> centers_;
  std::vector<Vector> noise_;
  double noise_bound_;
  double G_ = 0.0;
};

/// f(x) = (lambda / 2) ||x - c||^2 every round.
inline std::unique_ptr<QuadraticSequence> make_fixed_quadratic(Domain domain, long T, double lambda,
                                                               const Vector& c) {
  return std::make_unique<QuadraticSequence>("fixed-quadratic", std::move(domain), lambda,
                                             std::vector<Vector>(T, c));
}

/// Centers move along a circle of radius `orbit` in the plane of the first two
/// coordinates (shifted by `offset`). The angular step at round t is
/// `step / t^decay`, so decay = 0 gives constant drift and decay > 0.5 keeps
/// sum ||c_t - c_{t-1}||^2 bounded.
inline std::unique_ptr<QuadraticSequence> make_drifting_quadratic(Domain domain, long T,
                                                                  double lambda, double orbit,
                                                                  double step, double decay,
                                                                  Vector offset = Vector()) {
  const int d = domain.dimension();
  if (d < 2) throw ConfigError("drifting quadratic: needs dimension >= 2");
  if (offset.size() == 0) offset = domain.center();
  std::vector<Vector> centers;
  centers.reserve(T);
  double angle = 0.0;
  for (long t = 1; t <= T; ++t) {
    if (t >= 2) angle += step / std::pow(static_cast<double>(t), decay);
    Vector c = offset;
    c[0] += orbit * std::cos(angle);
    c[1] += orbit * std::sin(angle);
    centers.push_back(std::move(c));
  }
  return std::make_unique<QuadraticSequence>("drifting-quadratic", std::move(domain), lambda,
                                             std::move(centers));
}

/// SEA model with squared loss: F_t(x) = (lambda / 2) ||x - c_t||^2 and
/// f_t = F_t + <xi_t, x>, xi_t uniform on a cube scaled so E ||xi_t||^2 = sigma2
/// (so the stochastic variance max_x E ||grad f_t - grad F_t||^2 equals sigma2).
/// The expected centers drift like the drifting quadratic with angular step `drift`
/// (drift = 0 gives Sigma^2 = 0).
inline std::unique_ptr<QuadraticSequence> make_sea_quadratic(Domain domain, long T, double lambda,
                                                             const Vector& base_center,
                                                             double sigma2, double orbit,
                                                             double drift, std::uint64_t seed) {
  if (sigma2 < 0.0) throw ConfigError("sea: sigma2 must be >= 0");
  const int d = domain.dimension();
  Rng rng(seed);
  const double half = std::sqrt(3.0 * sigma2 / d);
  std::vector<Vector> centers;
  std::vector<Vector> noise;
  double angle = 0.0;
  for (long t = 1; t <= T; ++t) {
    if (t >= 2) angle += drift;
    Vector c = base_center;
    if (drift != 0.0) {
      c[0] += orbit * std::cos(angle);
      c[1] += orbit * std::sin(angle);
    }
    centers.push_back(std::move(c));
    noise.push_back(sigma2 > 0.0 ? rng.uniform_cube(d, half) : Vector::Zero(d));
  }
  const double bound = half * std::sqrt(static_cast<double>(d));
  if (sigma2 == 0.0) noise.clear();
  return std::make_unique<QuadraticSequence>("sea-quadratic", std::move(domain), lambda,
                                             std::move(centers), std::move(noise), bound);
}

/// Linear losses f_t(x) = <g_t, x> over a ball.
class LinearSequence : public Environment {
 public:
  LinearSequence(std::string name, Domain domain, std::vector<Vector> gradients, double smoothness)
      : Environment(std::move(name), std::move(domain), static_cast<long>(gradients.size())),
        g_(std::move(gradients)),
        L_(smoothness) {
    if (this->domain().kind() != Domain::Kind::Ball) {
      throw ConfigError("linear sequence: closed-form comparator needs a ball domain");
    }
    for (const auto& g : g_) {
      this->domain().check_dim(g);
      G_ = std::max(G_, g.norm());
    }
    if (G_ == 0.0) G_ = 1e-12;
  }

  BoundsBundle bounds() const override { return BoundsBundle::make(domain().diameter(), G_, L_); }
  CurvatureClass declared_class() const override { return {SurrogateKind::Convex, 0.0}; }

  const Vector& loss_vector(long t) const { return g_[t - 1]; }

  Vector gradient(long t, const Vector& x) const override {
    check_round(t);
    check_point(x);
    return g_[t - 1];
  }

  double value(long t, const Vector& x) const override {
    check_round(t);
    check_point(x);
    return g_[t - 1].dot(x);
  }

  VariationTotal sup_variation(long t) const override {
    check_round(t);
    if (t < 2) return {0.0, true};
    return {(g_[t - 1] - g_[t - 2]).squaredNorm(), true};
  }

  /// Support point of the ball along -sum g_t.
  Vector comparator() const override {
    Vector s = Vector::Zero(domain().dimension());
    for (const auto& g : g_) s += g;
    const double n = s.norm();
    if (n == 0.0) return domain().center();
    return domain().center() - domain().radius() * s / n;
  }

 private:
  std::vector<Vector> g_;
  double L_;
  double G_ = 0.0;
};

enum class LinearDrift { RandomWalk, Independent };

/// Drifting linear losses. RandomWalk: g_t = clip(g_{t-1} + magnitude * u_t, cap);
/// Independent: g_t = magnitude * u_t. Here u_t is a uniform random unit vector.
/// V_T therefore scales with magnitude^2.
inline std::unique_ptr<LinearSequence> make_drifting_linear(Domain domain, long T,
                                                            double magnitude, LinearDrift drift,
                                                            double cap, double smoothness,
                                                            std::uint64_t seed) {
  const int d = domain.dimension();
  Rng rng(seed);
  std::vector<Vector> gs;
  gs.reserve(T);
  Vector g = Vector::Zero(d);
  for (long t = 1; t <= T; ++t) {
    const Vector u = rng.unit_vector(d);
    if (drift == LinearDrift::Independent) {
      g = magnitude * u;
    } else {
      g += magnitude * u;
      const double n = g.norm();
      if (n > cap) g *= cap / n;
    }
    gs.push_back(g);
  }
  return std::make_unique<LinearSequence>("drifting-linear", std::move(domain), std::move(gs),
                                          smoothness);
}

/// Worst-case oblivious adversary: every round a fresh random sign on each axis,
/// g_t = (G / sqrt(d)) * (s_1, ..., s_d), so V_T grows linearly in T.
inline std::unique_ptr<LinearSequence> make_adversarial_linear(Domain domain, long T, double G,
                                                               double smoothness,
                                                               std::uint64_t seed) {
  const int d = domain.dimension();
  Rng rng(seed);
  std::vector<Vector> gs;
  gs.reserve(T);
  const double a = G / std::sqrt(static_cast<double>(d));
  for (long t = 1; t <= T; ++t) {
    Vector g(d);
    for (int i = 0; i < d; ++i) g[i] = a * rng.sign();
    gs.push_back(std::move(g));
  }
  return std::make_unique<LinearSequence>("adversarial-linear", std::move(domain), std::move(gs),
                                          smoothness);
}

/// f_t(x) = -ln(<a_{j_t}, x> + b) with j_t drawn from a fixed component set
/// (a single component gives a fixed function). Each component is 1-exp-concave.
/// Requires b > max_j sup_x |<a_j, x>| so the argument stays positive.
class LogLossSequence : public Environment {
 public:
  LogLossSequence(std::string name, Domain domain, std::vector<Vector> components, double b,
                  std::vector<int> schedule)
      : Environment(std::move(name), std::move(domain), static_cast<long>(schedule.size())),
        a_(std::move(components)),
        b_(b),
        schedule_(std::move(schedule)) {
    if (a_.empty()) throw ConfigError("log loss: need at least one component");
    for (int j : schedule_) {
      if (j < 0 || j >= static_cast<int>(a_.size())) throw ConfigError("log loss: bad schedule");
    }
    const Domain& dom = this->domain();
    if (dom.kind() != Domain::Kind::Ball) throw ConfigError("log loss: needs a ball domain");
    double smin = std::numeric_limits<double>::infinity();
    for (const auto& a : a_) {
      dom.check_dim(a);
      const double lo = a.dot(dom.center()) - dom.radius() * a.norm() + b_;
      if (!(lo > 0.0)) throw ConfigError("log loss: argument can reach zero on the domain");
      smin = std::min(smin, lo);
      G_ = std::max(G_, a.norm() / lo);
      L_ = std::max(L_, a.squaredNorm() / (lo * lo));
    }
    counts_.assign(a_.size(), 0.0);
    for (int j : schedule_) counts_[j] += 1.0;
  }

  BoundsBundle bounds() const override { return BoundsBundle::make(domain().diameter(), G_, L_); }
  CurvatureClass declared_class() const override { return {SurrogateKind::ExpConcave, 1.0}; }

  /// Exp-concavity modulus in the quadratic-lower-bound form: 0.5 min{1 / (4 G D), alpha}.
  double curvature_modulus() const {
    const BoundsBundle b = bounds();
    return 0.5 * std::min(1.0 / (4.0 * b.G * b.D), declared_class().coefficient);
  }

  Vector gradient(long t, const Vector& x) const override {
    check_round(t);
    check_point(x);
    const Vector& a = a_[schedule_[t - 1]];
    return -a / (a.dot(x) + b_);
  }

  double value(long t, const Vector& x) const override {
    check_round(t);
    check_point(x);
    const Vector& a = a_[schedule_[t - 1]];
    return -std::log(a.dot(x) + b_);
  }

  /// Exact when consecutive rounds share a component (difference zero); otherwise
  /// the sup over the ball is estimated from boundary samples plus the center and
  /// reported as approximate.
  VariationTotal sup_variation(long t) const override {
    check_round(t);
    if (t < 2) return {0.0, true};
    const int j = schedule_[t - 1], k = schedule_[t - 2];
    if (j == k) return {0.0, true};
    const Domain& dom = domain();
    const int d = dom.dimension();
    Rng rng(static_cast<std::uint64_t>(t) * 7919u + 17u);
    double best = diff_at(j, k, dom.center());
    for (int s = 0; s < 64; ++s) {
      const Vector x = dom.center() + dom.radius() * rng.unit_vector(d);
      best = std::max(best, diff_at(j, k, x));
    }
    return {best, false};
  }

  /// Projected gradient with backtracking on the count-weighted objective.
  Vector comparator() const override {
    const Domain& dom = domain();
    Vector x = dom.center();
    double step = 1.0;
    double f = total(x);
    for (int it = 0; it < 100000; ++it) {
      const Vector g = total_gradient(x);
      Vector next;
      double fn = 0.0;
      for (;;) {
        next = dom.project(x - step * g);
        fn = total(next);
        const Vector diff = next - x;
        if (fn <= f + g.dot(diff) + diff.squaredNorm() / (2.0 * step)) break;
        step *= 0.5;
        if (step < 1e-300) throw NumericalFailure("log loss comparator: step underflow");
      }
      const double moved = (next - x).norm();
      x = std::move(next);
      f = fn;
      step *= 2.0;
      if (moved < 1e-13 * std::max(1.0, dom.radius())) return x;
    }
    std::ostringstream os;
    os << "log loss comparator did not converge; objective " << f;
    throw NumericalFailure(os.str());
  }

 private:
  double diff_at(int j, int k, const Vector& x) const {
    const Vector gj = -a_[j] / (a_[j].dot(x) + b_);
    const Vector gk = -a_[k] / (a_[k].dot(x) + b_);
    return (gj - gk).squaredNorm();
  }
  double total(const Vector& x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < a_.size(); ++j) {
      if (counts_[j] > 0.0) s -= counts_[j] * std::log(a_[j].dot(x) + b_);
    }
    return s;
  }
  Vector total_gradient(const Vector& x) const {
    Vector g = Vector::Zero(x.size());
    for (std::size_t j = 0; j < a_.size(); ++j) {
      if (counts_[j] > 0.0) g -= counts_[j] * a_[j] / (a_[j].dot(x) + b_);
    }
    return g;
  }

  std::vector<Vector> a_;
  double b_;
  std::vector<int> schedule_;
  std::vector<double> counts_;
  double G_ = 0.0;
  double L_ = 0.0;
};

/// One component repeated every round (V_T = 0).
inline std::unique_ptr<LogLossSequence> make_fixed_log_loss(Domain domain, long T, const Vector& a,
                                                            double b) {
  return std::make_unique<LogLossSequence>("fixed-log-loss", std::move(domain),
                                           std::vector<Vector>{a}, b, std::vector<int>(T, 0));
}

/// Components drawn uniformly at random each round.
inline std::unique_ptr<LogLossSequence> make_random_log_loss(Domain domain, long T,
                                                             std::vector<Vector> components,
                                                             double b, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> schedule(T);
  const int J = static_cast<int>(components.size());
  for (auto& j : schedule) j = std::min(J - 1, static_cast<int>(rng.uniform() * J));
  return std::make_unique<LogLossSequence>("random-log-loss", std::move(domain),
                                           std::move(components), b, std::move(schedule));
}

/// Two-player zero-sum game f(x, y) = x^T A y + (mu / 2) ||x||^2 - (mu / 2) ||y||^2,
/// x minimizing and y maximizing. mu = 0 is the bilinear game.
class BilinearGame {
 public:
  BilinearGame(Matrix A, Domain x_domain, Domain y_domain, double mu = 0.0)
      : A_(std::move(A)), X_(std::move(x_domain)), Y_(std::move(y_domain)), mu_(mu) {
    if (A_.rows() != X_.dimension() || A_.cols() != Y_.dimension()) {
      throw ConfigError("game: payoff shape does not match player domains");
    }
    if (mu_ < 0.0) throw ConfigError("game: regularization must be >= 0");
    const double norm = spectral_norm();
    if (norm > 1.0 + 1e-12) {
      std::ostringstream os;
      os << "game: payoff spectral norm " << norm << " exceeds 1";
      throw ConfigError(os.str());
    }
  }

  const Matrix& payoff() const { return A_; }
  const Domain& x_domain() const { return X_; }
  const Domain& y_domain() const { return Y_; }
  double regularization() const { return mu_; }

  double spectral_norm() const {
    if (A_.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(A_);
    return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  }

  double value(const Vector& x, const Vector& y) const {
    return x.dot(A_ * y) + 0.5 * mu_ * (x.squaredNorm() - y.squaredNorm());
  }
  /// Gradient for the minimizing player.
  Vector grad_x(const Vector& x, const Vector& y) const { return A_ * y + mu_ * x; }
  /// Negated gradient for the maximizing player, so both players minimize.
  Vector grad_y(const Vector& x, const Vector& y) const {
    return -(A_.transpose() * x) + mu_ * y;
  }

  /// Bounds on each player's per-round loss: sup of the gradient over both domains.
  BoundsBundle x_bounds() const {
    const double G = A_.norm() * reach(Y_) + mu_ * reach(X_);
    return BoundsBundle::make(X_.diameter(), std::max(G, 1e-12), std::max(mu_, 1e-3));
  }
  BoundsBundle y_bounds() const {
    const double G = A_.norm() * reach(X_) + mu_ * reach(Y_);
    return BoundsBundle::make(Y_.diameter(), std::max(G, 1e-12), std::max(mu_, 1e-3));
  }

  /// Largest Euclidean norm of a point in the domain.
  static double reach(const Domain& dom) {
    if (dom.kind() == Domain::Kind::Ball) return dom.center().norm() + dom.radius();
    return dom.lower().cwiseAbs().cwiseMax(dom.upper().cwiseAbs()).norm();
  }

 private:
  Matrix A_;
  Domain X_;
  Domain Y_;
  double mu_;
};

/// argmin over the domain of the linear function <v, x>.
inline Vector linear_minimizer(const Domain& dom, const Vector& v) {
  if (dom.kind() == Domain::Kind::Ball) {
    const double n = v.norm();
    if (n == 0.0) return dom.center();
    return dom.center() - dom.radius() * v / n;
  }
  Vector x(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    x[i] = v[i] > 0.0 ? dom.lower()[i] : dom.upper()[i];
  }
  return x;
}

}  // namespace uol
