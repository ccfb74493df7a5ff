#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uol/base_learners.hpp"
#include "uol/errors.hpp"
#include "uol/geometry.hpp"
#include "uol/msmwc.hpp"
#include "uol/surrogate.hpp"

namespace uol {

inline bool is_power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

inline long round_up_pow2(long v) {
  long p = 1;
  while (p < v) p <<= 1;
  return p;
}

inline int ceil_log2(long v) {
  int k = 0;
  while ((1L << k) < v) ++k;
  return k;
}

/// Geometric curvature grid {1/T, 2/T, 4/T, ..., 1} with T rounded up to a power of two.
class CurvaturePool {
 public:
  static CurvaturePool build(long T) {
    if (T < 1) throw ConfigError("curvature pool: horizon T must be >= 1");
    const long P = round_up_pow2(T);
    CurvaturePool pool;
    for (long v = 1; v <= P; v <<= 1) pool.values_.push_back(static_cast<double>(v) / P);
    return pool;
  }

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

inline CurvaturePool build_pool(long T) { return CurvaturePool::build(T); }

/// Meta and base constants shared by the whole ensemble.
struct Constants {
  double C0 = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double gamma = 0.0;
  // Intermediate quantities the constraints are written in.
  double C2 = 0.0;
  double C3 = 0.0;
  double C4 = 0.0;
};

struct ConstraintCheck {
  std::string name;
  double lhs;
  double rhs;
  bool holds() const { return lhs >= rhs * (1.0 - 1e-12); }
};

/// Every inequality the constants must satisfy, written as lhs >= rhs.
inline std::vector<ConstraintCheck> constant_constraints(const BoundsBundle& b,
                                                         const Constants& c) {
  const double D = b.D, G = b.G, D2 = D * D, G2 = G * G, Gsc2 = b.G_sc * b.G_sc;
  return {
      {"C0 >= 1", c.C0, 1.0},
      {"C0 >= 8 lambda1 D^2", c.C0, 8.0 * c.lambda1 * D2},
      {"C0 >= 128", c.C0, 128.0},
      {"C0 >= 8 C2 D^2 / (8 G^2 + lambda2)", c.C0, 8.0 * c.C2 * D2 / (8.0 * G2 + c.lambda2)},
      {"C0 >= 64 D^2 C3", c.C0, 64.0 * D2 * c.C3},
      {"C0 >= 8 D", c.C0, 8.0 * D},
      {"C0 >= 4 D^2 C4", c.C0, 4.0 * D2 * c.C4},
      {"C0 >= 8 C2 D^2 / gamma", c.C0, 8.0 * c.C2 * D2 / c.gamma},
      {"lambda1 >= 4 C2 / (8 G^2 + lambda2)", c.lambda1, 4.0 * c.C2 / (8.0 * G2 + c.lambda2)},
      {"lambda1 >= 4 C2 / gamma", c.lambda1, 4.0 * c.C2 / c.gamma},
      {"lambda1 >= 32 C3", c.lambda1, 32.0 * c.C3},
      {"lambda1 >= 2 C4", c.lambda1, 2.0 * c.C4},
      {"lambda2 >= 2 lambda1", c.lambda2, 2.0 * c.lambda1},
      {"gamma >= 8 G^2 + lambda2", c.gamma, 8.0 * G2 + c.lambda2},
      {"gamma >= 8 lambda2 + 512 G_sc^2", c.gamma, 8.0 * c.lambda2 + 512.0 * Gsc2},
      {"gamma >= 4 lambda2 + 8 G^2", c.gamma, 4.0 * c.lambda2 + 8.0 * G2},
  };
}

/// Smallest constants meeting every constraint, with the lambda1/lambda2
/// coupling resolved conservatively (lambda2 dropped from 4 C2 / (8 G^2 + lambda2)).
inline Constants solve_constants(const BoundsBundle& b) {
  const double D = b.D, G = b.G, L = b.L;
  const double D2 = D * D, G2 = G * G, L2 = L * L;
  Constants c;
  c.C2 = 4.0 * L2 + 32.0 * D2 * G2 * L2 + 8.0 * G2 * G2;
  c.C3 = (4.0 + 4.0 * L2) * b.G_sc * b.G_sc;
  c.C4 = 2.0 * D2 * L2 + 2.0 * G2 + 10.0 * D * L2;
  c.lambda1 = std::max({32.0 * c.C3, 2.0 * c.C4, c.C2 / (2.0 * G2)});
  c.lambda2 = 2.0 * c.lambda1;
  c.C0 = std::max({1.0, 128.0, 8.0 * c.lambda1 * D2, 8.0 * c.C2 * D2 / (8.0 * G2 + c.lambda2),
                   64.0 * D2 * c.C3, 8.0 * D, 4.0 * D2 * c.C4});
  c.gamma = std::max({8.0 * G2 + c.lambda2, 8.0 * c.lambda2 + 512.0 * b.G_sc * b.G_sc,
                      4.0 * c.lambda2 + 8.0 * G2});
  for (const auto& check : constant_constraints(b, c)) {
    if (!check.holds()) {
      std::ostringstream os;
      os << "constants violate '" << check.name << "': " << check.lhs << " < " << check.rhs;
      throw ConsistencyError(os.str());
    }
  }
  return c;
}

/// Divisor mapping every meta loss and optimism into [-1, 1].
inline double compute_scale(const BoundsBundle& b, double lambda1, double lambda2) {
  const double GD = b.G * b.D, D2 = b.D * b.D;
  return std::max({GD + lambda1 * D2, 2.0 * GD + lambda2 * D2, GD + lambda2 * D2,
                   2.0 * GD + (lambda1 + lambda2) * D2});
}

enum class FeedbackMode { OneGradient, MultiGradient };
enum class Fidelity { Shared, Full };

struct LearnerSpec {
  SurrogateKind kind;
  double coefficient;  // lambda_i or alpha_i; unused for Convex
};

struct EnsembleConfig {
  long T = 0;
  Domain domain = Domain::unit_ball(1);
  BoundsBundle bounds;
  Constants constants;
  int K = 0;
  std::vector<LearnerSpec> learners;  // size N
  FeedbackMode mode = FeedbackMode::OneGradient;
  Fidelity fidelity = Fidelity::Shared;
  double scale = 0.0;
  bool audit = true;  // re-derive the played weights with the full optimism every round

  int N() const { return static_cast<int>(learners.size()); }

  /// Meta step of mid-layer regime k (1-based): 1 / (C0 2^k).
  double eta(int k) const { return 1.0 / (constants.C0 * std::ldexp(1.0, k)); }

  /// Full configuration: SC learners over the pool, then EXP learners over the pool,
  /// then one convex learner; K = ceil(log2 T) meta regimes.
  static EnsembleConfig make(long T, Domain domain, const BoundsBundle& bounds,
                             FeedbackMode mode = FeedbackMode::OneGradient,
                             Fidelity fidelity = Fidelity::Shared) {
    EnsembleConfig cfg;
    cfg.T = T;
    const CurvaturePool pool = CurvaturePool::build(T);
    if (std::abs(domain.diameter() - bounds.D) > 1e-9 * bounds.D) {
      throw ConfigError("ensemble: bounds.D must equal the domain diameter");
    }
    cfg.domain = std::move(domain);
    cfg.bounds = bounds;
    cfg.constants = solve_constants(bounds);
    cfg.K = std::max(1, ceil_log2(T));
    for (double v : pool.values()) cfg.learners.push_back({SurrogateKind::StronglyConvex, v});
    for (double v : pool.values()) cfg.learners.push_back({SurrogateKind::ExpConcave, v});
    cfg.learners.push_back({SurrogateKind::Convex, 0.0});
    cfg.mode = mode;
    cfg.fidelity = fidelity;
    cfg.scale = compute_scale(bounds, cfg.constants.lambda1, cfg.constants.lambda2);
    return cfg;
  }
};

/// Per-round output of the ensemble update.
struct RoundTelemetry {
  long t = 0;
  long gradient_queries = 0;
  double top_entropy = 0.0;
  double s_q = 0.0;       // ||q_t - q_{t-1}||_1^2
  double s_p_star = 0.0;  // ||p_{t,k} - p_{t-1,k}||_1^2 for the heaviest top regime k
  double s_x = 0.0;       // ||x_t - x_{t-1}||^2
  double max_rescaled = 0.0;
  double identity_gap = 0.0;  // max_k |(l_k - m_k)^2 - <l_k. - m_k., p_k>^2|
  double shift_gap = 0.0;     // weights with the dropped constant restored vs weights played
  double simplex_error = 0.0;
  double infeasibility = 0.0;
  bool gradient_bound_exceeded = false;
};

using GradientOracle = std::function<Vector(const Vector&)>;

/// Three-layer universal ensemble: one top MsMwC over K regimes, K mid MsMwCs
/// over N base learners, and the base learners themselves.
class UniversalEnsemble {
 public:
  explicit UniversalEnsemble(EnsembleConfig config) : cfg_(std::move(config)) {
    const int K = cfg_.K;
    const int N = cfg_.N();
    if (K < 1 || N < 1) throw ConfigError("ensemble: need K >= 1 and N >= 1");
    if (!(cfg_.scale > 0.0)) throw ConfigError("ensemble: scale must be positive");
    const int d = cfg_.domain.dimension();
    center_ = cfg_.domain.center();

    Vector top_eta(K), top_prior(K);
    for (int k = 0; k < K; ++k) {
      top_eta[k] = cfg_.eta(k + 1);
      top_prior[k] = top_eta[k] * top_eta[k];
    }
    top_prior /= top_prior.sum();
    top_.emplace(top_prior, top_eta, cfg_.scale);
    for (int k = 0; k < K; ++k) {
      mids_.emplace_back(Vector::Constant(N, 1.0 / N), Vector::Constant(N, 2.0 * top_eta[k]),
                         cfg_.scale);
    }
    const int copies = cfg_.fidelity == Fidelity::Shared ? 1 : K;
    for (int c = 0; c < copies; ++c) {
      for (const auto& spec : cfg_.learners) bases_.push_back(make_learner(spec));
    }
    points_.assign(bases_.size(), center_);
    prev_points_ = points_;
    mid_points_.assign(K, center_);
    prev_mid_points_ = mid_points_;
    mid_optimism_.assign(K, Vector::Zero(N));
    raw_optimism_ = mid_optimism_;
    decision_ = center_;
    prev_decision_ = center_;
    prev_gradient_ = Vector::Zero(d);
    top_optimism_ = Vector::Zero(K);
  }

  const EnsembleConfig& config() const { return cfg_; }
  long round() const { return t_; }
  long gradient_queries() const { return queries_; }

  /// Decision for the coming round.
  const Vector& predict() {
    if (awaiting_update_) throw ProtocolError("round_predict called twice without round_update");
    ++t_;
    const int K = cfg_.K;
    const int N = cfg_.N();
    for (std::size_t j = 0; j < bases_.size(); ++j) {
      points_[j] = bases_[j].predict(bases_[j].last_gradient());
    }
    for (int k = 0; k < K; ++k) {
      raw_optimism_[k] = build_raw_optimism(k);
      mid_optimism_[k] = build_mid_optimism(k);
      const Vector& p = mids_[k].predict(mid_optimism_[k]);
      Vector xk = Vector::Zero(center_.size());
      for (int i = 0; i < N; ++i) xk += p[i] * point(k, i);
      mid_points_[k] = std::move(xk);
    }
    top_optimism_ = build_top_optimism();
    const Vector& q = top_->predict(top_optimism_);
    decision_ = Vector::Zero(center_.size());
    for (int k = 0; k < K; ++k) decision_ += q[k] * mid_points_[k];

    simplex_error_ = simplex_error(q);
    for (const auto& mid : mids_) simplex_error_ = std::max(simplex_error_, simplex_error(mid.played()));
    if (simplex_error_ > 1e-12 * std::max(K, N)) {
      std::ostringstream os;
      os << "round " << t_ << ": meta weights left the simplex by " << simplex_error_;
      throw ConsistencyError(os.str());
    }
    infeasibility_ = distance_outside(decision_);
    if (infeasibility_ > tol::kFeasibility) {
      std::ostringstream os;
      os << "round " << t_ << ": decision lies " << infeasibility_ << " outside the domain";
      throw ConsistencyError(os.str());
    }
    awaiting_update_ = true;
    return decision_;
  }

  /// Feeds g_t = grad f_t(x_t). `f_value` only feeds telemetry. In multi-gradient
  /// mode `oracle` must evaluate grad f_t at arbitrary points.
  RoundTelemetry update(const Vector& g, double f_value = 0.0,
                        const GradientOracle& oracle = nullptr) {
    (void)f_value;
    if (!awaiting_update_) throw ProtocolError("round_update called without round_predict");
    if (g.size() != center_.size()) throw ContractViolation("round_update: gradient dimension");
    if (!g.allFinite()) throw ContractViolation("round_update: non-finite gradient");
    const int K = cfg_.K;
    const int N = cfg_.N();
    RoundTelemetry rec;
    rec.t = t_;
    rec.gradient_bound_exceeded = g.norm() > cfg_.bounds.G * (1.0 + 1e-6);
    ++queries_;

    const double shift = g.dot(decision_ - center_);  // the dropped optimism constant
    const Vector& q = top_->played();
    Vector top_loss(K);
    double worst = 0.0;
    double identity = 0.0;
    double shift_gap = 0.0;
    for (int k = 0; k < K; ++k) {
      Vector loss(N), optimism(N);
      for (int i = 0; i < N; ++i) {
        loss[i] = g.dot(point(k, i) - center_) +
                  cfg_.constants.lambda2 * (point(k, i) - prev_point(k, i)).squaredNorm();
        optimism[i] = shift + mid_optimism_[k][i];
      }
      const Vector& p = mids_[k].played();
      top_loss[k] = g.dot(mid_points_[k] - center_) +
                    cfg_.constants.lambda1 * (mid_points_[k] - prev_mid_points_[k]).squaredNorm();
      const double top_opt = shift + top_optimism_[k];
      const double lhs = std::pow(top_loss[k] - top_opt, 2);
      const double rhs = std::pow((loss - optimism).dot(p), 2);
      identity = std::max(identity, std::abs(lhs - rhs));
      worst = std::max({worst, loss.cwiseAbs().maxCoeff(), optimism.cwiseAbs().maxCoeff()});
      if (cfg_.audit) {
        shift_gap = std::max(shift_gap, (mids_[k].preview(optimism) - p).cwiseAbs().maxCoeff());
      }
      mids_[k].update(loss, optimism);
    }
    const Vector top_opt_full = top_optimism_.array() + shift;
    worst = std::max({worst, top_loss.cwiseAbs().maxCoeff(), top_opt_full.cwiseAbs().maxCoeff()});
    if (cfg_.audit) {
      shift_gap = std::max(shift_gap, (top_->preview(top_opt_full) - q).cwiseAbs().maxCoeff());
    }
    top_->update(top_loss, top_opt_full);
    rec.shift_gap = shift_gap;
    rec.simplex_error = simplex_error_;
    rec.infeasibility = infeasibility_;
    if (shift_gap > 1e-9) {
      std::ostringstream os;
      os << "round " << t_ << ": restoring the dropped optimism constant moves the weights by "
         << shift_gap;
      throw ConsistencyError(os.str());
    }
    rec.max_rescaled = worst / cfg_.scale;
    rec.identity_gap = identity / (cfg_.scale * cfg_.scale);
    if (rec.identity_gap > 1e-9) {
      std::ostringstream os;
      os << "round " << t_ << ": two-layer loss identity broken by " << rec.identity_gap;
      throw ConsistencyError(os.str());
    }

    if (cfg_.mode == FeedbackMode::OneGradient) {
      for (std::size_t j = 0; j < bases_.size(); ++j) {
        const LearnerSpec& spec = cfg_.learners[j % N];
        const Surrogate h(spec.kind, g, decision_, surrogate_coefficient(spec));
        bases_[j].update(h.grad(points_[j]));
      }
    } else {
      if (!oracle) throw ContractViolation("multi-gradient mode needs a gradient oracle");
      for (std::size_t j = 0; j < bases_.size(); ++j) {
        bases_[j].update(oracle(points_[j]));
        ++queries_;
      }
    }

    // telemetry
    double entropy = 0.0;
    int heaviest = 0;
    for (int k = 0; k < K; ++k) {
      if (q[k] > 0.0) entropy -= q[k] * std::log(q[k]);
      if (q[k] > q[heaviest]) heaviest = k;
    }
    rec.top_entropy = entropy;
    rec.s_q = top_->stability();
    rec.s_p_star = mids_[heaviest].stability();
    rec.s_x = t_ >= 2 ? (decision_ - prev_decision_).squaredNorm() : 0.0;
    rec.gradient_queries = queries_;

    prev_points_ = points_;
    prev_mid_points_ = mid_points_;
    prev_decision_ = decision_;
    prev_gradient_ = g;
    awaiting_update_ = false;
    return rec;
  }

  /// -<g_{t-1}, x_{t-1} - x_{t-1,k,i}>: the gradient-variation guess for learner i of
  /// regime k with the coordinate-constant <g_t, x_t> term removed.
  Vector build_raw_optimism(int k) const {
    const int N = cfg_.N();
    Vector m = Vector::Zero(N);
    if (t_ <= 1) return m;
    for (int i = 0; i < N; ++i) m[i] = -prev_gradient_.dot(prev_decision_ - prev_point(k, i));
    return m;
  }

  /// Mid-layer optimism: raw optimism plus lambda2 ||x_{t,k,i} - x_{t-1,k,i}||^2.
  Vector build_mid_optimism(int k) const {
    Vector m = build_raw_optimism(k);
    if (t_ <= 1) return m;
    for (int i = 0; i < cfg_.N(); ++i) {
      m[i] += cfg_.constants.lambda2 * (point(k, i) - prev_point(k, i)).squaredNorm();
    }
    return m;
  }

  /// Top-layer optimism <raw_k, p_k> + lambda1 ||x_{t,k} - x_{t-1,k}||^2. The mixture uses
  /// the raw optimism, without the lambda2 term, so that l_k - m_k = <l_k. - m_k., p_k>
  /// holds exactly (the lambda2 terms cancel on the mid side only).
  Vector build_top_optimism() const {
    const int K = cfg_.K;
    Vector m = Vector::Zero(K);
    if (t_ <= 1) return m;
    for (int k = 0; k < K; ++k) {
      m[k] = raw_optimism_[k].dot(mids_[k].played()) +
             cfg_.constants.lambda1 * (mid_points_[k] - prev_mid_points_[k]).squaredNorm();
    }
    return m;
  }

  const Vector& decision() const { return decision_; }
  const MsMwc& top() const { return *top_; }
  const MsMwc& mid(int k) const { return mids_.at(k); }
  const Vector& mid_point(int k) const { return mid_points_.at(k); }
  const Vector& point(int k, int i) const { return points_[index(k, i)]; }
  const BaseLearner& base(int k, int i) const { return bases_[index(k, i)]; }
  std::size_t base_count() const { return bases_.size(); }
  const Vector& mid_optimism(int k) const { return mid_optimism_.at(k); }
  const Vector& raw_optimism(int k) const { return raw_optimism_.at(k); }
  const Vector& top_optimism() const { return top_optimism_; }

 private:
  std::size_t index(int k, int i) const {
    return cfg_.fidelity == Fidelity::Shared ? static_cast<std::size_t>(i)
                                             : static_cast<std::size_t>(k * cfg_.N() + i);
  }
  const Vector& prev_point(int k, int i) const { return prev_points_[index(k, i)]; }

  static double simplex_error(const Vector& p) {
    return std::max(std::abs(p.sum() - 1.0), std::max(0.0, -p.minCoeff()));
  }

  double distance_outside(const Vector& x) const {
    return (x - cfg_.domain.project(x)).norm();
  }

  double surrogate_coefficient(const LearnerSpec& spec) const {
    return spec.kind == SurrogateKind::Convex ? 0.0 : spec.coefficient;
  }

  BaseLearner make_learner(const LearnerSpec& spec) const {
    const double gamma = cfg_.constants.gamma;
    switch (spec.kind) {
      case SurrogateKind::StronglyConvex:
        return StronglyConvexOgd(cfg_.domain, spec.coefficient, gamma);
      case SurrogateKind::ExpConcave: {
        const double G_eff =
            cfg_.mode == FeedbackMode::OneGradient ? cfg_.bounds.G_exp : cfg_.bounds.G;
        return ExpConcaveOns(cfg_.domain, spec.coefficient, gamma, G_eff);
      }
      case SurrogateKind::Convex:
        break;
    }
    return ConvexOgd(cfg_.domain, cfg_.bounds.D, gamma);
  }

  EnsembleConfig cfg_;
  Vector center_;
  std::optional<MsMwc> top_;
  std::vector<MsMwc> mids_;
  std::vector<BaseLearner> bases_;
  std::vector<Vector> points_, prev_points_;
  std::vector<Vector> mid_points_, prev_mid_points_;
  std::vector<Vector> mid_optimism_;
  std::vector<Vector> raw_optimism_;
  Vector top_optimism_;
  Vector decision_, prev_decision_, prev_gradient_;
  double simplex_error_ = 0.0;
  double infeasibility_ = 0.0;
  long t_ = 0;
  long queries_ = 0;
  bool awaiting_update_ = false;
};

}  // namespace uol
