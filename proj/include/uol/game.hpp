#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "uol/ensemble.hpp"
#include "uol/environments.hpp"

namespace uol {

enum class PlayerRole { Minimizer, Maximizer };

/// One player's loss sequence in hindsight, given the opponent's plays:
/// the minimizer sees f(., y_t), the maximizer sees -f(x_t, .). Both are linear
/// (or isotropic quadratic when regularized), so the comparator and the
/// variation are closed-form.
class PlayerView : public Environment {
 public:
  PlayerView(const BilinearGame& game, PlayerRole role, std::vector<Vector> opponent)
      : Environment(role == PlayerRole::Minimizer ? "game-x" : "game-y",
                    role == PlayerRole::Minimizer ? game.x_domain() : game.y_domain(),
                    static_cast<long>(opponent.size())),
        game_(game),
        role_(role),
        opponent_(std::move(opponent)) {}

  BoundsBundle bounds() const override {
    return role_ == PlayerRole::Minimizer ? game_.x_bounds() : game_.y_bounds();
  }
  CurvatureClass declared_class() const override {
    if (game_.regularization() > 0.0) return {SurrogateKind::StronglyConvex, game_.regularization()};
    return {SurrogateKind::Convex, 0.0};
  }

  Vector gradient(long t, const Vector& z) const override {
    check_round(t);
    const Vector& o = opponent_[t - 1];
    return role_ == PlayerRole::Minimizer ? game_.grad_x(z, o) : game_.grad_y(o, z);
  }

  double value(long t, const Vector& z) const override {
    check_round(t);
    const Vector& o = opponent_[t - 1];
    return role_ == PlayerRole::Minimizer ? game_.value(z, o) : -game_.value(o, z);
  }

  /// The gradient difference does not depend on the point (the regularizer cancels).
  VariationTotal sup_variation(long t) const override {
    check_round(t);
    if (t < 2) return {0.0, true};
    const Vector& a = opponent_[t - 1];
    const Vector& b = opponent_[t - 2];
    const Vector diff = role_ == PlayerRole::Minimizer
                            ? Vector(game_.payoff() * (a - b))
                            : Vector(-(game_.payoff().transpose() * (a - b)));
    return {diff.squaredNorm(), true};
  }

  Vector comparator() const override {
    const Domain& dom = domain();
    Vector s = Vector::Zero(dom.dimension());
    for (const auto& o : opponent_) {
      s += role_ == PlayerRole::Minimizer ? Vector(game_.payoff() * o)
                                          : Vector(-(game_.payoff().transpose() * o));
    }
    const double mu = game_.regularization();
    if (mu == 0.0) return linear_minimizer(dom, s);
    return dom.project(-s / (mu * static_cast<double>(opponent_.size())));
  }

 private:
  const BilinearGame& game_;
  PlayerRole role_;
  std::vector<Vector> opponent_;
};

/// Fixed opponent strategy for dishonest play: round -> y_t.
using OpponentStrategy = std::function<Vector(long, const Vector& x_t)>;

/// Uniform random point on the sphere bounding a ball domain (or a random
/// vertex of a box), seeded.
inline OpponentStrategy random_boundary_opponent(const Domain& dom, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [dom, rng](long, const Vector&) -> Vector {
    if (dom.kind() == Domain::Kind::Ball) {
      return dom.center() + dom.radius() * rng->unit_vector(dom.dimension());
    }
    Vector v(dom.dimension());
    for (int i = 0; i < dom.dimension(); ++i) {
      v[i] = rng->sign() > 0.0 ? dom.upper()[i] : dom.lower()[i];
    }
    return v;
  };
}

struct GameTrace {
  std::vector<Vector> xs, ys;
  std::vector<RoundTelemetry> x_telemetry, y_telemetry;
  std::vector<Vector> x_gradients, y_gradients;
};

/// Plays T rounds. With `opponent` empty both players run the ensemble (honest);
/// otherwise the maximizer follows the given strategy.
inline GameTrace play_game(const BilinearGame& game, long T, FeedbackMode mode, Fidelity fidelity,
                           const OpponentStrategy& opponent = nullptr) {
  GameTrace tr;
  UniversalEnsemble ex(EnsembleConfig::make(T, game.x_domain(), game.x_bounds(), mode, fidelity));
  std::optional<UniversalEnsemble> ey;
  if (!opponent) {
    ey.emplace(EnsembleConfig::make(T, game.y_domain(), game.y_bounds(), mode, fidelity));
  }
  for (long t = 1; t <= T; ++t) {
    const Vector x = ex.predict();
    const Vector y = ey ? Vector(ey->predict()) : opponent(t, x);
    const Vector gx = game.grad_x(x, y);
    const Vector gy = game.grad_y(x, y);
    tr.x_telemetry.push_back(
        ex.update(gx, game.value(x, y), [&](const Vector& z) { return game.grad_x(z, y); }));
    if (ey) {
      tr.y_telemetry.push_back(
          ey->update(gy, -game.value(x, y), [&](const Vector& z) { return game.grad_y(x, z); }));
    }
    tr.xs.push_back(x);
    tr.ys.push_back(y);
    tr.x_gradients.push_back(gx);
    tr.y_gradients.push_back(gy);
  }
  return tr;
}

}  // namespace uol
