#include <gtest/gtest.h>

#include <cmath>

#include "uol/environments.hpp"
#include "uol/game.hpp"

using uol::Domain;
using uol::Matrix;
using uol::Vector;

namespace {

Vector random_point(uol::Rng& rng, const Domain& d) {
  return d.center() + d.radius() * std::pow(rng.uniform(), 1.0 / d.dimension()) *
                          rng.unit_vector(d.dimension());
}

}  // namespace

TEST(LogLoss, GradientMatchesFiniteDifferences) {
  const Domain dom = Domain::ball(Vector::Zero(3), 0.5);
  std::vector<Vector> comps = {(Vector(3) << 1.0, 0.0, 0.5).finished(),
                               (Vector(3) << -0.3, 0.8, 0.1).finished()};
  const auto env = uol::make_random_log_loss(dom, 20, comps, 1.0, 3);
  uol::Rng rng(1);
  for (long t = 1; t <= 20; ++t) {
    const Vector x = random_point(rng, dom);
    const Vector g = env->gradient(t, x);
    for (int i = 0; i < 3; ++i) {
      Vector a = x, b = x;
      a[i] += 1e-6;
      b[i] -= 1e-6;
      EXPECT_NEAR(g[i], (env->value(t, a) - env->value(t, b)) / 2e-6, 1e-6);
    }
  }
}

TEST(LogLoss, RejectsArgumentsThatReachZero) {
  const Domain dom = Domain::ball(Vector::Zero(2), 1.0);
  EXPECT_THROW(uol::make_fixed_log_loss(dom, 4, Vector::Constant(2, 1.0), 1.0), uol::ConfigError);
}

TEST(Variation, DriftingCentersMatchTheChordFormula) {
  const Domain dom = Domain::ball(Vector::Zero(2), 1.0);
  const double lambda = 0.7, orbit = 0.4, step = 0.3;
  const long T = 500;
  const auto env = uol::make_drifting_quadratic(dom, T, lambda, orbit, step, 0.0);
  const double chord = 2.0 * orbit * std::sin(step / 2.0);
  const double closed = (T - 1) * lambda * lambda * chord * chord;
  double summed = 0.0;
  for (long t = 2; t <= T; ++t) {
    summed += (lambda * (env->center(t) - env->center(t - 1))).squaredNorm();
  }
  const auto v = env->exact_VT();
  EXPECT_TRUE(v.exact);
  EXPECT_NEAR(v.value, closed, 1e-10);
  EXPECT_NEAR(v.value, summed, 1e-10);
}

TEST(Variation, FixedFunctionHasNone) {
  const Domain dom = Domain::ball(Vector::Zero(2), 1.0);
  EXPECT_EQ(uol::make_fixed_quadratic(dom, 100, 1.0, Vector::Constant(2, 0.1))->exact_VT().value,
            0.0);
  EXPECT_EQ(uol::make_fixed_log_loss(dom, 100, Vector::Constant(2, 0.1), 1.0)->exact_VT().value,
            0.0);
}

TEST(Variation, LinearSequenceSumsGradientDifferences) {
  const Domain dom = Domain::ball(Vector::Zero(3), 0.2);
  const auto env = uol::make_drifting_linear(dom, 64, 0.1, uol::LinearDrift::Independent, 0.1,
                                             1e-3, 4);
  double s = 0.0;
  for (long t = 2; t <= 64; ++t) s += (env->loss_vector(t) - env->loss_vector(t - 1)).squaredNorm();
  EXPECT_NEAR(env->exact_VT().value, s, 1e-14);
}

TEST(Curvature, QuadraticsAreStronglyConvex) {
  const Domain dom = Domain::ball(Vector::Zero(4), 0.5);
  const auto env = uol::make_drifting_quadratic(dom, 30, 0.8, 0.2, 0.4, 0.0);
  const auto cls = env->declared_class();
  ASSERT_EQ(cls.kind, uol::SurrogateKind::StronglyConvex);
  uol::Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const long t = 1 + i % 30;
    const Vector x = random_point(rng, dom), y = random_point(rng, dom);
    const double lower = env->value(t, x) + env->gradient(t, x).dot(y - x) +
                         0.5 * cls.coefficient * (y - x).squaredNorm();
    EXPECT_GE(env->value(t, y), lower - 1e-12);
  }
}

TEST(Curvature, LogLossSatisfiesTheQuadraticLowerBound) {
  const Domain dom = Domain::ball(Vector::Zero(3), 0.4);
  std::vector<Vector> comps = {(Vector(3) << 1.0, 0.5, 0.0).finished(),
                               (Vector(3) << 0.0, -1.0, 1.0).finished()};
  const auto env = uol::make_random_log_loss(dom, 50, comps, 1.0, 9);
  const double beta = env->curvature_modulus();
  ASSERT_GT(beta, 0.0);
  uol::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const long t = 1 + i % 50;
    const Vector x = random_point(rng, dom), y = random_point(rng, dom);
    const Vector g = env->gradient(t, x);
    const double s = g.dot(y - x);
    EXPECT_GE(env->value(t, y), env->value(t, x) + s + 0.5 * beta * s * s - 1e-12);
  }
}

TEST(Bounds, DeclaredGradientBoundCoversTheDomain) {
  uol::Rng rng(4);
  const Domain dom = Domain::ball(Vector::Constant(3, 0.1), 0.3);
  std::vector<std::unique_ptr<uol::Environment>> envs;
  envs.push_back(uol::make_drifting_quadratic(dom, 20, 1.5, 0.3, 0.5, 0.0));
  envs.push_back(uol::make_sea_quadratic(dom, 20, 1.0, Vector::Zero(3), 0.01, 0.1, 0.2, 5));
  envs.push_back(uol::make_random_log_loss(
      dom, 20, {Vector::Constant(3, 0.5), (Vector(3) << 1.0, -1.0, 0.0).finished()}, 1.0, 6));
  envs.push_back(uol::make_adversarial_linear(dom, 20, 0.7, 1e-3, 7));
  for (const auto& env : envs) {
    const double G = env->bounds().G;
    for (int i = 0; i < 500; ++i) {
      const long t = 1 + i % 20;
      Vector x = random_point(rng, dom);
      if (i % 2 == 0) x = dom.project(dom.center() + 10.0 * (x - dom.center()));
      EXPECT_LE(env->gradient(t, x).norm(), G * (1.0 + 1e-12)) << env->name();
    }
  }
}

TEST(Sea, NoiseVarianceMatchesWithinThreeStandardErrors) {
  const Domain dom = Domain::ball(Vector::Zero(4), 1.0);
  const double sigma2 = 0.02;
  const long T = 20000;
  const auto env = uol::make_sea_quadratic(dom, T, 1.0, Vector::Zero(4), sigma2, 0.0, 0.0, 11);
  double mean = 0.0, sq = 0.0;
  for (long t = 1; t <= T; ++t) {
    const double v = env->noise(t).squaredNorm();
    mean += v;
    sq += v * v;
  }
  mean /= T;
  const double se = std::sqrt((sq / T - mean * mean) / T);
  EXPECT_NEAR(mean, sigma2, 3.0 * se);
}

TEST(Sea, ZeroVarianceAndDriftGivesIdenticalRounds) {
  const Domain dom = Domain::ball(Vector::Zero(2), 1.0);
  const auto env = uol::make_sea_quadratic(dom, 50, 1.0, Vector::Constant(2, 0.1), 0.0, 0.0, 0.0, 1);
  EXPECT_FALSE(env->noisy());
  const Vector x = (Vector(2) << 0.3, -0.4).finished();
  for (long t = 2; t <= 50; ++t) EXPECT_EQ(env->value(t, x), env->value(1, x));
  EXPECT_EQ(env->exact_VT().value, 0.0);
}

TEST(Comparator, DriftingQuadraticMatchesPolarGrid) {
  const Domain dom = Domain::ball(Vector::Zero(2), 1.0);
  const long T = 16;
  const auto env = uol::make_drifting_quadratic(dom, T, 1.0, 0.3, 0.2, 0.0,
                                                (Vector(2) << 1.5, 0.0).finished());
  auto total = [&](const Vector& x) {
    double s = 0.0;
    for (long t = 1; t <= T; ++t) s += env->value(t, x);
    return s;
  };
  double best = 1e300;
  for (int ir = 0; ir <= 1000; ++ir) {
    for (int it = 0; it < 6284; ++it) {
      const double r = ir * 1e-3, th = it * 1e-3;
      best = std::min(best, total((Vector(2) << r * std::cos(th), r * std::sin(th)).finished()));
    }
  }
  const double got = total(env->comparator());
  EXPECT_LE(got, best + 1e-12);
  EXPECT_NEAR(got, best, 1e-4);
}

TEST(Comparator, LinearSequenceAttainsMinusRadiusTimesNorm) {
  const Domain dom = Domain::ball(Vector::Zero(3), 0.25);
  const auto env = uol::make_adversarial_linear(dom, 200, 1.0, 1e-3, 3);
  Vector sum = Vector::Zero(3);
  for (long t = 1; t <= 200; ++t) sum += env->loss_vector(t);
  EXPECT_NEAR(env->exact_FT(), -0.25 * sum.norm(), 1e-12);
}

TEST(Comparator, LogLossBeatsRandomPoints) {
  const Domain dom = Domain::ball(Vector::Zero(3), 0.4);
  std::vector<Vector> comps = {(Vector(3) << 1.0, 0.5, 0.0).finished(),
                               (Vector(3) << 0.0, -1.0, 1.0).finished()};
  const auto env = uol::make_random_log_loss(dom, 40, comps, 1.0, 2);
  auto total = [&](const Vector& x) {
    double s = 0.0;
    for (long t = 1; t <= 40; ++t) s += env->value(t, x);
    return s;
  };
  const double best = total(env->comparator());
  uol::Rng rng(5);
  for (int i = 0; i < 2000; ++i) EXPECT_GE(total(random_point(rng, dom)), best - 1e-9);
}

TEST(Environment, RoundsOutsideTheHorizonAreRejected) {
  const Domain dom = Domain::ball(Vector::Zero(2), 1.0);
  const auto env = uol::make_fixed_quadratic(dom, 5, 1.0, Vector::Zero(2));
  EXPECT_THROW(env->value(0, Vector::Zero(2)), uol::ContractViolation);
  EXPECT_THROW(env->gradient(6, Vector::Zero(2)), uol::ContractViolation);
  EXPECT_THROW(env->value(1, Vector::Zero(3)), uol::ContractViolation);
}

TEST(Game, ZeroPayoffGivesZeroGradients) {
  const Domain dom = Domain::ball(Vector::Zero(2), 0.1);
  const uol::BilinearGame game(Matrix::Zero(2, 2), dom, dom);
  const auto tr = uol::play_game(game, 32, uol::FeedbackMode::OneGradient, uol::Fidelity::Shared);
  for (std::size_t t = 0; t < tr.xs.size(); ++t) {
    EXPECT_TRUE(tr.x_gradients[t].isZero());
    EXPECT_TRUE(tr.y_gradients[t].isZero());
    EXPECT_LE(tr.xs[t].norm(), 1e-15);
  }
}

TEST(Game, ScaledMatchingPenniesHasValueZero) {
  // Mixed strategies p = ((1 + s) / 2, (1 - s) / 2) turn p^T (A / 2) q with
  // A = [[1, -1], [-1, 1]] into s u / 2 on [-1, 1]^2.
  Matrix A(2, 2);
  A << 1.0, -1.0, -1.0, 1.0;
  A *= 0.5;
  const Domain box = Domain::box(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  const uol::BilinearGame game(Matrix::Constant(1, 1, 0.5), box, box);
  uol::Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const double s = rng.uniform(-1.0, 1.0), u = rng.uniform(-1.0, 1.0);
    const Vector p = (Vector(2) << (1 + s) / 2, (1 - s) / 2).finished();
    const Vector q = (Vector(2) << (1 + u) / 2, (1 - u) / 2).finished();
    EXPECT_NEAR(game.value(Vector::Constant(1, s), Vector::Constant(1, u)), p.dot(A * q), 1e-15);
  }
  double lower = -1e300, upper = 1e300;
  const int M = 400;
  for (int j = 0; j <= M; ++j) {
    const double u = -1.0 + 2.0 * j / M;
    double inner = 1e300;
    for (int i = 0; i <= M; ++i) {
      const double s = -1.0 + 2.0 * i / M;
      inner = std::min(inner, game.value(Vector::Constant(1, s), Vector::Constant(1, u)));
    }
    lower = std::max(lower, inner);
  }
  for (int i = 0; i <= M; ++i) {
    const double s = -1.0 + 2.0 * i / M;
    double inner = -1e300;
    for (int j = 0; j <= M; ++j) {
      const double u = -1.0 + 2.0 * j / M;
      inner = std::max(inner, game.value(Vector::Constant(1, s), Vector::Constant(1, u)));
    }
    upper = std::min(upper, inner);
  }
  EXPECT_NEAR(lower, 0.0, 1e-12);
  EXPECT_NEAR(upper, 0.0, 1e-12);
}

TEST(Game, SymmetricSelfPlayGivesIdenticalTrajectories) {
  Matrix A(2, 2);
  A << 0.0, 0.8, -0.8, 0.0;
  const Domain dom = Domain::ball((Vector(2) << 0.02, 0.01).finished(), 0.05);
  const uol::BilinearGame game(A, dom, dom);
  const auto tr = uol::play_game(game, 128, uol::FeedbackMode::OneGradient, uol::Fidelity::Shared);
  double worst = 0.0, moved = 0.0;
  for (std::size_t t = 0; t < tr.xs.size(); ++t) {
    worst = std::max(worst, (tr.xs[t] - tr.ys[t]).norm());
    moved = std::max(moved, (tr.xs[t] - dom.center()).norm());
  }
  EXPECT_LE(worst, 1e-15);
  EXPECT_GT(moved, 0.0);
}

TEST(Game, RejectsPayoffWithNormAboveOne) {
  Matrix A(2, 2);
  A << 1.0, -1.0, -1.0, 1.0;
  const Domain dom = Domain::ball(Vector::Zero(2), 1.0);
  EXPECT_THROW(uol::BilinearGame(A, dom, dom), uol::ConfigError);
  EXPECT_THROW(uol::BilinearGame(Matrix::Zero(3, 2), dom, dom), uol::ConfigError);
}

TEST(Game, PlayerViewsUseTheirOwnVariable) {
  const Domain dom = Domain::ball(Vector::Zero(2), 0.1);
  Matrix A(2, 2);
  A << 0.3, 0.1, -0.2, 0.5;
  const uol::BilinearGame game(A, dom, dom);
  std::vector<Vector> ys = {Vector::Constant(2, 0.05), Vector::Constant(2, -0.02)};
  const uol::PlayerView xv(game, uol::PlayerRole::Minimizer, ys);
  const Vector x = (Vector(2) << 0.01, 0.03).finished();
  EXPECT_NEAR(xv.value(2, x), game.value(x, ys[1]), 1e-15);
  EXPECT_TRUE(xv.gradient(1, x).isApprox(A * ys[0]));
  EXPECT_NEAR(xv.sup_variation(2).value, (A * (ys[1] - ys[0])).squaredNorm(), 1e-15);
}
