#include <gtest/gtest.h>

#include <cmath>

#include "uol/base_learners.hpp"
#include "uol/environments.hpp"

using uol::Domain;
using uol::Matrix;
using uol::Vector;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

}  // namespace

TEST(ConvexOgd, HandReplayOnTheInterval) {
  uol::ConvexOgd ogd(Domain::unit_ball(1), 2.0, 1.0);
  // Round 1: step min(2, 1) = 1, zero optimism.
  EXPECT_DOUBLE_EQ(ogd.predict(ogd.last_gradient())[0], 0.0);
  ogd.update(scalar(1.0));
  EXPECT_DOUBLE_EQ(ogd.pivot()[0], -1.0);
  EXPECT_DOUBLE_EQ(ogd.variation(), 0.0);
  // Round 2: optimism 1 pushes past the boundary.
  EXPECT_DOUBLE_EQ(ogd.predict(ogd.last_gradient())[0], -1.0);
  ogd.update(scalar(-1.0));
  EXPECT_DOUBLE_EQ(ogd.pivot()[0], 0.0);
  EXPECT_DOUBLE_EQ(ogd.variation(), 4.0);
  // Round 3: step 2 / sqrt(5).
  EXPECT_NEAR(ogd.predict(ogd.last_gradient())[0], 2.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(ogd.step(), 2.0 / std::sqrt(5.0), 1e-15);
}

TEST(ConvexOgd, StepIsCappedByGamma) {
  const uol::ConvexOgd ogd(Domain::unit_ball(2), 2.0, 10.0);
  EXPECT_DOUBLE_EQ(ogd.step_for(0.0), 0.1);
  EXPECT_DOUBLE_EQ(ogd.step_for(1e6), 2.0 / std::sqrt(1.0 + 1e6));
}

TEST(StronglyConvexOgd, StepScheduleFollowsTheRound) {
  uol::StronglyConvexOgd ogd(Domain::unit_ball(2), 0.25, 3.0);
  uol::Rng rng(1);
  for (int t = 1; t <= 50; ++t) {
    ogd.predict(0.1 * rng.normal_vector(2));
    EXPECT_DOUBLE_EQ(ogd.step(), 2.0 / (3.0 + 0.25 * t));
    ogd.update(0.1 * rng.normal_vector(2));
    EXPECT_TRUE(Domain::unit_ball(2).contains(ogd.pivot()));
  }
}

TEST(StronglyConvexOgd, ConvergesOnAFixedQuadratic) {
  const Domain dom = Domain::unit_ball(2);
  const Vector target = (Vector(2) << 0.3, -0.2).finished();
  uol::StronglyConvexOgd ogd(dom, 1.0, 1.0);
  Vector x = dom.center();
  for (int t = 0; t < 2000; ++t) {
    x = ogd.predict(ogd.last_gradient());
    ogd.update(x - target);
  }
  EXPECT_LE((x - target).norm(), 1e-2);
}

TEST(ExpConcaveOns, FirstStepMatchesHandComputation) {
  // U_1 = (1 + 1 * 2 / 2) I = 2I, so the mirror step of m = (2, 0) is (-1, 0).
  uol::ExpConcaveOns ons(Domain::unit_ball(2), 1.0, 1.0, std::sqrt(2.0));
  EXPECT_TRUE(ons.U().isApprox(2.0 * Matrix::Identity(2, 2)));
  const Vector x = ons.predict((Vector(2) << 2.0, 0.0).finished());
  EXPECT_NEAR(x[0], -1.0, 1e-15);
  EXPECT_NEAR(x[1], 0.0, 1e-15);
}

TEST(ExpConcaveOns, DiagonalPreconditionerOnABoxClampsCoordinates) {
  const Domain box = Domain::box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  uol::ExpConcaveOns ons(box, 1.0, 1.0, std::sqrt(2.0));
  const Vector x = ons.predict((Vector(2) << 6.0, -1.0).finished());
  EXPECT_NEAR(x[0], -1.0, 1e-8);
  EXPECT_NEAR(x[1], 0.5, 1e-8);
}

TEST(ExpConcaveOns, PreconditionerEigenvaluesNeverDecrease) {
  uol::ExpConcaveOns ons(Domain::unit_ball(3), 0.5, 2.0, 1.0);
  uol::Rng rng(9);
  Eigen::SelfAdjointEigenSolver<Matrix> es(ons.U());
  Vector prev = es.eigenvalues();
  for (int t = 0; t < 300; ++t) {
    ons.predict(ons.last_gradient());
    ons.update(rng.normal_vector(3));
    es.compute(ons.U());
    const Vector ev = es.eigenvalues();
    EXPECT_TRUE(((ev - prev).array() >= -1e-10).all()) << "round " << t;
    prev = ev;
  }
}

TEST(ExpConcaveOns, RankOneInverseStaysCloseToFreshInverse) {
  uol::ExpConcaveOns ons(Domain::unit_ball(4), 1.0, 1.0, 1.0, 512);
  uol::Rng rng(4);
  for (int t = 0; t < 2048; ++t) {
    ons.predict(ons.last_gradient());
    ons.update(rng.unit_vector(4));
  }
  EXPECT_EQ(ons.refresh_count(), 4);
  EXPECT_LE(ons.max_refresh_deviation(), 1e-8);
  const Matrix fresh = ons.U().inverse();
  EXPECT_LE((fresh - ons.U_inverse()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BaseLearner, RejectsNonPositiveParameters) {
  const Domain d = Domain::unit_ball(2);
  EXPECT_THROW(uol::ConvexOgd(d, 0.0, 1.0), uol::ContractViolation);
  EXPECT_THROW(uol::StronglyConvexOgd(d, 0.0, 1.0), uol::ContractViolation);
  EXPECT_THROW(uol::ExpConcaveOns(d, 1.0, 0.0, 1.0), uol::ContractViolation);
}

TEST(BaseLearner, VariantDispatchesToTheWrappedLearner) {
  uol::BaseLearner b = uol::ConvexOgd(Domain::unit_ball(1), 2.0, 1.0);
  ASSERT_NE(b.as<uol::ConvexOgd>(), nullptr);
  EXPECT_EQ(b.as<uol::ExpConcaveOns>(), nullptr);
  b.predict(b.last_gradient());
  b.update(scalar(1.0));
  EXPECT_DOUBLE_EQ(b.pivot()[0], -1.0);
  EXPECT_DOUBLE_EQ(b.last_gradient()[0], 1.0);
}
