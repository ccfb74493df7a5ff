#pragma once

// Test-side oracles for the simplex learner: the explicit mirror-step
// objective, a zooming grid minimizer, and the negative-stability regret bound.

#include <cmath>
#include <functional>
#include <limits>

#include "uol/environments.hpp"
#include "uol/msmwc.hpp"

namespace oracle {

using uol::Vector;

/// <v, p> + sum_i (1 / eta_i) (p_i ln(p_i / q_i) - p_i + q_i).
inline double mirror_objective(const Vector& v, const Vector& p, const Vector& q,
                               const Vector& eta) {
  double s = v.dot(p);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pl = p[i] > 0.0 ? p[i] * std::log(p[i] / q[i]) : 0.0;
    s += (pl - p[i] + q[i]) / eta[i];
  }
  return s;
}

/// Brute-force minimizer over the simplex for n = 2 or 3: a 201-point (per axis)
/// grid, re-centred on the best cell and shrunk until the cell is below 1e-11.
inline Vector grid_argmin(int n, const std::function<double(const Vector&)>& f) {
  const int M = 200;
  if (n == 2) {
    double lo = 0.0, hi = 1.0, best = 0.5;
    while (hi - lo > 1e-11) {
      const double h = (hi - lo) / M;
      double fb = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= M; ++i) {
        const double a = lo + i * h;
        Vector p(2);
        p << a, 1.0 - a;
        const double v = f(p);
        if (v < fb) {
          fb = v;
          best = a;
        }
      }
      lo = std::max(0.0, best - 2 * h);
      hi = std::min(1.0, best + 2 * h);
    }
    Vector p(2);
    p << best, 1.0 - best;
    return p;
  }
  double lo1 = 0.0, hi1 = 1.0, lo2 = 0.0, hi2 = 1.0, b1 = 1.0 / 3, b2 = 1.0 / 3;
  while (std::max(hi1 - lo1, hi2 - lo2) > 1e-11) {
    const double h1 = (hi1 - lo1) / M, h2 = (hi2 - lo2) / M;
    double fb = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= M; ++i) {
      for (int j = 0; j <= M; ++j) {
        const double a = lo1 + i * h1, b = lo2 + j * h2;
        if (a + b > 1.0) continue;
        Vector p(3);
        p << a, b, std::max(0.0, 1.0 - a - b);
        const double v = f(p);
        if (v < fb) {
          fb = v;
          b1 = a;
          b2 = b;
        }
      }
    }
    lo1 = std::max(0.0, b1 - 2 * h1);
    hi1 = std::min(1.0, b1 + 2 * h1);
    lo2 = std::max(0.0, b2 - 2 * h2);
    hi2 = std::min(1.0, b2 + 2 * h2);
  }
  Vector p(3);
  p << b1, b2, std::max(0.0, 1.0 - b1 - b2);
  return p;
}

struct RegretBoundOutcome {
  int violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
};

/// Runs one MsMwC on a random loss/optimism sequence in [-1, 1] and checks
///   sum <l_t, p_t> - sum l_{t,j} <= (1/eta_j) ln(1/q_j) + sum_i q_i / eta_i
///     - 8 sum_t sum_i eta_i p_{t,i} (l_{t,i} - m_{t,i})^2
///     + 16 eta_j sum_t (l_{t,j} - m_{t,j})^2 - 4 sum_{t>=2} ||p_t - p_{t-1}||_1^2
/// for every coordinate j (q is the prior). Roughly half the sequences use an
/// optimism close to the loss so the negative terms matter.
inline RegretBoundOutcome regret_bound_trial(std::uint64_t seed) {
  uol::Rng rng(seed);
  const int n = 2 + static_cast<int>(rng.uniform() * 7);          // 2..8
  const int T = 1 + static_cast<int>(rng.uniform() * 128);        // 1..128
  Vector eta(n), prior(n);
  for (int i = 0; i < n; ++i) {
    eta[i] = std::exp(rng.uniform(std::log(1.0 / 4096), std::log(1.0 / 32)));
    prior[i] = rng.uniform(0.05, 1.0);
  }
  prior /= prior.sum();
  const bool accurate = rng.uniform() < 0.5;
  uol::MsMwc learner(prior, eta, 1.0);
  double played_loss = 0.0, stability = 0.0, weighted_gap = 0.0;
  Vector coord_loss = Vector::Zero(n), coord_gap = Vector::Zero(n);
  Vector prev;
  for (int t = 0; t < T; ++t) {
    Vector l(n), m(n);
    for (int i = 0; i < n; ++i) {
      l[i] = rng.uniform(-1.0, 1.0);
      m[i] = accurate ? std::clamp(l[i] + rng.uniform(-0.05, 0.05), -1.0, 1.0)
                      : rng.uniform(-1.0, 1.0);
    }
    const Vector p = learner.predict(m);
    learner.update(l, m);
    played_loss += l.dot(p);
    coord_loss += l;
    const Vector gap2 = (l - m).array().square();
    coord_gap += gap2;
    weighted_gap += (eta.array() * p.array() * gap2.array()).sum();
    if (t > 0) {
      const double d = (p - prev).lpNorm<1>();
      stability += d * d;
    }
    prev = p;
  }
  RegretBoundOutcome out;
  const double common = (prior.array() / eta.array()).sum() - 8.0 * weighted_gap - 4.0 * stability;
  for (int j = 0; j < n; ++j) {
    const double lhs = played_loss - coord_loss[j];
    const double rhs = std::log(1.0 / prior[j]) / eta[j] + common + 16.0 * eta[j] * coord_gap[j];
    const double slack = rhs - lhs;
    out.min_slack = std::min(out.min_slack, slack);
    if (slack < -1e-9 * std::max(1.0, std::abs(rhs))) ++out.violations;
  }
  return out;
}

}  // namespace oracle
