#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "uol/ensemble.hpp"
#include "uol/environments.hpp"
#include "uol/errors.hpp"

namespace uol {

/// One CSV row. Cumulative columns are partial sums up to round t.
struct RoundRecord {
  long t = 0;
  double loss = 0.0;
  double cum_loss = 0.0;
  double cum_regret = 0.0;
  long grad_queries = 0;
  double emp_var = 0.0;          // sum_{s<=t} ||g_s - g_{s-1}||^2 of received gradients
  double sup_var_partial = 0.0;  // sum_{s<=t} sup_x ||grad f_s(x) - grad f_{s-1}(x)||^2
  double top_entropy = 0.0;
  double s_q = 0.0;
  double s_p_star = 0.0;
  double s_x = 0.0;
};

inline const char* kCsvHeader =
    "t,loss,cum_loss,cum_regret,grad_queries,emp_var,sup_var_partial,top_entropy,s_q,s_p_star,s_x";

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const std::vector<RoundRecord>& records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.t << ',' << format_number(r.loss) << ',' << format_number(r.cum_loss) << ','
       << format_number(r.cum_regret) << ',' << r.grad_queries << ',' << format_number(r.emp_var)
       << ',' << format_number(r.sup_var_partial) << ',' << format_number(r.top_entropy) << ','
       << format_number(r.s_q) << ',' << format_number(r.s_p_star) << ',' << format_number(r.s_x)
       << '\n';
  }
}

/// min_x sum_t f_t(x), via the environment's comparator.
inline double comparator_loss(const Environment& env) {
  const Vector x = env.comparator();
  double s = 0.0;
  for (long t = 1; t <= env.horizon(); ++t) s += env.value(t, x);
  return s;
}

/// Builds RoundRecords from the per-round stream of a run.
class RunRecorder {
 public:
  void record(double loss, const Vector& gradient, double sup_variation,
              const RoundTelemetry& tel) {
    RoundRecord r;
    r.t = static_cast<long>(records_.size()) + 1;
    r.loss = loss;
    r.cum_loss = (records_.empty() ? 0.0 : records_.back().cum_loss) + loss;
    r.grad_queries = tel.gradient_queries;
    double var = 0.0;
    if (!records_.empty()) var = (gradient - last_gradient_).squaredNorm();
    r.emp_var = (records_.empty() ? 0.0 : records_.back().emp_var) + var;
    r.sup_var_partial = (records_.empty() ? 0.0 : records_.back().sup_var_partial) + sup_variation;
    r.top_entropy = tel.top_entropy;
    r.s_q = (records_.empty() ? 0.0 : records_.back().s_q) + tel.s_q;
    r.s_p_star = (records_.empty() ? 0.0 : records_.back().s_p_star) + tel.s_p_star;
    r.s_x = (records_.empty() ? 0.0 : records_.back().s_x) + tel.s_x;
    last_gradient_ = gradient;
    records_.push_back(r);
  }

  std::vector<RoundRecord>& records() { return records_; }
  const std::vector<RoundRecord>& records() const { return records_; }

 private:
  std::vector<RoundRecord> records_;
  Vector last_gradient_;
};

struct RegretCurve {
  std::vector<double> by_cumulative;  // cum_loss[t] - sum_{s<=t} f_s(x*)
  std::vector<double> by_rounds;      // sum_{s<=t} (f_s(x_s) - f_s(x*))
  double max_disagreement = 0.0;

  double final_regret() const { return by_cumulative.empty() ? 0.0 : by_cumulative.back(); }
};

/// Regret of every prefix against the full-horizon comparator, computed two ways.
/// `comparator_losses[t-1]` is f_t(x*).
inline RegretCurve regret_curve(const std::vector<double>& losses,
                                const std::vector<double>& comparator_losses) {
  if (losses.size() != comparator_losses.size()) {
    throw ProtocolError("regret_curve: loss and comparator streams differ in length");
  }
  RegretCurve c;
  double cum_loss = 0.0, cum_comp = 0.0, running = 0.0;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    cum_loss += losses[t];
    cum_comp += comparator_losses[t];
    running += losses[t] - comparator_losses[t];
    c.by_cumulative.push_back(cum_loss - cum_comp);
    c.by_rounds.push_back(running);
    const double scale = std::max({1.0, std::abs(cum_loss), std::abs(cum_comp)});
    c.max_disagreement =
        std::max(c.max_disagreement, std::abs(c.by_cumulative.back() - running) / scale);
  }
  return c;
}

/// Fills the cum_regret column and checks the two routes agree.
inline RegretCurve attach_regret(std::vector<RoundRecord>& records, const Environment& env,
                                 const Vector& comparator) {
  std::vector<double> losses, comp;
  losses.reserve(records.size());
  comp.reserve(records.size());
  for (const auto& r : records) {
    losses.push_back(r.loss);
    comp.push_back(env.value(r.t, comparator));
  }
  RegretCurve curve = regret_curve(losses, comp);
  if (curve.max_disagreement > 1e-9) {
    std::ostringstream os;
    os << "regret routes disagree by " << curve.max_disagreement;
    throw ConsistencyError(os.str());
  }
  for (std::size_t i = 0; i < records.size(); ++i) records[i].cum_regret = curve.by_cumulative[i];
  return curve;
}

/// Least-squares slope of log y against log x. Undefined when fewer than two
/// points or any value is non-positive.
inline std::optional<double> fit_exponent(const std::vector<double>& xs,
                                          const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ContractViolation("fit_exponent: size mismatch");
  if (xs.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) return std::nullopt;
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den <= 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

/// Growth exponent of a single curve in t, fitted on its last half.
inline std::optional<double> curve_exponent(const std::vector<double>& curve) {
  const std::size_t n = curve.size();
  if (n < 4) return std::nullopt;
  std::vector<double> xs, ys;
  for (std::size_t i = n / 2; i < n; ++i) {
    xs.push_back(static_cast<double>(i + 1));
    ys.push_back(curve[i]);
  }
  return fit_exponent(xs, ys);
}

struct ScalingPoint {
  long T;
  double regret;
  double variation = 0.0;
};

struct ScalingRow {
  long T;
  double regret;
  std::optional<double> ratio;       // Reg(T) / Reg(T/2)
  std::optional<double> increment;   // Reg(T) - Reg(T/2)
};

struct ScalingSummary {
  std::vector<ScalingRow> rows;
  std::optional<double> exponent_T;
  std::optional<double> exponent_V;

  std::string table() const {
    std::ostringstream os;
    os << "T,regret,ratio_to_previous,increment\n";
    for (const auto& r : rows) {
      os << r.T << ',' << format_number(r.regret) << ','
         << (r.ratio ? format_number(*r.ratio) : "undefined") << ','
         << (r.increment ? format_number(*r.increment) : "undefined") << '\n';
    }
    os << "exponent_vs_T," << (exponent_T ? format_number(*exponent_T) : "undefined") << '\n';
    os << "exponent_vs_VT," << (exponent_V ? format_number(*exponent_V) : "undefined") << '\n';
    return os.str();
  }
};

/// Ratio table over horizons that double, plus growth exponents against T and V_T.
inline ScalingSummary scaling_summary(const std::vector<ScalingPoint>& points) {
  ScalingSummary s;
  std::vector<double> Ts, regs, vs;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && points[i].T != 2 * points[i - 1].T) {
      throw ProtocolError("scaling_summary: horizons must double between consecutive runs");
    }
    ScalingRow row{points[i].T, points[i].regret, std::nullopt, std::nullopt};
    if (i > 0) {
      row.increment = points[i].regret - points[i - 1].regret;
      if (points[i - 1].regret != 0.0) row.ratio = points[i].regret / points[i - 1].regret;
    }
    s.rows.push_back(row);
    Ts.push_back(static_cast<double>(points[i].T));
    regs.push_back(points[i].regret);
    vs.push_back(points[i].variation);
  }
  s.exponent_T = fit_exponent(Ts, regs);
  s.exponent_V = fit_exponent(vs, regs);
  return s;
}

}  // namespace uol
