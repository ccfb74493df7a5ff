#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uol/ensemble.hpp"
#include "uol/environments.hpp"
#include "uol/errors.hpp"
#include "uol/game.hpp"
#include "uol/metrics.hpp"

namespace uol {

/// Knobs a config file may set on top of a scenario's defaults.
struct ScenarioParams {
  std::optional<int> dimension;
  std::optional<double> radius;
  std::optional<double> lambda;
  std::optional<double> magnitude;
  std::optional<double> sigma2;
  std::optional<double> drift;
  std::optional<double> G;  // declared gradient bound, must cover the environment's
  std::optional<double> L;  // declared smoothness, must cover the environment's
};

struct ExperimentConfig {
  std::string scenario;
  std::vector<long> horizons;
  FeedbackMode mode = FeedbackMode::OneGradient;
  Fidelity fidelity = Fidelity::Shared;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "out";
  ScenarioParams params;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

inline long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long d = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

inline FeedbackMode parse_mode(const std::string& v) {
  if (v == "one-grad") return FeedbackMode::OneGradient;
  if (v == "multi-grad") return FeedbackMode::MultiGradient;
  throw ConfigError("config: mode must be one-grad or multi-grad, got '" + v + "'");
}

inline Fidelity parse_fidelity(const std::string& v) {
  if (v == "shared") return Fidelity::Shared;
  if (v == "full") return Fidelity::Full;
  throw ConfigError("config: fidelity must be shared or full, got '" + v + "'");
}

/// Applies one key=value setting. Also used for command-line overrides.
inline void apply_setting(ExperimentConfig& cfg, const std::string& raw_key,
                          const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  if (key == "scenario") {
    cfg.scenario = v;
  } else if (key == "T" || key == "horizons") {
    cfg.horizons.clear();
    for (const auto& s : split_list(v)) cfg.horizons.push_back(parse_long(key, s));
  } else if (key == "seed" || key == "seeds") {
    cfg.seeds.clear();
    for (const auto& s : split_list(v)) {
      const long x = parse_long(key, s);
      if (x < 0) throw ConfigError("config: seeds must be non-negative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(x));
    }
  } else if (key == "mode") {
    cfg.mode = parse_mode(v);
  } else if (key == "fidelity") {
    cfg.fidelity = parse_fidelity(v);
  } else if (key == "out") {
    cfg.out_dir = v;
  } else if (key == "dimension") {
    cfg.params.dimension = static_cast<int>(parse_long(key, v));
  } else if (key == "radius") {
    cfg.params.radius = parse_double(key, v);
  } else if (key == "lambda") {
    cfg.params.lambda = parse_double(key, v);
  } else if (key == "magnitude") {
    cfg.params.magnitude = parse_double(key, v);
  } else if (key == "sigma2") {
    cfg.params.sigma2 = parse_double(key, v);
  } else if (key == "drift") {
    cfg.params.drift = parse_double(key, v);
  } else if (key == "G") {
    cfg.params.G = parse_double(key, v);
  } else if (key == "L") {
    cfg.params.L = parse_double(key, v);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

/// Flat key = value lines; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig cfg = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(cfg));
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  return parse_config(in, std::move(cfg));
}

// ---------------------------------------------------------------------------
// Scenarios

struct Scenario {
  std::string name;
  std::string summary;
  long default_T;
  bool game = false;
  // Single-environment scenarios.
  std::function<std::unique_ptr<Environment>(const ScenarioParams&, long T, std::uint64_t seed)>
      build;
  // Game scenarios: the game, and the opponent for dishonest play (null when honest).
  std::function<BilinearGame(const ScenarioParams&, std::uint64_t seed)> build_game;
  bool dishonest = false;
};

namespace detail {

inline Domain centered_ball(const ScenarioParams& p, int default_dim, double default_radius) {
  const int d = p.dimension.value_or(default_dim);
  if (d < 1) throw ConfigError("dimension must be >= 1");
  const double r = p.radius.value_or(default_radius);
  if (!(r > 0.0)) throw ConfigError("radius must be positive");
  return Domain::ball(Vector::Zero(d), r);
}

inline Matrix normalized_payoff(int d, std::uint64_t seed) {
  Rng rng(seed * 2654435761u + 11u);
  Matrix A(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
  }
  Eigen::JacobiSVD<Matrix> svd(A);
  return A / svd.singularValues()[0];
}

}  // namespace detail

inline const std::vector<Scenario>& scenarios() {
  static const std::vector<Scenario> all = [] {
    std::vector<Scenario> s;
    s.push_back({"fixed-sc", "fixed strongly convex quadratic (V_T = 0)", 4096, false,
                 [](const ScenarioParams& p, long T, std::uint64_t) {
                   Domain dom = detail::centered_ball(p, 8, 0.1);
                   const int d = dom.dimension();
                   const Vector c = Vector::Constant(d, 0.5 * dom.radius() / std::sqrt(d));
                   return std::unique_ptr<Environment>(
                       make_fixed_quadratic(dom, T, p.lambda.value_or(1.0), c));
                 },
                 nullptr});
    s.push_back({"drifting-sc", "strongly convex quadratic with a decaying circular drift", 4096,
                 false,
                 [](const ScenarioParams& p, long T, std::uint64_t) {
                   Domain dom = detail::centered_ball(p, 8, 0.1);
                   const double r = dom.radius();
                   return std::unique_ptr<Environment>(make_drifting_quadratic(
                       dom, T, p.lambda.value_or(1.0), 0.5 * r, p.drift.value_or(0.5), 2.0));
                 },
                 nullptr});
    s.push_back({"fixed-exp", "fixed exp-concave log loss (V_T = 0)", 4096, false,
                 [](const ScenarioParams& p, long T, std::uint64_t) {
                   Domain dom = detail::centered_ball(p, 4, 0.1);
                   const int d = dom.dimension();
                   Vector a = Vector::LinSpaced(d, 1.0, 2.0);
                   a *= p.magnitude.value_or(0.1) / a.norm();
                   return std::unique_ptr<Environment>(make_fixed_log_loss(dom, T, a, 1.0));
                 },
                 nullptr});
    s.push_back({"drifting-convex", "linear losses with independent random directions", 4096,
                 false,
                 [](const ScenarioParams& p, long T, std::uint64_t seed) {
                   Domain dom = detail::centered_ball(p, 4, 0.05);
                   const double m = p.magnitude.value_or(0.05);
                   return std::unique_ptr<Environment>(make_drifting_linear(
                       dom, T, m, LinearDrift::Independent, m, 1e-3, seed));
                 },
                 nullptr});
    s.push_back({"adversarial-convex", "linear losses with random axis signs", 4096, false,
                 [](const ScenarioParams& p, long T, std::uint64_t seed) {
                   Domain dom = detail::centered_ball(p, 4, 0.05);
                   return std::unique_ptr<Environment>(
                       make_adversarial_linear(dom, T, p.magnitude.value_or(0.05), 1e-3, seed));
                 },
                 nullptr});
    s.push_back({"sea-stochastic", "SEA quadratic, stochastic noise only", 4096, false,
                 [](const ScenarioParams& p, long T, std::uint64_t seed) {
                   Domain dom = detail::centered_ball(p, 4, 0.1);
                   const Vector c = Vector::Constant(dom.dimension(), 0.02);
                   return std::unique_ptr<Environment>(
                       make_sea_quadratic(dom, T, p.lambda.value_or(1.0), c,
                                          p.sigma2.value_or(0.005), 0.0, 0.0, seed));
                 },
                 nullptr});
    s.push_back({"sea-mixed", "SEA quadratic, stochastic noise plus drifting expectation", 4096,
                 false,
                 [](const ScenarioParams& p, long T, std::uint64_t seed) {
                   Domain dom = detail::centered_ball(p, 4, 0.1);
                   const Vector c = Vector::Constant(dom.dimension(), 0.02);
                   return std::unique_ptr<Environment>(make_sea_quadratic(
                       dom, T, p.lambda.value_or(1.0), c, p.sigma2.value_or(0.005), 0.02,
                       p.drift.value_or(0.01), seed));
                 },
                 nullptr});
    s.push_back({"game-honest", "bilinear game, both players run the ensemble", 2048, true,
                 nullptr,
                 [](const ScenarioParams& p, std::uint64_t seed) {
                   const int d = p.dimension.value_or(3);
                   const double r = p.radius.value_or(0.05);
                   return BilinearGame(detail::normalized_payoff(d, seed),
                                       Domain::ball(Vector::Constant(d, 0.02), r),
                                       Domain::ball(Vector::Constant(d, -0.02), r),
                                       p.lambda.value_or(0.0));
                 },
                 false});
    s.push_back({"game-dishonest", "bilinear game against a random boundary opponent", 2048,
                 true, nullptr,
                 [](const ScenarioParams& p, std::uint64_t seed) {
                   const int d = p.dimension.value_or(3);
                   const double r = p.radius.value_or(0.05);
                   return BilinearGame(detail::normalized_payoff(d, seed),
                                       Domain::ball(Vector::Zero(d), r),
                                       Domain::ball(Vector::Zero(d), r), p.lambda.value_or(0.0));
                 },
                 true});
    return s;
  }();
  return all;
}

inline const Scenario& find_scenario(const std::string& name) {
  for (const auto& s : scenarios()) {
    if (s.name == name) return s;
  }
  throw ConfigError("unknown scenario '" + name + "' (try 'list')");
}

inline std::string list_scenarios() {
  std::ostringstream os;
  for (const auto& s : scenarios()) os << s.name << "\t" << s.summary << "\n";
  return os.str();
}

/// Declared bounds: the environment's own, optionally widened by the config.
inline BoundsBundle declared_bounds(const BoundsBundle& env, const ScenarioParams& p) {
  const double G = p.G.value_or(env.G);
  const double L = p.L.value_or(env.L);
  BoundsBundle b = BoundsBundle::make(env.D, G, L);
  if (G < env.G * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "config: declared G = " << G << " is below the environment's gradient bound " << env.G;
    throw ConfigError(os.str());
  }
  if (L < env.L * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "config: declared L = " << L << " is below the environment's smoothness " << env.L;
    throw ConfigError(os.str());
  }
  return b;
}

/// Diagnostics; throws ConfigError on the first problem.
inline void validate(const ExperimentConfig& cfg) {
  const Scenario& sc = find_scenario(cfg.scenario);
  if (cfg.seeds.empty()) throw ConfigError("config: 'seed' list is empty");
  if (cfg.horizons.empty()) throw ConfigError("config: 'T' list is empty");
  for (long T : cfg.horizons) {
    if (!is_power_of_two(T)) {
      throw ConfigError("config: field 'T' must hold powers of two, got " + std::to_string(T));
    }
  }
  if (cfg.params.G && !(*cfg.params.G > 0.0)) {
    BoundsBundle::make(1.0, *cfg.params.G, 1.0);  // throws the degenerate-bounds error
  }
  if (cfg.params.L && !(*cfg.params.L > 0.0)) BoundsBundle::make(1.0, 1.0, *cfg.params.L);
  // Build the smallest instance to check the declared bounds against the environment.
  if (sc.game) {
    const BilinearGame g = sc.build_game(cfg.params, cfg.seeds.front());
    declared_bounds(g.x_bounds(), cfg.params);
  } else {
    const auto env = sc.build(cfg.params, 2, cfg.seeds.front());
    declared_bounds(env->bounds(), cfg.params);
  }
}

// ---------------------------------------------------------------------------
// Running

struct InvariantReport {
  long rounds = 0;
  double max_rescaled = 0.0;
  double max_identity_gap = 0.0;
  double max_shift_gap = 0.0;
  double max_simplex_error = 0.0;
  double max_infeasibility = 0.0;
  long gradient_bound_warnings = 0;

  void absorb(const RoundTelemetry& t) {
    ++rounds;
    max_rescaled = std::max(max_rescaled, t.max_rescaled);
    max_identity_gap = std::max(max_identity_gap, t.identity_gap);
    max_shift_gap = std::max(max_shift_gap, t.shift_gap);
    max_simplex_error = std::max(max_simplex_error, t.simplex_error);
    max_infeasibility = std::max(max_infeasibility, t.infeasibility);
    if (t.gradient_bound_exceeded) ++gradient_bound_warnings;
  }
  void merge(const InvariantReport& o) {
    rounds += o.rounds;
    max_rescaled = std::max(max_rescaled, o.max_rescaled);
    max_identity_gap = std::max(max_identity_gap, o.max_identity_gap);
    max_shift_gap = std::max(max_shift_gap, o.max_shift_gap);
    max_simplex_error = std::max(max_simplex_error, o.max_simplex_error);
    max_infeasibility = std::max(max_infeasibility, o.max_infeasibility);
    gradient_bound_warnings += o.gradient_bound_warnings;
  }
  bool all_green() const {
    return max_rescaled <= 1.0 + 1e-12 && max_identity_gap <= 1e-9 && max_shift_gap <= 1e-9 &&
           max_simplex_error <= 1e-10 && max_infeasibility <= tol::kFeasibility;
  }
};

struct RunResult {
  std::vector<RoundRecord> records;
  std::vector<Vector> decisions;
  double regret = 0.0;
  double comparator_loss = 0.0;
  VariationTotal variation;
  long gradient_queries = 0;
  InvariantReport invariants;
};

/// Plays the ensemble against one environment for its full horizon.
inline RunResult run_environment(const Environment& env, FeedbackMode mode = FeedbackMode::OneGradient,
                                 Fidelity fidelity = Fidelity::Shared,
                                 std::optional<BoundsBundle> bounds = std::nullopt,
                                 bool keep_decisions = false) {
  const BoundsBundle b = bounds.value_or(env.bounds());
  UniversalEnsemble ens(EnsembleConfig::make(env.horizon(), env.domain(), b, mode, fidelity));
  RunResult res;
  RunRecorder rec;
  for (long t = 1; t <= env.horizon(); ++t) {
    const Vector x = ens.predict();
    const Vector g = env.gradient(t, x);
    const double f = env.value(t, x);
    const RoundTelemetry tel =
        ens.update(g, f, [&](const Vector& z) { return env.gradient(t, z); });
    rec.record(f, g, env.sup_variation(t).value, tel);
    res.invariants.absorb(tel);
    if (keep_decisions) res.decisions.push_back(x);
  }
  const Vector xs = env.comparator();
  attach_regret(rec.records(), env, xs);
  res.records = std::move(rec.records());
  res.regret = res.records.back().cum_regret;
  res.comparator_loss = res.records.back().cum_loss - res.regret;
  res.variation = env.exact_VT();
  res.gradient_queries = ens.gradient_queries();
  return res;
}

struct GameResult {
  RunResult x, y;           // y is from the maximizer's perspective
  double regret_sum = 0.0;  // x.regret + y.regret (y empty of records when dishonest)
  bool honest = true;
};

inline RunResult summarize_player(const PlayerView& view, const std::vector<Vector>& plays,
                                  const std::vector<Vector>& grads,
                                  const std::vector<RoundTelemetry>& tel) {
  RunResult res;
  RunRecorder rec;
  for (long t = 1; t <= view.horizon(); ++t) {
    const double f = view.value(t, plays[t - 1]);
    rec.record(f, grads[t - 1], view.sup_variation(t).value, tel[t - 1]);
    res.invariants.absorb(tel[t - 1]);
  }
  attach_regret(rec.records(), view, view.comparator());
  res.records = std::move(rec.records());
  res.regret = res.records.back().cum_regret;
  res.comparator_loss = res.records.back().cum_loss - res.regret;
  res.variation = view.exact_VT();
  res.gradient_queries = tel.back().gradient_queries;
  res.decisions = plays;
  return res;
}

inline GameResult run_game(const BilinearGame& game, long T, FeedbackMode mode, Fidelity fidelity,
                           const OpponentStrategy& opponent = nullptr) {
  GameTrace tr = play_game(game, T, mode, fidelity, opponent);
  GameResult res;
  res.honest = !opponent;
  const PlayerView xv(game, PlayerRole::Minimizer, tr.ys);
  res.x = summarize_player(xv, tr.xs, tr.x_gradients, tr.x_telemetry);
  if (res.honest) {
    const PlayerView yv(game, PlayerRole::Maximizer, tr.xs);
    res.y = summarize_player(yv, tr.ys, tr.y_gradients, tr.y_telemetry);
    res.regret_sum = res.x.regret + res.y.regret;
  } else {
    // The opponent's regret is still well-defined; report it without telemetry.
    const PlayerView yv(game, PlayerRole::Maximizer, tr.xs);
    double loss = 0.0;
    for (long t = 1; t <= T; ++t) loss += yv.value(t, tr.ys[t - 1]);
    const Vector ys = yv.comparator();
    double comp = 0.0;
    for (long t = 1; t <= T; ++t) comp += yv.value(t, ys);
    res.y.regret = loss - comp;
    res.regret_sum = res.x.regret + res.y.regret;
  }
  return res;
}

inline std::string run_file_name(const std::string& scenario, long T, std::uint64_t seed,
                                 const std::string& suffix = "") {
  std::ostringstream os;
  os << scenario << "_T" << T << "_seed" << seed << suffix << ".csv";
  return os.str();
}

inline void write_records(const std::filesystem::path& path, const std::vector<RoundRecord>& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_csv(out, r);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

struct ExperimentOutcome {
  std::vector<std::string> files;
  std::string summary;
  InvariantReport invariants;
};

/// Runs every (T, seed) pair, writes one CSV per run (two per honest game) and
/// summary.txt with the scaling table of seed-averaged regret.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const Scenario& sc = find_scenario(cfg.scenario);
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  const std::filesystem::path dir(cfg.out_dir);

  ExperimentOutcome out;
  std::vector<ScalingPoint> points;
  std::ostringstream runs;
  runs << "scenario," << sc.name << "\n";
  runs << "mode," << (cfg.mode == FeedbackMode::OneGradient ? "one-grad" : "multi-grad") << "\n";
  runs << "fidelity," << (cfg.fidelity == Fidelity::Shared ? "shared" : "full") << "\n";
  runs << "T,seed,regret,regret_sum,V_T,V_T_exact,grad_queries,bound_warnings\n";
  std::vector<long> horizons = cfg.horizons;
  std::sort(horizons.begin(), horizons.end());
  for (long T : horizons) {
    double mean = 0.0, mean_v = 0.0;
    for (std::uint64_t seed : cfg.seeds) {
      double regret = 0.0, regret_sum = 0.0;
      VariationTotal v;
      long queries = 0;
      InvariantReport inv;
      if (sc.game) {
        const BilinearGame game = sc.build_game(cfg.params, seed);
        OpponentStrategy opp;
        if (sc.dishonest) opp = random_boundary_opponent(game.y_domain(), seed + 1000003u);
        const GameResult g = run_game(game, T, cfg.mode, cfg.fidelity, opp);
        const auto fx = run_file_name(sc.name, T, seed, "_x");
        write_records(dir / fx, g.x.records);
        out.files.push_back(fx);
        if (g.honest) {
          const auto fy = run_file_name(sc.name, T, seed, "_y");
          write_records(dir / fy, g.y.records);
          out.files.push_back(fy);
          inv.merge(g.y.invariants);
        }
        inv.merge(g.x.invariants);
        regret = g.honest ? g.regret_sum : g.x.regret;
        regret_sum = g.regret_sum;
        v = g.x.variation;
        queries = g.x.gradient_queries;
      } else {
        const auto env = sc.build(cfg.params, T, seed);
        const BoundsBundle b = declared_bounds(env->bounds(), cfg.params);
        const RunResult r = run_environment(*env, cfg.mode, cfg.fidelity, b);
        const auto f = run_file_name(sc.name, T, seed);
        write_records(dir / f, r.records);
        out.files.push_back(f);
        inv = r.invariants;
        regret = r.regret;
        regret_sum = r.regret;
        v = r.variation;
        queries = r.gradient_queries;
      }
      if (!inv.all_green()) throw ConsistencyError("invariant audit failed for " + sc.name);
      out.invariants.merge(inv);
      runs << T << ',' << seed << ',' << format_number(regret) << ','
           << format_number(regret_sum) << ',' << format_number(v.value) << ','
           << (v.exact ? "exact" : "approximate") << ',' << queries << ','
           << inv.gradient_bound_warnings << "\n";
      mean += regret / static_cast<double>(cfg.seeds.size());
      mean_v += v.value / static_cast<double>(cfg.seeds.size());
    }
    points.push_back({T, mean, mean_v});
  }
  std::ostringstream summary;
  summary << runs.str() << "\n";
  bool doubling = true;
  for (std::size_t i = 1; i < points.size(); ++i) doubling = doubling && points[i].T == 2 * points[i - 1].T;
  if (doubling) {
    summary << (sc.game && !sc.dishonest ? "# seed-averaged regret sum\n"
                                         : "# seed-averaged regret\n");
    summary << scaling_summary(points).table();
  } else {
    summary << "# horizons do not double; ratio table skipped\n";
  }
  out.summary = summary.str();
  std::ofstream sf(dir / "summary.txt");
  if (!sf) throw IoError("cannot write summary.txt");
  sf << out.summary;
  return out;
}

}  // namespace uol
