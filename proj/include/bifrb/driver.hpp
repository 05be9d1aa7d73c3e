#pragma once

#include "bifrb/analysis.hpp"
#include "bifrb/greedy.hpp"
#include "bifrb/io.hpp"
#include "bifrb/pod.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace bifrb {

using nlohmann::json;

/// Everything that defines an experiment. Unset optionals take model-dependent
/// defaults in effective().
struct RunConfig {
  std::string model_kind = "chafee";
  int mesh_size = 201;
  std::optional<double> mu_min;
  std::optional<double> mu_max;
  int train_size = 51;
  int test_size = 151;
  std::string strategy = "deflated";
  int n_max = 35;
  double tol = 1e-3;
  std::string estimator_kind = "linear";
  int n_ref = 4;
  double bif_tol = 1e-2;
  double r = 2.0;
  double sigma = 1.0;
  double newton_tol = 1e-10;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::optional<double> mu0;
  bool continuation_hf = false;
  bool continuation_rb = false;
  std::optional<int> n_modes;
  bool matched_n = false;
  std::string pod_mode = "global";  ///< global | dominant-branch
  int oracle_random_guesses = 0;
  std::vector<std::string> strategies;

  RunConfig effective() const
  {
    RunConfig c = *this;
    const bool bratu = model_kind_from_string(model_kind) == ModelKind::Bratu1D;
    if (!c.mu_min) c.mu_min = bratu ? 0.5 : 5.0;
    if (!c.mu_max) c.mu_max = bratu ? 3.5 : 15.0;
    return c;
  }

  /// Throws ContractViolation with the first offending field.
  void validate() const
  {
    model_kind_from_string(model_kind);
    estimator_kind_from_string(estimator_kind);
    require(mesh_size >= 3, "mesh_size must be >= 3");
    require(train_size >= 2, "train_size must be ≥ 2");
    require(test_size >= 2, "test_size must be ≥ 2");
    require(n_max >= 1, "n_max must be ≥ 1");
    require(tol > 0.0, "tol must be > 0");
    require(n_ref >= 1, "n_ref must be ≥ 1");
    require(bif_tol > 0.0, "bif_tol must be > 0");
    require(r >= 1.0, "r must be ≥ 1");
    require(sigma > 0.0, "sigma must be > 0");
    require(newton_tol > 0.0, "newton_tol must be > 0");
    require(oracle_random_guesses >= 0, "oracle_random_guesses must be ≥ 0");
    require(pod_mode == "global" || pod_mode == "dominant-branch", "pod_mode must be global or dominant-branch");
    for (const auto& s : strategies) check_strategy(s);
    check_strategy(strategy);
    const RunConfig e = effective();
    require(*e.mu_min < *e.mu_max, "mu_min must be < mu_max");
    if (mu0) require(*mu0 >= *e.mu_min && *mu0 <= *e.mu_max, "mu0 must lie in [mu_min, mu_max]");
    if (n_modes) require(*n_modes >= 0, "n_modes must be ≥ 0");
    if (strategy == "pod") require(n_modes.has_value(), "strategy pod requires n_modes");
  }

  static void check_strategy(const std::string& s)
  {
    require(s == "vanilla" || s == "adaptive" || s == "deflated" || s == "pod",
            "strategy must be one of vanilla, adaptive, deflated, pod (got '" + s + "')");
  }

  NewtonConfig newton() const
  {
    NewtonConfig n;
    n.tol = newton_tol;
    return n;
  }

  GreedyConfig greedy() const
  {
    GreedyConfig g;
    g.n_max = n_max;
    g.tol = tol;
    g.mu0 = mu0;
    g.estimator_kind = estimator_kind_from_string(estimator_kind);
    g.continuation_hf = continuation_hf;
    g.continuation_rb = continuation_rb;
    g.newton = newton();
    g.power = r;
    g.shift = sigma;
    return g;
  }

  DiagramConfig diagram() const
  {
    DiagramConfig d;
    d.newton = newton();
    d.power = r;
    d.shift = sigma;
    d.random_guesses = oracle_random_guesses;
    d.seed = seed;
    return d;
  }

  ErrorSweepConfig sweep() const
  {
    ErrorSweepConfig s;
    s.newton = newton();
    s.power = r;
    s.shift = sigma;
    s.estimator_kind = estimator_kind_from_string(estimator_kind);
    return s;
  }
};

inline void to_json(json& j, const RunConfig& c)
{
  j = json{{"model_kind", c.model_kind},
           {"mesh_size", c.mesh_size},
           {"train_size", c.train_size},
           {"test_size", c.test_size},
           {"strategy", c.strategy},
           {"n_max", c.n_max},
           {"tol", c.tol},
           {"estimator_kind", c.estimator_kind},
           {"n_ref", c.n_ref},
           {"bif_tol", c.bif_tol},
           {"r", c.r},
           {"sigma", c.sigma},
           {"newton_tol", c.newton_tol},
           {"seed", c.seed},
           {"out_dir", c.out_dir},
           {"continuation_hf", c.continuation_hf},
           {"continuation_rb", c.continuation_rb},
           {"matched_n", c.matched_n},
           {"pod_mode", c.pod_mode},
           {"oracle_random_guesses", c.oracle_random_guesses},
           {"strategies", c.strategies}};
  auto opt = [&](const char* k, const auto& v) { j[k] = v ? json(*v) : json(nullptr); };
  opt("mu_min", c.mu_min);
  opt("mu_max", c.mu_max);
  opt("mu0", c.mu0);
  opt("n_modes", c.n_modes);
}

/// Fields absent from `j` keep their current values; unknown keys are rejected.
inline void from_json(const json& j, RunConfig& c)
{
  require(j.is_object(), "config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    auto get = [&](auto& field) {
      try {
        v.get_to(field);
      } catch (const json::exception&) {
        throw ContractViolation("config field '" + k + "' has the wrong type");
      }
    };
    auto get_opt = [&](auto& field) {
      if (v.is_null()) {
        field.reset();
      } else {
        typename std::remove_reference_t<decltype(field)>::value_type x{};
        get(x);
        field = x;
      }
    };
    if (k == "model_kind") get(c.model_kind);
    else if (k == "mesh_size") get(c.mesh_size);
    else if (k == "mu_min") get_opt(c.mu_min);
    else if (k == "mu_max") get_opt(c.mu_max);
    else if (k == "train_size") get(c.train_size);
    else if (k == "test_size") get(c.test_size);
    else if (k == "strategy") get(c.strategy);
    else if (k == "n_max") get(c.n_max);
    else if (k == "tol") get(c.tol);
    else if (k == "estimator_kind") get(c.estimator_kind);
    else if (k == "n_ref") get(c.n_ref);
    else if (k == "bif_tol") get(c.bif_tol);
    else if (k == "r") get(c.r);
    else if (k == "sigma") get(c.sigma);
    else if (k == "newton_tol") get(c.newton_tol);
    else if (k == "seed") get(c.seed);
    else if (k == "out_dir") get(c.out_dir);
    else if (k == "mu0") get_opt(c.mu0);
    else if (k == "continuation_hf") get(c.continuation_hf);
    else if (k == "continuation_rb") get(c.continuation_rb);
    else if (k == "n_modes") get_opt(c.n_modes);
    else if (k == "matched_n") get(c.matched_n);
    else if (k == "pod_mode") get(c.pod_mode);
    else if (k == "oracle_random_guesses") get(c.oracle_random_guesses);
    else if (k == "strategies") get(c.strategies);
    else throw ContractViolation("unknown config field '" + k + "'");
  }
}

namespace driver {

namespace fs = std::filesystem;

inline constexpr const char* kOutDirEnv = "BIFRB_OUT_DIR";

struct Built {
  BasisMatrix basis;
  std::optional<GreedyResult> greedy;
  std::vector<std::string> warnings;
};

inline ParameterSpace train_space(const RunConfig& c)
{
  return ParameterSpace::equispaced(*c.mu_min, *c.mu_max, c.train_size);
}

inline std::vector<double> test_grid(const RunConfig& c)
{
  return ParameterSpace::equispaced(*c.mu_min, *c.mu_max, c.test_size).train_points();
}

inline Built build_pod(const FiniteElement1D& model, const RunConfig& c, int n_modes,
                       const BifurcationDiagram& train_oracle)
{
  Built b{BasisMatrix(model), std::nullopt, {}};
  SnapshotMatrix snaps = train_oracle.snapshots();
  if (c.pod_mode == "dominant-branch") snaps = train_oracle.snapshots(train_oracle.dominant_branch());
  const int n = std::min<int>(n_modes, static_cast<int>(snaps.size()));
  if (n < n_modes) b.warnings.push_back("only " + std::to_string(snaps.size()) + " snapshots for the requested modes");
  PodResult p = pod_basis(snaps, model, n);
  if (!p.warning.empty()) b.warnings.push_back(p.warning);
  b.basis = std::move(p.basis);
  return b;
}

inline Built build_strategy(const FiniteElement1D& model, const RunConfig& c, const std::string& strategy,
                            std::optional<int> pod_modes, const BifurcationDiagram* train_oracle)
{
  const ParameterSpace p = train_space(c);
  const GreedyConfig g = c.greedy();
  if (strategy == "pod") {
    require(pod_modes && train_oracle, "pod needs n_modes and a training oracle");
    return build_pod(model, c, *pod_modes, *train_oracle);
  }
  GreedyResult res = strategy == "vanilla"    ? vanilla_greedy(model, p, g)
                     : strategy == "adaptive" ? adaptive_greedy(model, p, g, AdaptiveConfig{c.n_ref, c.bif_tol})
                                              : deflated_greedy(model, p, g);
  Built b{res.basis, std::move(res), {}};
  return b;
}

inline int exit_code(GreedyStatus s) { return s == GreedyStatus::ToleranceMet ? 0 : 2; }

inline json manifest(const RunConfig& c)
{
  json j = c;
  j["mu_min"] = *c.mu_min;
  j["mu_max"] = *c.mu_max;
  return j;
}

/// `run`: build the basis with the chosen strategy and write every artifact.
inline int run(RunConfig cfg, std::ostream& err = std::cerr)
{
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  }
  const RunConfig c = cfg.effective();
  const fs::path out = c.out_dir;
  const FiniteElement1D model(model_kind_from_string(c.model_kind), c.mesh_size);
  json report{{"config", manifest(c)}};
  try {
    std::optional<BifurcationDiagram> train_oracle;
    if (c.strategy == "pod") train_oracle = bifurcation_diagram(model, train_space(c).train_points(), c.diagram());
    Built b = build_strategy(model, c, c.strategy, c.n_modes, train_oracle ? &*train_oracle : nullptr);
    int code = 0;
    std::vector<double> train = train_space(c).train_points();
    if (b.greedy) {
      const auto& g = *b.greedy;
      report["greedy"] = io::to_json(g.report);
      for (std::size_t k = 0; k < g.sweeps.size(); ++k) {
        io::write_estimators(out / ("estimators_iter_" + std::to_string(k + 1) + ".csv"), g.sweeps[k]);
      }
      train = g.report.final_train;
      code = exit_code(g.report.status);
    }
    report["basis_size"] = b.basis.size();
    report["orthonormality_error"] = b.basis.orthonormality_error();
    report["warnings"] = b.warnings;
    io::write_basis(out, b.basis, model.kind(), model.mesh_size(), train);

    const BifurcationDiagram oracle = bifurcation_diagram(model, test_grid(c), c.diagram());
    io::write_diagram(out / "diagram.csv", oracle);
    const ErrorSweep sweep = error_sweep(b.basis, oracle, c.sweep());
    io::write_errors(out / "errors.csv", sweep);
    report["errors"] = {{"max", sweep.max_error()},
                        {"max_unflagged", sweep.max_error(true)},
                        {"avg", sweep.avg_error()},
                        {"flagged_rows", sweep.flagged_count()}};
    report["exit_code"] = code;
    io::write_json(out / "report.json", report);
    return code;
  } catch (const std::exception& e) {
    report["failure"] = e.what();
    report["exit_code"] = 2;
    io::write_json(out / "report.json", report);
    err << "run aborted: " << e.what() << '\n';
    return 2;
  }
}

/// `compare`: shared oracle, one basis per strategy, error-vs-N table.
inline int compare(RunConfig cfg, std::ostream& os = std::cout, std::ostream& err = std::cerr)
{
  try {
    cfg.validate();
    require(cfg.strategies.size() >= 2, "compare needs at least 2 strategies");
    const bool has_pod = std::ranges::find(cfg.strategies, "pod") != cfg.strategies.end();
    if (has_pod) require(cfg.n_modes || cfg.matched_n, "compare with pod requires n_modes or matched_n");
    if (has_pod && !cfg.n_modes) {
      require(std::ranges::any_of(cfg.strategies, [](const auto& s) { return s != "pod"; }),
              "matched_n needs a greedy strategy");
    }
  } catch (const ContractViolation& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  }
  const RunConfig c = cfg.effective();
  const fs::path out = c.out_dir;
  const FiniteElement1D model(model_kind_from_string(c.model_kind), c.mesh_size);
  try {
    const BifurcationDiagram oracle = bifurcation_diagram(model, test_grid(c), c.diagram());
    std::optional<BifurcationDiagram> train_oracle;
    std::vector<std::pair<std::string, Built>> built;
    Eigen::Index matched = 0;
    for (const auto& s : c.strategies) {
      if (s == "pod") continue;
      built.emplace_back(s, build_strategy(model, c, s, std::nullopt, nullptr));
      if (s == "deflated" || matched == 0) matched = built.back().second.basis.size();
    }
    for (const auto& s : c.strategies) {
      if (s != "pod") continue;
      if (!train_oracle) train_oracle = bifurcation_diagram(model, train_space(c).train_points(), c.diagram());
      const int n = c.n_modes ? *c.n_modes : static_cast<int>(matched);
      built.emplace_back(s, build_strategy(model, c, s, n, &*train_oracle));
    }
    std::vector<ErrorVsNRow> table;
    json summary = json::array();
    os << std::left << std::setw(10) << "strategy" << std::setw(6) << "N" << std::setw(26) << "max_error"
       << std::setw(26) << "avg_error" << "flagged\n";
    for (const auto& [name, b] : built) {
      std::vector<Eigen::Index> ns;
      for (Eigen::Index n = 1; n <= b.basis.size(); ++n) ns.push_back(n);
      if (ns.empty()) ns.push_back(0);
      auto rows = error_vs_n(name, b.basis, oracle, ns, c.sweep());
      const auto& last = rows.back();
      os << std::setw(10) << name << std::setw(6) << last.n << std::setw(26) << io::fmt(last.max_error)
         << std::setw(26) << io::fmt(last.avg_error) << last.flagged << '\n';
      summary.push_back({{"strategy", name},
                         {"N", last.n},
                         {"max_error", last.max_error},
                         {"avg_error", last.avg_error},
                         {"warnings", b.warnings}});
      table.insert(table.end(), rows.begin(), rows.end());
    }
    io::write_error_vs_n(out / "error_vs_n.csv", table);
    io::write_json(out / "report.json", {{"config", manifest(c)}, {"summary", summary}});
    return 0;
  } catch (const std::exception& e) {
    err << "compare aborted: " << e.what() << '\n';
    return 2;
  }
}

/// `diagram`: full-order bifurcation diagram on the test grid.
inline int diagram(RunConfig cfg, std::ostream& err = std::cerr)
{
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  }
  const RunConfig c = cfg.effective();
  const FiniteElement1D model(model_kind_from_string(c.model_kind), c.mesh_size);
  const BifurcationDiagram d = bifurcation_diagram(model, test_grid(c), c.diagram());
  io::write_diagram(fs::path(c.out_dir) / "diagram.csv", d);
  io::write_json(fs::path(c.out_dir) / "report.json",
                 {{"config", manifest(c)}, {"branches", d.n_branches}, {"gaps", d.gaps}});
  return 0;
}

/// `error-sweep`: errors of a stored basis against the test-grid oracle.
inline int error_sweep_cmd(RunConfig cfg, const std::string& basis_dir, std::ostream& err = std::cerr)
{
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  }
  const RunConfig c = cfg.effective();
  const FiniteElement1D model(model_kind_from_string(c.model_kind), c.mesh_size);
  try {
    const auto loaded = io::load_basis(basis_dir, model);
    const BifurcationDiagram oracle = bifurcation_diagram(model, test_grid(c), c.diagram());
    const ErrorSweep s = error_sweep(loaded.basis, oracle, c.sweep());
    io::write_errors(fs::path(c.out_dir) / "errors.csv", s);
    return 0;
  } catch (const std::exception& e) {
    err << "error-sweep aborted: " << e.what() << '\n';
    return dynamic_cast<const ContractViolation*>(&e) ? 1 : 2;
  }
}

inline void apply_env(RunConfig& c)
{
  if (const char* v = std::getenv(kOutDirEnv); v && *v) c.out_dir = v;
}

}  // namespace driver
}  // namespace bifrb
