// Command-line driver: run / compare / diagram / error-sweep.
#include "bifrb/driver.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using bifrb::RunConfig;

// Registers a flag per RunConfig field; values land in `flags` and are
// applied on top of the config file, so flags win.
struct FlagSet {
  RunConfig v;
  std::vector<std::function<void(RunConfig&)>> apply;

  template <class T>
  void add(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help)
  {
    auto* opt = app->add_option(name, v.*field, help);
    if constexpr (std::is_same_v<T, std::vector<std::string>>) opt->delimiter(',');
    apply.push_back([this, opt, field](RunConfig& c) {
      if (opt->count()) c.*field = v.*field;
    });
  }

  template <class T>
  void add_opt(CLI::App* app, const std::string& name, std::optional<T> RunConfig::*field, const std::string& help)
  {
    auto holder = std::make_shared<T>();
    auto* opt = app->add_option(name, *holder, help);
    apply.push_back([opt, field, holder](RunConfig& c) {
      if (opt->count()) c.*field = *holder;
    });
  }

  void add_bool(CLI::App* app, const std::string& name, bool RunConfig::*field, const std::string& help)
  {
    auto* opt = app->add_flag(name, v.*field, help);
    apply.push_back([this, opt, field](RunConfig& c) {
      if (opt->count()) c.*field = v.*field;
    });
  }
};

void register_flags(CLI::App* app, FlagSet& f)
{
  f.add(app, "--model", &RunConfig::model_kind, "bratu | chafee");
  f.add(app, "--mesh", &RunConfig::mesh_size, "interior mesh nodes");
  f.add_opt(app, "--mu-min", &RunConfig::mu_min, "lower parameter bound");
  f.add_opt(app, "--mu-max", &RunConfig::mu_max, "upper parameter bound");
  f.add(app, "--train", &RunConfig::train_size, "training grid size");
  f.add(app, "--test", &RunConfig::test_size, "test grid size");
  f.add(app, "--strategy", &RunConfig::strategy, "vanilla | adaptive | deflated | pod");
  f.add(app, "--nmax", &RunConfig::n_max, "maximum basis size");
  f.add(app, "--tol", &RunConfig::tol, "greedy tolerance");
  f.add(app, "--estimator", &RunConfig::estimator_kind, "linear | nonlinear | auto");
  f.add(app, "--n-ref", &RunConfig::n_ref, "points inserted per refinement");
  f.add(app, "--bif-tol", &RunConfig::bif_tol, "refinement trigger distance");
  f.add(app, "--r", &RunConfig::r, "deflation power");
  f.add(app, "--sigma", &RunConfig::sigma, "deflation shift");
  f.add(app, "--newton-tol", &RunConfig::newton_tol, "Newton residual tolerance");
  f.add(app, "--seed", &RunConfig::seed, "seed for all randomness");
  f.add(app, "--out", &RunConfig::out_dir, "artifact directory");
  f.add_opt(app, "--mu0", &RunConfig::mu0, "initial greedy parameter");
  f.add_bool(app, "--continuation-hf", &RunConfig::continuation_hf, "full-order guess from the lifted reduced solution");
  f.add_bool(app, "--continuation-rb", &RunConfig::continuation_rb, "reduced continuation in estimator sweeps");
  f.add_opt(app, "--n-modes", &RunConfig::n_modes, "POD modes");
  f.add_bool(app, "--matched-n", &RunConfig::matched_n, "POD modes = deflated-greedy basis size");
  f.add(app, "--pod-mode", &RunConfig::pod_mode, "global | dominant-branch");
  f.add(app, "--oracle-random-guesses", &RunConfig::oracle_random_guesses, "random guesses per oracle parameter");
  f.add(app, "--strategies", &RunConfig::strategies, "strategies for compare");
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Reduced bases for bifurcating parametric problems"};
  app.require_subcommand(1);
  std::string config_path;
  std::string basis_dir;
  app.add_option("--config", config_path, "JSON config file (flags override it)");

  FlagSet flags;
  auto* run = app.add_subcommand("run", "build a basis and write all artifacts");
  auto* cmp = app.add_subcommand("compare", "compare strategies by error vs N");
  auto* dia = app.add_subcommand("diagram", "full-order bifurcation diagram");
  auto* err = app.add_subcommand("error-sweep", "errors of a stored basis");
  err->add_option("--basis", basis_dir, "directory with basis.csv and basis.json")->required();
  for (auto* sub : {run, cmp, dia, err}) {
    sub->add_option("--config", config_path, "JSON config file (flags override it)");
    sub->fallthrough();
  }
  FlagSet* fs_ptr = &flags;
  for (auto* sub : {run, cmp, dia, err}) register_flags(sub, *fs_ptr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  RunConfig cfg;
  if (!config_path.empty()) {
    try {
      std::ifstream f(config_path);
      if (!f) throw std::runtime_error("cannot open config '" + config_path + "'");
      nlohmann::json j = nlohmann::json::parse(f);
      bifrb::from_json(j, cfg);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 1;
    }
  }
  for (auto& a : flags.apply) a(cfg);
  bifrb::driver::apply_env(cfg);

  try {
    if (run->parsed()) return bifrb::driver::run(cfg);
    if (cmp->parsed()) return bifrb::driver::compare(cfg);
    if (dia->parsed()) return bifrb::driver::diagram(cfg);
    return bifrb::driver::error_sweep_cmd(cfg, basis_dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
}
