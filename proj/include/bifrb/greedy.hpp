#pragma once

#include "bifrb/estimators.hpp"
#include "bifrb/model.hpp"
#include "bifrb/nlsolve.hpp"
#include "bifrb/rom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bifrb {

struct GreedyConfig {
  int n_max = 35;
  double tol = 1e-3;
  std::optional<double> mu0;  ///< defaults to the upper end of the parameter range
  EstimatorKind estimator_kind = EstimatorKind::Linear;
  bool continuation_hf = false;
  bool continuation_rb = false;
  NewtonConfig newton;
  double power = 2.0;
  double shift = 1.0;

  void validate(const ParameterSpace& p) const
  {
    require(n_max >= 1, "GreedyConfig: n_max must be >= 1");
    require(tol > 0.0, "GreedyConfig: tol must be > 0");
    require(power >= 1.0, "GreedyConfig: r must be >= 1");
    require(shift > 0.0, "GreedyConfig: sigma must be > 0");
    newton.validate();
    require(p.contains_point(initial_parameter(p)), "GreedyConfig: mu0 must be a training point");
  }

  double initial_parameter(const ParameterSpace& p) const { return mu0.value_or(p.upper()); }
};

struct AdaptiveConfig {
  int n_ref = 4;
  double bif_tol = 1e-2;

  void validate() const
  {
    require(n_ref >= 1, "AdaptiveConfig: n_ref must be >= 1");
    require(bif_tol > 0.0, "AdaptiveConfig: bif_tol must be > 0");
  }
};

enum class GreedyStatus { ToleranceMet, NMaxReached, Stagnation, Aborted };

inline std::string_view to_string(GreedyStatus s)
{
  switch (s) {
    case GreedyStatus::ToleranceMet: return "tolerance-met";
    case GreedyStatus::NMaxReached: return "nmax-reached";
    case GreedyStatus::Stagnation: return "stagnation";
    case GreedyStatus::Aborted: return "aborted";
  }
  return "unknown";
}

struct GreedyIteration {
  int iteration = 0;
  double mu = 0.0;
  int branch = 0;
  double estimator_max = 0.0;   ///< max valid delta of the sweep that selected mu
  Eigen::Index basis_size = 0;  ///< after enrichment
  double orthonormality_error = 0.0;
  int added = 0;                ///< basis vectors added this iteration
  bool reselected = false;      ///< a higher-ranked candidate gave no new vector
  std::size_t train_size = 0;
  std::optional<double> mu_bif;
  bool refined = false;
  std::vector<std::string> notes;
};

struct GreedyReport {
  std::string strategy;
  double mu0 = 0.0;
  GreedyStatus status = GreedyStatus::Aborted;
  std::vector<GreedyIteration> iterations;
  double final_max_delta = std::numeric_limits<double>::infinity();
  std::optional<double> mu_star;
  std::vector<double> final_train;
  std::vector<std::string> notes;
};

/// A full-order root used as a snapshot, before orthonormalisation.
struct Snapshot {
  double mu = 0.0;
  Vector state;
  EnrichStatus status = EnrichStatus::Enriched;
};

struct GreedyResult {
  BasisMatrix basis;
  GreedyReport report;
  std::vector<EstimatorSet> sweeps;  ///< one per estimator evaluation, in order
  std::vector<Snapshot> snapshots;
};

namespace detail {

/// Valid entries sorted by decreasing delta; ties go to the parameter farther
/// from already-sampled values, then to the smaller parameter.
inline std::vector<const EstimatorEntry*> ranked_candidates(const EstimatorSet& set, const std::vector<double>& sampled)
{
  std::vector<const EstimatorEntry*> c;
  for (const auto& e : set.entries) {
    if (e.valid && std::isfinite(e.delta)) c.push_back(&e);
  }
  auto dist = [&](double mu) {
    double d = std::numeric_limits<double>::infinity();
    for (double s : sampled) d = std::min(d, std::abs(mu - s));
    return d;
  };
  std::ranges::stable_sort(c, [&](const EstimatorEntry* a, const EstimatorEntry* b) {
    if (a->delta != b->delta) return a->delta > b->delta;
    const double da = dist(a->mu), db = dist(b->mu);
    if (da != db) return da > db;
    if (a->mu != b->mu) return a->mu < b->mu;
    return a->branch < b->branch;
  });
  return c;
}

/// One reduced solve per parameter (no deflation), from the projected default
/// guess or, with continuation, from the previous parameter's solution.
inline EstimatorSet single_branch_sweep(const BasisMatrix& b, const std::vector<double>& mus, const GreedyConfig& cfg)
{
  EstimatorSet out;
  const Vector seed = b.project(b.model().default_guess());
  std::optional<Vector> previous;
  for (double mu : mus) {
    const Vector guess = (cfg.continuation_rb && previous) ? *previous : seed;
    auto res = reduced_newton(b, mu, guess, cfg.newton);
    if (!res.converged()) {
      out.failed_mu.push_back(mu);
      continue;
    }
    out.entries.push_back(make_entry(b, mu, 0, res.solution));
    previous = res.solution;
  }
  apply_estimator_kind(out, cfg.estimator_kind);
  return out;
}

/// argmin of beta over the sweep (one value per parameter, first branch).
inline std::optional<double> argmin_beta(const EstimatorSet& set)
{
  std::optional<double> best_mu;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : set.entries) {
    if (e.branch != 0) continue;
    if (e.detail.beta < best) {
      best = e.detail.beta;
      best_mu = e.mu;
    }
  }
  return best_mu;
}

inline bool initialise(const ParametricModel& model, const ParameterSpace& p, const GreedyConfig& cfg,
                       GreedyResult& out)
{
  const double mu0 = cfg.initial_parameter(p);
  out.report.mu0 = mu0;
  auto res = newton(model, mu0, model.default_guess(), cfg.newton);
  if (!res.converged()) {
    out.report.notes.push_back("initial full-order solve failed at mu0: " + std::string(to_string(res.status)));
    out.report.status = GreedyStatus::Aborted;
    return false;
  }
  const auto st = out.basis.enrich(res.solution);
  out.snapshots.push_back({mu0, res.solution, st});
  if (st != EnrichStatus::Enriched) {
    out.report.notes.push_back("initial snapshot rejected: " + std::string(to_string(st)));
    out.report.status = GreedyStatus::Aborted;
    return false;
  }
  return true;
}

inline std::vector<double> sampled_parameters(const GreedyResult& r)
{
  std::vector<double> s;
  for (const auto& snap : r.snapshots) s.push_back(snap.mu);
  return s;
}

/// Tries candidates in rank order until one full-order snapshot enriches the basis.
inline bool enrich_single(const ParametricModel& model, const EstimatorSet& sweep, const GreedyConfig& cfg,
                          GreedyResult& out, GreedyIteration& it)
{
  const auto cands = ranked_candidates(sweep, sampled_parameters(out));
  for (const EstimatorEntry* c : cands) {
    const Vector guess = cfg.continuation_hf ? out.basis.lift(c->reduced_solution) : model.default_guess();
    auto res = newton(model, c->mu, guess, cfg.newton);
    if (!res.converged()) {
      it.notes.push_back("full-order solve failed at mu=" + std::to_string(c->mu) + " (" +
                         std::string(to_string(res.status)) + ")");
      it.reselected = true;
      continue;
    }
    const auto st = out.basis.enrich(res.solution);
    out.snapshots.push_back({c->mu, res.solution, st});
    if (st == EnrichStatus::Enriched) {
      it.mu = c->mu;
      it.branch = c->branch;
      it.added = 1;
      return true;
    }
    it.notes.push_back("snapshot at mu=" + std::to_string(c->mu) + " rejected (" + std::string(to_string(st)) + ")");
    it.reselected = true;
  }
  return false;
}

}  // namespace detail

/// Inserts n_ref equispaced points strictly inside the cell around mu_bif when
/// the bifurcation guess moved by more than `tol`; endpoints refine one side.
inline ParameterSpace refinement(const ParameterSpace& p, double mu_bif, double mu_prev, int n_ref, double tol)
{
  require(n_ref >= 1, "refinement: n_ref must be >= 1");
  require(p.contains_point(mu_bif), "refinement: mu_bif must be a training point");
  if (std::abs(mu_bif - mu_prev) <= tol) return p;
  const auto& pts = p.train_points();
  require(pts.size() >= 2, "refinement: need at least 2 training points");
  const auto idx = static_cast<std::size_t>(std::ranges::lower_bound(pts, mu_bif) - pts.begin());
  const double a = idx == 0 ? mu_bif : pts[idx - 1];
  const double b = idx + 1 == pts.size() ? mu_bif : pts[idx + 1];
  std::vector<double> added;
  for (int i = 1; i <= n_ref; ++i) added.push_back(a + (b - a) * i / (n_ref + 1));
  ParameterSpace out = p;
  out.insert(added);
  return out;
}

/// Classical greedy: one reduced solution and one estimator value per parameter.
inline GreedyResult vanilla_greedy(const ParametricModel& model, const ParameterSpace& p, const GreedyConfig& cfg)
{
  cfg.validate(p);
  GreedyResult out{BasisMatrix(model), {}, {}, {}};
  out.report.strategy = "vanilla";
  out.report.final_train = p.train_points();
  if (!detail::initialise(model, p, cfg, out)) return out;

  for (int iter = 1;; ++iter) {
    auto sweep = detail::single_branch_sweep(out.basis, p.train_points(), cfg);
    const double max_delta = sweep.max_delta();
    out.sweeps.push_back(std::move(sweep));
    out.report.final_max_delta = max_delta;
    if (max_delta <= cfg.tol) {
      out.report.status = GreedyStatus::ToleranceMet;
      break;
    }
    if (out.basis.size() >= cfg.n_max) {
      out.report.status = GreedyStatus::NMaxReached;
      break;
    }
    GreedyIteration it;
    it.iteration = iter;
    it.estimator_max = max_delta;
    it.train_size = p.size();
    const bool ok = detail::enrich_single(model, out.sweeps.back(), cfg, out, it);
    it.basis_size = out.basis.size();
    it.orthonormality_error = out.basis.orthonormality_error();
    out.report.iterations.push_back(it);
    if (!ok) {
      out.report.status = GreedyStatus::Stagnation;
      break;
    }
  }
  return out;
}

/// Vanilla greedy plus training-set refinement around argmin beta_N, which
/// serves as the bifurcation-point estimate mu*.
///
/// Refinement is checked whenever the basis holds at least two vectors (the
/// initial snapshot counts), comparing mu_bif with the centre of the previous
/// check, which starts at mu0.
inline GreedyResult adaptive_greedy(const ParametricModel& model, const ParameterSpace& p_init,
                                    const GreedyConfig& cfg, const AdaptiveConfig& acfg)
{
  cfg.validate(p_init);
  acfg.validate();
  require(p_init.size() >= 2, "adaptive_greedy: need at least 2 initial training points");
  ParameterSpace p = p_init;
  GreedyResult out{BasisMatrix(model), {}, {}, {}};
  out.report.strategy = "adaptive";
  if (!detail::initialise(model, p, cfg, out)) {
    out.report.final_train = p.train_points();
    return out;
  }

  double mu_prev = out.report.mu0;
  auto sweep = detail::single_branch_sweep(out.basis, p.train_points(), cfg);
  for (int iter = 1;; ++iter) {
    const double max_delta = sweep.max_delta();
    out.report.final_max_delta = max_delta;
    out.sweeps.push_back(sweep);
    if (max_delta <= cfg.tol) {
      out.report.status = GreedyStatus::ToleranceMet;
      break;
    }
    if (out.basis.size() >= cfg.n_max) {
      out.report.status = GreedyStatus::NMaxReached;
      break;
    }
    GreedyIteration it;
    it.iteration = iter;
    it.estimator_max = max_delta;
    const bool ok = detail::enrich_single(model, sweep, cfg, out, it);
    it.basis_size = out.basis.size();
    it.orthonormality_error = out.basis.orthonormality_error();
    if (!ok) {
      it.train_size = p.size();
      out.report.iterations.push_back(it);
      out.report.status = GreedyStatus::Stagnation;
      break;
    }
    sweep = detail::single_branch_sweep(out.basis, p.train_points(), cfg);
    it.mu_bif = detail::argmin_beta(sweep);
    if (out.basis.size() >= 2 && it.mu_bif) {
      const std::size_t before = p.size();
      p = refinement(p, *it.mu_bif, mu_prev, acfg.n_ref, acfg.bif_tol);
      it.refined = p.size() != before;
      if (it.refined) sweep = detail::single_branch_sweep(out.basis, p.train_points(), cfg);
      mu_prev = *it.mu_bif;
    }
    it.train_size = p.size();
    out.report.iterations.push_back(it);
  }
  out.report.mu_star = detail::argmin_beta(out.sweeps.back());
  out.report.final_train = p.train_points();
  return out;
}

/// Deflation from every full-order guess against the roots at mu; each new root
/// is added to `roots`, offered to the basis, and kept as a future guess.
/// Returns the number of basis vectors added.
inline int deflated_snapshots(const ParametricModel& model, RootSet& roots, GuessStore& guesses, double mu,
                              const GreedyConfig& cfg, BasisMatrix& basis, std::vector<Snapshot>* log = nullptr)
{
  auto xnorm = [&](const Vector& v) { return model.x_norm(v); };
  int added = 0;
  const std::vector<Vector> start = guesses.hf();
  for (const auto& g : start) {
    for (;;) {
      auto res = deflated_newton(model, mu, g, roots, cfg.newton, cfg.power, cfg.shift);
      if (!res.converged() || !roots.try_add(res.solution, xnorm)) break;
      const auto st = basis.enrich(res.solution);
      if (st == EnrichStatus::Enriched) ++added;
      if (log) log->push_back({mu, res.solution, st});
    }
  }
  for (const auto& r : roots.roots()) guesses.add_hf(model, r);
  return added;
}

/// Greedy over the deflated estimator set: every reduced branch found at every
/// training parameter carries its own estimator, the worst (mu, branch) pair is
/// resolved at full order from its lifted reduced solution, and full-order
/// deflation at that parameter adds the coexisting snapshots.
inline GreedyResult deflated_greedy(const ParametricModel& model, const ParameterSpace& p, const GreedyConfig& cfg)
{
  cfg.validate(p);
  GreedyResult out{BasisMatrix(model), {}, {}, {}};
  out.report.strategy = "deflated";
  out.report.final_train = p.train_points();
  if (!detail::initialise(model, p, cfg, out)) return out;

  GuessStore store;
  store.add_hf(model, model.default_guess());
  store.add_hf(model, out.snapshots.front().state);
  const DeflatedEstimatorConfig ecfg{cfg.newton, cfg.power, cfg.shift, cfg.estimator_kind};

  for (int iter = 1;; ++iter) {
    auto sweep = deflated_estimator(out.basis, p.train_points(), store, ecfg);
    const double max_delta = sweep.max_delta();
    out.sweeps.push_back(std::move(sweep));
    out.report.final_max_delta = max_delta;
    if (max_delta <= cfg.tol) {
      out.report.status = GreedyStatus::ToleranceMet;
      break;
    }
    if (out.basis.size() >= cfg.n_max) {
      out.report.status = GreedyStatus::NMaxReached;
      break;
    }
    GreedyIteration it;
    it.iteration = iter;
    it.estimator_max = max_delta;
    it.train_size = p.size();
    bool ok = false;
    const auto cands = detail::ranked_candidates(out.sweeps.back(), detail::sampled_parameters(out));
    for (const EstimatorEntry* c : cands) {
      auto res = newton(model, c->mu, out.basis.lift(c->reduced_solution), cfg.newton);
      if (!res.converged()) {
        it.notes.push_back("full-order solve failed at mu=" + std::to_string(c->mu) + " (" +
                           std::string(to_string(res.status)) + ")");
        it.reselected = true;
        continue;
      }
      RootSet roots(c->mu);
      roots.try_add(res.solution, [&](const Vector& v) { return model.x_norm(v); });
      const auto st = out.basis.enrich(res.solution);
      out.snapshots.push_back({c->mu, res.solution, st});
      int added = st == EnrichStatus::Enriched ? 1 : 0;
      added += deflated_snapshots(model, roots, store, c->mu, cfg, out.basis, &out.snapshots);
      if (added > 0) {
        it.mu = c->mu;
        it.branch = c->branch;
        it.added = added;
        ok = true;
        break;
      }
      it.notes.push_back("mu=" + std::to_string(c->mu) + " branch " + std::to_string(c->branch) +
                         " added no new basis vector");
      it.reselected = true;
    }
    it.basis_size = out.basis.size();
    it.orthonormality_error = out.basis.orthonormality_error();
    out.report.iterations.push_back(it);
    if (!ok) {
      out.report.status = GreedyStatus::Stagnation;
      break;
    }
  }
  return out;
}

}  // namespace bifrb
