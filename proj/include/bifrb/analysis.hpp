#pragma once

#include "bifrb/estimators.hpp"
#include "bifrb/model.hpp"
#include "bifrb/nlsolve.hpp"
#include "bifrb/pod.hpp"
#include "bifrb/rom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bifrb {

struct DiagramConfig {
  NewtonConfig newton;
  double power = 2.0;
  double shift = 1.0;
  double jump_tol = 0.5;   ///< max functional change for a branch to continue between grid points
  int random_guesses = 0;  ///< extra seeded random full-order guesses per parameter
  double random_amplitude = 5.0;
  std::uint64_t seed = 0;
  double zero_tol = 1e-8;  ///< roots with ||u||_X below this are stored as exact zeros
};

struct DiagramRow {
  double mu = 0.0;
  int branch = 0;
  double value = 0.0;
  Vector state;
};

/// Full-order solution branches over a parameter grid; doubles as the branch
/// oracle for error sweeps and branch-wise POD.
struct BifurcationDiagram {
  std::vector<DiagramRow> rows;  ///< ordered by mu, then branch
  std::vector<double> mus;
  int n_branches = 0;
  std::vector<std::string> gaps;

  std::vector<const DiagramRow*> at(double mu) const
  {
    std::vector<const DiagramRow*> out;
    for (const auto& r : rows) {
      if (r.mu == mu) out.push_back(&r);
    }
    return out;
  }

  std::size_t branch_count_at(double mu) const { return at(mu).size(); }

  /// Branch present at the most grid points (lowest label on ties).
  int dominant_branch() const
  {
    std::map<int, int> count;
    for (const auto& r : rows) ++count[r.branch];
    int best = -1, best_n = -1;
    for (auto [b, n] : count) {
      if (n > best_n) best = b, best_n = n;
    }
    return best;
  }

  SnapshotMatrix snapshots(std::optional<int> only_branch = std::nullopt) const
  {
    SnapshotMatrix s;
    for (const auto& r : rows) {
      if (!only_branch || r.branch == *only_branch) s.add(r.mu, r.branch, r.state);
    }
    return s;
  }
};

/// Continuation over the ordered grid: each known branch is continued by Newton
/// from its previous state, then deflation searches for further roots. Roots are
/// assigned to the continuing branch with the nearest functional value (within
/// jump_tol); leftovers open new branches in increasing functional order.
inline BifurcationDiagram bifurcation_diagram(const ParametricModel& model, const std::vector<double>& mus,
                                              const DiagramConfig& cfg = {})
{
  BifurcationDiagram d;
  d.mus = mus;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-cfg.random_amplitude, cfg.random_amplitude);
  auto xnorm = [&](const Vector& v) { return model.x_norm(v); };
  std::map<int, DiagramRow> live;  // last state per active branch

  for (double mu : mus) {
    std::vector<Vector> guesses;
    for (const auto& [b, row] : live) guesses.push_back(row.state);
    guesses.push_back(model.default_guess());
    for (int k = 0; k < cfg.random_guesses; ++k) {
      Vector g(model.n_dofs());
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = unif(rng);
      guesses.push_back(std::move(g));
    }

    RootSet roots(mu);
    for (const auto& [b, row] : live) {
      auto res = newton(model, mu, row.state, cfg.newton);
      if (res.converged()) roots.try_add(res.solution, xnorm);
    }
    for (const auto& g : guesses) {
      for (;;) {
        auto res = deflated_newton(model, mu, g, roots, cfg.newton, cfg.power, cfg.shift);
        if (!res.converged() || !roots.try_add(res.solution, xnorm)) break;
      }
    }

    std::vector<std::pair<double, const Vector*>> found;
    std::vector<Vector> cleaned = roots.roots();
    for (auto& r : cleaned) {
      if (model.x_norm(r) < cfg.zero_tol) r.setZero();
    }
    for (const auto& r : cleaned) found.emplace_back(model.functional(r), &r);
    std::vector<bool> used(found.size(), false);
    std::map<int, DiagramRow> next;
    for (const auto& [b, row] : live) {
      std::optional<std::size_t> pick;
      double best = cfg.jump_tol;
      for (std::size_t i = 0; i < found.size(); ++i) {
        const double dist = std::abs(found[i].first - row.value);
        if (!used[i] && dist <= best) best = dist, pick = i;
      }
      if (!pick) {
        d.gaps.push_back("branch " + std::to_string(b) + " lost at mu=" + std::to_string(mu));
        continue;
      }
      used[*pick] = true;
      next[b] = DiagramRow{mu, b, found[*pick].first, *found[*pick].second};
    }
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < found.size(); ++i) {
      if (!used[i]) fresh.push_back(i);
    }
    std::ranges::sort(fresh, [&](std::size_t a, std::size_t b) { return found[a].first < found[b].first; });
    for (std::size_t i : fresh) {
      const int b = d.n_branches++;
      next[b] = DiagramRow{mu, b, found[i].first, *found[i].second};
    }
    for (const auto& [b, row] : next) d.rows.push_back(row);
    live = std::move(next);
  }

  // Backward pass: branches that first appeared at some interior grid point are
  // continued towards smaller parameters while Newton keeps finding new roots.
  std::map<int, std::size_t> first;
  for (std::size_t i = 0; i < d.rows.size(); ++i) first.try_emplace(d.rows[i].branch, i);
  for (const auto& [b, idx] : first) {
    const DiagramRow start = d.rows[idx];
    auto pos = std::ranges::find(mus, start.mu);
    if (pos == mus.begin()) continue;
    Vector state = start.state;
    double value = start.value;
    for (auto it = std::make_reverse_iterator(pos); it != mus.rend(); ++it) {
      const double mu = *it;
      auto res = newton(model, mu, state, cfg.newton);
      if (!res.converged()) break;
      RootSet here(mu);
      for (const auto* r : d.at(mu)) here.try_add(r->state, xnorm);
      const double f = model.functional(res.solution);
      if (here.contains(res.solution, xnorm) || std::abs(f - value) > cfg.jump_tol) break;
      d.rows.push_back(DiagramRow{mu, b, f, res.solution});
      state = res.solution;
      value = f;
    }
  }
  std::ranges::stable_sort(d.rows, [](const DiagramRow& a, const DiagramRow& b) {
    return a.mu != b.mu ? a.mu < b.mu : a.branch < b.branch;
  });
  return d;
}

/// ||u_h - u||_X / ||u_h||_X, or the absolute error when ||u_h||_X <= zero_tol.
inline double relative_error(const ParametricModel& model, const Vector& uh, const Vector& u_lifted,
                             bool* absolute = nullptr, double zero_tol = 0.0)
{
  const double n = model.x_norm(uh);
  const double e = model.x_norm(Vector(uh - u_lifted));
  const bool abs_err = !(n > zero_tol);
  if (absolute) *absolute = abs_err;
  return abs_err ? e : e / n;
}

struct ErrorRow {
  double mu = 0.0;
  int branch = 0;
  double reduced = 0.0;
  double projection = 0.0;
  double estimator = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> flags;

  /// Flags other than "absolute" mark rows whose reduced error is unreliable.
  bool flagged() const
  {
    return std::ranges::any_of(flags, [](const std::string& f) { return f != "absolute"; });
  }
};

struct ErrorSweep {
  std::vector<ErrorRow> rows;

  double max_error(bool unflagged_only = false) const
  {
    double m = 0.0;
    for (const auto& r : rows) {
      if (!unflagged_only || !r.flagged()) m = std::max(m, r.reduced);
    }
    return m;
  }

  double avg_error() const
  {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.reduced;
    return s / static_cast<double>(rows.size());
  }

  std::size_t flagged_count() const
  {
    return static_cast<std::size_t>(std::ranges::count_if(rows, [](const auto& r) { return r.flagged(); }));
  }
};

struct ErrorSweepConfig {
  NewtonConfig newton;
  double power = 2.0;
  double shift = 1.0;
  EstimatorKind estimator_kind = EstimatorKind::Linear;
  double ambiguity_tol = 1e-6;
  double match_tol = 0.1;  ///< functional mismatch above which a pairing is flagged unmatched
};

/// Online phase against the oracle: reduced deflated Newton at every grid
/// parameter (continuation from the previous parameter's reduced roots plus the
/// projected default guess), each oracle branch paired with the reduced root of
/// nearest functional value.
inline ErrorSweep error_sweep(const BasisMatrix& b, const BifurcationDiagram& oracle, const ErrorSweepConfig& cfg = {})
{
  const ParametricModel& model = b.model();
  ErrorSweep out;
  std::vector<Vector> previous;
  for (double mu : oracle.mus) {
    const auto truth = oracle.at(mu);
    if (truth.empty()) continue;

    std::vector<Vector> reduced;
    bool diverged = false;
    if (b.empty()) {
      reduced.push_back(Vector::Zero(0));
    } else {
      const Vector seed = b.project(model.default_guess());
      std::vector<Vector> guesses = previous;
      guesses.push_back(seed);
      auto found = discover_reduced_solutions(b, mu, previous.empty() ? seed : previous.front(), guesses,
                                              cfg.newton, cfg.power, cfg.shift);
      reduced = std::move(found.roots);
      diverged = reduced.empty();
      if (!reduced.empty()) previous = reduced;
    }

    std::vector<Vector> lifted;
    std::vector<double> values;
    for (const auto& r : reduced) {
      lifted.push_back(b.empty() ? Vector(Vector::Zero(model.n_dofs())) : b.lift(r));
      values.push_back(model.functional(lifted.back()));
    }
    std::vector<int> claims(reduced.size(), 0);
    std::vector<std::optional<std::size_t>> pick(truth.size());
    for (std::size_t t = 0; t < truth.size(); ++t) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double dist = std::abs(values[i] - truth[t]->value);
        if (dist < best) best = dist, pick[t] = i;
      }
      if (pick[t]) ++claims[*pick[t]];
    }

    for (std::size_t t = 0; t < truth.size(); ++t) {
      ErrorRow row;
      row.mu = mu;
      row.branch = truth[t]->branch;
      const Vector& uh = truth[t]->state;
      const Vector proj = b.empty() ? Vector(Vector::Zero(model.n_dofs())) : b.lift(b.project(uh));
      bool absolute = false;
      row.projection = relative_error(model, uh, proj, &absolute);
      if (absolute) row.flags.push_back("absolute");
      if (diverged) row.flags.push_back("diverged");
      if (!pick[t]) {
        row.reduced = relative_error(model, uh, Vector::Zero(model.n_dofs()));
        row.flags.push_back("unmatched");
        out.rows.push_back(std::move(row));
        continue;
      }
      const std::size_t i = *pick[t];
      const double dist = std::abs(values[i] - truth[t]->value);
      if (dist > cfg.match_tol) row.flags.push_back("unmatched");
      for (std::size_t j = 0; j < values.size(); ++j) {
        if (j != i && std::abs(std::abs(values[j] - truth[t]->value) - dist) <= cfg.ambiguity_tol) {
          row.flags.push_back("ambiguous");
          break;
        }
      }
      if (claims[i] > 1) row.flags.push_back("shared");
      row.reduced = relative_error(model, uh, lifted[i]);
      if (!b.empty()) {
        EstimatorSet one;
        one.entries.push_back(make_entry(b, mu, row.branch, reduced[i]));
        apply_estimator_kind(one, cfg.estimator_kind);
        row.estimator = one.entries.front().valid ? one.entries.front().delta
                                                  : std::numeric_limits<double>::infinity();
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

struct ErrorVsNRow {
  std::string strategy;
  Eigen::Index n = 0;
  double max_error = 0.0;
  double avg_error = 0.0;
  double max_error_unflagged = 0.0;
  std::size_t flagged = 0;
};

/// Errors of the first-n truncations of a nested basis, for each n.
inline std::vector<ErrorVsNRow> error_vs_n(const std::string& strategy, const BasisMatrix& b,
                                           const BifurcationDiagram& oracle, const std::vector<Eigen::Index>& n_values,
                                           const ErrorSweepConfig& cfg = {})
{
  for (std::size_t i = 1; i < n_values.size(); ++i) {
    require(n_values[i] > n_values[i - 1], "error_vs_n: n_values must be increasing");
  }
  std::vector<ErrorVsNRow> out;
  for (Eigen::Index n : n_values) {
    require(n >= 0, "error_vs_n: n must be >= 0");
    const BasisMatrix bn = b.truncated(std::min(n, b.size()));
    const ErrorSweep sweep = error_sweep(bn, oracle, cfg);
    out.push_back({strategy, n, sweep.max_error(), sweep.avg_error(), sweep.max_error(true), sweep.flagged_count()});
  }
  return out;
}

}  // namespace bifrb
