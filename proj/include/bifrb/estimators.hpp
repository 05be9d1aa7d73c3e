#pragma once

#include "bifrb/model.hpp"
#include "bifrb/nlsolve.hpp"
#include "bifrb/rom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

namespace bifrb {

enum class EstimatorKind { Linear, NonlinearBRR, AutoSwitch };

inline std::string_view to_string(EstimatorKind k)
{
  switch (k) {
    case EstimatorKind::Linear: return "linear";
    case EstimatorKind::NonlinearBRR: return "nonlinear";
    case EstimatorKind::AutoSwitch: return "auto";
  }
  return "unknown";
}

inline EstimatorKind estimator_kind_from_string(std::string_view s)
{
  if (s == "linear") return EstimatorKind::Linear;
  if (s == "nonlinear" || s == "brr") return EstimatorKind::NonlinearBRR;
  if (s == "auto") return EstimatorKind::AutoSwitch;
  throw ContractViolation("unknown estimator kind '" + std::string(s) + "'");
}

inline constexpr double kBetaFloor = 1e-12;

/// Smallest singular value of Jac(u; mu) measured in the X norm on both sides,
/// i.e. sigma_min(L^{-1} J L^{-T}) with X = L L^T.
inline double inf_sup_hf(const ParametricModel& model, const Vector& u, double mu)
{
  require_size(u, model.n_dofs(), "inf_sup_hf");
  const Matrix jac = model.jacobian(u, mu);
  const auto& llt = model.x_factor();
  const Matrix t = llt.matrixL().solve(jac);
  const Matrix c = llt.matrixL().solve(t.transpose()).transpose();
  if (!c.allFinite()) throw NumericalError("inf_sup_hf: non-finite scaled Jacobian");
  if (model.symmetric_jacobian()) {
    const Matrix sym = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("inf_sup_hf: symmetric eigen-solver failed");
    return es.eigenvalues().cwiseAbs().minCoeff();
  }
  Eigen::BDCSVD<Matrix> svd(c);
  if (svd.info() != Eigen::Success) throw NumericalError("inf_sup_hf: SVD failed");
  return svd.singularValues().minCoeff();
}

/// Full-order inf-sup constant at the lifted reduced state.
inline double inf_sup_reduced(const BasisMatrix& b, const Vector& un, double mu)
{
  return inf_sup_hf(b.model(), b.lift(un), mu);
}

/// L^p embedding constant of H^1_0(0,1) squared: p = 4 by fixed-point iteration
/// on the discrete space, p = infinity is exactly 1/4 (rho = 1/2).
inline double sobolev_embedding_constant_sq(const FiniteElement1D& model, double p)
{
  if (std::isinf(p)) return 0.25;
  require(p == 4.0, "sobolev_embedding_constant: only p = 4 and p = infinity are supported");
  return model.l4_embedding_sq();
}

inline double sobolev_embedding_constant(const FiniteElement1D& model, double p)
{
  return std::sqrt(sobolev_embedding_constant_sq(model, p));
}

/// Everything needed to report one a-posteriori bound evaluation.
struct PointEstimate {
  double residual_dual = 0.0;  ///< ||G(B u_N)||_{X^{-1}}
  double beta = 0.0;
  double lipschitz = 0.0;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double delta_linear = std::numeric_limits<double>::infinity();
  double delta_nonlinear = std::numeric_limits<double>::infinity();
  bool beta_valid = false;        ///< beta above the floor
  bool nonlinear_valid = false;   ///< beta valid and tau <= 1
};

/// Linear bound ||G||_{X^{-1}} / beta.
inline PointEstimate linear_estimator(const BasisMatrix& b, const Vector& un, double mu,
                                      double beta_floor = kBetaFloor)
{
  PointEstimate e;
  const Vector uh = b.lift(un);
  e.residual_dual = b.model().dual_norm(b.model().residual(uh, mu));
  e.beta = inf_sup_hf(b.model(), uh, mu);
  e.beta_valid = e.beta > beta_floor;
  if (e.beta_valid) e.delta_linear = e.residual_dual / e.beta;
  return e;
}

namespace detail {

inline void fill_nonlinear(PointEstimate& e, const ParametricModel& model, double mu, double center_norm)
{
  if (!e.beta_valid) return;
  e.lipschitz = model.lipschitz_constant(mu, center_norm, 2.0 * e.delta_linear);
  e.tau = 2.0 * e.lipschitz * e.residual_dual / (e.beta * e.beta);
  if (e.tau <= 1.0) {
    e.nonlinear_valid = true;
    // (beta/K)(1 - sqrt(1 - tau)) written without cancellation; K -> 0 gives the linear bound.
    e.delta_nonlinear = e.lipschitz > 0.0
                            ? (e.beta / e.lipschitz) * e.tau / (1.0 + std::sqrt(1.0 - e.tau))
                            : e.delta_linear;
  }
}

}  // namespace detail

/// Brezzi-Rappaz-Raviart bound: tau = 2 K ||G|| / beta^2 and, when tau <= 1,
/// delta = (beta / K)(1 - sqrt(1 - tau)). K is taken on the ball of radius
/// twice the linear bound around the lifted reduced state.
inline PointEstimate nonlinear_estimator(const BasisMatrix& b, const Vector& un, double mu,
                                         double beta_floor = kBetaFloor)
{
  PointEstimate e = linear_estimator(b, un, mu, beta_floor);
  detail::fill_nonlinear(e, b.model(), mu, un.norm());
  return e;
}

struct EstimatorEntry {
  double mu = 0.0;
  int branch = 0;
  double delta = 0.0;
  bool valid = false;
  PointEstimate detail;
  Vector reduced_solution;
};

/// Estimator values for every (mu, reduced root) pair of one sweep.
struct EstimatorSet {
  std::vector<EstimatorEntry> entries;
  EstimatorKind kind_used = EstimatorKind::Linear;
  std::vector<double> failed_mu;  ///< parameters where the first reduced solve failed

  /// Largest valid delta (0 when nothing is valid).
  double max_delta() const
  {
    double m = 0.0;
    for (const auto& e : entries) {
      if (e.valid) m = std::max(m, e.delta);
    }
    return m;
  }

  std::size_t count_at(double mu) const
  {
    return static_cast<std::size_t>(std::ranges::count_if(entries, [&](const auto& e) { return e.mu == mu; }));
  }

  bool all_tau_below_one() const
  {
    return std::ranges::all_of(entries, [](const auto& e) { return e.detail.nonlinear_valid; });
  }
};

/// Picks linear or BRR values for every entry. AutoSwitch switches to BRR only
/// when tau <= 1 at every entry of the sweep.
inline void apply_estimator_kind(EstimatorSet& set, EstimatorKind kind)
{
  EstimatorKind use = kind;
  if (kind == EstimatorKind::AutoSwitch) {
    use = (!set.entries.empty() && set.all_tau_below_one()) ? EstimatorKind::NonlinearBRR : EstimatorKind::Linear;
  }
  set.kind_used = use;
  for (auto& e : set.entries) {
    if (use == EstimatorKind::Linear) {
      e.valid = e.detail.beta_valid;
      e.delta = e.detail.delta_linear;
    } else {
      e.valid = e.detail.nonlinear_valid;
      e.delta = e.detail.delta_nonlinear;
    }
  }
}

inline EstimatorEntry make_entry(const BasisMatrix& b, double mu, int branch, const Vector& un)
{
  EstimatorEntry e;
  e.mu = mu;
  e.branch = branch;
  e.reduced_solution = un;
  e.detail = nonlinear_estimator(b, un, mu);
  return e;
}

struct DeflatedEstimatorConfig {
  NewtonConfig newton;
  double power = 2.0;
  double shift = 1.0;
  EstimatorKind kind = EstimatorKind::Linear;
};

/// Sweep over the ordered training set: at each mu a reduced Newton solve from
/// the continuation guess, then reduced deflation from every guess until it
/// stops converging; one estimator entry per reduced root. The roots found at
/// mu become the guesses for the next parameter and are stored in `store`.
///
/// Guesses at mu: roots from the previous parameter, roots stored for mu by an
/// earlier sweep (zero-padded), and the projected default full-order guess.
inline EstimatorSet deflated_estimator(const BasisMatrix& b, const std::vector<double>& mus, GuessStore& store,
                                       const DeflatedEstimatorConfig& cfg)
{
  require(!b.empty(), "deflated_estimator: basis must be non-empty");
  EstimatorSet out;
  const Vector seed = b.project(b.model().default_guess());
  std::vector<Vector> previous;
  for (double mu : mus) {
    const Vector first = previous.empty() ? seed : previous.front();
    std::vector<Vector> guesses = previous;
    for (auto& g : store.reduced(mu, b.size())) guesses.push_back(std::move(g));
    guesses.push_back(seed);

    auto found = discover_reduced_solutions(b, mu, first, guesses, cfg.newton, cfg.power, cfg.shift);
    if (found.roots.empty()) out.failed_mu.push_back(mu);
    for (std::size_t i = 0; i < found.roots.size(); ++i) {
      out.entries.push_back(make_entry(b, mu, static_cast<int>(i), found.roots[i]));
    }
    store.set_reduced(mu, found.roots);
    if (!found.roots.empty()) previous = std::move(found.roots);
  }
  apply_estimator_kind(out, cfg.kind);
  return out;
}

}  // namespace bifrb
