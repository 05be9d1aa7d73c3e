#pragma once

#include "bifrb/model.hpp"

#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

namespace bifrb {

struct NewtonConfig {
  double tol = 1e-10;             ///< residual norm stopping threshold
  int max_iter = 100;
  double divergence_norm = 1e6;   ///< abort when the iterate norm exceeds this
  int divergence_iter = 25;       ///< abort after this many steps without a new best residual

  void validate() const
  {
    require(tol > 0.0, "NewtonConfig: tol must be > 0");
    require(max_iter >= 1, "NewtonConfig: max_iter must be >= 1");
    require(divergence_norm > 0.0, "NewtonConfig: divergence_norm must be > 0");
    require(divergence_iter >= 1, "NewtonConfig: divergence_iter must be >= 1");
  }
};

enum class SolveStatus {
  Converged,
  MaxIterations,
  NormBlowup,
  Stagnation,
  SingularJacobian,
  NonFinite,
  DeflationStall,
  DeflationSingularity,
  KnownRoot,
};

inline std::string_view to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::NormBlowup: return "norm-blowup";
    case SolveStatus::Stagnation: return "stagnation";
    case SolveStatus::SingularJacobian: return "singular-jacobian";
    case SolveStatus::NonFinite: return "non-finite";
    case SolveStatus::DeflationStall: return "deflation-stall";
    case SolveStatus::DeflationSingularity: return "deflation-singularity";
    case SolveStatus::KnownRoot: return "known-root";
  }
  return "unknown";
}

/// Outcome of a (deflated) Newton solve. Divergence is a value, not an exception.
struct SolveResult {
  SolveStatus status = SolveStatus::MaxIterations;
  Vector solution;  ///< last iterate (the root when converged)
  int iterations = 0;
  double residual_norm = std::numeric_limits<double>::infinity();

  bool converged() const { return status == SolveStatus::Converged; }
};

/// Shifted deflation m(y) = prod_i (||y - u_i||^{-r} + sigma) in the norm induced
/// by `metric` (identity when null). The metric must outlive the operator.
class DeflationOperator {
public:
  DeflationOperator(std::vector<Vector> roots, double power, double shift, const Matrix* metric = nullptr)
      : roots_(std::move(roots)), power_(power), shift_(shift), metric_(metric)
  {
    require(power >= 1.0, "DeflationOperator: power r must be >= 1");
    require(shift > 0.0, "DeflationOperator: shift sigma must be > 0");
    for (const auto& u : roots_) {
      if (metric_) require_size(u, metric_->rows(), "DeflationOperator root");
    }
  }

  const std::vector<Vector>& roots() const { return roots_; }
  bool empty() const { return roots_.empty(); }
  double power() const { return power_; }
  double shift() const { return shift_; }

  double distance(const Vector& y, const Vector& u) const
  {
    const Vector d = y - u;
    return std::sqrt(std::max(0.0, metric_ ? d.dot(*metric_ * d) : d.squaredNorm()));
  }

  double scalar(const Vector& y) const
  {
    double m = 1.0;
    for (const auto& u : roots_) m *= factor(distance_checked(y, u));
    return m;
  }

  /// Exact gradient of scalar() with respect to y.
  Vector gradient(const Vector& y) const
  {
    Vector g = Vector::Zero(y.size());
    if (roots_.empty()) return g;
    const double m = scalar(y);
    for (const auto& u : roots_) {
      const Vector d = y - u;
      const double dist = distance_checked(y, u);
      const double coeff = -power_ * std::pow(dist, -power_ - 2.0) / factor(dist);
      if (metric_) g.noalias() += coeff * (*metric_ * d);
      else g.noalias() += coeff * d;
    }
    return m * g;
  }

private:
  double factor(double dist) const { return std::pow(dist, -power_) + shift_; }

  double distance_checked(const Vector& y, const Vector& u) const
  {
    require(y.size() == u.size(), "DeflationOperator: dimension mismatch");
    const double dist = distance(y, u);
    const double scale = std::max({1.0, y.lpNorm<Eigen::Infinity>(), u.lpNorm<Eigen::Infinity>()});
    if (dist <= 64.0 * std::numeric_limits<double>::epsilon() * scale) {
      throw NumericalError("deflation singularity: iterate coincides with a deflated root");
    }
    return dist;
  }

  std::vector<Vector> roots_;
  double power_;
  double shift_;
  const Matrix* metric_;
};

/// Distinct solutions of G(.; mu) = 0 found at one parameter value.
class RootSet {
public:
  static constexpr double kDefaultThreshold = 1e-6;

  explicit RootSet(double mu = 0.0, double threshold = kDefaultThreshold) : mu_(mu), threshold_(threshold) {}

  double mu() const { return mu_; }
  double threshold() const { return threshold_; }
  const std::vector<Vector>& roots() const { return roots_; }
  std::size_t size() const { return roots_.size(); }
  bool empty() const { return roots_.empty(); }
  const Vector& operator[](std::size_t i) const { return roots_[i]; }

  /// True when `u` is within the (relative) distinctness threshold of a stored root.
  template <class NormFn>
  bool contains(const Vector& u, NormFn&& norm) const
  {
    for (const auto& r : roots_) {
      const double scale = std::max({1.0, norm(r), norm(u)});
      if (norm(Vector(u - r)) <= threshold_ * scale) return true;
    }
    return false;
  }

  template <class NormFn>
  bool try_add(const Vector& u, NormFn&& norm)
  {
    if (contains(u, norm)) return false;
    roots_.push_back(u);
    return true;
  }

private:
  double mu_;
  double threshold_;
  std::vector<Vector> roots_;
};

namespace detail {

/// Newton iteration y <- y + theta * du with du from the undeflated
/// linearisation and theta from the Sherman-Morrison identity for the
/// deflated residual m(y) G(y). theta == 1 exactly without roots.
template <class Residual, class Jacobian, class ResNorm, class StateNorm>
SolveResult deflated_newton_loop(Residual&& residual, Jacobian&& jacobian, ResNorm&& res_norm,
                                 StateNorm&& state_norm, const DeflationOperator& defl, Vector y,
                                 const NewtonConfig& cfg)
{
  cfg.validate();
  SolveResult out;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int k = 0;; ++k) {
    const Vector g = residual(y);
    const double rn = res_norm(g);
    out.iterations = k;
    out.residual_norm = rn;
    if (!std::isfinite(rn) || !y.allFinite()) {
      out.status = SolveStatus::NonFinite;
      break;
    }
    if (rn < cfg.tol) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (k >= cfg.max_iter) {
      out.status = SolveStatus::MaxIterations;
      break;
    }
    if (rn < best) {
      best = rn;
      since_best = 0;
    } else if (++since_best >= cfg.divergence_iter) {
      out.status = SolveStatus::Stagnation;
      break;
    }

    const Matrix jac = jacobian(y);
    Eigen::PartialPivLU<Matrix> lu(jac);
    const Vector du = lu.solve(-g);
    if (!du.allFinite() || !(lu.rcond() > 0.0)) {
      out.status = SolveStatus::SingularJacobian;
      break;
    }

    double theta = 1.0;
    if (!defl.empty()) {
      double m = 0.0;
      Vector grad;
      try {
        m = defl.scalar(y);
        grad = defl.gradient(y);
      } catch (const NumericalError&) {
        out.status = SolveStatus::DeflationSingularity;
        break;
      }
      const double denom = 1.0 - grad.dot(du) / m;
      if (!std::isfinite(denom) || std::abs(denom) < 1e-14) {
        out.status = SolveStatus::DeflationStall;
        break;
      }
      theta = 1.0 / denom;
    }
    y += theta * du;
    if (state_norm(y) > cfg.divergence_norm) {
      out.status = SolveStatus::NormBlowup;
      out.iterations = k + 1;
      break;
    }
  }
  out.solution = std::move(y);
  return out;
}

}  // namespace detail

/// Plain Newton on G(.; mu) with convergence on the Riesz norm of the residual.
inline SolveResult deflated_newton(const ParametricModel& model, double mu, const Vector& guess,
                                   const RootSet& roots, const NewtonConfig& cfg, double power = 2.0,
                                   double shift = 1.0);

inline SolveResult newton(const ParametricModel& model, double mu, const Vector& guess, const NewtonConfig& cfg)
{
  return deflated_newton(model, mu, guess, RootSet(mu), cfg);
}

/// Newton on the deflated residual m(y) G(y; mu) via the Sherman-Morrison step.
/// Converging onto one of `roots` is reported as SolveStatus::KnownRoot.
inline SolveResult deflated_newton(const ParametricModel& model, double mu, const Vector& guess,
                                   const RootSet& roots, const NewtonConfig& cfg, double power, double shift)
{
  require_size(guess, model.n_dofs(), "deflated_newton guess");
  const DeflationOperator defl(roots.roots(), power, shift, &model.x_matrix());
  auto res = detail::deflated_newton_loop([&](const Vector& y) { return model.residual(y, mu); },
                                          [&](const Vector& y) { return model.jacobian(y, mu); },
                                          [&](const Vector& g) { return model.dual_norm(g); },
                                          [&](const Vector& y) { return model.x_norm(y); }, defl, guess, cfg);
  if (res.converged() && roots.contains(res.solution, [&](const Vector& v) { return model.x_norm(v); })) {
    res.status = SolveStatus::KnownRoot;
  }
  return res;
}

/// Newton from the first guess, then deflation from every guess until each one
/// stops producing new roots. Not guaranteed to find every solution.
inline RootSet discover_solutions(const ParametricModel& model, double mu, const std::vector<Vector>& guesses,
                                  const NewtonConfig& cfg, double power = 2.0, double shift = 1.0)
{
  require(!guesses.empty(), "discover_solutions: guesses must be non-empty");
  RootSet roots(mu);
  auto xnorm = [&](const Vector& v) { return model.x_norm(v); };
  if (auto first = newton(model, mu, guesses.front(), cfg); first.converged()) roots.try_add(first.solution, xnorm);
  for (const auto& g : guesses) {
    for (;;) {
      auto res = deflated_newton(model, mu, g, roots, cfg, power, shift);
      if (!res.converged() || !roots.try_add(res.solution, xnorm)) break;
    }
  }
  return roots;
}

}  // namespace bifrb
