#pragma once

#include "bifrb/model.hpp"
#include "bifrb/nlsolve.hpp"

#include <map>
#include <string_view>
#include <vector>

namespace bifrb {

enum class EnrichStatus { Enriched, Redundant, NullSnapshot };

inline std::string_view to_string(EnrichStatus s)
{
  switch (s) {
    case EnrichStatus::Enriched: return "enriched";
    case EnrichStatus::Redundant: return "redundant";
    case EnrichStatus::NullSnapshot: return "null-snapshot";
  }
  return "unknown";
}

/// X-orthonormal reduced basis (the columns of an N_h x N matrix).
///
/// Holds a non-owning reference to the model whose inner product defines
/// orthonormality; the model must outlive the basis.
class BasisMatrix {
public:
  static constexpr double kRejectionTol = 1e-8;
  /// Snapshots with ||u||_X at or below this are numerically zero roots.
  static constexpr double kNullTol = 1e-8;

  explicit BasisMatrix(const ParametricModel& model)
      : model_(&model), cols_(model.n_dofs(), 0), xcols_(model.n_dofs(), 0)
  {
  }

  /// Adopts precomputed columns; throws unless they are X-orthonormal to `tol`.
  BasisMatrix(const ParametricModel& model, Matrix columns, double tol = 1e-10) : model_(&model)
  {
    require(columns.rows() == model.n_dofs(), "BasisMatrix: row count must equal n_dofs");
    cols_ = std::move(columns);
    xcols_ = model.x_matrix() * cols_;
    require(orthonormality_error() <= tol, "BasisMatrix: columns are not X-orthonormal");
  }

  const ParametricModel& model() const { return *model_; }
  Eigen::Index size() const { return cols_.cols(); }
  Eigen::Index n_dofs() const { return cols_.rows(); }
  bool empty() const { return cols_.cols() == 0; }
  const Matrix& matrix() const { return cols_; }
  /// X * B, cached.
  const Matrix& x_times_basis() const { return xcols_; }

  /// max |B^T X B - I|
  double orthonormality_error() const
  {
    if (empty()) return 0.0;
    const Matrix g = cols_.transpose() * xcols_;
    return (g - Matrix::Identity(size(), size())).cwiseAbs().maxCoeff();
  }

  /// Two-pass classical Gram-Schmidt in the X inner product. Snapshots whose
  /// remainder falls below rejection_tol * ||u||_X are rejected as redundant,
  /// snapshots with ||u||_X <= kNullTol as null.
  EnrichStatus enrich(const Vector& u, double rejection_tol = kRejectionTol)
  {
    require_size(u, n_dofs(), "BasisMatrix::enrich");
    const double unorm = model_->x_norm(u);
    if (!(unorm > kNullTol)) return EnrichStatus::NullSnapshot;
    Vector v = u;
    for (int pass = 0; pass < 2 && !empty(); ++pass) v -= cols_ * (xcols_.transpose() * v);
    const double vnorm = model_->x_norm(v);
    if (!(vnorm >= rejection_tol * unorm)) return EnrichStatus::Redundant;
    v /= vnorm;
    const Eigen::Index n = size();
    cols_.conservativeResize(Eigen::NoChange, n + 1);
    xcols_.conservativeResize(Eigen::NoChange, n + 1);
    cols_.col(n) = v;
    xcols_.col(n) = model_->x_matrix() * v;
    return EnrichStatus::Enriched;
  }

  /// First n columns.
  BasisMatrix truncated(Eigen::Index n) const
  {
    require(n >= 0 && n <= size(), "BasisMatrix::truncated: bad size");
    BasisMatrix b(*model_);
    b.cols_ = cols_.leftCols(n);
    b.xcols_ = xcols_.leftCols(n);
    return b;
  }

  Vector lift(const Vector& un) const
  {
    require_size(un, size(), "lift");
    return cols_ * un;
  }

  /// X-orthogonal projection coefficients B^T X u.
  Vector project(const Vector& uh) const
  {
    require_size(uh, n_dofs(), "project");
    return xcols_.transpose() * uh;
  }

private:
  const ParametricModel* model_;
  Matrix cols_;
  Matrix xcols_;
};

inline EnrichStatus gram_schmidt_enrich(BasisMatrix& basis, const Vector& u,
                                        double rejection_tol = BasisMatrix::kRejectionTol)
{
  return basis.enrich(u, rejection_tol);
}

inline Vector lift(const BasisMatrix& b, const Vector& un) { return b.lift(un); }
inline Vector project(const BasisMatrix& b, const Vector& uh) { return b.project(uh); }

/// B^T G(B u_N; mu)
inline Vector reduced_residual(const BasisMatrix& b, const Vector& un, double mu)
{
  return b.matrix().transpose() * b.model().residual(b.lift(un), mu);
}

/// B^T Jac(B u_N; mu) B
inline Matrix reduced_jacobian(const BasisMatrix& b, const Vector& un, double mu)
{
  return b.matrix().transpose() * (b.model().jacobian(b.lift(un), mu) * b.matrix());
}

/// Deflated Newton on the Galerkin system; distances are Euclidean in the
/// reduced coordinates, which equals the X-distance of the lifts.
inline SolveResult reduced_deflated_newton(const BasisMatrix& b, double mu, const Vector& guess,
                                           const std::vector<Vector>& reduced_roots, const NewtonConfig& cfg,
                                           double power = 2.0, double shift = 1.0)
{
  if (b.empty()) throw ContractViolation("reduced solve: empty basis");
  require_size(guess, b.size(), "reduced guess");
  for (const auto& r : reduced_roots) require_size(r, b.size(), "reduced root");
  const DeflationOperator defl(reduced_roots, power, shift);
  auto res = detail::deflated_newton_loop([&](const Vector& y) { return reduced_residual(b, y, mu); },
                                          [&](const Vector& y) { return reduced_jacobian(b, y, mu); },
                                          [](const Vector& g) { return g.norm(); },
                                          [](const Vector& y) { return y.norm(); }, defl, guess, cfg);
  if (res.converged()) {
    RootSet known(mu);
    for (const auto& r : reduced_roots) known.try_add(r, [](const Vector& v) { return v.norm(); });
    if (known.contains(res.solution, [](const Vector& v) { return v.norm(); })) res.status = SolveStatus::KnownRoot;
  }
  return res;
}

inline SolveResult reduced_newton(const BasisMatrix& b, double mu, const Vector& guess, const NewtonConfig& cfg)
{
  return reduced_deflated_newton(b, mu, guess, {}, cfg);
}

/// Reduced Newton from `first_guess`, then reduced deflation from every entry of
/// `deflation_guesses` until each stops yielding new reduced roots.
struct ReducedDiscovery {
  std::vector<Vector> roots;
  int failed_solves = 0;
};

inline ReducedDiscovery discover_reduced_solutions(const BasisMatrix& b, double mu, const Vector& first_guess,
                                                   const std::vector<Vector>& deflation_guesses,
                                                   const NewtonConfig& cfg, double power = 2.0, double shift = 1.0)
{
  ReducedDiscovery out;
  RootSet found(mu);
  auto norm = [](const Vector& v) { return v.norm(); };
  if (auto res = reduced_newton(b, mu, first_guess, cfg); res.converged()) {
    found.try_add(res.solution, norm);
  } else {
    ++out.failed_solves;
  }
  for (const auto& g : deflation_guesses) {
    for (;;) {
      auto res = reduced_deflated_newton(b, mu, g, found.roots(), cfg, power, shift);
      if (!res.converged() || !found.try_add(res.solution, norm)) break;
    }
  }
  out.roots = found.roots();
  return out;
}

inline Vector zero_pad(const Vector& v, Eigen::Index n)
{
  require(v.size() <= n, "zero_pad: vector longer than target size");
  Vector out = Vector::Zero(n);
  out.head(v.size()) = v;
  return out;
}

/// Continuation guesses: reduced ones per parameter value and full-order ones.
/// Reduced guesses produced with a smaller (nested) basis are zero-padded.
class GuessStore {
public:
  void set_reduced(double mu, std::vector<Vector> guesses) { reduced_[mu] = std::move(guesses); }

  std::vector<Vector> reduced(double mu, Eigen::Index basis_size) const
  {
    std::vector<Vector> out;
    if (auto it = reduced_.find(mu); it != reduced_.end()) {
      for (const auto& g : it->second) out.push_back(zero_pad(g, basis_size));
    }
    return out;
  }

  void pad_all(Eigen::Index basis_size)
  {
    for (auto& [mu, gs] : reduced_) {
      for (auto& g : gs) g = zero_pad(g, basis_size);
    }
  }

  const std::vector<Vector>& hf() const { return hf_; }

  /// Adds a full-order guess unless an X-close one is already stored.
  bool add_hf(const ParametricModel& model, const Vector& u)
  {
    RootSet tmp;
    for (const auto& g : hf_) tmp.try_add(g, [&](const Vector& v) { return model.x_norm(v); });
    if (tmp.contains(u, [&](const Vector& v) { return model.x_norm(v); })) return false;
    hf_.push_back(u);
    return true;
  }

private:
  std::map<double, std::vector<Vector>> reduced_;
  std::vector<Vector> hf_;
};

}  // namespace bifrb
