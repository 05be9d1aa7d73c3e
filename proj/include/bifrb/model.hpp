#pragma once

#include "bifrb/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace bifrb {

/// One-dimensional parameter range with an ordered, duplicate-free training grid.
class ParameterSpace {
public:
  ParameterSpace(double lower, double upper, std::vector<double> train_points)
      : lower_(lower), upper_(upper), train_(std::move(train_points))
  {
    require(std::isfinite(lower) && std::isfinite(upper) && lower < upper,
            "ParameterSpace: lower must be < upper");
    for (std::size_t i = 0; i < train_.size(); ++i) {
      require(train_[i] >= lower_ && train_[i] <= upper_,
              "ParameterSpace: train point outside [lower, upper]");
      if (i > 0) require(train_[i] > train_[i - 1], "ParameterSpace: train points must be strictly increasing");
    }
  }

  /// `count` equispaced points including both endpoints.
  static ParameterSpace equispaced(double lower, double upper, int count)
  {
    require(count >= 2, "ParameterSpace: need at least 2 points");
    std::vector<double> pts(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) pts[static_cast<std::size_t>(i)] = lower + (upper - lower) * i / (count - 1);
    pts.back() = upper;
    return {lower, upper, std::move(pts)};
  }

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  const std::vector<double>& train_points() const { return train_; }
  std::size_t size() const { return train_.size(); }

  bool contains_point(double mu) const { return std::ranges::binary_search(train_, mu); }

  /// Inserts points (kept sorted, exact duplicates dropped).
  void insert(const std::vector<double>& pts)
  {
    for (double p : pts) {
      require(p >= lower_ && p <= upper_, "ParameterSpace: inserted point outside range");
      auto it = std::ranges::lower_bound(train_, p);
      if (it == train_.end() || *it != p) train_.insert(it, p);
    }
  }

private:
  double lower_;
  double upper_;
  std::vector<double> train_;
};

enum class ModelKind { Bratu1D, ChafeeInfante1D };

inline std::string_view to_string(ModelKind k)
{
  return k == ModelKind::Bratu1D ? "bratu" : "chafee";
}

inline ModelKind model_kind_from_string(std::string_view s)
{
  if (s == "bratu" || s == "Bratu1D") return ModelKind::Bratu1D;
  if (s == "chafee" || s == "chafee-infante" || s == "ChafeeInfante1D") return ModelKind::ChafeeInfante1D;
  throw ContractViolation("unknown model kind '" + std::string(s) + "'");
}

/// A parametric nonlinear problem G(u; mu) = 0 with an SPD inner-product matrix X.
///
/// Everything downstream (solvers, reduced bases, estimators, greedy drivers)
/// only talks to this interface. Implementations must be immutable after
/// construction so that concurrent evaluations are safe.
class ParametricModel {
public:
  virtual ~ParametricModel() = default;

  virtual Eigen::Index n_dofs() const = 0;
  virtual Vector residual(const Vector& u, double mu) const = 0;
  virtual Matrix jacobian(const Vector& u, double mu) const = 0;
  virtual bool symmetric_jacobian() const { return false; }
  virtual Vector default_guess() const = 0;
  /// Scalar output used to label branches (a point evaluation for the built-in models).
  virtual double functional(const Vector& u) const = 0;
  /// Local Lipschitz constant of u -> Jac(u) in the X-operator norm on the
  /// ball of the given radius around a state whose X-norm is `center_norm`.
  virtual double lipschitz_constant(double mu, double center_norm, double radius) const = 0;

  const Matrix& x_matrix() const { return x_; }
  const Eigen::LLT<Matrix>& x_factor() const { return x_llt_; }

  double x_inner(const Vector& u, const Vector& v) const
  {
    require_size(u, n_dofs(), "x_inner");
    require_size(v, n_dofs(), "x_inner");
    return u.dot(x_ * v);
  }
  double x_norm(const Vector& u) const { return std::sqrt(std::max(0.0, x_inner(u, u))); }
  /// Riesz norm of a residual functional: sqrt(g^T X^{-1} g).
  double dual_norm(const Vector& g) const
  {
    require_size(g, n_dofs(), "dual_norm");
    const Vector y = x_llt_.matrixL().solve(g);
    return y.norm();
  }

protected:
  void set_x_matrix(Matrix x)
  {
    x_ = std::move(x);
    x_llt_.compute(x_);
    if (x_llt_.info() != Eigen::Success) throw NumericalError("inner-product matrix is not SPD");
  }

private:
  Matrix x_;
  Eigen::LLT<Matrix> x_llt_;
};

namespace detail {

// Two-point Gauss rule on the reference element [0, 1].
inline constexpr std::array<double, 2> kGaussT{0.5 - 0.5 / std::numbers::sqrt3, 0.5 + 0.5 / std::numbers::sqrt3};

}  // namespace detail

/// Piecewise-linear finite elements on (0,1), homogeneous Dirichlet data,
/// uniform mesh with `mesh_size` interior nodes. The nonlinearity is
/// integrated with two Gauss points per element.
class FiniteElement1D final : public ParametricModel {
public:
  FiniteElement1D(ModelKind kind, int mesh_size) : kind_(kind), n_(mesh_size)
  {
    require(mesh_size >= 1, "FiniteElement1D: mesh_size must be >= 1");
    h_ = 1.0 / (n_ + 1);
    Matrix k = Matrix::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) {
      k(i, i) = 2.0 / h_;
      if (i + 1 < n_) {
        k(i, i + 1) = -1.0 / h_;
        k(i + 1, i) = -1.0 / h_;
      }
    }
    set_x_matrix(std::move(k));
    if (kind_ == ModelKind::ChafeeInfante1D) rho4_sq_ = compute_l4_embedding_sq();
  }

  ModelKind kind() const { return kind_; }
  int mesh_size() const { return n_; }
  double mesh_width() const { return h_; }
  Eigen::Index n_dofs() const override { return n_; }
  bool symmetric_jacobian() const override { return true; }

  /// Nodal interpolant of a continuous function (boundary nodes dropped).
  template <class F>
  Vector interpolate(F&& f) const
  {
    Vector v(n_);
    for (int i = 0; i < n_; ++i) v(i) = f(node(i));
    return v;
  }

  double node(int i) const { return (i + 1) * h_; }

  Vector default_guess() const override
  {
    if (kind_ == ModelKind::Bratu1D) return Vector::Zero(n_);
    return interpolate([](double x) { return std::sin(std::numbers::pi * x); });
  }

  double functional(const Vector& u) const override
  {
    require_size(u, n_, "functional");
    const double s = 0.5 / h_ - 1.0;  // fractional node index of x = 1/2
    const int i = static_cast<int>(std::floor(s));
    const double t = s - i;
    return (1.0 - t) * nodal(u, i) + t * nodal(u, i + 1);
  }

  Vector residual(const Vector& u, double mu) const override
  {
    check_inputs(u, mu);
    Vector g = x_matrix() * u;
    for (int e = 0; e <= n_; ++e) {
      const double ul = nodal(u, e - 1);
      const double ur = nodal(u, e);
      for (double t : detail::kGaussT) {
        const double uq = (1.0 - t) * ul + t * ur;
        const double load = 0.5 * h_ * mu * source(uq);
        if (e - 1 >= 0) g(e - 1) -= load * (1.0 - t);
        if (e < n_) g(e) -= load * t;
      }
    }
    return g;
  }

  Matrix jacobian(const Vector& u, double mu) const override
  {
    check_inputs(u, mu);
    Matrix j = x_matrix();
    for (int e = 0; e <= n_; ++e) {
      const double ul = nodal(u, e - 1);
      const double ur = nodal(u, e);
      for (double t : detail::kGaussT) {
        const double uq = (1.0 - t) * ul + t * ur;
        const double c = 0.5 * h_ * mu * source_derivative(uq);
        const std::array<double, 2> phi{1.0 - t, t};
        const std::array<int, 2> idx{e - 1, e};
        for (int a = 0; a < 2; ++a) {
          if (idx[a] < 0 || idx[a] >= n_) continue;
          for (int b = 0; b < 2; ++b) {
            if (idx[b] < 0 || idx[b] >= n_) continue;
            j(idx[a], idx[b]) -= c * phi[a] * phi[b];
          }
        }
      }
    }
    return j;
  }

  double lipschitz_constant(double mu, double center_norm, double radius) const override
  {
    require(radius >= 0.0, "lipschitz_constant: radius must be >= 0");
    require(center_norm >= 0.0, "lipschitz_constant: center norm must be >= 0");
    const double r = center_norm + radius;
    if (kind_ == ModelKind::Bratu1D) {
      constexpr double rho_inf = 0.5;
      return std::abs(mu) * rho_inf * rho_inf * std::exp(rho_inf * r);
    }
    // 3|u^2 - w^2||v||q| has four L4 factors (rho4^4 <= rho4^2 since rho4 < 1)
    return 6.0 * std::abs(mu) * rho4_sq_ * r;
  }

  /// sup ||v||_{L4}^2 / ||v'||_{L2}^2 over the discrete space (quadrature-consistent).
  double l4_embedding_sq() const
  {
    return rho4_sq_ > 0.0 ? rho4_sq_ : compute_l4_embedding_sq();
  }

  /// Discrete L^p norm^p evaluated with the model's quadrature.
  double lp_norm_pow(const Vector& v, int p) const
  {
    require_size(v, n_, "lp_norm_pow");
    double acc = 0.0;
    for (int e = 0; e <= n_; ++e) {
      const double vl = nodal(v, e - 1);
      const double vr = nodal(v, e);
      for (double t : detail::kGaussT) acc += 0.5 * h_ * std::pow(std::abs((1.0 - t) * vl + t * vr), p);
    }
    return acc;
  }

  /// Load vector of v^3 against the hat functions (quadrature-consistent).
  Vector cubic_load(const Vector& v) const
  {
    Vector f = Vector::Zero(n_);
    for (int e = 0; e <= n_; ++e) {
      const double vl = nodal(v, e - 1);
      const double vr = nodal(v, e);
      for (double t : detail::kGaussT) {
        const double vq = (1.0 - t) * vl + t * vr;
        const double w = 0.5 * h_ * vq * vq * vq;
        if (e - 1 >= 0) f(e - 1) += w * (1.0 - t);
        if (e < n_) f(e) += w * t;
      }
    }
    return f;
  }

private:
  double nodal(const Vector& u, int i) const { return (i < 0 || i >= n_) ? 0.0 : u(i); }

  double source(double u) const { return kind_ == ModelKind::Bratu1D ? std::exp(u) : u - u * u * u; }
  double source_derivative(double u) const
  {
    return kind_ == ModelKind::Bratu1D ? std::exp(u) : 1.0 - 3.0 * u * u;
  }

  void check_inputs(const Vector& u, double mu) const
  {
    require_size(u, n_, "FiniteElement1D");
    require(std::isfinite(mu), "FiniteElement1D: mu must be finite");
  }

  // Nonlinear inverse power iteration for the maximiser of ||v||_4^2 / ||v'||^2:
  // its Euler-Lagrange equation is the eigenproblem -v'' = lambda v^3.
  double compute_l4_embedding_sq() const
  {
    Vector v = interpolate([](double x) { return std::sin(std::numbers::pi * x); });
    v /= x_norm(v);
    double prev = std::sqrt(lp_norm_pow(v, 4));
    for (int it = 0; it < 500; ++it) {
      Vector w = x_factor().solve(cubic_load(v));
      w /= x_norm(w);
      const double cur = std::sqrt(lp_norm_pow(w, 4));
      v = std::move(w);
      if (std::abs(cur - prev) < 1e-8 * std::max(1.0, cur) && it > 0) return cur;
      prev = cur;
    }
    throw NumericalError("Sobolev embedding fixed-point iteration did not converge in 500 iterations");
  }

  ModelKind kind_;
  int n_;
  double h_ = 0.0;
  double rho4_sq_ = 0.0;
};

}  // namespace bifrb
