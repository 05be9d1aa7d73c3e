#include "bifrb/nlsolve.hpp"
#include "bifrb/rom.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace bifrb;
using Catch::Matchers::WithinAbs;

namespace {

auto xnorm_of(const ParametricModel& m)
{
  return [&m](const Vector& v) { return m.x_norm(v); };
}

}  // namespace

TEST_CASE("deflation operator values", "[nlsolve]")
{
  FiniteElement1D m(ModelKind::ChafeeInfante1D, 51);
  std::mt19937_64 rng(1);
  const Vector u = testing::random_vector(rng, 51);
  Vector d = testing::random_vector(rng, 51);
  d /= m.x_norm(d);
  DeflationOperator one({u}, 2.0, 1.0, &m.x_matrix());
  REQUIRE_THAT(one.scalar(u + d), WithinAbs(2.0, 1e-12));
  REQUIRE_THROWS_AS(DeflationOperator({u}, 0.5, 1.0), ContractViolation);
  REQUIRE_THROWS_AS(DeflationOperator({u}, 2.0, 0.0), ContractViolation);
  REQUIRE_THROWS_AS(one.scalar(u), NumericalError);

  DeflationOperator three({u, Vector(-u), Vector(2 * u)}, 2.0, 0.3, &m.x_matrix());
  for (int t = 0; t < 50; ++t) REQUIRE(three.scalar(testing::random_vector(rng, 51, 5.0)) >= std::pow(0.3, 3));
}

TEST_CASE("deflation gradient matches finite differences", "[nlsolve][fd]")
{
  FiniteElement1D m(ModelKind::Bratu1D, 201);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    std::vector<Vector> roots;
    const int n_roots = 1 + t % 3;
    for (int i = 0; i < n_roots; ++i) roots.push_back(testing::random_smooth(m, rng, 1.0));
    const bool euclid = t % 2 == 1;
    DeflationOperator op(roots, 1.0 + (t % 4) * 0.5, 0.5 + t % 2, euclid ? nullptr : &m.x_matrix());
    const Vector y = testing::random_smooth(m, rng, 1.0);
    const Vector v = testing::random_vector(rng, 201);
    const double eps = 1e-6 / v.norm();
    const double fd = (op.scalar(y + eps * v) - op.scalar(y - eps * v)) / (2 * eps);
    const double an = op.gradient(y).dot(v);
    REQUIRE(std::abs(fd - an) <= 1e-5 * std::max(std::abs(an), 1e-8 * op.gradient(y).norm() * v.norm()));
  }
}

TEST_CASE("Sherman-Morrison step equals the dense deflated Newton step", "[nlsolve]")
{
  std::mt19937_64 rng(13);
  auto check = [](const Vector& g, const Matrix& j, const DeflationOperator& d, const Vector& y, auto&& norm) {
    const Vector du = Eigen::PartialPivLU<Matrix>(j).solve(-g);
    const double m = d.scalar(y);
    const Vector grad = d.gradient(y);
    const Vector step = du / (1.0 - grad.dot(du) / m);
    const Matrix dense = m * j + g * grad.transpose();
    const Vector direct = Eigen::PartialPivLU<Matrix>(dense).solve(-m * g);
    return norm(Vector(step - direct)) / norm(direct);
  };

  FiniteElement1D m(ModelKind::ChafeeInfante1D, 201);
  for (int t = 0; t < 50; ++t) {
    const double mu = 10.0 + 4.0 * (t % 5) / 4.0;
    const Vector y = testing::random_smooth(m, rng, 1.5);
    DeflationOperator d({Vector::Zero(201), testing::random_smooth(m, rng, 1.0)}, 2.0, 1.0, &m.x_matrix());
    REQUIRE(check(m.residual(y, mu), m.jacobian(y, mu), d, y, [&](const Vector& v) { return m.x_norm(v); }) <= 1e-8);
  }

  BasisMatrix b(m);
  for (double mu : {10.0, 12.0, 15.0}) {
    auto r = newton(m, mu, m.default_guess(), NewtonConfig{});
    b.enrich(r.solution);
  }
  b.enrich(m.interpolate([](double x) { return std::sin(3 * std::numbers::pi * x); }));
  for (int t = 0; t < 50; ++t) {
    const Vector y = testing::random_vector(rng, b.size(), 2.0);
    DeflationOperator d({testing::random_vector(rng, b.size())}, 2.0, 1.0);
    const double err = check(reduced_residual(b, y, 12.0), reduced_jacobian(b, y, 12.0), d, y,
                             [](const Vector& v) { return v.norm(); });
    REQUIRE(err <= 1e-8);
  }
}

TEST_CASE("newton is deflated newton without roots", "[nlsolve]")
{
  FiniteElement1D m(ModelKind::Bratu1D, 101);
  const auto a = newton(m, 2.0, m.default_guess(), NewtonConfig{});
  const auto b = deflated_newton(m, 2.0, m.default_guess(), RootSet(2.0), NewtonConfig{});
  REQUIRE(a.converged());
  REQUIRE(a.iterations == b.iterations);
  REQUIRE((a.solution.array() == b.solution.array()).all());
  REQUIRE(a.residual_norm < 1e-10);
}

TEST_CASE("Bratu roots match the closed-form solution", "[nlsolve]")
{
  FiniteElement1D m(ModelKind::Bratu1D, 201);
  auto lower = newton(m, 1.0, m.default_guess(), NewtonConfig{});
  REQUIRE(lower.converged());
  REQUIRE_THAT(m.functional(lower.solution), WithinAbs(testing::bratu_midpoint(1.0, false), 1e-4));

  // upper branch at mu = 2 by deflation from the zero guess
  RootSet roots(2.0);
  auto low2 = newton(m, 2.0, m.default_guess(), NewtonConfig{});
  roots.try_add(low2.solution, xnorm_of(m));
  auto up2 = deflated_newton(m, 2.0, m.default_guess(), roots, NewtonConfig{});
  REQUIRE(up2.converged());
  REQUIRE_THAT(m.functional(up2.solution), WithinAbs(testing::bratu_midpoint(2.0, true), 1e-3));
}

TEST_CASE("root discovery", "[nlsolve]")
{
  FiniteElement1D ci(ModelKind::ChafeeInfante1D, 201), br(ModelKind::Bratu1D, 201);
  NewtonConfig cfg;

  SECTION("Chafee-Infante: three roots above the pitchfork, one below")
  {
    auto r12 = discover_solutions(ci, 12.0, {ci.default_guess()}, cfg);
    REQUIRE(r12.size() == 3);
    std::vector<double> f;
    for (const auto& u : r12.roots()) f.push_back(ci.functional(u));
    std::ranges::sort(f);
    REQUIRE_THAT(f[0], WithinAbs(-f[2], 1e-8));
    REQUIRE(f[2] > 0.1);
    REQUIRE_THAT(f[1], WithinAbs(0.0, 1e-8));

    auto r5 = discover_solutions(ci, 5.0, {ci.default_guess()}, cfg);
    REQUIRE(r5.size() == 1);
    REQUIRE(ci.x_norm(r5[0]) < 1e-8);
  }

  SECTION("Chafee-Infante deflation from +/- sin")
  {
    RootSet roots(12.0);
    roots.try_add(Vector::Zero(201), xnorm_of(ci));
    auto pos = deflated_newton(ci, 12.0, ci.default_guess(), roots, cfg);
    REQUIRE(pos.converged());
    REQUIRE(ci.functional(pos.solution) > 0.1);
    roots.try_add(pos.solution, xnorm_of(ci));
    auto neg = deflated_newton(ci, 12.0, Vector(-ci.default_guess()), roots, cfg);
    REQUIRE(neg.converged());
    REQUIRE_THAT(ci.functional(neg.solution), WithinAbs(-ci.functional(pos.solution), 1e-8));
  }

  SECTION("Bratu beyond the fold has no root")
  {
    REQUIRE(discover_solutions(br, 3.6, {br.default_guess()}, cfg).empty());
  }

  SECTION("Bratu at mu = 1")
  {
    // From the zero guess alone, undamped deflation with r = 2, sigma = 1
    // overshoots and diverges, so only the lower root is found.
    auto from_zero = discover_solutions(br, 1.0, {br.default_guess()}, cfg);
    REQUIRE(from_zero.size() == 1);
    REQUIRE_THAT(br.functional(from_zero[0]), WithinAbs(testing::bratu_midpoint(1.0, false), 1e-4));

    // With a continuation guess from the upper branch at mu = 2 both appear.
    RootSet r2 = discover_solutions(br, 2.0, {br.default_guess()}, cfg);
    REQUIRE(r2.size() == 2);
    std::vector<Vector> guesses{br.default_guess()};
    for (const auto& u : r2.roots()) guesses.push_back(u);
    auto both = discover_solutions(br, 1.0, guesses, cfg);
    REQUIRE(both.size() == 2);
  }

  SECTION("deflation never returns a deflated root")
  {
    std::mt19937_64 rng(2);
    RootSet roots = discover_solutions(ci, 12.0, {ci.default_guess()}, cfg);
    for (int t = 0; t < 10; ++t) {
      auto res = deflated_newton(ci, 12.0, testing::random_smooth(ci, rng, 2.0), roots, cfg);
      if (res.converged()) REQUIRE_FALSE(roots.contains(res.solution, xnorm_of(ci)));
    }
  }

  SECTION("roots of G are roots of the deflated residual")
  {
    RootSet roots = discover_solutions(ci, 12.0, {ci.default_guess()}, cfg);
    DeflationOperator d({roots[0]}, 2.0, 1.0, &ci.x_matrix());
    const Vector g = ci.residual(roots[1], 12.0);
    REQUIRE(ci.dual_norm(Vector(d.scalar(roots[1]) * g)) < 1e-9);
  }
}

TEST_CASE("solver guards", "[nlsolve]")
{
  FiniteElement1D br(ModelKind::Bratu1D, 51);
  NewtonConfig bad;
  bad.tol = 0.0;
  REQUIRE_THROWS_AS(newton(br, 1.0, br.default_guess(), bad), ContractViolation);
  REQUIRE_THROWS_AS(newton(br, 1.0, Vector::Zero(3), NewtonConfig{}), ContractViolation);
  NewtonConfig few;
  few.max_iter = 1;
  auto r = newton(br, 3.0, br.default_guess(), few);
  REQUIRE(r.status == SolveStatus::MaxIterations);
}
