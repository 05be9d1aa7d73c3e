#pragma once

#include "bifrb/analysis.hpp"
#include "bifrb/estimators.hpp"
#include "bifrb/greedy.hpp"
#include "bifrb/model.hpp"
#include "bifrb/pod.hpp"
#include "bifrb/rom.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace bifrb::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Shortest form that round-trips: 17 significant digits.
inline std::string fmt(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const fs::path& p)
{
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  return f;
}

inline void write_json(const fs::path& p, const json& j)
{
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

inline json read_json(const fs::path& p)
{
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "'");
  return json::parse(f);
}

inline std::vector<std::vector<double>> read_csv(const fs::path& p, bool skip_header = true)
{
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  if (skip_header) std::getline(f, line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

// basis.csv: one row per dof, one column per basis vector.
inline void write_basis(const fs::path& dir, const BasisMatrix& b, ModelKind kind, int mesh_size,
                        const std::vector<double>& mu_train)
{
  auto f = open_out(dir / "basis.csv");
  for (Eigen::Index j = 0; j < b.size(); ++j) f << (j ? "," : "") << "b" << j;
  f << '\n';
  for (Eigen::Index i = 0; i < b.n_dofs(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) f << (j ? "," : "") << fmt(b.matrix()(i, j));
    f << '\n';
  }
  write_json(dir / "basis.json",
             {{"model_kind", to_string(kind)}, {"mesh_size", mesh_size}, {"N", b.size()}, {"mu_train", mu_train}});
}

struct LoadedBasis {
  BasisMatrix basis;
  ModelKind kind;
  int mesh_size;
  std::vector<double> mu_train;
};

/// Loads basis.csv + basis.json from `dir`; the model must match the sidecar.
inline LoadedBasis load_basis(const fs::path& dir, const FiniteElement1D& model, double tol = 1e-10)
{
  const json meta = read_json(dir / "basis.json");
  const auto kind = model_kind_from_string(meta.at("model_kind").get<std::string>());
  const int mesh = meta.at("mesh_size").get<int>();
  const auto n = meta.at("N").get<Eigen::Index>();
  require(kind == model.kind() && mesh == model.mesh_size(), "load_basis: model does not match basis.json");
  const auto rows = read_csv(dir / "basis.csv");
  require(static_cast<Eigen::Index>(rows.size()) == model.n_dofs(), "load_basis: row count differs from mesh size");
  Matrix m(model.n_dofs(), n);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    require(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) == n,
            "load_basis: column count differs from N");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return {BasisMatrix(model, std::move(m), tol), kind, mesh, meta.at("mu_train").get<std::vector<double>>()};
}

// snapshots.csv: one row per snapshot, mu, branch, then the nodal values.
inline void write_snapshots(const fs::path& p, const SnapshotMatrix& s)
{
  auto f = open_out(p);
  f << "mu,branch";
  if (s.size()) {
    for (Eigen::Index i = 0; i < s.states.front().size(); ++i) f << ",u" << i;
  }
  f << '\n';
  for (std::size_t k = 0; k < s.size(); ++k) {
    f << fmt(s.mu[k]) << ',' << s.branch[k];
    for (Eigen::Index i = 0; i < s.states[k].size(); ++i) f << ',' << fmt(s.states[k](i));
    f << '\n';
  }
}

inline SnapshotMatrix read_snapshots(const fs::path& p)
{
  SnapshotMatrix s;
  for (const auto& row : read_csv(p)) {
    require(row.size() >= 2, "read_snapshots: malformed row");
    Vector u(static_cast<Eigen::Index>(row.size() - 2));
    for (std::size_t i = 2; i < row.size(); ++i) u(static_cast<Eigen::Index>(i - 2)) = row[i];
    s.add(row[0], static_cast<int>(row[1]), std::move(u));
  }
  return s;
}

inline void write_estimators(const fs::path& p, const EstimatorSet& set)
{
  auto f = open_out(p);
  f << "mu,branch,delta,beta,tau,valid\n";
  for (const auto& e : set.entries) {
    f << fmt(e.mu) << ',' << e.branch << ',' << fmt(e.delta) << ',' << fmt(e.detail.beta) << ','
      << fmt(e.detail.tau) << ',' << (e.valid ? 1 : 0) << '\n';
  }
}

inline void write_diagram(const fs::path& p, const BifurcationDiagram& d)
{
  auto f = open_out(p);
  f << "mu,branch,value\n";
  for (const auto& r : d.rows) f << fmt(r.mu) << ',' << r.branch << ',' << fmt(r.value) << '\n';
}

inline void write_errors(const fs::path& p, const ErrorSweep& s)
{
  auto f = open_out(p);
  f << "mu,branch,reduced,projection,estimator,flags\n";
  for (const auto& r : s.rows) {
    f << fmt(r.mu) << ',' << r.branch << ',' << fmt(r.reduced) << ',' << fmt(r.projection) << ','
      << fmt(r.estimator) << ',';
    for (std::size_t i = 0; i < r.flags.size(); ++i) f << (i ? ";" : "") << r.flags[i];
    f << '\n';
  }
}

inline void write_error_vs_n(const fs::path& p, const std::vector<ErrorVsNRow>& rows)
{
  auto f = open_out(p);
  f << "strategy,N,max_error,avg_error,max_error_unflagged,flagged\n";
  for (const auto& r : rows) {
    f << r.strategy << ',' << r.n << ',' << fmt(r.max_error) << ',' << fmt(r.avg_error) << ','
      << fmt(r.max_error_unflagged) << ',' << r.flagged << '\n';
  }
}

inline json to_json(const GreedyReport& r)
{
  json iters = json::array();
  for (const auto& it : r.iterations) {
    json j{{"iteration", it.iteration},     {"mu", it.mu},
           {"branch", it.branch},           {"estimator_max", it.estimator_max},
           {"basis_size", it.basis_size},   {"added", it.added},
           {"orthonormality_error", it.orthonormality_error},
           {"reselected", it.reselected},   {"train_size", it.train_size},
           {"refined", it.refined},         {"notes", it.notes}};
    j["mu_bif"] = it.mu_bif ? json(*it.mu_bif) : json(nullptr);
    iters.push_back(std::move(j));
  }
  json j{{"strategy", r.strategy},
         {"mu0", r.mu0},
         {"status", to_string(r.status)},
         {"iterations", std::move(iters)},
         {"final_max_delta", r.final_max_delta},
         {"final_train", r.final_train},
         {"notes", r.notes}};
  j["mu_star"] = r.mu_star ? json(*r.mu_star) : json(nullptr);
  return j;
}

}  // namespace bifrb::io
