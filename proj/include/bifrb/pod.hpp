#pragma once

#include "bifrb/model.hpp"
#include "bifrb/rom.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace bifrb {

/// Full-order snapshots with their (mu, branch) labels.
struct SnapshotMatrix {
  std::vector<Vector> states;
  std::vector<double> mu;
  std::vector<int> branch;

  std::size_t size() const { return states.size(); }

  void add(double m, int b, Vector u)
  {
    if (!states.empty()) require_size(u, states.front().size(), "SnapshotMatrix");
    states.push_back(std::move(u));
    mu.push_back(m);
    branch.push_back(b);
  }

  Matrix matrix() const
  {
    if (states.empty()) return {};
    Matrix s(states.front().size(), static_cast<Eigen::Index>(states.size()));
    for (std::size_t j = 0; j < states.size(); ++j) s.col(static_cast<Eigen::Index>(j)) = states[j];
    return s;
  }
};

struct PodResult {
  BasisMatrix basis;
  std::vector<double> singular_values;  ///< all of them, non-increasing
  bool rank_deficient = false;          ///< fewer than n_modes modes were available
  std::string warning;
};

/// X-weighted POD. The singular values are those of L^T S (X = L L^T), whose
/// squares are the eigenvalues of the snapshot Gramian S^T X S; modes are
/// L^{-T} times the left singular vectors, so they are X-orthonormal.
inline PodResult pod_basis(const SnapshotMatrix& s, const ParametricModel& model, int n_modes)
{
  require(n_modes >= 0, "pod_basis: n_modes must be >= 0");
  require(static_cast<std::size_t>(n_modes) <= s.size(), "pod_basis: n_modes exceeds the number of snapshots");
  PodResult out{BasisMatrix(model), {}, false, {}};
  if (s.size() == 0) return out;
  const Matrix snaps = s.matrix();
  require(snaps.rows() == model.n_dofs(), "pod_basis: snapshot length must equal n_dofs");

  const auto& llt = model.x_factor();
  const Matrix weighted = llt.matrixU() * snaps;  // L^T S
  Eigen::BDCSVD<Matrix> svd(weighted, Eigen::ComputeThinU);
  if (svd.info() != Eigen::Success) throw NumericalError("pod_basis: SVD failed");
  const Vector& sv = svd.singularValues();
  out.singular_values.assign(sv.data(), sv.data() + sv.size());

  const double sigma1 = sv.size() > 0 ? sv(0) : 0.0;
  const double cut = static_cast<double>(std::max(weighted.rows(), weighted.cols())) *
                     std::numeric_limits<double>::epsilon() * sigma1;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut && sv(rank) > 0.0) ++rank;
  const Eigen::Index n = std::min<Eigen::Index>(rank, n_modes);
  if (n < n_modes) {
    out.rank_deficient = true;
    out.warning = "rank " + std::to_string(rank) + " below requested " + std::to_string(n_modes) + " modes";
  }
  if (n > 0) {
    const Matrix modes = llt.matrixU().solve(Matrix(svd.matrixU().leftCols(n)));
    out.basis = BasisMatrix(model, modes);
  }
  return out;
}

/// ||S - B B^T X S||_F measured column-wise in the X norm.
inline double pod_projection_error(const SnapshotMatrix& s, const BasisMatrix& b)
{
  double acc = 0.0;
  for (const auto& u : s.states) {
    const Vector r = b.empty() ? u : Vector(u - b.lift(b.project(u)));
    acc += b.model().x_inner(r, r);
  }
  return std::sqrt(acc);
}

struct BranchPod {
  PodResult pod;
  std::size_t n_snapshots = 0;
};

struct BranchwisePod {
  std::map<int, BranchPod> bases;
  std::vector<int> excluded;
  std::vector<std::string> warnings;
};

/// One POD per branch label from that branch's snapshots only. Branches whose
/// snapshots are all zero (or empty) are excluded.
inline BranchwisePod branchwise_pod(const ParametricModel& model, const SnapshotMatrix& s, int n_modes)
{
  BranchwisePod out;
  std::map<int, SnapshotMatrix> split;
  for (std::size_t i = 0; i < s.size(); ++i) split[s.branch[i]].add(s.mu[i], s.branch[i], s.states[i]);
  for (auto& [branch, snaps] : split) {
    PodResult p = pod_basis(snaps, model, std::min<int>(n_modes, static_cast<int>(snaps.size())));
    if (p.basis.empty()) {
      out.excluded.push_back(branch);
      out.warnings.push_back("branch " + std::to_string(branch) + " excluded: rank 0");
      continue;
    }
    if (p.rank_deficient || static_cast<std::size_t>(n_modes) > snaps.size()) {
      out.warnings.push_back("branch " + std::to_string(branch) + ": " +
                             (p.warning.empty() ? "fewer snapshots than modes" : p.warning));
    }
    const std::size_t m = snaps.size();
    out.bases.emplace(branch, BranchPod{std::move(p), m});
  }
  return out;
}

}  // namespace bifrb
