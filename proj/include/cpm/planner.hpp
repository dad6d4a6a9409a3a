#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"
#include "cpm/image.hpp"
#include "cpm/rng.hpp"
#include "cpm/spectralize.hpp"

namespace cpm {

/// Finite set of pixel shifts kept sorted lexicographically (dr, then dc),
/// which fixes the row order of everything derived from it.
class ShiftSet {
 public:
  ShiftSet() = default;
  explicit ShiftSet(std::vector<PixelShift> elems) : elems_(std::move(elems)) {
    std::sort(elems_.begin(), elems_.end());
    elems_.erase(std::unique(elems_.begin(), elems_.end()), elems_.end());
    if (elems_.empty()) throw validation_error("shift set must be nonempty");
  }

  const std::vector<PixelShift>& elements() const { return elems_; }
  Index size() const { return static_cast<Index>(elems_.size()); }
  bool contains(PixelShift p) const {
    return std::binary_search(elems_.begin(), elems_.end(), p);
  }
  /// Position of p in the sorted order, or -1.
  Index position(PixelShift p) const {
    auto it = std::lower_bound(elems_.begin(), elems_.end(), p);
    if (it == elems_.end() || !(*it == p)) return -1;
    return static_cast<Index>(it - elems_.begin());
  }
  /// Bounding extents (height, width) of the set.
  std::pair<std::int64_t, std::int64_t> bounding_extent() const {
    std::int64_t rlo = elems_[0].dr, rhi = rlo, clo = elems_[0].dc, chi = clo;
    for (const auto& e : elems_) {
      rlo = std::min(rlo, e.dr);
      rhi = std::max(rhi, e.dr);
      clo = std::min(clo, e.dc);
      chi = std::max(chi, e.dc);
    }
    return {rhi - rlo + 1, chi - clo + 1};
  }

  bool operator==(const ShiftSet&) const = default;

 private:
  std::vector<PixelShift> elems_;
};

/// { e + p : e in E, p in P }, deduplicated.
inline ShiftSet minkowski_sum(const ShiftSet& E, const Pattern& P) {
  std::vector<PixelShift> sums;
  sums.reserve(static_cast<std::size_t>(E.size() * P.size()));
  for (const auto& e : E.elements())
    for (const auto& p : P.offsets()) sums.push_back(e + p);
  return ShiftSet(std::move(sums));
}

/// |E + P| / |E|: effective measurements needed per virtual measurement.
inline double alpha_ratio(const ShiftSet& E, const Pattern& P) {
  return static_cast<double>(minkowski_sum(E, P).size()) / static_cast<double>(E.size());
}

/// Balanced partition of total into n_parts parts differing by at most one,
/// largest parts first: with total = q*n_parts + r, that is r parts of q+1
/// followed by n_parts - r parts of q.
inline std::vector<std::int64_t> balanced_partition(std::int64_t total, std::int64_t n_parts) {
  if (n_parts < 1 || total < n_parts)
    throw validation_error("balanced_partition needs total >= n_parts >= 1");
  const std::int64_t q = total / n_parts, r = total % n_parts;
  std::vector<std::int64_t> v(static_cast<std::size_t>(n_parts), q);
  for (std::int64_t i = 0; i < r; ++i) v[static_cast<std::size_t>(i)] = q + 1;
  return v;
}

/// Sum over i of max(v_i, v_{i-1}, ..., v_{i-a+1}); v is the finitely
/// supported sequence v_0..v_{h-1}, zero elsewhere.
inline std::int64_t window_max_sum(const std::vector<std::int64_t>& v, std::int64_t a) {
  if (a < 1) throw validation_error("window length must be positive");
  const std::int64_t h = static_cast<std::int64_t>(v.size());
  std::int64_t total = 0;
  for (std::int64_t i = 0; i < h + a - 1; ++i) {
    std::int64_t best = 0;
    for (std::int64_t k = std::max<std::int64_t>(0, i - a + 1); k <= std::min(i, h - 1); ++k)
      best = std::max(best, v[static_cast<std::size_t>(k)]);
    total += best;
  }
  return total;
}

/// Rows-of-a-staircase measurement set: h rows, row i holding the first
/// width[i] columns. Contains (0,0) and has exactly sum(width) elements.
inline ShiftSet staircase_set(const std::vector<std::int64_t>& widths) {
  std::vector<PixelShift> elems;
  for (std::size_t i = 0; i < widths.size(); ++i)
    for (std::int64_t j = 0; j < widths[i]; ++j)
      elems.push_back({static_cast<std::int64_t>(i), j});
  return ShiftSet(std::move(elems));
}

/// Cost of measuring an a x b rectangular pattern with an A-element set of
/// height h, up to constants: (a-1)*ceil(A/h) + (b-1)*h.
inline std::int64_t rect_plan_objective(std::int64_t a, std::int64_t b, std::int64_t A,
                                        std::int64_t h) {
  const std::int64_t ceil_div = (A + h - 1) / h;
  return (a - 1) * ceil_div + (b - 1) * h;
}

/// Optimal measurement set for an a x b rectangular pattern with |E| = A picks
/// the height h minimizing rect_plan_objective (ties to the smaller h) and
/// fills the rows as evenly as possible.
inline std::pair<std::int64_t, ShiftSet> plan_rectangular(std::int64_t a, std::int64_t b,
                                                          std::int64_t A) {
  if (a < 1 || b < 1 || A < 1) throw validation_error("plan_rectangular needs a, b, A >= 1");
  if (a == 1 && b == 1) {
    // single-pixel pattern: the cost (a-1)*ceil(A/h) + (b-1)*h is identically
    // zero, every A-set works; take the near-square staircase so the set also
    // fits image grids
    std::int64_t h = 1;
    while (h * h < A) ++h;
    return {h, staircase_set(balanced_partition(A, h))};
  }
  std::int64_t best_h = 1;
  std::int64_t best_val = rect_plan_objective(a, b, A, 1);
  for (std::int64_t h = 2; h <= A; ++h) {
    const std::int64_t val = rect_plan_objective(a, b, A, h);
    if (val < best_val) {
      best_val = val;
      best_h = h;
    }
  }
  return {best_h, staircase_set(balanced_partition(A, best_h))};
}

/// A shift-measurement design: the virtual set E, the effective set E+P, the
/// overhead ratio, and the (i, j) -> row-of-E+P lookup used to reconstruct
/// virtual measurements. The base measurement f is attached separately.
struct MeasurementPlan {
  Pattern pattern;
  ShiftSet E;
  ShiftSet EP;
  double alpha = 0.0;
  std::int64_t h = 0;
  Eigen::VectorXd f;  // base measurement; empty until drawn
  std::uint64_t seed = 0;
  std::vector<Index> ep_rows;  // |E| x |P| row-major

  Index ep_row(Index i, Index j) const {
    const Index np = pattern.size();
    if (i < 0 || i >= E.size() || j < 0 || j >= np)
      throw validation_error("plan lookup out of range");
    const Index row = ep_rows[static_cast<std::size_t>(i * np + j)];
    if (row < 0 || row >= EP.size()) throw validation_error("corrupt measurement plan");
    return row;
  }
};

/// Assembles the plan bookkeeping (E+P, ratio, row lookup) for a given
/// measurement set.
inline MeasurementPlan make_plan(const Pattern& P, ShiftSet E, std::int64_t h = 0) {
  MeasurementPlan plan;
  plan.pattern = P;
  plan.E = std::move(E);
  plan.EP = minkowski_sum(plan.E, P);
  plan.alpha = static_cast<double>(plan.EP.size()) / static_cast<double>(plan.E.size());
  plan.h = h > 0 ? h : plan.E.bounding_extent().first;
  plan.ep_rows.resize(static_cast<std::size_t>(plan.E.size() * P.size()));
  for (Index i = 0; i < plan.E.size(); ++i)
    for (Index j = 0; j < P.size(); ++j) {
      const PixelShift sum =
          plan.E.elements()[static_cast<std::size_t>(i)] + P.offsets()[static_cast<std::size_t>(j)];
      plan.ep_rows[static_cast<std::size_t>(i * P.size() + j)] = plan.EP.position(sum);
    }
  return plan;
}

/// Plans measurements for a pattern via its bounding rectangle; the true
/// pattern (not the rectangle) forms E+P, so nothing is measured for offsets
/// the pattern does not contain.
inline MeasurementPlan plan_for_pattern(const Pattern& P, std::int64_t A) {
  const auto [a, b] = P.bounding_extent();
  auto [h, E] = plan_rectangular(a, b, A);
  return make_plan(P, std::move(E), h);
}

/// Whether the effective measurement set fits inside the grid without
/// wrapping onto itself.
inline bool plan_fits(const MeasurementPlan& plan, const GridDims& dims) {
  const auto [hh, ww] = plan.EP.bounding_extent();
  return hh <= dims.n_rows && ww <= dims.n_cols;
}

/// Attaches the seeded Gaussian base measurement to a plan.
inline void draw_measurement(MeasurementPlan& plan, const GridDims& dims, std::uint64_t seed) {
  plan.seed = seed;
  plan.f = Rng(split_seed(seed, 0)).normal_vector(dims.n_pixels());
}

/// The physically taken measurements: one row per shift e' of the set,
/// each row being (Q_{e'} f)^T.
struct EffectiveSensing {
  Eigen::VectorXd f;
  ShiftSet shifts;
  GridDims dims;

  Index rows() const { return shifts.size(); }

  /// Dense |shifts| x n_pixels sensing matrix.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd F(shifts.size(), dims.n_pixels());
    for (Index i = 0; i < shifts.size(); ++i)
      F.row(i) = apply_qp(f, shifts.elements()[static_cast<std::size_t>(i)], dims).transpose();
    return F;
  }

  /// Measures every band of X: row i is (Q_{e'_i} f)^T X.
  Eigen::MatrixXd measure(const MultispectralImage& X) const {
    if (X.dims != dims) throw validation_error("effective sensing grid does not match image");
    Eigen::MatrixXd M(shifts.size(), X.n_bands());
    for (Index i = 0; i < shifts.size(); ++i) {
      const Eigen::VectorXd row = apply_qp(f, shifts.elements()[static_cast<std::size_t>(i)], dims);
      M.row(i) = (row.transpose() * X.data);
    }
    return M;
  }
};

inline EffectiveSensing build_effective_sensing(Eigen::VectorXd f, ShiftSet shifts,
                                                const GridDims& dims) {
  if (f.size() != dims.n_pixels())
    throw validation_error("base measurement length does not match grid");
  return {std::move(f), std::move(shifts), dims};
}

/// Rebuilds the virtual measurements (those of the spectralized image) from
/// the effective ones by duplicating and reordering rows: block (i, j) of the
/// result is the row of M_eff taken at shift e_i + p_j.
inline Eigen::MatrixXd reconstruct_virtual(const Eigen::MatrixXd& M_eff,
                                           const MeasurementPlan& plan) {
  if (M_eff.rows() != plan.EP.size())
    throw validation_error("effective measurement rows do not match the plan");
  const Index nB = M_eff.cols(), nE = plan.E.size(), nP_off = plan.pattern.size();
  Eigen::MatrixXd M_virt(nE, nB * nP_off);
  for (Index i = 0; i < nE; ++i)
    for (Index j = 0; j < nP_off; ++j)
      M_virt.block(i, j * nB, 1, nB) = M_eff.row(plan.ep_row(i, j));
  return M_virt;
}

/// Virtual sensing applied to a vector: component i is <Q_{e_i} f, u>.
inline Eigen::VectorXd apply_virtual_sensing(const Eigen::VectorXd& f, const ShiftSet& E,
                                             const GridDims& dims, const Eigen::VectorXd& u) {
  if (u.size() != dims.n_pixels())
    throw validation_error("apply_virtual_sensing: vector does not match grid");
  Eigen::VectorXd out(E.size());
  for (Index i = 0; i < E.size(); ++i)
    out[i] = apply_qp(f, E.elements()[static_cast<std::size_t>(i)], dims).dot(u);
  return out;
}

/// Adjoint of apply_virtual_sensing: sum_i w_i Q_{e_i} f.
inline Eigen::VectorXd apply_virtual_sensing_adjoint(const Eigen::VectorXd& f, const ShiftSet& E,
                                                     const GridDims& dims,
                                                     const Eigen::VectorXd& w) {
  if (w.size() != E.size())
    throw validation_error("apply_virtual_sensing_adjoint: weight length does not match set");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dims.n_pixels());
  for (Index i = 0; i < E.size(); ++i)
    out += w[i] * apply_qp(f, E.elements()[static_cast<std::size_t>(i)], dims);
  return out;
}

/// Gram matrix of the virtual sensing rows, <Q_{e_i} f, Q_{e_j} f>, with its
/// factorization. Entries depend only on the difference e_j - e_i, so they
/// are autocorrelations of f; the shifted rows are never materialized.
class VirtualGram {
 public:
  VirtualGram(const Eigen::VectorXd& f, const ShiftSet& E, const GridDims& dims) {
    std::map<PixelShift, double> correlations;
    gram_.resize(E.size(), E.size());
    for (Index i = 0; i < E.size(); ++i)
      for (Index j = i; j < E.size(); ++j) {
        PixelShift d = E.elements()[static_cast<std::size_t>(j)] -
                       E.elements()[static_cast<std::size_t>(i)];
        d = {mod_floor(d.dr, dims.n_rows), mod_floor(d.dc, dims.n_cols)};
        auto it = correlations.find(d);
        if (it == correlations.end())
          it = correlations.emplace(d, f.dot(apply_qp(f, d, dims))).first;
        gram_(i, j) = gram_(j, i) = it->second;
      }
    ldlt_.compute(gram_);
    const auto& d = ldlt_.vectorD();
    const double dmax = d.size() ? d.maxCoeff() : 0.0;
    if (ldlt_.info() != Eigen::Success || !(dmax > 0.0) || d.minCoeff() <= 1e-12 * dmax)
      throw numeric_error("virtual sensing rows are rank deficient; redraw the measurement");
  }

  const Eigen::MatrixXd& matrix() const { return gram_; }
  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& z) const {
    return ldlt_.solve(z.derived());
  }

 private:
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

}  // namespace cpm
