#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"
#include "cpm/image.hpp"
#include "cpm/planner.hpp"
#include "cpm/rng.hpp"
#include "cpm/sensing.hpp"
#include "cpm/solver.hpp"
#include "cpm/spectralize.hpp"

namespace cpm {

/// Two-level Lloyd-Max quantization of the recovered abundances: centroids
/// start at min and max, assignment and centroid steps alternate until the
/// assignment is stable, and the class of the higher centroid is positive.
/// A constant vector binarizes to all-negative.
inline Mask lloyd_max_binarize(const Eigen::VectorXd& u, const GridDims& dims) {
  if (u.size() != dims.n_pixels())
    throw validation_error("lloyd_max_binarize: vector does not match grid");
  Mask mask(dims);
  const double lo = u.minCoeff(), hi = u.maxCoeff();
  if (!(hi > lo)) return mask;
  double c0 = lo, c1 = hi;
  std::vector<std::uint8_t> assign(static_cast<std::size_t>(u.size()), 0);
  for (int sweep = 0; sweep < 1000; ++sweep) {
    const double threshold = 0.5 * (c0 + c1);
    bool changed = false;
    for (Index i = 0; i < u.size(); ++i) {
      const std::uint8_t cls = u[i] > threshold ? 1 : 0;
      if (cls != assign[static_cast<std::size_t>(i)]) {
        assign[static_cast<std::size_t>(i)] = cls;
        changed = true;
      }
    }
    if (!changed && sweep > 0) break;
    double sum0 = 0.0, sum1 = 0.0;
    Index n0 = 0, n1 = 0;
    for (Index i = 0; i < u.size(); ++i) {
      if (assign[static_cast<std::size_t>(i)]) {
        sum1 += u[i];
        ++n1;
      } else {
        sum0 += u[i];
        ++n0;
      }
    }
    if (n0 > 0) c0 = sum0 / static_cast<double>(n0);
    if (n1 > 0) c1 = sum1 / static_cast<double>(n1);
  }
  mask.values = std::move(assign);
  return mask;
}

struct MaskMetrics {
  double wrong_pct = 0.0;    // 100 * disagreeing pixels / compared pixels
  std::int64_t anchor_errors = 0;  // false positives + missed positives
};

/// Pixels where a pattern anchored there would wrap around the image border.
inline Mask pattern_wrap_zone(const GridDims& dims, const Pattern& P) {
  Mask zone(dims);
  std::int64_t rlo = 0, rhi = 0, clo = 0, chi = 0;
  for (const auto& p : P.offsets()) {
    rlo = std::min(rlo, p.dr);
    rhi = std::max(rhi, p.dr);
    clo = std::min(clo, p.dc);
    chi = std::max(chi, p.dc);
  }
  for (Index r = 0; r < dims.n_rows; ++r)
    for (Index c = 0; c < dims.n_cols; ++c)
      if (r + rlo < 0 || r + rhi >= dims.n_rows || c + clo < 0 || c + chi >= dims.n_cols)
        zone.values[static_cast<std::size_t>(vecc_index(r, c, dims))] = 1;
  return zone;
}

/// Disagreement metrics, optionally skipping excluded pixels (e.g. anchors
/// whose pattern would wrap across the border).
inline MaskMetrics evaluate_mask(const Mask& mask, const Mask& reference,
                                 const Mask* exclude = nullptr) {
  if (!(mask.dims == reference.dims))
    throw validation_error("masks have different grids");
  if (exclude && !(exclude->dims == mask.dims))
    throw validation_error("exclusion zone has a different grid");
  std::int64_t wrong = 0, compared = 0;
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    if (exclude && exclude->values[i]) continue;
    ++compared;
    wrong += (mask.values[i] != 0) != (reference.values[i] != 0);
  }
  if (compared == 0) return {0.0, 0};
  return {100.0 * static_cast<double>(wrong) / static_cast<double>(compared), wrong};
}

/// Adds iid Gaussian noise with standard deviation pct/100 of the image's
/// value range. pct = 0 returns the image unchanged.
inline MultispectralImage add_noise(const MultispectralImage& X, double pct, std::uint64_t seed) {
  if (pct < 0.0) throw validation_error("noise percentage must be nonnegative");
  if (pct == 0.0) return X;
  const double range = X.data.maxCoeff() - X.data.minCoeff();
  const double sd = (pct / 100.0) * range;
  Rng rng(seed);
  Eigen::MatrixXd noisy = X.data;
  double* p = noisy.data();
  for (Index i = 0; i < noisy.size(); ++i) p[i] += sd * rng.normal();
  return {X.dims, std::move(noisy)};
}

struct SolverStats {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

struct DetectionReport {
  Mask mask;
  Eigen::VectorXd u;
  std::optional<double> wrong_pct;
  std::optional<std::int64_t> anchor_errors;
  SolverStats solver;

  void score_against(const Mask& reference) {
    const MaskMetrics m = evaluate_mask(mask, reference);
    wrong_pct = m.wrong_pct;
    anchor_errors = m.anchor_errors;
  }
};

namespace detail {

inline DetectionReport run_detection(const Eigen::MatrixXd& A, const Eigen::VectorXd& f,
                                     const GridDims& dims, const Regularizer& reg,
                                     const SolverConfig& cfg) {
  SolverResult sol = solve_constrained(A, f, reg, cfg);
  DetectionReport report;
  report.mask = lloyd_max_binarize(sol.u, dims);
  report.solver = {sol.iterations, sol.residual, sol.converged};
  report.u = std::move(sol.u);
  return report;
}

}  // namespace detail

/// Locates the pixels whose spectra combine to the signature s using the full
/// data cube: argmin ||phi(u)||_1 with u >= 0 subject to ||X^T u - s|| < err.
inline DetectionReport template_match(const MultispectralImage& X, const SpectralSignature& s,
                                      const Regularizer& reg, const SolverConfig& cfg = {}) {
  if (s.size() != X.n_bands())
    throw validation_error("signature length does not match the image bands");
  return detail::run_detection(X.data.transpose(), s, X.dims, reg, cfg);
}

/// Same detection from compressive measurements M = F X only: the data matrix
/// is replaced by its surrogate M^T (F F^T)^{-1} F and the target is scaled
/// by m/n_pixels.
inline DetectionReport compressive_template_match(const Eigen::MatrixXd& M,
                                                  const SensingEnsemble& ens,
                                                  const GridDims& dims,
                                                  const SpectralSignature& s,
                                                  const Regularizer& reg,
                                                  const SolverConfig& cfg = {}) {
  if (M.rows() != ens.m)
    throw validation_error("measurement rows do not match the sensing matrix");
  if (dims.n_pixels() != ens.n_pixels)
    throw validation_error("grid does not match the sensing matrix");
  const Eigen::MatrixXd A = M.transpose() * ens.gram->solve(ens.F);
  const double scale = static_cast<double>(ens.m) / static_cast<double>(ens.n_pixels);
  return detail::run_detection(A, scale * s, dims, reg, cfg);
}

struct PatternMatchResult {
  DetectionReport report;
  MeasurementPlan plan;
  Eigen::MatrixXd m_eff;   // |E+P| x n_bands
  Eigen::MatrixXd m_virt;  // |E| x (n_bands * |P|)
};

/// Runs the detection stage of pattern matching given already-taken effective
/// measurements and a plan carrying the base measurement.
inline PatternMatchResult pattern_match_from_effective(Eigen::MatrixXd M_eff,
                                                       MeasurementPlan plan,
                                                       const GridDims& dims,
                                                       const std::vector<SpectralSignature>& sigs,
                                                       const Regularizer& reg,
                                                       const SolverConfig& cfg = {}) {
  if (plan.f.size() != dims.n_pixels())
    throw validation_error("plan has no base measurement for this grid");
  if (static_cast<Index>(sigs.size()) != plan.pattern.size())
    throw validation_error("need one signature per pattern offset");
  PatternMatchResult out;
  out.m_virt = reconstruct_virtual(M_eff, plan);
  const VirtualGram gram(plan.f, plan.E, dims);
  // A = M_virt^T G^{-1} F_virt, accumulated one shifted row at a time so the
  // dense |E| x n_pixels sensing matrix is never formed
  const Eigen::MatrixXd Z = gram.solve(out.m_virt);  // |E| x (n_bands |P|)
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(out.m_virt.cols(), dims.n_pixels());
  for (Index i = 0; i < plan.E.size(); ++i) {
    const Eigen::VectorXd row =
        apply_qp(plan.f, plan.E.elements()[static_cast<std::size_t>(i)], dims);
    A.noalias() += Z.row(i).transpose() * row.transpose();
  }
  const double scale =
      static_cast<double>(plan.E.size()) / static_cast<double>(dims.n_pixels());
  const SpectralSignature target = scale * spectralized_signature(sigs);
  out.report = detail::run_detection(A, target, dims, reg, cfg);
  out.plan = std::move(plan);
  out.m_eff = std::move(M_eff);
  return out;
}

/// End-to-end pattern matching on the image: plans the shifted measurements
/// for the requested virtual rate, takes the effective measurements,
/// reconstructs the virtual ones and solves against the spectralized
/// signature. Positive mask pixels are pattern anchors (reference offset).
inline PatternMatchResult compressive_pattern_match(const MultispectralImage& X,
                                                    const Pattern& P,
                                                    const std::vector<SpectralSignature>& sigs,
                                                    double rate, const Regularizer& reg,
                                                    const SolverConfig& cfg,
                                                    std::uint64_t seed) {
  const Index A_count = measurement_count(rate, X.n_pixels());
  if (A_count < 1) throw validation_error("rate too small: no measurements");
  MeasurementPlan plan = plan_for_pattern(P, A_count);
  if (!plan_fits(plan, X.dims))
    throw validation_error("effective measurement set does not fit the image grid");
  for (int attempt = 0;; ++attempt) {
    draw_measurement(plan, X.dims, attempt == 0 ? seed : split_seed(seed, 0xf));
    const EffectiveSensing eff = build_effective_sensing(plan.f, plan.EP, X.dims);
    try {
      return pattern_match_from_effective(eff.measure(X), plan, X.dims, sigs, reg, cfg);
    } catch (const numeric_error&) {
      if (attempt >= 1) throw;
    }
  }
}

}  // namespace cpm
