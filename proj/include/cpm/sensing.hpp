#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"
#include "cpm/image.hpp"
#include "cpm/rng.hpp"

namespace cpm {

enum class SensingKind { gaussian, circulant };

inline const char* to_string(SensingKind k) {
  return k == SensingKind::gaussian ? "gaussian" : "circulant";
}

/// Number of measurements for rate p on n_pixels: floor(p * n_pixels).
inline Index measurement_count(double p, Index n_pixels) {
  if (!(p > 0.0 && p < 1.0))
    throw validation_error("measurement rate must lie in (0,1), got " + std::to_string(p));
  return static_cast<Index>(std::floor(p * static_cast<double>(n_pixels)));
}

/// Cholesky factor of a Gram matrix F F^T, kept for repeated solves.
/// Construction performs the full-rank check on F.
class GramFactor {
 public:
  explicit GramFactor(const Eigen::MatrixXd& F) : gram_(F * F.transpose()) {
    ldlt_.compute(gram_);
    if (ldlt_.info() != Eigen::Success)
      throw numeric_error("Gram factorization failed");
    const auto& d = ldlt_.vectorD();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0) || d.minCoeff() <= 1e-10 * dmax)
      throw numeric_error("sensing matrix is rank deficient");
  }

  Index size() const { return gram_.rows(); }
  const Eigen::MatrixXd& gram() const { return gram_; }

  /// (F F^T)^{-1} z
  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& z) const {
    return ldlt_.solve(z.derived());
  }

 private:
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

/// A seeded sensing matrix together with its Gram factorization.
struct SensingEnsemble {
  SensingKind kind = SensingKind::gaussian;
  Index m = 0;
  Index n_pixels = 0;
  std::uint64_t seed = 0;
  bool reseeded = false;  // set when the first draw failed the rank check
  Eigen::MatrixXd F;      // m x n_pixels
  std::shared_ptr<const GramFactor> gram;
};

namespace detail {

inline Eigen::MatrixXd draw_sensing(SensingKind kind, Index m, Index n_pixels,
                                    std::uint64_t seed) {
  Rng rng(seed);
  if (kind == SensingKind::gaussian) return rng.normal_matrix(m, n_pixels);
  // first m rows of the circulant matrix of a Gaussian generator vector:
  // F(i, j) = c((j - i) mod n_pixels)
  const Eigen::VectorXd c = rng.normal_vector(n_pixels);
  Eigen::MatrixXd F(m, n_pixels);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n_pixels; ++j)
      F(i, j) = c[static_cast<Index>(mod_floor(j - i, n_pixels))];
  return F;
}

inline SensingEnsemble gen_ensemble_impl(SensingKind kind, Index m, Index n_pixels,
                                         std::uint64_t seed) {
  if (m < 1 || m > n_pixels)
    throw validation_error("need 1 <= m <= n_pixels, got m=" + std::to_string(m) +
                           ", n_pixels=" + std::to_string(n_pixels));
  SensingEnsemble ens;
  ens.kind = kind;
  ens.m = m;
  ens.n_pixels = n_pixels;
  ens.seed = seed;
  ens.F = draw_sensing(kind, m, n_pixels, seed);
  try {
    ens.gram = std::make_shared<GramFactor>(ens.F);
  } catch (const numeric_error&) {
    // almost-sure full rank; retry once with a perturbed seed
    ens.reseeded = true;
    ens.F = draw_sensing(kind, m, n_pixels, split_seed(seed, 0x5eed));
    ens.gram = std::make_shared<GramFactor>(ens.F);
  }
  return ens;
}

}  // namespace detail

inline SensingEnsemble gen_sensing(SensingKind kind, Index m, Index n_pixels,
                                   std::uint64_t seed) {
  return detail::gen_ensemble_impl(kind, m, n_pixels, seed);
}

inline SensingEnsemble gen_gaussian(Index m, Index n_pixels, std::uint64_t seed) {
  return gen_sensing(SensingKind::gaussian, m, n_pixels, seed);
}

inline SensingEnsemble gen_circulant(Index m, Index n_pixels, std::uint64_t seed) {
  return gen_sensing(SensingKind::circulant, m, n_pixels, seed);
}

/// M = F X, the same measurements applied to every band.
inline Eigen::MatrixXd measure(const SensingEnsemble& ens, const MultispectralImage& X) {
  if (ens.n_pixels != X.n_pixels())
    throw validation_error("sensing matrix has " + std::to_string(ens.n_pixels) +
                           " columns, image has " + std::to_string(X.n_pixels()) + " pixels");
  return ens.F * X.data;
}

/// Type-1 identity surrogate applied to a vector: (1/m) F^T (F u).
inline Eigen::VectorXd surrogate_t1(const SensingEnsemble& ens, const Eigen::VectorXd& u) {
  return (ens.F.transpose() * (ens.F * u)) / static_cast<double>(ens.m);
}

/// Type-2 identity surrogate applied to a vector:
/// (n_pixels/m) F^T (F F^T)^{-1} (F u).
inline Eigen::VectorXd surrogate_t2(const SensingEnsemble& ens, const Eigen::VectorXd& u) {
  const double lambda = static_cast<double>(ens.n_pixels) / static_cast<double>(ens.m);
  return lambda * (ens.F.transpose() * ens.gram->solve(ens.F * u));
}

enum class Surrogate { t1, t2 };

/// Dense n_pixels x n_pixels matrix of the chosen surrogate (diagnostics only).
inline Eigen::MatrixXd surrogate_matrix(const SensingEnsemble& ens, Surrogate which) {
  if (which == Surrogate::t1) return ens.F.transpose() * ens.F / static_cast<double>(ens.m);
  const double lambda = static_cast<double>(ens.n_pixels) / static_cast<double>(ens.m);
  return lambda * (ens.F.transpose() * ens.gram->solve(ens.F));
}

/// Frobenius distance of the row-space projector to the identity,
/// || F^T (F F^T)^{-1} F - I ||_F; equals sqrt(n_pixels - m) for full-rank F.
inline double identity_error_fro(const SensingEnsemble& ens) {
  Eigen::MatrixXd P = ens.F.transpose() * ens.gram->solve(ens.F);
  P.diagonal().array() -= 1.0;
  return P.norm();
}

/// Max-norm distance of the chosen surrogate to the identity.
inline double identity_error_max(const SensingEnsemble& ens, Surrogate which) {
  Eigen::MatrixXd S = surrogate_matrix(ens, which);
  S.diagonal().array() -= 1.0;
  return S.cwiseAbs().maxCoeff();
}

/// || lambda F^T (F F^T)^{-1} F - I ||_inf for each lambda in the grid.
inline Eigen::VectorXd scaled_projector_error_curve(const SensingEnsemble& ens,
                                                    const Eigen::VectorXd& lambdas) {
  const Eigen::MatrixXd P = ens.F.transpose() * ens.gram->solve(ens.F);
  Eigen::VectorXd errs(lambdas.size());
  for (Index k = 0; k < lambdas.size(); ++k) {
    double worst = 0.0;
    for (Index j = 0; j < P.cols(); ++j)
      for (Index i = 0; i < P.rows(); ++i) {
        const double e = std::abs(lambdas[k] * P(i, j) - (i == j ? 1.0 : 0.0));
        if (e > worst) worst = e;
      }
    errs[k] = worst;
  }
  return errs;
}

}  // namespace cpm
