#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"

namespace cpm {

/// Sparsity model: plain L1 on u, or L1 on the stack [u; Dx u; Dy u] with
/// circular forward differences on the pixel grid (anisotropic TV/L1).
struct Regularizer {
  enum class Kind { l1, tvl1 };
  Kind kind = Kind::l1;
  GridDims dims;  // required for tvl1

  static Regularizer l1() { return {}; }
  static Regularizer tvl1(GridDims d) {
    require_valid(d);
    return {Kind::tvl1, d};
  }

  Index output_size(Index n) const { return kind == Kind::l1 ? n : 3 * n; }
};

/// Componentwise soft threshold sgn(x) * max(0, |x| - 1/lambda).
inline Eigen::VectorXd shrink(const Eigen::VectorXd& x, double lambda) {
  if (!(lambda > 0.0))
    throw validation_error("shrink threshold parameter must be positive");
  const double t = 1.0 / lambda;
  Eigen::VectorXd out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i]) - t;
    out[i] = a > 0.0 ? (x[i] > 0.0 ? a : -a) : 0.0;
  }
  return out;
}

inline Eigen::VectorXd apply_phi(const Eigen::VectorXd& u, const Regularizer& reg) {
  if (reg.kind == Regularizer::Kind::l1) return u;
  const Index R = reg.dims.n_rows, C = reg.dims.n_cols, n = R * C;
  if (u.size() != n) throw validation_error("apply_phi: vector does not match grid");
  Eigen::VectorXd out(3 * n);
  out.head(n) = u;
  for (Index c = 0; c < C; ++c) {
    const Index base = c * R;
    const Index right = ((c + 1) % C) * R;
    for (Index r = 0; r < R; ++r) {
      const Index q = base + r;
      out[n + q] = u[base + (r + 1) % R] - u[q];  // gradient along rows
      out[2 * n + q] = u[right + r] - u[q];       // gradient along columns
    }
  }
  return out;
}

inline Eigen::VectorXd apply_phi_adjoint(const Eigen::VectorXd& w, const Regularizer& reg) {
  if (reg.kind == Regularizer::Kind::l1) return w;
  const Index R = reg.dims.n_rows, C = reg.dims.n_cols, n = R * C;
  if (w.size() != 3 * n) throw validation_error("apply_phi_adjoint: vector does not match grid");
  Eigen::VectorXd out = w.head(n);
  for (Index c = 0; c < C; ++c) {
    const Index base = c * R;
    const Index left = ((c - 1 + C) % C) * R;
    for (Index r = 0; r < R; ++r) {
      const Index q = base + r;
      out[q] += w[n + base + (r - 1 + R) % R] - w[n + q];
      out[q] += w[2 * n + left + r] - w[2 * n + q];
    }
  }
  return out;
}

struct SolverConfig {
  double beta1 = 1.0;
  double beta2 = 1000.0;
  double err = 1e-2;
  int max_iter = 500;
  // above this many unknowns the quadratic subproblem switches from a dense
  // factorization to warm-started conjugate gradients
  Index dense_limit = 4096;
  double cg_tol = 1e-8;

  void validate() const {
    if (!(beta1 > 0.0) || !(beta2 > 0.0))
      throw validation_error("beta1 and beta2 must be positive");
    if (!(err > 0.0)) throw validation_error("err must be positive");
    if (max_iter < 1) throw validation_error("max_iter must be positive");
  }
};

struct SolverResult {
  Eigen::VectorXd u;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

namespace detail {

// beta2 * (phi^T phi) added in place; for tvl1 this is beta2 * (I + Lr + Lc)
// with the circulant graph Laplacians of the row and column cycles.
inline void add_phi_gram(Eigen::MatrixXd& D, const Regularizer& reg, double beta2) {
  if (reg.kind == Regularizer::Kind::l1) {
    D.diagonal().array() += beta2;
    return;
  }
  const Index R = reg.dims.n_rows, C = reg.dims.n_cols;
  for (Index c = 0; c < C; ++c)
    for (Index r = 0; r < R; ++r) {
      const Index q = c * R + r;
      D(q, q) += 5.0 * beta2;  // identity block + 2 + 2 from the Laplacians
      D(c * R + (r + 1) % R, q) -= beta2;
      D(c * R + (r - 1 + R) % R, q) -= beta2;
      D(((c + 1) % C) * R + r, q) -= beta2;
      D(((c - 1 + C) % C) * R + r, q) -= beta2;
    }
}

// conjugate gradients on (beta1 A^T A + beta2 phi^T phi) x = rhs, warm started
inline void cg_solve(const Eigen::MatrixXd& A, const Regularizer& reg,
                     const SolverConfig& cfg, const Eigen::VectorXd& rhs,
                     Eigen::VectorXd& x) {
  auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return cfg.beta1 * (A.transpose() * (A * v)) +
           cfg.beta2 * apply_phi_adjoint(apply_phi(v, reg), reg);
  };
  Eigen::VectorXd r = rhs - apply(x);
  const double tol = cfg.cg_tol * rhs.norm();
  if (r.norm() <= tol) return;
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  const Index max_cg = 4 * rhs.size();
  for (Index it = 0; it < max_cg; ++it) {
    const Eigen::VectorXd Ap = apply(p);
    const double alpha = rs / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    const double rs_new = r.squaredNorm();
    if (std::sqrt(rs_new) <= tol) return;
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
}

}  // namespace detail

/// Split-Bregman iteration for argmin_{u >= 0} ||phi(u)||_1 subject to
/// ||A u - f||_2 < err. The quadratic subproblem matrix is factorized once;
/// d and b start at zero and the constraint residual is folded back into the
/// data term each sweep. Returns the best iterate with converged=false when
/// the iteration cap is hit.
inline SolverResult solve_constrained(const Eigen::MatrixXd& A, const Eigen::VectorXd& f,
                                      const Regularizer& reg, const SolverConfig& cfg = {}) {
  cfg.validate();
  const Index n = A.cols();
  if (A.rows() != f.size())
    throw validation_error("solve_constrained: A and f have incompatible sizes");
  if (reg.kind == Regularizer::Kind::tvl1 && reg.dims.n_pixels() != n)
    throw validation_error("solve_constrained: regularizer grid does not match unknowns");

  const bool dense = n <= cfg.dense_limit;
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (dense) {
    Eigen::MatrixXd D = cfg.beta1 * (A.transpose() * A);
    detail::add_phi_gram(D, reg, cfg.beta2);
    llt.compute(D);
    if (llt.info() != Eigen::Success)
      throw numeric_error("quadratic subproblem matrix is not positive definite");
  }

  const Index phi_len = reg.output_size(n);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(phi_len);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(phi_len);
  Eigen::VectorXd fk = f;

  SolverResult result;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    const Eigen::VectorXd rhs =
        cfg.beta1 * (A.transpose() * fk) + cfg.beta2 * apply_phi_adjoint(d - b, reg);
    if (dense)
      u = llt.solve(rhs);
    else
      detail::cg_solve(A, reg, cfg, rhs, u);
    u = u.cwiseMax(0.0);

    const Eigen::VectorXd phiu = apply_phi(u, reg);
    d = shrink(phiu + b, cfg.beta2);
    b += phiu - d;

    const Eigen::VectorXd Au = A * u;
    result.residual = (Au - f).norm();
    fk += f - Au;
    result.iterations = k;
    if (result.residual < cfg.err) {
      result.converged = true;
      break;
    }
  }
  result.u = std::move(u);
  return result;
}

}  // namespace cpm
