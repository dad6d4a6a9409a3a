#pragma once

#include <string>
#include <utility>

#include <Eigen/Dense>

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"

namespace cpm {

using SpectralSignature = Eigen::VectorXd;

/// Column-major vectorization of a band matrix.
inline Eigen::VectorXd vecc(const Eigen::MatrixXd& band) {
  return Eigen::Map<const Eigen::VectorXd>(band.data(), band.size());
}

/// Inverse of vecc.
inline Eigen::MatrixXd devecc(const Eigen::VectorXd& v, const GridDims& dims) {
  if (v.size() != dims.n_pixels())
    throw validation_error("vector length " + std::to_string(v.size()) +
                           " does not match grid with " + std::to_string(dims.n_pixels()) +
                           " pixels");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), dims.n_rows, dims.n_cols);
}

/// Circular shift of a band: the entry at (r, c) moves to (r+dr, c+dc),
/// i.e. out(a, b) = in((a-dr) mod n_rows, (b-dc) mod n_cols).
inline Eigen::MatrixXd shift_band(const Eigen::MatrixXd& band, PixelShift p) {
  const Index R = band.rows(), C = band.cols();
  Eigen::MatrixXd out(R, C);
  const Index sr = static_cast<Index>(mod_floor(-p.dr, R));
  const Index sc = static_cast<Index>(mod_floor(-p.dc, C));
  for (Index b = 0; b < C; ++b) {
    const Index src_c = (b + sc) % C;
    for (Index a = 0; a < R; ++a) out(a, b) = band((a + sr) % R, src_c);
  }
  return out;
}

/// Permutation form of shift_band on vectorized bands; the permutation matrix
/// is never materialized.
inline Eigen::VectorXd apply_qp(const Eigen::VectorXd& v, PixelShift p, const GridDims& dims) {
  if (v.size() != dims.n_pixels())
    throw validation_error("apply_qp: vector length does not match grid");
  const Index R = dims.n_rows, C = dims.n_cols;
  Eigen::VectorXd out(v.size());
  const Index sr = static_cast<Index>(mod_floor(-p.dr, R));
  const Index sc = static_cast<Index>(mod_floor(-p.dc, C));
  for (Index b = 0; b < C; ++b) {
    const Index src_base = ((b + sc) % C) * R;
    const Index dst_base = b * R;
    for (Index a = 0; a < R; ++a) out[dst_base + a] = v[src_base + (a + sr) % R];
  }
  return out;
}

/// Multispectral image: row q holds the spectrum of pixel q (vectorization
/// order), column b holds vectorized band b.
struct MultispectralImage {
  GridDims dims;
  Eigen::MatrixXd data;  // n_pixels x n_bands

  MultispectralImage() = default;
  MultispectralImage(GridDims d, Eigen::MatrixXd values) : dims(d), data(std::move(values)) {
    require_valid(dims);
    if (data.rows() != dims.n_pixels())
      throw validation_error("image data has " + std::to_string(data.rows()) +
                             " rows, grid has " + std::to_string(dims.n_pixels()) + " pixels");
    if (data.cols() < 1) throw validation_error("image needs at least one band");
    if (!data.allFinite()) throw validation_error("image contains non-finite values");
  }

  Index n_pixels() const { return data.rows(); }
  Index n_bands() const { return data.cols(); }

  Eigen::MatrixXd band(Index b) const { return devecc(data.col(b), dims); }
};

}  // namespace cpm
