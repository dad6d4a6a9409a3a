#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpm/errors.hpp"

namespace cpm {

using Index = Eigen::Index;

/// Pixel grid of a raster: n_rows x n_cols.
struct GridDims {
  Index n_rows = 0;
  Index n_cols = 0;

  Index n_pixels() const { return n_rows * n_cols; }
  bool operator==(const GridDims&) const = default;
};

inline void require_valid(const GridDims& dims) {
  if (dims.n_rows < 1 || dims.n_cols < 1)
    throw validation_error("grid dimensions must be positive, got " +
                           std::to_string(dims.n_rows) + "x" +
                           std::to_string(dims.n_cols));
}

/// 2-D integer offset (row shift, column shift). Arithmetic is componentwise.
struct PixelShift {
  std::int64_t dr = 0;
  std::int64_t dc = 0;

  friend PixelShift operator+(PixelShift a, PixelShift b) { return {a.dr + b.dr, a.dc + b.dc}; }
  friend PixelShift operator-(PixelShift a, PixelShift b) { return {a.dr - b.dr, a.dc - b.dc}; }
  PixelShift operator-() const { return {-dr, -dc}; }
  bool operator==(const PixelShift&) const = default;
  // lexicographic by (dr, dc); used for deterministic set ordering
  friend bool operator<(PixelShift a, PixelShift b) {
    return a.dr != b.dr ? a.dr < b.dr : a.dc < b.dc;
  }
};

inline std::int64_t mod_floor(std::int64_t x, std::int64_t n) {
  std::int64_t r = x % n;
  return r < 0 ? r + n : r;
}

/// Column-major vectorization index of pixel (row, col).
inline Index vecc_index(Index row, Index col, const GridDims& dims) {
  if (row < 0 || row >= dims.n_rows || col < 0 || col >= dims.n_cols)
    throw validation_error("pixel (" + std::to_string(row) + "," + std::to_string(col) +
                           ") outside grid " + std::to_string(dims.n_rows) + "x" +
                           std::to_string(dims.n_cols));
  return col * dims.n_rows + row;
}

/// Inverse of vecc_index: (row, col) of a vectorization index.
inline std::pair<Index, Index> pixel_coords(Index q, const GridDims& dims) {
  if (q < 0 || q >= dims.n_pixels())
    throw validation_error("vectorization index " + std::to_string(q) + " outside grid");
  return {q % dims.n_rows, q / dims.n_rows};
}

/// Boolean detection mask in vectorization order.
struct Mask {
  GridDims dims;
  std::vector<std::uint8_t> values;  // 0 or 1, length n_pixels

  Mask() = default;
  explicit Mask(GridDims d) : dims(d), values(static_cast<std::size_t>(d.n_pixels()), 0) {}
  Mask(GridDims d, std::vector<std::uint8_t> v) : dims(d), values(std::move(v)) {
    if (values.size() != static_cast<std::size_t>(dims.n_pixels()))
      throw validation_error("mask length does not match grid");
  }

  Index n_positive() const {
    Index n = 0;
    for (auto v : values) n += (v != 0);
    return n;
  }
  bool operator==(const Mask&) const = default;
};

}  // namespace cpm
