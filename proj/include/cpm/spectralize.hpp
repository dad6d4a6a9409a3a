#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"
#include "cpm/image.hpp"

namespace cpm {

/// Ordered tuple of pixel offsets describing a spatial arrangement; the first
/// offset is always the reference point (0, 0).
class Pattern {
 public:
  static Pattern from_offsets(std::vector<PixelShift> offsets) {
    if (offsets.empty()) throw validation_error("pattern needs at least one offset");
    if (!(offsets.front() == PixelShift{0, 0}))
      throw validation_error("pattern reference offset must be (0,0)");
    for (std::size_t i = 0; i < offsets.size(); ++i)
      for (std::size_t j = i + 1; j < offsets.size(); ++j)
        if (offsets[i] == offsets[j]) throw validation_error("pattern offsets must be distinct");
    Pattern p;
    p.offsets_ = std::move(offsets);
    return p;
  }

  const std::vector<PixelShift>& offsets() const { return offsets_; }
  Index size() const { return static_cast<Index>(offsets_.size()); }

  /// Height and width of the bounding rectangle of the offsets.
  std::pair<std::int64_t, std::int64_t> bounding_extent() const {
    std::int64_t rlo = offsets_[0].dr, rhi = rlo, clo = offsets_[0].dc, chi = clo;
    for (const auto& p : offsets_) {
      rlo = std::min(rlo, p.dr);
      rhi = std::max(rhi, p.dr);
      clo = std::min(clo, p.dc);
      chi = std::max(chi, p.dc);
    }
    return {rhi - rlo + 1, chi - clo + 1};
  }

 private:
  std::vector<PixelShift> offsets_;
};

struct NormalizedPattern {
  Pattern pattern;
  PixelShift translation;  // shift that was applied to every raw offset
};

/// Accepts raw shapes: translates so the lexicographically smallest offset
/// becomes (0,0) and moves it to the front, keeping the rest in input order.
inline NormalizedPattern normalize_pattern(std::vector<PixelShift> raw) {
  if (raw.empty()) throw validation_error("pattern needs at least one offset");
  const PixelShift lo = *std::min_element(raw.begin(), raw.end());
  std::vector<PixelShift> shifted;
  shifted.reserve(raw.size());
  shifted.push_back({0, 0});
  for (const auto& p : raw)
    if (!(p == lo)) shifted.push_back(p - lo);
  return {Pattern::from_offsets(std::move(shifted)), -lo};
}

/// Rectangular a x b pattern in row-major offset order, reference first.
inline Pattern rectangle_pattern(std::int64_t a, std::int64_t b) {
  if (a < 1 || b < 1) throw validation_error("rectangle pattern sides must be positive");
  std::vector<PixelShift> offs;
  offs.reserve(static_cast<std::size_t>(a * b));
  for (std::int64_t i = 0; i < a; ++i)
    for (std::int64_t j = 0; j < b; ++j) offs.push_back({i, j});
  return Pattern::from_offsets(std::move(offs));
}

/// Stacks circularly shifted copies of the image band-wise: block j of the
/// output holds the bands shifted by -p_j, so row q gathers the spectra of
/// the pixels q + p_j and a spatial arrangement becomes a plain signature.
inline MultispectralImage spectralize(const MultispectralImage& X, const Pattern& P) {
  const Index nB = X.n_bands(), nP = X.n_pixels();
  Eigen::MatrixXd out(nP, nB * P.size());
  for (Index j = 0; j < P.size(); ++j) {
    const PixelShift p = P.offsets()[static_cast<std::size_t>(j)];
    for (Index b = 0; b < nB; ++b)
      out.col(j * nB + b) = apply_qp(X.data.col(b), -p, X.dims);
  }
  return {X.dims, std::move(out)};
}

/// Concatenates one signature per pattern offset, in pattern order.
inline SpectralSignature spectralized_signature(const std::vector<SpectralSignature>& sigs) {
  if (sigs.empty()) throw validation_error("need at least one signature");
  const Index nB = sigs.front().size();
  for (const auto& s : sigs)
    if (s.size() != nB) throw validation_error("per-offset signatures must have equal length");
  SpectralSignature out(nB * static_cast<Index>(sigs.size()));
  for (std::size_t j = 0; j < sigs.size(); ++j) out.segment(static_cast<Index>(j) * nB, nB) = sigs[j];
  return out;
}

}  // namespace cpm
