#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"
#include "cpm/image.hpp"
#include "cpm/rng.hpp"
#include "cpm/spectralize.hpp"

namespace cpm {

struct TemplateScene {
  MultispectralImage image;
  SpectralSignature signature;
  Mask truth;  // planted pixels
};

struct TemplateSceneOptions {
  std::int64_t target_size = 2;     // targets are square blocks of this side
  double background_scale = 0.3;
  std::int64_t min_separation = 2;  // empty margin kept around each target
};

/// Plants n_targets square blocks of a common signature into a background of
/// Gaussian spectra orthogonalized against that signature.
inline TemplateScene make_template_scene(const GridDims& dims, Index n_bands, Index n_targets,
                                         std::uint64_t seed,
                                         const TemplateSceneOptions& opt = {}) {
  require_valid(dims);
  if (n_bands < 1 || n_targets < 0) throw validation_error("bad synthetic scene parameters");
  const Index nP = dims.n_pixels();
  const std::int64_t bs = opt.target_size;
  if (bs < 1 || bs > std::min(dims.n_rows, dims.n_cols))
    throw validation_error("target size does not fit the grid");

  Rng rng(split_seed(seed, 1));
  SpectralSignature s(n_bands);
  for (Index b = 0; b < n_bands; ++b) s[b] = 0.5 + 0.5 * rng.uniform();

  Eigen::MatrixXd data = opt.background_scale * Rng(split_seed(seed, 2)).normal_matrix(nP, n_bands);
  // background spectra orthogonal to the planted signature
  data -= (data * s) * (s.transpose() / s.squaredNorm());

  Mask truth(dims);
  Rng place(split_seed(seed, 3));
  Index placed = 0;
  for (int tries = 0; placed < n_targets && tries < 100000; ++tries) {
    const std::int64_t r0 = place.below(dims.n_rows - bs + 1);
    const std::int64_t c0 = place.below(dims.n_cols - bs + 1);
    bool clash = false;
    const std::int64_t margin = opt.min_separation;
    for (std::int64_t r = r0 - margin; r < r0 + bs + margin && !clash; ++r)
      for (std::int64_t c = c0 - margin; c < c0 + bs + margin && !clash; ++c) {
        if (r < 0 || r >= dims.n_rows || c < 0 || c >= dims.n_cols) continue;
        if (truth.values[static_cast<std::size_t>(vecc_index(r, c, dims))]) clash = true;
      }
    if (clash) continue;
    for (std::int64_t r = r0; r < r0 + bs; ++r)
      for (std::int64_t c = c0; c < c0 + bs; ++c) {
        const Index q = vecc_index(r, c, dims);
        data.row(q) = s.transpose();
        truth.values[static_cast<std::size_t>(q)] = 1;
      }
    ++placed;
  }
  if (placed < n_targets)
    throw validation_error("could not place all targets; grid too crowded");
  return {MultispectralImage(dims, std::move(data)), std::move(s), std::move(truth)};
}

struct PatternScene {
  MultispectralImage image;
  std::vector<SpectralSignature> signatures;  // one per pattern offset
  Mask truth;                                 // anchor pixels
};

struct PatternSceneOptions {
  double background_scale = 0.1;
  double signature_low = 1.0;
  double signature_high = 2.0;
};

/// Plants pattern instances: each anchor places signature j at pixel
/// anchor + p_j (circularly). Background is low-amplitude uniform noise.
inline PatternScene make_pattern_scene(const GridDims& dims, Index n_bands, const Pattern& P,
                                       Index n_anchors, std::uint64_t seed,
                                       const PatternSceneOptions& opt = {}) {
  require_valid(dims);
  if (n_bands < 1 || n_anchors < 0) throw validation_error("bad synthetic scene parameters");
  const Index nP = dims.n_pixels();

  Eigen::MatrixXd data(nP, n_bands);
  {
    Rng bg(split_seed(seed, 11));
    double* p = data.data();
    for (Index i = 0; i < data.size(); ++i) p[i] = opt.background_scale * bg.uniform();
  }

  Rng rng(split_seed(seed, 12));
  std::vector<SpectralSignature> sigs;
  for (Index j = 0; j < P.size(); ++j) {
    SpectralSignature s(n_bands);
    for (Index b = 0; b < n_bands; ++b)
      s[b] = opt.signature_low + (opt.signature_high - opt.signature_low) * rng.uniform();
    sigs.push_back(std::move(s));
  }

  Mask truth(dims);
  std::vector<std::uint8_t> occupied(static_cast<std::size_t>(nP), 0);
  Rng place(split_seed(seed, 13));
  Index placed = 0;
  for (int tries = 0; placed < n_anchors && tries < 100000; ++tries) {
    const std::int64_t r0 = place.below(dims.n_rows);
    const std::int64_t c0 = place.below(dims.n_cols);
    std::vector<Index> cells;
    cells.reserve(static_cast<std::size_t>(P.size()));
    bool clash = false;
    for (const auto& p : P.offsets()) {
      const Index q = vecc_index(mod_floor(r0 + p.dr, dims.n_rows),
                                 mod_floor(c0 + p.dc, dims.n_cols), dims);
      if (occupied[static_cast<std::size_t>(q)]) {
        clash = true;
        break;
      }
      cells.push_back(q);
    }
    if (clash) continue;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      data.row(cells[j]) = sigs[j].transpose();
      occupied[static_cast<std::size_t>(cells[j])] = 1;
    }
    truth.values[static_cast<std::size_t>(vecc_index(r0, c0, dims))] = 1;
    ++placed;
  }
  if (placed < n_anchors)
    throw validation_error("could not place all pattern anchors; grid too crowded");
  return {MultispectralImage(dims, std::move(data)), std::move(sigs), std::move(truth)};
}

}  // namespace cpm
