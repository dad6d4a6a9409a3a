#include <catch2/catch_amalgamated.hpp>

#include "cpm/rng.hpp"
#include "cpm/spectralize.hpp"
#include "test_util.hpp"

using namespace cpm;
using testutil::exact_equal;

namespace {

Pattern hook() { return Pattern::from_offsets({{0, 0}, {1, 0}, {1, 1}}); }

MultispectralImage gray3x3() {
  Eigen::MatrixXd I(3, 3);
  I << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  return {GridDims{3, 3}, vecc(I)};
}

}  // namespace

TEST_CASE("pattern construction", "[spectralize]") {
  CHECK(hook().size() == 3);
  CHECK_THROWS_AS(Pattern::from_offsets({}), validation_error);
  CHECK_THROWS_AS(Pattern::from_offsets({{1, 0}}), validation_error);
  CHECK_THROWS_AS(Pattern::from_offsets({{0, 0}, {1, 1}, {1, 1}}), validation_error);

  SECTION("bounding extent") {
    const auto [a, b] = hook().bounding_extent();
    CHECK(a == 2);
    CHECK(b == 2);
    const auto [c, d] = Pattern::from_offsets({{0, 0}, {2, -3}}).bounding_extent();
    CHECK(c == 3);
    CHECK(d == 4);
  }

  SECTION("rectangle helper") {
    const Pattern r = rectangle_pattern(2, 3);
    CHECK(r.size() == 6);
    CHECK(r.offsets()[0] == PixelShift{0, 0});
    CHECK(r.offsets()[5] == PixelShift{1, 2});
    CHECK_THROWS_AS(rectangle_pattern(0, 3), validation_error);
  }
}

TEST_CASE("raw shapes are translated to a reference corner", "[spectralize]") {
  SECTION("already normalized input is unchanged") {
    const auto norm = normalize_pattern({{0, 0}, {1, 0}, {1, 1}});
    CHECK(norm.translation == PixelShift{0, 0});
    CHECK(norm.pattern.offsets() == hook().offsets());
  }
  SECTION("shifted hook comes back to the origin") {
    const auto norm = normalize_pattern({{5, 7}, {6, 7}, {6, 8}});
    CHECK(norm.translation == PixelShift{-5, -7});
    CHECK(norm.pattern.offsets() == hook().offsets());
  }
  SECTION("lexicographically smallest offset leads") {
    const auto norm = normalize_pattern({{2, 2}, {-1, 5}});
    CHECK(norm.translation == PixelShift{1, -5});
    CHECK(norm.pattern.offsets()[0] == PixelShift{0, 0});
    CHECK(norm.pattern.offsets()[1] == PixelShift{3, -3});
  }
}

TEST_CASE("spectralization of the 3x3 ramp along the hook", "[spectralize]") {
  const MultispectralImage spec = spectralize(gray3x3(), hook());
  REQUIRE(spec.n_bands() == 3);
  REQUIRE(spec.n_pixels() == 9);
  Eigen::MatrixXd want(9, 3);
  want << 1, 4, 5,
          4, 7, 8,
          7, 1, 2,
          2, 5, 6,
          5, 8, 9,
          8, 2, 3,
          3, 6, 4,
          6, 9, 7,
          9, 3, 1;
  CHECK(exact_equal(spec.data, want));
  // the row of the anchor at (0, 1) holds the pattern's values
  CHECK(exact_equal(spec.data.row(vecc_index(0, 1, spec.dims)).transpose(),
                    Eigen::Vector3d(2, 5, 6)));
}

TEST_CASE("single-offset pattern is the identity transform", "[spectralize]") {
  Rng rng(41);
  const GridDims dims{4, 3};
  const MultispectralImage X(dims, rng.normal_matrix(dims.n_pixels(), 2));
  const auto spec = spectralize(X, Pattern::from_offsets({{0, 0}}));
  CHECK(exact_equal(spec.data, X.data));
}

TEST_CASE("rows gather the spectra along the pattern", "[spectralize]") {
  Rng rng(42);
  const GridDims dims{5, 4};
  const MultispectralImage X(dims, rng.normal_matrix(dims.n_pixels(), 3));
  const Pattern P = Pattern::from_offsets({{0, 0}, {2, 1}, {-1, 3}, {1, 1}});
  const auto spec = spectralize(X, P);
  REQUIRE(spec.n_bands() == 12);
  for (Index r = 0; r < dims.n_rows; ++r)
    for (Index c = 0; c < dims.n_cols; ++c) {
      const Index q = vecc_index(r, c, dims);
      for (Index j = 0; j < P.size(); ++j) {
        const auto& p = P.offsets()[static_cast<std::size_t>(j)];
        const Index src = vecc_index(mod_floor(r + p.dr, dims.n_rows),
                                     mod_floor(c + p.dc, dims.n_cols), dims);
        CHECK(exact_equal(spec.data.block(q, 3 * j, 1, 3), X.data.block(src, 0, 1, 3)));
      }
    }
}

TEST_CASE("band blocks are shifted copies", "[spectralize]") {
  Rng rng(43);
  const GridDims dims{4, 6};
  const MultispectralImage X(dims, rng.normal_matrix(dims.n_pixels(), 2));
  const Pattern P = hook();
  const auto spec = spectralize(X, P);
  for (Index j = 0; j < P.size(); ++j) {
    const auto& p = P.offsets()[static_cast<std::size_t>(j)];
    for (Index b = 0; b < 2; ++b) {
      const Eigen::MatrixXd block_band = devecc(spec.data.col(j * 2 + b), dims);
      CHECK(exact_equal(block_band, shift_band(X.band(b), -p)));
    }
  }
}

TEST_CASE("planted arrangements become plain signatures", "[spectralize]") {
  Rng rng(44);
  for (int trial = 0; trial < 10; ++trial) {
    const GridDims dims{4 + rng.below(3), 4 + rng.below(3)};
    const Index nB = 1 + rng.below(3);
    // random pattern with distinct offsets inside a 3x3 box
    std::vector<PixelShift> offs{{0, 0}};
    while (offs.size() < 3) {
      const PixelShift cand{rng.below(3), rng.below(3)};
      bool dup = false;
      for (const auto& o : offs) dup = dup || o == cand;
      if (!dup) offs.push_back(cand);
    }
    const Pattern P = Pattern::from_offsets(offs);

    Eigen::MatrixXd data = rng.normal_matrix(dims.n_pixels(), nB);
    const Index anchor_r = rng.below(dims.n_rows), anchor_c = rng.below(dims.n_cols);
    std::vector<SpectralSignature> sigs;
    for (Index j = 0; j < P.size(); ++j) {
      const auto& p = P.offsets()[static_cast<std::size_t>(j)];
      SpectralSignature s = rng.normal_vector(nB);
      data.row(vecc_index(mod_floor(anchor_r + p.dr, dims.n_rows),
                          mod_floor(anchor_c + p.dc, dims.n_cols), dims)) = s.transpose();
      sigs.push_back(std::move(s));
    }
    const auto spec = spectralize(MultispectralImage(dims, data), P);
    const Index anchor = vecc_index(anchor_r, anchor_c, dims);
    CHECK(exact_equal(spec.data.row(anchor).transpose(), spectralized_signature(sigs)));
  }
}

TEST_CASE("spectralization commutes with global shifts", "[spectralize]") {
  Rng rng(45);
  const GridDims dims{5, 5};
  const MultispectralImage X(dims, rng.normal_matrix(dims.n_pixels(), 2));
  const Pattern P = hook();
  for (int trial = 0; trial < 5; ++trial) {
    const PixelShift e{rng.below(7) - 3, rng.below(7) - 3};
    Eigen::MatrixXd shifted(dims.n_pixels(), 2);
    for (Index b = 0; b < 2; ++b) shifted.col(b) = apply_qp(X.data.col(b), e, dims);
    const auto lhs = spectralize(MultispectralImage(dims, shifted), P);
    const auto base = spectralize(X, P);
    for (Index col = 0; col < lhs.n_bands(); ++col)
      CHECK(exact_equal(lhs.data.col(col), apply_qp(base.data.col(col), e, dims)));
  }
}

TEST_CASE("signature concatenation", "[spectralize]") {
  SECTION("grayscale values concatenate in pattern order") {
    const SpectralSignature s =
        spectralized_signature({Eigen::VectorXd::Constant(1, 2.0),
                                Eigen::VectorXd::Constant(1, 5.0),
                                Eigen::VectorXd::Constant(1, 6.0)});
    CHECK(exact_equal(s, Eigen::Vector3d(2, 5, 6)));
  }
  SECTION("single signature is unchanged") {
    const Eigen::VectorXd s = Eigen::Vector3d(1, 2, 3);
    CHECK(exact_equal(spectralized_signature({s}), s));
  }
  SECTION("two bands") {
    const SpectralSignature s =
        spectralized_signature({Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)});
    CHECK(exact_equal(s, Eigen::Vector4d(1, 2, 3, 4)));
  }
  SECTION("length mismatch") {
    CHECK_THROWS_AS(spectralized_signature({Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3)}),
                    validation_error);
  }
}
