#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cpm/detect.hpp"
#include "cpm/rng.hpp"
#include "cpm/synthetic.hpp"
#include "test_util.hpp"

using namespace cpm;
using testutil::exact_equal;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Pattern hook() { return Pattern::from_offsets({{0, 0}, {1, 0}, {1, 1}}); }

}  // namespace

TEST_CASE("two-level quantization", "[detect]") {
  const GridDims d{5, 1};
  SECTION("separated clusters") {
    const Mask m = lloyd_max_binarize(vec({0, 0, 0.1, 5, 5.2}), d);
    CHECK(m.values == std::vector<std::uint8_t>{0, 0, 0, 1, 1});
  }
  SECTION("constant input is all negative") {
    const Mask m = lloyd_max_binarize(Eigen::VectorXd::Constant(5, 3.3), d);
    CHECK(m.n_positive() == 0);
  }
  SECTION("two points split") {
    const Mask m = lloyd_max_binarize(vec({0, 1}), GridDims{2, 1});
    CHECK(m.values == std::vector<std::uint8_t>{0, 1});
  }
  SECTION("positive scaling leaves the mask unchanged") {
    Rng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd u = rng.uniform_vector(24);
      const double c = 0.01 + 50.0 * rng.uniform();
      const GridDims dims{6, 4};
      CHECK(lloyd_max_binarize(u, dims) == lloyd_max_binarize(c * u, dims));
    }
  }
}

TEST_CASE("mask scoring", "[detect]") {
  const GridDims d{2, 2};
  const Mask a(d, {1, 0, 1, 0});
  SECTION("identical masks") {
    const auto m = evaluate_mask(a, a);
    CHECK(m.wrong_pct == 0.0);
    CHECK(m.anchor_errors == 0);
  }
  SECTION("complementary masks") {
    const Mask b(d, {0, 1, 0, 1});
    const auto m = evaluate_mask(a, b);
    CHECK(m.wrong_pct == 100.0);
    CHECK(m.anchor_errors == 4);
  }
  SECTION("single flipped pixel on a 64x64 grid") {
    const GridDims big{64, 64};
    Mask x(big), y(big);
    y.values[100] = 1;
    const auto m = evaluate_mask(x, y);
    CHECK(m.anchor_errors == 1);
    CHECK(m.wrong_pct == Catch::Approx(100.0 / 4096.0));
  }
  SECTION("grid mismatch") {
    CHECK_THROWS_AS(evaluate_mask(a, Mask(GridDims{4, 1}, {1, 0, 1, 0})), validation_error);
  }
}

TEST_CASE("noise injection", "[detect]") {
  Rng rng(62);
  const GridDims dims{50, 50};
  const MultispectralImage X(dims, rng.uniform_vector(dims.n_pixels() * 4)
                                       .reshaped(dims.n_pixels(), 4)
                                       .eval());
  SECTION("zero percent is the identity") {
    CHECK(exact_equal(add_noise(X, 0.0, 1).data, X.data));
  }
  SECTION("same seed, same noise") {
    CHECK(exact_equal(add_noise(X, 5.0, 9).data, add_noise(X, 5.0, 9).data));
    CHECK_FALSE(exact_equal(add_noise(X, 5.0, 9).data, add_noise(X, 5.0, 10).data));
  }
  SECTION("empirical deviation tracks the requested level") {
    const double range = X.data.maxCoeff() - X.data.minCoeff();
    const auto noisy = add_noise(X, 10.0, 3);
    const Eigen::MatrixXd diff = noisy.data - X.data;
    const double sd = std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));
    CHECK(sd == Catch::Approx(0.10 * range).epsilon(0.05));
  }
  SECTION("negative percentage is rejected") {
    CHECK_THROWS_AS(add_noise(X, -1.0, 1), validation_error);
  }
}

TEST_CASE("synthetic template scenes", "[detect]") {
  const GridDims dims{16, 16};
  const auto scene = make_template_scene(dims, 4, 5, 42);
  CHECK(scene.truth.n_positive() == 5 * 4);  // five 2x2 blocks
  // planted rows carry the signature exactly
  for (Index q = 0; q < dims.n_pixels(); ++q)
    if (scene.truth.values[static_cast<std::size_t>(q)])
      CHECK(exact_equal(scene.image.data.row(q).transpose(), scene.signature));
  // deterministic
  const auto again = make_template_scene(dims, 4, 5, 42);
  CHECK(exact_equal(scene.image.data, again.image.data));
  CHECK(scene.truth == again.truth);
}

TEST_CASE("full-data template matching finds planted pixels", "[detect]") {
  const GridDims dims{16, 16};

  SECTION("single planted pixel against orthogonal noise") {
    TemplateSceneOptions opt;
    opt.target_size = 1;
    const auto scene = make_template_scene(dims, 4, 1, 7, opt);
    const auto report = template_match(scene.image, scene.signature, Regularizer::l1());
    CHECK(report.solver.converged);
    CHECK(report.mask == scene.truth);
  }

  SECTION("five copies are all detected") {
    TemplateSceneOptions opt;
    opt.target_size = 1;
    const auto scene = make_template_scene(dims, 4, 5, 8, opt);
    const auto report = template_match(scene.image, scene.signature, Regularizer::l1());
    CHECK(report.solver.converged);
    CHECK(report.mask == scene.truth);
    CHECK(report.u.minCoeff() >= 0.0);
  }

  SECTION("zero signature yields an empty mask") {
    const auto scene = make_template_scene(dims, 4, 3, 9);
    const auto report =
        template_match(scene.image, Eigen::VectorXd::Zero(4), Regularizer::l1());
    CHECK(report.solver.converged);
    CHECK(report.u.isZero(0.0));
    CHECK(report.mask.n_positive() == 0);
  }

  SECTION("signature length is validated") {
    const auto scene = make_template_scene(dims, 4, 1, 10);
    CHECK_THROWS_AS(template_match(scene.image, Eigen::VectorXd::Zero(3), Regularizer::l1()),
                    validation_error);
  }
}

TEST_CASE("scaling data and tolerance together preserves the mask", "[detect]") {
  const GridDims dims{12, 12};
  TemplateSceneOptions opt;
  opt.target_size = 1;
  const auto scene = make_template_scene(dims, 4, 3, 11, opt);
  SolverConfig cfg;
  const auto base = template_match(scene.image, scene.signature, Regularizer::l1(), cfg);
  for (double c : {0.5, 3.0, 20.0}) {
    SolverConfig scaled = cfg;
    scaled.err = c * cfg.err;
    const auto rep =
        template_match(scene.image, (c * scene.signature).eval(), Regularizer::l1(), scaled);
    CHECK(rep.mask == base.mask);
  }
}

TEST_CASE("square invertible sensing reproduces the full-data result", "[detect]") {
  const GridDims dims{8, 8};
  TemplateSceneOptions opt;
  opt.target_size = 1;
  const auto scene = make_template_scene(dims, 3, 2, 12, opt);
  const auto direct = template_match(scene.image, scene.signature, Regularizer::tvl1(dims));
  const auto ens = gen_gaussian(dims.n_pixels(), dims.n_pixels(), 13);
  const auto compressive = compressive_template_match(measure(ens, scene.image), ens, dims,
                                                      scene.signature, Regularizer::tvl1(dims));
  CHECK(compressive.mask == direct.mask);
}

TEST_CASE("compressive template matching on the planted suite", "[detect]") {
  const GridDims dims{16, 16};
  TemplateSceneOptions opt;
  opt.target_size = 1;
  const auto scene = make_template_scene(dims, 4, 5, 42, opt);
  const Index m = measurement_count(0.30, dims.n_pixels());

  const auto gauss = gen_gaussian(m, dims.n_pixels(), 101);
  auto report = compressive_template_match(measure(gauss, scene.image), gauss, dims,
                                           scene.signature, Regularizer::tvl1(dims));
  report.score_against(scene.truth);
  REQUIRE(report.wrong_pct.has_value());
  CHECK(*report.wrong_pct <= 5.0);

  const auto circ = gen_circulant(m, dims.n_pixels(), 102);
  auto creport = compressive_template_match(measure(circ, scene.image), circ, dims,
                                            scene.signature, Regularizer::tvl1(dims));
  creport.score_against(scene.truth);
  CHECK(*creport.wrong_pct <= 10.0);
}

TEST_CASE("pattern pipeline detects a planted hook", "[detect]") {
  const GridDims dims{16, 16};
  const auto scene = make_pattern_scene(dims, 1, hook(), 1, 21);
  const auto result = compressive_pattern_match(scene.image, hook(), scene.signatures, 0.30,
                                                Regularizer::l1(), SolverConfig{}, 31);
  const auto metrics = evaluate_mask(result.report.mask, scene.truth);
  CHECK(metrics.anchor_errors == 0);
  CHECK(result.plan.E.size() == 76);
  CHECK(result.m_virt.rows() == 76);
  CHECK(result.m_virt.cols() == 3);
}

TEST_CASE("single-offset pattern degenerates to shifted template matching", "[detect]") {
  const GridDims dims{12, 12};
  TemplateSceneOptions opt;
  opt.target_size = 1;
  const auto scene = make_template_scene(dims, 3, 2, 14, opt);
  const Pattern p1 = Pattern::from_offsets({{0, 0}});

  const auto viaPattern = compressive_pattern_match(scene.image, p1, {scene.signature}, 0.30,
                                                    Regularizer::l1(), SolverConfig{}, 77);

  // the same plan and measurement, composed by hand
  MeasurementPlan plan = plan_for_pattern(p1, measurement_count(0.30, dims.n_pixels()));
  draw_measurement(plan, dims, 77);
  const Eigen::MatrixXd M_eff = build_effective_sensing(plan.f, plan.EP, dims).measure(scene.image);
  const auto manual = pattern_match_from_effective(M_eff, plan, dims, {scene.signature},
                                                   Regularizer::l1(), SolverConfig{});

  CHECK(exact_equal(viaPattern.m_virt, manual.m_virt));
  CHECK(exact_equal(viaPattern.m_eff, viaPattern.m_virt));  // identity reconstruction
  CHECK(viaPattern.report.mask == manual.report.mask);
  CHECK(exact_equal(viaPattern.report.u, manual.report.u));
}

TEST_CASE("pattern pipeline rejects plans that cannot fit", "[detect]") {
  const GridDims dims{8, 8};
  const auto scene = make_pattern_scene(dims, 1, hook(), 1, 22);
  // a 30% rate on an 8x8 grid needs 19 virtual measurements; the planned
  // staircase plus the hook cannot exceed the grid, so this must succeed
  CHECK_NOTHROW(compressive_pattern_match(scene.image, hook(), scene.signatures, 0.30,
                                          Regularizer::l1(), SolverConfig{}, 5));
  // a huge pattern cannot fit
  const Pattern wide = Pattern::from_offsets({{0, 0}, {0, 7}, {7, 0}, {7, 7}});
  CHECK_THROWS_AS(compressive_pattern_match(scene.image, wide, std::vector<SpectralSignature>(
                                                4, Eigen::VectorXd::Ones(1)),
                                            0.30, Regularizer::l1(), SolverConfig{}, 5),
                  validation_error);
}

TEST_CASE("border wrap zones can be excluded from scoring", "[detect]") {
  const GridDims dims{4, 4};
  const Mask zone = pattern_wrap_zone(dims, hook());
  // the hook spans 2x2, so the last row and last column wrap
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c)
      CHECK(zone.values[static_cast<std::size_t>(vecc_index(r, c, dims))] ==
            ((r == 3 || c == 3) ? 1 : 0));

  Mask a(dims), b(dims);
  a.values[static_cast<std::size_t>(vecc_index(3, 3, dims))] = 1;  // disagrees inside the zone
  const auto all = evaluate_mask(a, b);
  CHECK(all.anchor_errors == 1);
  const auto trimmed = evaluate_mask(a, b, &zone);
  CHECK(trimmed.anchor_errors == 0);
  CHECK(trimmed.wrong_pct == 0.0);
}

TEST_CASE("reconstructed and direct virtual measurements agree end to end", "[detect]") {
  // the two routes sum the same products in different orders, so real-valued
  // data agrees to rounding and the downstream masks coincide
  const GridDims dims{12, 12};
  const auto scene = make_pattern_scene(dims, 2, hook(), 1, 33);
  MeasurementPlan plan = plan_for_pattern(hook(), measurement_count(0.30, dims.n_pixels()));
  REQUIRE(plan_fits(plan, dims));
  draw_measurement(plan, dims, 44);

  const Eigen::MatrixXd M_eff =
      build_effective_sensing(plan.f, plan.EP, dims).measure(scene.image);
  const auto via_reconstruction = pattern_match_from_effective(
      M_eff, plan, dims, scene.signatures, Regularizer::l1(), SolverConfig{});

  Eigen::MatrixXd F_virt(plan.E.size(), dims.n_pixels());
  for (Index i = 0; i < plan.E.size(); ++i)
    F_virt.row(i) =
        apply_qp(plan.f, plan.E.elements()[static_cast<std::size_t>(i)], dims).transpose();
  const Eigen::MatrixXd M_direct = F_virt * spectralize(scene.image, hook()).data;

  CHECK((via_reconstruction.m_virt - M_direct).cwiseAbs().maxCoeff() <= 1e-10);

  // solving against the directly measured virtual data gives the same mask
  const VirtualGram gram(plan.f, plan.E, dims);
  const Eigen::MatrixXd A_direct = M_direct.transpose() * gram.solve(F_virt);
  const double scale = static_cast<double>(plan.E.size()) / static_cast<double>(dims.n_pixels());
  const auto sol = solve_constrained(A_direct, scale * spectralized_signature(scene.signatures),
                                     Regularizer::l1(), SolverConfig{});
  CHECK(lloyd_max_binarize(sol.u, dims) == via_reconstruction.report.mask);
}

TEST_CASE("noise robustness of pattern detection", "[detect]") {
  const GridDims dims{16, 16};
  auto mean_errors = [&](double noise_pct, std::uint64_t measure_base) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto scene = make_pattern_scene(dims, 1, hook(), 1, 100 + seed);
      const auto img =
          noise_pct > 0.0 ? add_noise(scene.image, noise_pct, 300 + seed) : scene.image;
      const auto res = compressive_pattern_match(img, hook(), scene.signatures, 0.30,
                                                 Regularizer::l1(), SolverConfig{},
                                                 measure_base + seed);
      total += static_cast<double>(evaluate_mask(res.report.mask, scene.truth).anchor_errors);
    }
    return total / 5.0;
  };
  const double clean = mean_errors(0.0, 200);
  const double noisy = mean_errors(10.0, 200);
  const double noisy_rerun = mean_errors(10.0, 400);
  // rerun stability at the same noise level, and no improvement from noise
  CHECK(noisy <= noisy_rerun + 2.0);
  CHECK(noisy_rerun <= noisy + 2.0);
  CHECK(clean <= noisy);
}
