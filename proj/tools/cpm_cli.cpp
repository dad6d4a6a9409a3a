// Command-line front end: synthetic scene generation, template and pattern
// matching pipelines, measurement planning, rate/noise sweeps, and mask
// evaluation. Rasters are JSON-header + raw-payload pairs, masks are binary
// PGM, reports and plans are JSON, sweep curves are CSV.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cpm/cpm.hpp"

namespace {

using cpm::Index;
using cpm::json;

struct CliState {
  bool json_errors = false;
  bool strict = false;
  bool nonconverged = false;
};

std::pair<std::string, std::string> raster_paths(const std::string& image_arg) {
  const std::string suffix = ".json";
  if (image_arg.size() > suffix.size() &&
      image_arg.compare(image_arg.size() - suffix.size(), suffix.size(), suffix) == 0) {
    const std::string stem = image_arg.substr(0, image_arg.size() - suffix.size());
    return {image_arg, stem + ".raw"};
  }
  return {image_arg + ".json", image_arg + ".raw"};
}

cpm::MultispectralImage load_image(const std::string& image_arg) {
  const auto [header, raw] = raster_paths(image_arg);
  return cpm::load_raster(header, raw);
}

cpm::Regularizer make_regularizer(const std::string& name, const cpm::GridDims& dims) {
  if (name == "l1") return cpm::Regularizer::l1();
  if (name == "tvl1") return cpm::Regularizer::tvl1(dims);
  throw cpm::validation_error("unknown regularizer '" + name + "' (expected l1 or tvl1)");
}

cpm::SensingKind make_sensing(const std::string& name) {
  if (name == "gaussian") return cpm::SensingKind::gaussian;
  if (name == "circulant") return cpm::SensingKind::circulant;
  throw cpm::validation_error("unknown sensing kind '" + name +
                              "' (expected gaussian or circulant)");
}

// "5", "1,5,20" or "1..40" as integer percents
std::vector<int> parse_int_range(const std::string& text) {
  std::vector<int> out;
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots));
      const int hi = std::stoi(text.substr(dots + 2));
      if (hi < lo) throw cpm::validation_error("empty range '" + text + "'");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      std::size_t pos = 0;
      while (pos < text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        out.push_back(std::stoi(text.substr(pos, comma - pos)));
        pos = comma + 1;
      }
    }
  } catch (const std::exception&) {
    throw cpm::validation_error("cannot parse range '" + text + "'");
  }
  if (out.empty()) throw cpm::validation_error("empty range '" + text + "'");
  return out;
}

struct SolverFlags {
  std::string reg = "l1";
  double err = 1e-2;
  double beta1 = 1.0;
  double beta2 = 1000.0;
  int max_iter = 500;

  void attach(CLI::App* cmd) {
    cmd->add_option("--reg", reg, "regularizer: l1 or tvl1")->default_val("l1");
    cmd->add_option("--err", err, "constraint tolerance")->default_val(1e-2);
    cmd->add_option("--beta1", beta1, "data-term weight")->default_val(1.0);
    cmd->add_option("--beta2", beta2, "splitting weight")->default_val(1000.0);
    cmd->add_option("--max-iter", max_iter, "iteration cap")->default_val(500);
  }

  cpm::SolverConfig config() const {
    cpm::SolverConfig cfg;
    cfg.err = err;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.max_iter = max_iter;
    return cfg;
  }
};

json report_json(const cpm::DetectionReport& report, double elapsed_seconds, json config) {
  json j = {{"solver",
             {{"iterations", report.solver.iterations},
              {"residual", report.solver.residual},
              {"converged", report.solver.converged}}},
            {"elapsed_seconds", elapsed_seconds},
            {"config", std::move(config)},
            {"positives", report.mask.n_positive()}};
  if (report.wrong_pct) j["wrong_pct"] = *report.wrong_pct;
  if (report.anchor_errors) j["anchor_errors"] = *report.anchor_errors;
  return j;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void finish_detection(CliState& state, cpm::DetectionReport& report,
                      const std::string& reference_path, const std::string& out_mask,
                      const std::string& out_report, double elapsed, json config) {
  if (!reference_path.empty()) report.score_against(cpm::load_mask_pgm(reference_path));
  if (!out_mask.empty()) cpm::save_mask_pgm(out_mask, report.mask);
  const json j = report_json(report, elapsed, std::move(config));
  if (!out_report.empty()) cpm::detail::write_text_file(out_report, j.dump(2) + "\n");
  std::cout << j.dump() << "\n";
  if (!report.solver.converged) state.nonconverged = true;
}

void add_gen_synthetic(CLI::App& app) {
  auto* cmd = app.add_subcommand("gen-synthetic",
                                 "generate a planted-target raster with its ground truth");
  struct Opts {
    Index rows = 16, cols = 16, bands = 4, targets = 5;
    std::string pattern, out;
    std::uint64_t seed = 0;
    std::int64_t target_size = 2;
  };
  auto opts = std::make_shared<Opts>();
  cmd->add_option("--rows", opts->rows)->required();
  cmd->add_option("--cols", opts->cols)->required();
  cmd->add_option("--bands", opts->bands)->default_val(4);
  cmd->add_option("--targets", opts->targets, "planted targets (or pattern anchors)")
      ->default_val(5);
  cmd->add_option("--target-size", opts->target_size, "side of each planted square target")
      ->default_val(2);
  cmd->add_option("--pattern", opts->pattern,
                  "pattern file; plants pattern instances instead of square targets");
  cmd->add_option("--seed", opts->seed)->required();
  cmd->add_option("--out", opts->out, "output prefix")->required();
  cmd->callback([opts]() {
    const cpm::GridDims dims{opts->rows, opts->cols};
    json summary = {{"raster", opts->out + ".json"},
                    {"payload", opts->out + ".raw"},
                    {"truth", opts->out + ".truth.pgm"}};
    if (opts->pattern.empty()) {
      cpm::TemplateSceneOptions sopt;
      sopt.target_size = opts->target_size;
      const auto scene =
          cpm::make_template_scene(dims, opts->bands, opts->targets, opts->seed, sopt);
      cpm::save_raster(opts->out + ".json", opts->out + ".raw", scene.image);
      cpm::save_mask_pgm(opts->out + ".truth.pgm", scene.truth);
      cpm::save_signatures(opts->out + ".signature.json", {scene.signature});
      summary["signature"] = opts->out + ".signature.json";
      summary["planted_pixels"] = scene.truth.n_positive();
    } else {
      const auto norm = cpm::load_pattern(opts->pattern);
      const auto scene =
          cpm::make_pattern_scene(dims, opts->bands, norm.pattern, opts->targets, opts->seed);
      cpm::save_raster(opts->out + ".json", opts->out + ".raw", scene.image);
      cpm::save_mask_pgm(opts->out + ".truth.pgm", scene.truth);
      cpm::save_signatures(opts->out + ".signatures.json", scene.signatures);
      summary["signatures"] = opts->out + ".signatures.json";
      summary["anchors"] = scene.truth.n_positive();
    }
    std::cout << summary.dump() << "\n";
  });
}

void add_template_match(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("template-match", "locate a signature using the full data cube");
  struct Opts {
    std::string image, signature, out_mask, out_report, reference;
    SolverFlags solver;
  };
  auto opts = std::make_shared<Opts>();
  cmd->add_option("--image", opts->image)->required();
  cmd->add_option("--signature", opts->signature)->required();
  cmd->add_option("--out-mask", opts->out_mask);
  cmd->add_option("--out-report", opts->out_report);
  cmd->add_option("--reference", opts->reference, "truth mask for scoring");
  opts->solver.attach(cmd);
  cmd->callback([opts, &state]() {
    const Stopwatch timer;
    const auto X = load_image(opts->image);
    const auto s = cpm::load_signature(opts->signature);
    auto report = cpm::template_match(X, s, make_regularizer(opts->solver.reg, X.dims),
                                      opts->solver.config());
    finish_detection(state, report, opts->reference, opts->out_mask, opts->out_report,
                     timer.seconds(),
                     {{"mode", "template-match"},
                      {"reg", opts->solver.reg},
                      {"err", opts->solver.err},
                      {"beta1", opts->solver.beta1},
                      {"beta2", opts->solver.beta2},
                      {"max_iter", opts->solver.max_iter}});
  });
}

void add_ctemplate_match(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("ctemplate-match",
                                 "locate a signature from compressive measurements");
  struct Opts {
    std::string image, signature, out_mask, out_report, reference;
    std::string sensing = "gaussian";
    double rate = 0.3;
    std::uint64_t seed = 0;
    SolverFlags solver;
  };
  auto opts = std::make_shared<Opts>();
  cmd->add_option("--image", opts->image)->required();
  cmd->add_option("--signature", opts->signature)->required();
  cmd->add_option("--rate", opts->rate, "measurement rate in (0,1)")->required();
  cmd->add_option("--sensing", opts->sensing, "gaussian or circulant")->default_val("gaussian");
  cmd->add_option("--seed", opts->seed)->required();
  cmd->add_option("--out-mask", opts->out_mask);
  cmd->add_option("--out-report", opts->out_report);
  cmd->add_option("--reference", opts->reference, "truth mask for scoring");
  opts->solver.attach(cmd);
  cmd->callback([opts, &state]() {
    const Stopwatch timer;
    const auto X = load_image(opts->image);
    const auto s = cpm::load_signature(opts->signature);
    const Index m = cpm::measurement_count(opts->rate, X.n_pixels());
    const auto ens =
        cpm::gen_sensing(make_sensing(opts->sensing), m, X.n_pixels(), opts->seed);
    auto report = cpm::compressive_template_match(
        cpm::measure(ens, X), ens, X.dims, s, make_regularizer(opts->solver.reg, X.dims),
        opts->solver.config());
    finish_detection(state, report, opts->reference, opts->out_mask, opts->out_report,
                     timer.seconds(),
                     {{"mode", "ctemplate-match"},
                      {"rate", opts->rate},
                      {"m", m},
                      {"sensing", opts->sensing},
                      {"seed", opts->seed},
                      {"reg", opts->solver.reg},
                      {"err", opts->solver.err},
                      {"beta1", opts->solver.beta1},
                      {"beta2", opts->solver.beta2},
                      {"max_iter", opts->solver.max_iter}});
  });
}

void add_cpattern_match(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("cpattern-match",
                                 "locate a spatial pattern from shifted compressive measurements");
  struct Opts {
    std::string image, pattern, signatures, out_mask, out_report, out_plan, reference;
    double rate = 0.3;
    std::uint64_t seed = 0;
    SolverFlags solver;
  };
  auto opts = std::make_shared<Opts>();
  cmd->add_option("--image", opts->image)->required();
  cmd->add_option("--pattern", opts->pattern)->required();
  cmd->add_option("--signatures", opts->signatures, "per-offset signatures")->required();
  cmd->add_option("--rate", opts->rate, "virtual measurement rate in (0,1)")->required();
  cmd->add_option("--seed", opts->seed)->required();
  cmd->add_option("--out-mask", opts->out_mask);
  cmd->add_option("--out-report", opts->out_report);
  cmd->add_option("--out-plan", opts->out_plan);
  cmd->add_option("--reference", opts->reference, "truth anchor mask for scoring");
  opts->solver.attach(cmd);
  cmd->callback([opts, &state]() {
    const Stopwatch timer;
    const auto X = load_image(opts->image);
    const auto norm = cpm::load_pattern(opts->pattern);
    if (!(norm.translation == cpm::PixelShift{0, 0}))
      std::cerr << "note: pattern translated by (" << norm.translation.dr << ","
                << norm.translation.dc << ") to anchor its reference offset\n";
    const auto sigs = cpm::load_signatures(opts->signatures);
    auto result = cpm::compressive_pattern_match(X, norm.pattern, sigs, opts->rate,
                                                 make_regularizer(opts->solver.reg, X.dims),
                                                 opts->solver.config(), opts->seed);
    if (!opts->out_plan.empty()) cpm::save_plan(opts->out_plan, result.plan);
    finish_detection(state, result.report, opts->reference, opts->out_mask, opts->out_report,
                     timer.seconds(),
                     {{"mode", "cpattern-match"},
                      {"rate", opts->rate},
                      {"virtual_measurements", result.plan.E.size()},
                      {"effective_measurements", result.plan.EP.size()},
                      {"alpha", result.plan.alpha},
                      {"seed", opts->seed},
                      {"reg", opts->solver.reg},
                      {"err", opts->solver.err},
                      {"beta1", opts->solver.beta1},
                      {"beta2", opts->solver.beta2},
                      {"max_iter", opts->solver.max_iter}});
  });
}

void add_plan(CLI::App& app) {
  auto* cmd = app.add_subcommand("plan", "plan shifted measurements for a pattern and rate");
  struct Opts {
    std::string pattern, out;
    double rate = 0.25;
    Index rows = 0, cols = 0;
  };
  auto opts = std::make_shared<Opts>();
  cmd->add_option("--pattern", opts->pattern)->required();
  cmd->add_option("--rate", opts->rate, "virtual measurement rate in (0,1)")->required();
  cmd->add_option("--rows", opts->rows)->required();
  cmd->add_option("--cols", opts->cols)->required();
  cmd->add_option("--out", opts->out, "plan JSON path");
  cmd->callback([opts]() {
    const cpm::GridDims dims{opts->rows, opts->cols};
    cpm::require_valid(dims);
    const auto norm = cpm::load_pattern(opts->pattern);
    const Index A = cpm::measurement_count(opts->rate, dims.n_pixels());
    if (A < 1) throw cpm::validation_error("rate too small: no measurements");
    const auto plan = cpm::plan_for_pattern(norm.pattern, A);
    if (!cpm::plan_fits(plan, dims))
      throw cpm::validation_error("effective measurement set does not fit the grid");
    if (!opts->out.empty()) cpm::save_plan(opts->out, plan);
    const json j = {{"E", plan.E.size()},
                    {"h", plan.h},
                    {"EP", plan.EP.size()},
                    {"alpha", plan.alpha},
                    {"virtual_rate", static_cast<double>(plan.E.size()) /
                                         static_cast<double>(dims.n_pixels())},
                    {"effective_rate", static_cast<double>(plan.EP.size()) /
                                           static_cast<double>(dims.n_pixels())}};
    std::cout << j.dump() << "\n";
  });
}

void add_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "score a mask against a reference mask");
  struct Opts {
    std::string mask, reference, out, exclude_pattern;
  };
  auto opts = std::make_shared<Opts>();
  cmd->add_option("--mask", opts->mask)->required();
  cmd->add_option("--reference", opts->reference)->required();
  cmd->add_option("--exclude-pattern", opts->exclude_pattern,
                  "pattern file; skip anchors whose pattern would wrap the border");
  cmd->add_option("--out", opts->out, "metrics JSON path");
  cmd->callback([opts]() {
    const auto mask = cpm::load_mask_pgm(opts->mask);
    const auto reference = cpm::load_mask_pgm(opts->reference);
    std::optional<cpm::Mask> zone;
    if (!opts->exclude_pattern.empty())
      zone = cpm::pattern_wrap_zone(mask.dims,
                                    cpm::load_pattern(opts->exclude_pattern).pattern);
    const auto metrics = cpm::evaluate_mask(mask, reference, zone ? &*zone : nullptr);
    const json j = {{"wrong_pct", metrics.wrong_pct},
                    {"anchor_errors", metrics.anchor_errors},
                    {"n_pixels", mask.dims.n_pixels()},
                    {"excluded_pixels", zone ? zone->n_positive() : 0},
                    {"mask_positives", mask.n_positive()},
                    {"reference_positives", reference.n_positive()}};
    if (!opts->out.empty()) cpm::detail::write_text_file(opts->out, j.dump(2) + "\n");
    std::cout << j.dump() << "\n";
  });
}

struct SweepCommon {
  std::string image, reference, out;
  std::string signature, signatures, pattern;
  std::string sensing = "gaussian";
  std::uint64_t seed = 0;
  int repeats = 1;
  SolverFlags solver;

  void attach(CLI::App* cmd) {
    cmd->add_option("--image", image)->required();
    cmd->add_option("--reference", reference, "truth mask used for the metric")->required();
    cmd->add_option("--signature", signature, "signature file (template mode)");
    cmd->add_option("--signatures", signatures, "per-offset signature file (pattern mode)");
    cmd->add_option("--pattern", pattern, "pattern file; selects pattern mode");
    cmd->add_option("--sensing", sensing, "gaussian or circulant (template mode)")
        ->default_val("gaussian");
    cmd->add_option("--seed", seed)->required();
    cmd->add_option("--repeats", repeats, "independent draws per point")->default_val(1);
    cmd->add_option("--out", out, "CSV path")->required();
    solver.attach(cmd);
  }

  // one pipeline run; returns wrong_pct (template) or anchor_errors (pattern)
  double run_once(const cpm::MultispectralImage& X, const cpm::Mask& truth, double rate,
                  std::uint64_t run_seed) const {
    const auto reg = make_regularizer(solver.reg, X.dims);
    if (pattern.empty()) {
      const auto s = cpm::load_signature(signature);
      const Index m = cpm::measurement_count(rate, X.n_pixels());
      const auto ens = cpm::gen_sensing(make_sensing(sensing), m, X.n_pixels(), run_seed);
      auto report = cpm::compressive_template_match(cpm::measure(ens, X), ens, X.dims, s, reg,
                                                    solver.config());
      return cpm::evaluate_mask(report.mask, truth).wrong_pct;
    }
    const auto norm = cpm::load_pattern(pattern);
    const auto sigs = cpm::load_signatures(signatures);
    const auto result = cpm::compressive_pattern_match(X, norm.pattern, sigs, rate, reg,
                                                       solver.config(), run_seed);
    return static_cast<double>(
        cpm::evaluate_mask(result.report.mask, truth).anchor_errors);
  }

  void validate_mode() const {
    if (pattern.empty() && signature.empty())
      throw cpm::validation_error("need --signature (template mode) or --pattern/--signatures");
    if (!pattern.empty() && signatures.empty())
      throw cpm::validation_error("pattern mode needs --signatures");
  }
};

void add_sweep_rate(CLI::App& app) {
  auto* cmd = app.add_subcommand("sweep-rate", "mean detection error across measurement rates");
  struct Opts {
    SweepCommon common;
    std::string rates = "1..40";
  };
  auto opts = std::make_shared<Opts>();
  opts->common.attach(cmd);
  cmd->add_option("--rates", opts->rates, "integer percents: '1..40' or '5,10,20'")
      ->default_val("1..40");
  cmd->callback([opts]() {
    opts->common.validate_mode();
    const auto X = load_image(opts->common.image);
    const auto truth = cpm::load_mask_pgm(opts->common.reference);
    const auto rates = parse_int_range(opts->rates);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t ri = 0; ri < rates.size(); ++ri) {
      double total = 0.0;
      for (int rep = 0; rep < opts->common.repeats; ++rep) {
        const std::uint64_t run_seed =
            cpm::split_seed(opts->common.seed, 1000 * ri + static_cast<std::uint64_t>(rep));
        total += opts->common.run_once(X, truth, rates[ri] / 100.0, run_seed);
      }
      const double mean = total / static_cast<double>(opts->common.repeats);
      rows.push_back({std::to_string(rates[ri]), std::to_string(mean)});
      std::cout << "rate " << rates[ri] << "%: mean " << mean << "\n";
    }
    cpm::save_csv(opts->common.out,
                  {"rate_pct", opts->common.pattern.empty() ? "mean_wrong_pct"
                                                            : "mean_anchor_errors"},
                  rows);
  });
}

void add_sweep_noise(CLI::App& app) {
  auto* cmd = app.add_subcommand("sweep-noise", "mean detection error across noise levels");
  struct Opts {
    SweepCommon common;
    std::string noise = "0..10";
    double rate = 0.3;
  };
  auto opts = std::make_shared<Opts>();
  opts->common.attach(cmd);
  cmd->add_option("--noise", opts->noise, "integer percents: '0..10' or '0,5,10'")
      ->default_val("0..10");
  cmd->add_option("--rate", opts->rate, "measurement rate in (0,1)")->required();
  cmd->callback([opts]() {
    opts->common.validate_mode();
    const auto X = load_image(opts->common.image);
    const auto truth = cpm::load_mask_pgm(opts->common.reference);
    const auto levels = parse_int_range(opts->noise);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t ni = 0; ni < levels.size(); ++ni) {
      double total = 0.0;
      for (int rep = 0; rep < opts->common.repeats; ++rep) {
        const std::uint64_t noise_seed =
            cpm::split_seed(opts->common.seed, 7000000 + 1000 * ni + static_cast<std::uint64_t>(rep));
        const std::uint64_t run_seed =
            cpm::split_seed(opts->common.seed, 1000 * ni + static_cast<std::uint64_t>(rep));
        const auto noisy = cpm::add_noise(X, static_cast<double>(levels[ni]), noise_seed);
        total += opts->common.run_once(noisy, truth, opts->rate, run_seed);
      }
      const double mean = total / static_cast<double>(opts->common.repeats);
      rows.push_back({std::to_string(levels[ni]), std::to_string(mean)});
      std::cout << "noise " << levels[ni] << "%: mean " << mean << "\n";
    }
    cpm::save_csv(opts->common.out,
                  {"noise_pct", opts->common.pattern.empty() ? "mean_wrong_pct"
                                                             : "mean_anchor_errors"},
                  rows);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compressive template and pattern matching on multispectral rasters"};
  app.require_subcommand(1);

  CliState state;
  app.add_flag("--json-errors", state.json_errors, "print errors as JSON on stderr");
  app.add_flag("--strict", state.strict, "exit 3 when the solver does not converge");

  add_gen_synthetic(app);
  add_template_match(app, state);
  add_ctemplate_match(app, state);
  add_cpattern_match(app, state);
  add_plan(app);
  add_eval(app);
  add_sweep_rate(app);
  add_sweep_noise(app);
  // let --json-errors / --strict appear after the subcommand as well
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    if (state.json_errors)
      std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << "\n";
    else
      std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cpm::error& e) {
    if (state.json_errors)
      std::cerr << json{{"error", {{"kind", "validation"}, {"message", e.what()}}}}.dump()
                << "\n";
    else
      std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    if (state.json_errors)
      std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    else
      std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (state.strict && state.nonconverged) return 3;
  return 0;
}
