// sprestore: sparse-coding restoration of 2-D scalar scan grids.
//
// Subcommands wire the pipeline stages together: preprocess -> mark-scars ->
// learn -> denoise, plus synth (test-image generation) and metrics. Every run
// writes a key=value manifest sufficient to reproduce it.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "spr/artifacts.hpp"
#include "spr/coding.hpp"
#include "spr/dictlearn.hpp"
#include "spr/grid.hpp"
#include "spr/io.hpp"
#include "spr/parallel.hpp"
#include "spr/patch.hpp"
#include "spr/preprocess.hpp"
#include "spr/synthbench.hpp"

namespace {

using KV = std::vector<std::pair<std::string, std::string>>;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  long elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) { return spr::detail::format_double(v); }

void write_manifest(const std::string& path, const KV& entries) {
  std::ofstream out(path);
  if (!out) throw spr::parse_error("cannot open manifest '" + path + "' for writing");
  for (const auto& [k, v] : entries) out << k << "=" << v << "\n";
}

KV read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw spr::parse_error("cannot open manifest '" + path + "'");
  KV kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.empty()) continue;
    kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return kv;
}

void require_input_file(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw CLI::ValidationError("input file '" + path + "' does not exist");
}

spr::BitMask load_mask_or_all_valid(const std::string& path, const spr::Grid& g) {
  if (path.empty()) return spr::BitMask::all_valid(g.rows, g.cols);
  require_input_file(path);
  spr::BitMask mk = spr::read_mask(path);
  if (mk.rows != g.rows || mk.cols != g.cols)
    throw spr::invalid_argument("mask '" + path + "' shape does not match the grid");
  return mk;
}

std::string default_manifest_path(const std::string& out) { return out + ".manifest"; }

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string in, mask, out, out_mask, manifest;
  std::string axis = "rows";
  double qlo = 0.01, qhi = 0.99, gamma = 0.96;
  int patch_edge = 10;
};

int run_preprocess(const PreprocessArgs& a) {
  Stopwatch timer;
  require_input_file(a.in);
  const spr::GridFile gf = spr::read_grid(a.in);
  spr::BitMask mask = load_mask_or_all_valid(a.mask, gf.grid);

  const spr::Grid planed = spr::plane_level(gf.grid, mask);
  const spr::BitMask qmask = spr::quantile_mask(planed, a.qlo, a.qhi);
  mask = spr::merge_masks(mask, qmask);
  const spr::ScanAxis axis = a.axis == "cols" ? spr::ScanAxis::cols : spr::ScanAxis::rows;
  const spr::Grid leveled = spr::line_median_level(planed, mask, axis);
  const spr::NoiseEstimate sigma = spr::estimate_sigma_mad(leveled, mask);
  const double delta =
      spr::compute_delta({a.gamma, a.patch_edge * a.patch_edge, sigma.sigma});

  spr::Metadata meta = gf.metadata;
  meta.emplace_back("preprocessed", "plane,quantile,line-median");
  spr::write_grid(leveled, meta, a.out, spr::GridFormat::tsv_float);
  spr::write_mask(mask, a.out_mask);

  const std::string manifest = a.manifest.empty() ? default_manifest_path(a.out) : a.manifest;
  write_manifest(manifest,
                 {{"subcommand", "preprocess"},
                  {"in", a.in},
                  {"mask", a.mask},
                  {"out", a.out},
                  {"out-mask", a.out_mask},
                  {"axis", a.axis},
                  {"qlo", fmt(a.qlo)},
                  {"qhi", fmt(a.qhi)},
                  {"patch-edge", std::to_string(a.patch_edge)},
                  {"gamma", fmt(a.gamma)},
                  {"sigma_hat", fmt(sigma.sigma)},
                  {"delta_suggested", fmt(delta)},
                  {"pixels_masked", std::to_string(mask.count_outliers())},
                  {"elapsed_ms", std::to_string(timer.elapsed_ms())}});
  std::cout << "sigma_hat=" << fmt(sigma.sigma) << "\n"
            << "delta_suggested=" << fmt(delta) << " (gamma=" << fmt(a.gamma)
            << ", m=" << a.patch_edge * a.patch_edge << ")\n"
            << "pixels_masked=" << mask.count_outliers() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct MarkScarsArgs {
  std::string in, mask, out_mask, manifest;
  int min_len = 4, max_width = 2;
  double threshold = 3.0;
};

int run_mark_scars(const MarkScarsArgs& a) {
  Stopwatch timer;
  require_input_file(a.in);
  const spr::GridFile gf = spr::read_grid(a.in);
  const spr::BitMask initial = load_mask_or_all_valid(a.mask, gf.grid);

  const spr::NoiseEstimate sigma = spr::estimate_sigma_mad(gf.grid, initial);
  spr::ScarDiagnostics diag;
  const spr::BitMask scars =
      spr::mark_scars(gf.grid, sigma, {a.min_len, a.max_width, a.threshold}, &diag);
  const spr::BitMask merged = spr::merge_masks(initial, scars);
  spr::write_mask(merged, a.out_mask);

  // Sidecar with the generation parameters, next to the mask.
  write_manifest(a.out_mask + ".params",
                 {{"min-len", std::to_string(a.min_len)},
                  {"max-width", std::to_string(a.max_width)},
                  {"threshold", fmt(a.threshold)},
                  {"sigma_hat", fmt(sigma.sigma)}});

  const std::string manifest =
      a.manifest.empty() ? default_manifest_path(a.out_mask) : a.manifest;
  write_manifest(manifest,
                 {{"subcommand", "mark-scars"},
                  {"in", a.in},
                  {"mask", a.mask},
                  {"out-mask", a.out_mask},
                  {"min-len", std::to_string(a.min_len)},
                  {"max-width", std::to_string(a.max_width)},
                  {"threshold", fmt(a.threshold)},
                  {"sigma_hat", fmt(sigma.sigma)},
                  {"degenerate_sigma", diag.degenerate_sigma ? "1" : "0"},
                  {"runs_found", std::to_string(diag.runs_found)},
                  {"pixels_masked", std::to_string(merged.count_outliers())},
                  {"elapsed_ms", std::to_string(timer.elapsed_ms())}});
  if (diag.degenerate_sigma)
    std::cerr << "warning: estimated sigma is zero; nothing can exceed the threshold\n";
  std::cout << "pixels_masked=" << merged.count_outliers() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct LearnArgs {
  std::string in, mask, out_dict, manifest;
  int patch_edge = 10, atoms = 64, batch_size = 256, epochs = 5, threads = 0;
  double lambda = 0.11, tol = 1e-8;
  std::uint64_t seed = 0;
};

int run_learn(const LearnArgs& a) {
  Stopwatch timer;
  require_input_file(a.in);
  const spr::GridFile gf = spr::read_grid(a.in);
  const spr::BitMask mask = load_mask_or_all_valid(a.mask, gf.grid);

  const spr::PatchMatrix patches = spr::extract_patches(gf.grid, a.patch_edge);
  const spr::PatchMatrix mask_patches = spr::extract_mask_patches(mask, a.patch_edge);

  spr::LearnConfig cfg;
  cfg.lambda = a.lambda;
  cfg.atom_count = a.atoms;
  cfg.batch_size = a.batch_size;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.tol = a.tol;
  cfg.threads = a.threads > 0 ? a.threads : spr::default_thread_count();

  spr::LearnReport report;
  const spr::Dictionary dict = spr::learn(patches, mask_patches, cfg, &report);
  spr::write_dictionary(dict, a.out_dict);

  const std::string manifest =
      a.manifest.empty() ? default_manifest_path(a.out_dict) : a.manifest;
  write_manifest(manifest,
                 {{"subcommand", "learn"},
                  {"in", a.in},
                  {"mask", a.mask},
                  {"out-dict", a.out_dict},
                  {"patch-edge", std::to_string(a.patch_edge)},
                  {"atoms", std::to_string(a.atoms)},
                  {"lambda", fmt(a.lambda)},
                  {"batch-size", std::to_string(a.batch_size)},
                  {"epochs", std::to_string(a.epochs)},
                  {"tol", fmt(a.tol)},
                  {"seed", std::to_string(a.seed)},
                  {"threads", std::to_string(cfg.threads)},
                  {"clean_patches", std::to_string(report.clean_patches)},
                  {"patches_discarded", std::to_string(report.discarded_patches)},
                  {"reseeds", std::to_string(report.reseeds)},
                  {"objective_init", fmt(report.objective_init)},
                  {"objective_final", fmt(report.objective_final)},
                  {"elapsed_ms", std::to_string(timer.elapsed_ms())}});
  std::cout << "clean_patches=" << report.clean_patches
            << " discarded=" << report.discarded_patches << "\n"
            << "objective_init=" << fmt(report.objective_init)
            << " objective_final=" << fmt(report.objective_final) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct DenoiseArgs {
  std::string in, mask, dict, out, manifest, manifest_in;
  double delta = -1.0;  // <0 means unset
  double gamma = 0.96;
  int max_atoms = 4, threads = 0;
  bool delta_scale_valid = false;
};

int run_denoise(const DenoiseArgs& a) {
  Stopwatch timer;
  require_input_file(a.in);
  require_input_file(a.dict);
  const spr::GridFile gf = spr::read_grid(a.in);
  const spr::BitMask mask = load_mask_or_all_valid(a.mask, gf.grid);
  const spr::Dictionary dict = spr::read_dictionary(a.dict);

  const int edge = static_cast<int>(std::lround(std::sqrt(double(dict.patch_dim))));
  if (edge * edge != dict.patch_dim)
    throw spr::invalid_argument("dictionary patch_dim " + std::to_string(dict.patch_dim) +
                                " is not a perfect square");

  // delta precedence: explicit flag > manifest > auto from the noise level.
  double delta = a.delta;
  std::string delta_source = "flag";
  if (delta < 0.0 && !a.manifest_in.empty()) {
    require_input_file(a.manifest_in);
    for (const auto& [k, v] : read_manifest(a.manifest_in))
      if (k == "delta" || k == "delta_suggested") {
        delta = std::strtod(v.c_str(), nullptr);
        delta_source = "manifest";
      }
  }
  double sigma_hat = -1.0;
  if (delta < 0.0) {
    const spr::NoiseEstimate sigma = spr::estimate_sigma_mad(gf.grid, mask);
    sigma_hat = sigma.sigma;
    delta = spr::compute_delta({a.gamma, dict.patch_dim, sigma.sigma});
    delta_source = "auto";
  }

  spr::CodingParams params{delta, a.max_atoms};
  const int threads = a.threads > 0 ? a.threads : spr::default_thread_count();

  spr::Grid out;
  spr::DenoiseReport report;
  if (a.delta_scale_valid) {
    // Per-patch fairness: scale delta by the fraction of valid pixels.
    const spr::PatchMatrix patches = spr::extract_patches(gf.grid, edge);
    const spr::PatchMatrix mask_patches = spr::extract_mask_patches(mask, edge);
    spr::PatchMatrix recon;
    recon.patch_dim = patches.patch_dim;
    recon.edge = edge;
    recon.columns.resize(patches.patch_dim, patches.count());
    spr::parallel_for(patches.count(), threads, [&](long b, long e) {
      for (long i = b; i < e; ++i) {
        const Eigen::VectorXd m = mask_patches.columns.col(i);
        const double frac = m.sum() / double(m.size());
        spr::CodingParams scaled{delta * frac, a.max_atoms};
        const spr::SparseCode code =
            spr::masked_omp(dict, patches.columns.col(i), m, scaled);
        recon.columns.col(i) =
            code.uninformative ? Eigen::VectorXd::Zero(patches.patch_dim).eval()
                               : spr::reconstruct(dict, code);
      }
    });
    out = spr::compose_patches(recon, gf.grid.rows, gf.grid.cols);
  } else {
    out = spr::denoise(gf.grid, mask, dict, params, edge, threads, &report);
  }

  spr::Metadata meta = gf.metadata;
  meta.emplace_back("denoised", "omp");
  spr::write_grid(out, meta, a.out, spr::GridFormat::tsv_float);

  const std::string manifest = a.manifest.empty() ? default_manifest_path(a.out) : a.manifest;
  write_manifest(manifest,
                 {{"subcommand", "denoise"},
                  {"in", a.in},
                  {"mask", a.mask},
                  {"dict", a.dict},
                  {"out", a.out},
                  {"delta", fmt(delta)},
                  {"delta_source", delta_source},
                  {"sigma_hat", sigma_hat >= 0 ? fmt(sigma_hat) : "n/a"},
                  {"gamma", fmt(a.gamma)},
                  {"max-atoms", std::to_string(a.max_atoms)},
                  {"delta-scale-valid", a.delta_scale_valid ? "1" : "0"},
                  {"threads", std::to_string(threads)},
                  {"uninformative_patches",
                   std::to_string(report.coding.uninformative_patches)},
                  {"uncovered_pixels", std::to_string(report.uncovered_pixels)},
                  {"elapsed_ms", std::to_string(timer.elapsed_ms())}});
  std::cout << "delta=" << fmt(delta) << " (" << delta_source << ")\n";
  if (report.coding.uninformative_patches > 0)
    std::cout << "uninformative_patches=" << report.coding.uninformative_patches
              << " uncovered_pixels=" << report.uncovered_pixels << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out, out_clean, out_mask, manifest;
  int rows = 128, cols = 128;
  double period_r = 12, period_c = 12;
  std::string motif = "gaussian-bump";
  double amplitude = 1.0, width = 2.0, brightness_alt = 0.0;
  double noise_sigma = 0.0;
  int scar_count = 0, scar_len_min = 8, scar_len_max = 16;
  int scar_width_min = 1, scar_width_max = 1;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  Stopwatch timer;
  spr::LatticeSpec spec;
  spec.rows = a.rows;
  spec.cols = a.cols;
  spec.period_r = a.period_r;
  spec.period_c = a.period_c;
  spec.motif = a.motif == "dimer" ? spr::Motif::dimer : spr::Motif::gaussian_bump;
  spec.amplitude = a.amplitude;
  spec.width = a.width;
  spec.brightness_alt = a.brightness_alt;

  const spr::Grid clean = spr::generate_lattice(spec);
  spr::DegradeSpec deg;
  deg.noise_sigma = a.noise_sigma;
  deg.scar_count = a.scar_count;
  deg.scar_len_min = a.scar_len_min;
  deg.scar_len_max = a.scar_len_max;
  deg.scar_width_min = a.scar_width_min;
  deg.scar_width_max = a.scar_width_max;
  deg.seed = a.seed;
  const spr::Degraded degraded = spr::degrade(clean, deg);

  spr::write_grid(degraded.grid, {{"source", "synth"}}, a.out, spr::GridFormat::tsv_float);
  if (!a.out_clean.empty())
    spr::write_grid(clean, {{"source", "synth-clean"}}, a.out_clean,
                    spr::GridFormat::tsv_float);
  if (!a.out_mask.empty()) spr::write_mask(degraded.truth, a.out_mask);

  const std::string manifest = a.manifest.empty() ? default_manifest_path(a.out) : a.manifest;
  write_manifest(manifest,
                 {{"subcommand", "synth"},
                  {"out", a.out},
                  {"out-clean", a.out_clean},
                  {"out-mask", a.out_mask},
                  {"rows", std::to_string(a.rows)},
                  {"cols", std::to_string(a.cols)},
                  {"period-r", fmt(a.period_r)},
                  {"period-c", fmt(a.period_c)},
                  {"motif", a.motif},
                  {"amplitude", fmt(a.amplitude)},
                  {"width", fmt(a.width)},
                  {"brightness-alt", fmt(a.brightness_alt)},
                  {"noise-sigma", fmt(a.noise_sigma)},
                  {"scar-count", std::to_string(a.scar_count)},
                  {"scar-len-min", std::to_string(a.scar_len_min)},
                  {"scar-len-max", std::to_string(a.scar_len_max)},
                  {"scar-width-min", std::to_string(a.scar_width_min)},
                  {"scar-width-max", std::to_string(a.scar_width_max)},
                  {"seed", std::to_string(a.seed)},
                  {"pixels_masked", std::to_string(degraded.truth.count_outliers())},
                  {"elapsed_ms", std::to_string(timer.elapsed_ms())}});
  std::cout << "pixels_masked=" << degraded.truth.count_outliers() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string ref, test, mask, manifest;
};

int run_metrics(const MetricsArgs& a) {
  Stopwatch timer;
  require_input_file(a.ref);
  require_input_file(a.test);
  const spr::Grid ref = spr::read_grid(a.ref).grid;
  const spr::Grid test = spr::read_grid(a.test).grid;

  KV results{{"subcommand", "metrics"}, {"ref", a.ref}, {"test", a.test}, {"mask", a.mask}};
  const auto add_psnr = [&](const char* key, const spr::BitMask* mk) {
    const double v = spr::psnr(ref, test, mk);
    results.emplace_back(key, std::isinf(v) ? "exact" : fmt(v));
  };
  if (a.mask.empty()) {
    add_psnr("psnr_db", nullptr);
    results.emplace_back(
        "rmse", fmt(spr::masked_rmse(ref, test, spr::BitMask::all_valid(ref.rows, ref.cols),
                                     spr::Region::valid)));
  } else {
    require_input_file(a.mask);
    const spr::BitMask mask = spr::read_mask(a.mask);
    if (mask.rows != ref.rows || mask.cols != ref.cols)
      throw spr::invalid_argument("mask shape does not match the reference grid");
    add_psnr("psnr_db", nullptr);
    add_psnr("psnr_valid_db", &mask);
    results.emplace_back("rmse_valid",
                         fmt(spr::masked_rmse(ref, test, mask, spr::Region::valid)));
    if (mask.count_outliers() > 0)
      results.emplace_back("rmse_outlier",
                           fmt(spr::masked_rmse(ref, test, mask, spr::Region::outlier)));
  }
  results.emplace_back("elapsed_ms", std::to_string(timer.elapsed_ms()));

  for (const auto& [k, v] : results)
    if (k != "subcommand" && k != "ref" && k != "test" && k != "mask" && k != "elapsed_ms")
      std::cout << k << "=" << v << "\n";
  if (!a.manifest.empty()) write_manifest(a.manifest, results);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse-coding restoration of scanning-probe scalar grids"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* cmd_pre = app.add_subcommand(
      "preprocess", "plane subtraction, quantile outlier masking, line-median leveling");
  cmd_pre->add_option("--in", pre.in, "input grid (SPGRID tsv or 16-bit PGM)")->required();
  cmd_pre->add_option("--mask", pre.mask, "initial outlier mask (P4 PBM)");
  cmd_pre->add_option("--out", pre.out, "leveled output grid")->required();
  cmd_pre->add_option("--out-mask", pre.out_mask, "output mask")->required();
  cmd_pre->add_option("--axis", pre.axis, "scan-line axis")
      ->check(CLI::IsMember({"rows", "cols"}))
      ->capture_default_str();
  cmd_pre->add_option("--qlo", pre.qlo, "lower removal quantile")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd_pre->add_option("--qhi", pre.qhi, "upper removal quantile")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd_pre->add_option("--patch-edge", pre.patch_edge, "patch edge used for the delta hint")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_pre->add_option("--gamma", pre.gamma, "chi-square quantile level for the delta hint")
      ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)))
      ->capture_default_str();
  cmd_pre->add_option("--manifest", pre.manifest, "manifest path (default <out>.manifest)");

  MarkScarsArgs scars;
  auto* cmd_scars =
      app.add_subcommand("mark-scars", "detect structured dropouts along scan lines");
  cmd_scars->add_option("--in", scars.in, "input grid")->required();
  cmd_scars->add_option("--mask", scars.mask, "initial mask to merge with");
  cmd_scars->add_option("--out-mask", scars.out_mask, "output mask")->required();
  cmd_scars->add_option("--min-len", scars.min_len, "minimum run length in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_scars->add_option("--max-width", scars.max_width, "maximum scar width in lines")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_scars->add_option("--threshold", scars.threshold, "detection threshold in sigmas")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_scars->add_option("--manifest", scars.manifest, "manifest path");

  LearnArgs learn;
  auto* cmd_learn = app.add_subcommand("learn", "learn a dictionary from outlier-free patches");
  cmd_learn->add_option("--in", learn.in, "input grid")->required();
  cmd_learn->add_option("--mask", learn.mask, "outlier mask");
  cmd_learn->add_option("--out-dict", learn.out_dict, "output dictionary (SPDICT)")->required();
  cmd_learn->add_option("--patch-edge", learn.patch_edge, "patch edge in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_learn->add_option("--atoms", learn.atoms, "dictionary size k")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_learn->add_option("--lambda", learn.lambda, "l1 regularization weight")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_learn->add_option("--batch-size", learn.batch_size, "mini-batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_learn->add_option("--epochs", learn.epochs, "passes over the training patches")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd_learn->add_option("--tol", learn.tol, "coding convergence tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_learn->add_option("--seed", learn.seed, "RNG seed")->capture_default_str();
  cmd_learn->add_option("--threads", learn.threads, "worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd_learn->add_option("--manifest", learn.manifest, "manifest path");

  DenoiseArgs den;
  auto* cmd_den = app.add_subcommand("denoise", "masked sparse coding and composition");
  cmd_den->add_option("--in", den.in, "input grid")->required();
  cmd_den->add_option("--mask", den.mask, "outlier mask");
  cmd_den->add_option("--dict", den.dict, "dictionary (SPDICT)")->required();
  cmd_den->add_option("--out", den.out, "output grid")->required();
  cmd_den->add_option("--delta", den.delta, "squared-residual budget (omit for auto)");
  cmd_den->add_option("--manifest-in", den.manifest_in,
                      "take delta from this earlier manifest when --delta is absent");
  cmd_den->add_option("--gamma", den.gamma, "chi-square quantile level for auto delta")
      ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)))
      ->capture_default_str();
  cmd_den->add_option("--max-atoms", den.max_atoms, "maximum atoms per patch (MNA)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_den->add_flag("--delta-scale-valid", den.delta_scale_valid,
                    "scale delta by each patch's valid-pixel fraction");
  cmd_den->add_option("--threads", den.threads, "worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd_den->add_option("--manifest", den.manifest, "manifest path");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "generate a degraded quasi-periodic test grid");
  cmd_synth->add_option("--out", synth.out, "degraded output grid")->required();
  cmd_synth->add_option("--out-clean", synth.out_clean, "clean reference grid");
  cmd_synth->add_option("--out-mask", synth.out_mask, "ground-truth outlier mask");
  cmd_synth->add_option("--rows", synth.rows)->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--cols", synth.cols)->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--period-r", synth.period_r)->capture_default_str();
  cmd_synth->add_option("--period-c", synth.period_c)->capture_default_str();
  cmd_synth->add_option("--motif", synth.motif)
      ->check(CLI::IsMember({"gaussian-bump", "dimer"}))
      ->capture_default_str();
  cmd_synth->add_option("--amplitude", synth.amplitude)->capture_default_str();
  cmd_synth->add_option("--width", synth.width)->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--brightness-alt", synth.brightness_alt)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd_synth->add_option("--noise-sigma", synth.noise_sigma)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd_synth->add_option("--scar-count", synth.scar_count)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd_synth->add_option("--scar-len-min", synth.scar_len_min)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_synth->add_option("--scar-len-max", synth.scar_len_max)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_synth->add_option("--scar-width-min", synth.scar_width_min)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_synth->add_option("--scar-width-max", synth.scar_width_max)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_synth->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  cmd_synth->add_option("--manifest", synth.manifest, "manifest path");

  MetricsArgs metrics;
  auto* cmd_metrics = app.add_subcommand("metrics", "PSNR/RMSE between two grids");
  cmd_metrics->add_option("--ref", metrics.ref, "reference grid")->required();
  cmd_metrics->add_option("--test", metrics.test, "grid under test")->required();
  cmd_metrics->add_option("--mask", metrics.mask, "outlier mask for per-region RMSE");
  cmd_metrics->add_option("--manifest", metrics.manifest, "manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_pre->parsed()) return run_preprocess(pre);
    if (cmd_scars->parsed()) return run_mark_scars(scars);
    if (cmd_learn->parsed()) return run_learn(learn);
    if (cmd_den->parsed()) return run_denoise(den);
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_metrics->parsed()) return run_metrics(metrics);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
