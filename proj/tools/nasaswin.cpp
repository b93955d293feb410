#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "nasaswin/analyze.hpp"
#include "nasaswin/config.hpp"
#include "nasaswin/dataset.hpp"
#include "nasaswin/metrics.hpp"
#include "nasaswin/oracles/selftest.hpp"
#include "nasaswin/parallel.hpp"
#include "nasaswin/train.hpp"

namespace fs = std::filesystem;
using namespace nasaswin;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_train(const fs::path& config, const fs::path& manifest_path, const fs::path& out) {
  RunConfig cfg = load_config(config);
  DatasetManifest manifest = load_manifest(manifest_path, Split::Train);
  if (manifest.duplicate_paths) std::cerr << "warning: " << manifest.duplicate_paths << " duplicate path(s) in manifest\n";
  NasaSwin model = NasaSwin::init(cfg.model, cfg.train.seed);
  auto curve = train_to_dir(model, manifest, cfg, out);
  if (!curve.empty()) {
    std::printf("trained %zu steps, final loss %.6f; wrote %s\n", curve.size(), curve.back().loss,
                (out / "final.nsw").c_str());
  }
  return 0;
}

int cmd_eval(const fs::path& ckpt, const fs::path& manifest_path, const fs::path& csv, const std::string& table,
             const std::string& denoiser, const std::string& in_domain, const std::string& method) {
  NasaSwin model = load_checkpoint(ckpt);
  DatasetManifest manifest = load_manifest(manifest_path, Split::Test);
  if (manifest.duplicate_paths) std::cerr << "warning: " << manifest.duplicate_paths << " duplicate path(s) in manifest\n";
  const auto& mc = model.config();
  auto samples = prepare_samples(manifest, mc.input_height, mc.input_width, DenoiserSpec::parse(denoiser), worker_count());
  Metrics m = evaluate(model, samples, split_csv(in_domain), worker_count());
  std::ofstream(csv) << metrics_csv(m);
  const std::string md = results_table(m, method);
  if (!table.empty()) std::ofstream(table) << md;
  std::cout << md;
  return 0;
}

int cmd_analyze(const fs::path& manifest_path, const std::string& denoiser, const fs::path& out) {
  DatasetManifest manifest = load_manifest(manifest_path, Split::Test);
  auto results = analyze_corpus(manifest, DenoiserSpec::parse(denoiser), worker_count());
  write_analysis(results, out);
  for (const auto& a : results) {
    std::printf("%-16s count %zu skipped %zu peak_contrast %.3f\n", a.source.c_str(), a.stats.count, a.skipped,
                a.peak_contrast);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NASA-Swin detector for diffusion-generated images"};
  app.require_subcommand(1);

  fs::path config, manifest, out, ckpt, csv;
  std::string table, denoiser = "median:3", in_domain, method = "NASA-Swin";

  auto* train = app.add_subcommand("train", "train a model from a manifest");
  train->add_option("--config", config, "key=value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--manifest", manifest, "CSV with header path,label,source")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "output directory for checkpoints and loss_curve.csv")->required();

  auto* eval = app.add_subcommand(
      "eval", "score a manifest; a sample is predicted generated iff P(generated) > 0.5, so a tie predicts genuine");
  eval->add_option("--ckpt", ckpt, "checkpoint (.nsw)")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest, "CSV with header path,label,source")->required()->check(CLI::ExistingFile);
  eval->add_option("--csv", csv, "metrics CSV output")->required();
  eval->add_option("--table", table, "also write the markdown results table here");
  eval->add_option("--denoiser", denoiser, "median:K, gaussian:SIGMA or external:DIR")->capture_default_str();
  eval->add_option("--in-domain", in_domain, "comma-separated sources left out of Avg-Acc");
  eval->add_option("--method", method, "row label in the results table")->capture_default_str();

  auto* analyze = app.add_subcommand("analyze", "per-source mean residuals and spectra");
  analyze->add_option("--manifest", manifest, "CSV with header path,label,source")->required()->check(CLI::ExistingFile);
  analyze->add_option("--denoiser", denoiser, "median:K, gaussian:SIGMA or external:DIR")->capture_default_str();
  analyze->add_option("--out", out, "output directory")->required();

  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "write a synthetic genuine/grid-forgery corpus");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--n", synth_opts.per_split, "images per split")->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "generator seed")->capture_default_str();
  synth->add_option("--size", synth_opts.size, "image side in pixels")->capture_default_str();
  double amplitude = synth_opts.grid_amplitude * 255.0;
  synth->add_option("--amplitude", amplitude, "grid amplitude in 8-bit levels")->capture_default_str();
  synth->add_option("--period", synth_opts.grid_period, "grid period in pixels")->capture_default_str();
  bool fixed_phase = false;
  synth->add_flag("--fixed-phase", fixed_phase, "align every grid with pixel (0,0)");

  auto* selftest = app.add_subcommand("selftest", "run every oracle suite and print a pass/fail table");

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return cmd_train(config, manifest, out);
    if (eval->parsed()) return cmd_eval(ckpt, manifest, csv, table, denoiser, in_domain, method);
    if (analyze->parsed()) return cmd_analyze(manifest, denoiser, out);
    if (synth->parsed()) {
      synth_opts.grid_amplitude = amplitude / 255.0;
      synth_opts.random_phase = !fixed_phase;
      synthesize_corpus(out, synth_opts);
      std::printf("wrote %zu train and %zu test images to %s\n", synth_opts.per_split, synth_opts.per_split, out.c_str());
      return 0;
    }
    if (selftest->parsed()) return oracle::run_selftest(std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
