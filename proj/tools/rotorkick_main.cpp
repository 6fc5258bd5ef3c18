// Command line front end: period scans of rotational energy absorption for
// kicked diatomics, isotopologue comparison, fractional-revival parity
// scans, and heatmap rendering of scan CSVs.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "rotorkick/errors.hpp"
#include "rotorkick/scan.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerics = 3;
constexpr int kExitIo = 4;

std::filesystem::path resolve_output_dir(const std::string& cli_value,
                                         const rotorkick::ScanConfig& cfg) {
  if (!cli_value.empty()) return cli_value;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("ROTORKICK_OUTPUT_DIR"); env && *env)
    return env;
  return ".";
}

rotorkick::ScanConfig load_config(const std::string& path,
                                  const std::string& mode_override,
                                  int workers_override) {
  rotorkick::ScanConfig cfg = rotorkick::load_scan_config(path);
  if (!mode_override.empty())
    cfg.pulse_model = rotorkick::parse_pulse_model(mode_override);
  if (workers_override > 0) cfg.workers = workers_override;
  cfg.validate();
  return cfg;
}

void print_scan_summary(const rotorkick::ScanResult& res,
                        const std::filesystem::path& outdir) {
  std::printf("species %s: %zu periods, resonance at %.6g ps (detuning %.4g)\n",
              res.species.c_str(), res.size(), res.resonance_period_ps,
              res.detunings[res.resonance_index]);
  std::printf("peak absorbed energy %.6g cm^-1\n",
              res.energy_cm1[res.resonance_index]);
  std::printf("wrote %s\n", (outdir / "scan.csv").string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotational kick-train scans for diatomic molecules"};
  app.require_subcommand(1);

  std::string config_path, output_dir, mode_override, heatmap_in, heatmap_out;
  int workers = 0;

  auto add_common = [&](CLI::App* sub, bool with_mode) {
    sub->add_option("--config", config_path, "key=value config file")
        ->required();
    sub->add_option("--output", output_dir,
                    "output directory (default: config output_dir, then "
                    "$ROTORKICK_OUTPUT_DIR, then .)");
    sub->add_option("--workers", workers,
                    "worker threads (0 = hardware concurrency)");
    if (with_mode)
      sub->add_option("--mode", mode_override,
                      "pulse model override: impulsive, finite or shaper");
  };

  CLI::App* scan = app.add_subcommand(
      "scan", "period scan of one species; writes scan.csv and friends");
  add_common(scan, true);
  CLI::App* compare = app.add_subcommand(
      "compare", "scan two species on one grid; writes compare.csv and "
                 "selectivity.csv");
  add_common(compare, true);
  CLI::App* fractional = app.add_subcommand(
      "fractional", "period scan with parity-resolved gains; writes "
                    "parity_gain.csv");
  add_common(fractional, true);

  CLI::App* heatmap = app.add_subcommand(
      "heatmap", "render a scan CSV as an 8-bit PGM heatmap");
  heatmap->add_option("--input", heatmap_in, "scan CSV to render")->required();
  heatmap->add_option("--out", heatmap_out, "output PGM path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (heatmap->parsed()) {
      rotorkick::heatmap_from_csv(heatmap_in, heatmap_out);
      std::printf("wrote %s\n", heatmap_out.c_str());
      return kExitOk;
    }

    const rotorkick::ScanConfig cfg =
        load_config(config_path, mode_override, workers);
    const std::filesystem::path outdir = resolve_output_dir(output_dir, cfg);

    if (scan->parsed()) {
      const auto res = rotorkick::run_scan(cfg, outdir);
      print_scan_summary(res, outdir);
    } else if (compare->parsed()) {
      const auto res = rotorkick::compare_species(cfg, outdir);
      std::printf("species %s vs %s over %zu periods\n", res.a.species.c_str(),
                  res.b.species.c_str(), res.a.size());
      std::printf(
          "at %s revival (%.6g ps): contrast %.4g; at %s revival (%.6g ps): "
          "contrast %.4g\n",
          res.a.species.c_str(), res.a.periods_ps[res.index_a], res.contrast_a,
          res.b.species.c_str(), res.a.periods_ps[res.index_b],
          res.contrast_b);
      std::printf("wrote %s\n", (outdir / "compare.csv").string().c_str());
    } else if (fractional->parsed()) {
      const auto res = rotorkick::fractional_scan(cfg, outdir);
      print_scan_summary(res, outdir);
      std::printf("wrote %s\n",
                  (outdir / "parity_gain.csv").string().c_str());
    }
  } catch (const rotorkick::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const rotorkick::NumericsError& e) {
    std::fprintf(stderr, "numerics error: %s\n", e.what());
    return kExitNumerics;
  } catch (const rotorkick::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
