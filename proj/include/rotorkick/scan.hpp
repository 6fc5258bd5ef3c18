#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rotorkick/ensemble.hpp"
#include "rotorkick/errors.hpp"
#include "rotorkick/field.hpp"
#include "rotorkick/keyvalue.hpp"
#include "rotorkick/molecule.hpp"
#include "rotorkick/observables.hpp"
#include "rotorkick/pulse_train.hpp"
#include "rotorkick/rotor_dynamics.hpp"

namespace rotorkick {

enum class ScanPulseModel { impulsive, finite, shaper };

inline ScanPulseModel parse_pulse_model(const std::string& s) {
  if (s == "impulsive") return ScanPulseModel::impulsive;
  if (s == "finite") return ScanPulseModel::finite;
  if (s == "shaper") return ScanPulseModel::shaper;
  throw ConfigError("unknown pulse_model '" + s +
                    "' (expected impulsive, finite or shaper)");
}

struct ScanConfig {
  MoleculeSpec species_a;
  std::optional<MoleculeSpec> species_b;

  double A = 0.0;
  double total_P = 0.0;
  int n_max = 3;
  ScanPulseModel pulse_model = ScanPulseModel::impulsive;
  double pulse_fwhm_ps = 0.5;
  bool allow_truncation = false;

  double temperature_K = 6.3;
  double cutoff_tail = 1e-6;

  double period_start_ps = 0.0;
  double period_stop_ps = 0.0;
  double period_step_ps = 0.005;

  int J_max = 40;
  int J_report = 7;
  double norm_tol = 1e-8;
  double step_control = 1e-10;
  double leakage_threshold = 1e-8;
  double samples_per_fwhm = 64.0;

  ShaperModel shaper;
  double laser_fwhm_ps = 0.15;
  double max_clip_fraction = 1e-4;

  int workers = 0;
  std::string output_dir;

  std::uint64_t hash = 0;
  std::string origin;

  PropagationParams params() const {
    PropagationParams p;
    p.J_max = J_max;
    p.norm_tol = norm_tol;
    p.step_control = step_control;
    p.leakage_threshold = leakage_threshold;
    p.samples_per_fwhm = samples_per_fwhm;
    return p;
  }

  std::size_t n_periods() const {
    return static_cast<std::size_t>(
               std::llround((period_stop_ps - period_start_ps) /
                            period_step_ps)) +
           1;
  }
  double period(std::size_t i) const {
    return period_start_ps + period_step_ps * static_cast<double>(i);
  }

  void validate() const {
    species_a.validate();
    if (species_b) species_b->validate();
    if (A < 0.0) throw ConfigError("A must be >= 0");
    if (total_P < 0.0) throw ConfigError("total_P must be >= 0");
    if (n_max < 0) throw ConfigError("n_max must be >= 0");
    if (!(pulse_fwhm_ps > 0.0)) throw ConfigError("pulse_fwhm_ps must be > 0");
    if (!(period_start_ps > 0.0))
      throw ConfigError("period_start_ps must be > 0");
    if (!(period_stop_ps >= period_start_ps))
      throw ConfigError("period_stop_ps must be >= period_start_ps");
    if (!(period_step_ps > 0.0)) throw ConfigError("period_step_ps must be > 0");
    if (n_periods() > 200000) throw ConfigError("period grid too large");
    if (J_report < 0 || J_report > J_max)
      throw ConfigError("J_report must lie in [0, J_max]");
    params().validate();
    shaper.validate();
    if (!(laser_fwhm_ps > 0.0)) throw ConfigError("laser_fwhm_ps must be > 0");
    if (!(max_clip_fraction > 0.0) || max_clip_fraction >= 1.0)
      throw ConfigError("max_clip_fraction must be in (0, 1)");
  }
};

namespace detail {

inline MoleculeSpec resolve_species(const std::string& value,
                                    const std::filesystem::path& config_dir) {
  try {
    return builtin_species(value);
  } catch (const ConfigError&) {
  }
  namespace fs = std::filesystem;
  if (fs::exists(value)) return load_species_file(value);
  const fs::path rel = config_dir / value;
  if (fs::exists(rel)) return load_species_file(rel);
  throw ConfigError("species '" + value +
                    "' is neither a built-in name nor a readable file");
}

}  // namespace detail

inline ScanConfig load_scan_config(const std::filesystem::path& path) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  const std::filesystem::path dir = path.parent_path();

  ScanConfig cfg;
  cfg.species_a = detail::resolve_species(kv.get_string("species"), dir);
  if (kv.has("species_b"))
    cfg.species_b = detail::resolve_species(kv.get_string("species_b"), dir);

  cfg.A = kv.get_double("A");
  cfg.total_P = kv.get_double("total_P");
  cfg.n_max = kv.get_int("n_max", 3);
  cfg.pulse_model = parse_pulse_model(kv.get_string("pulse_model", "impulsive"));
  cfg.pulse_fwhm_ps = kv.get_double("pulse_fwhm_ps", 0.5);
  cfg.allow_truncation = kv.get_bool("allow_truncation", false);

  cfg.temperature_K = kv.get_double("temperature_K", 6.3);
  cfg.cutoff_tail = kv.get_double("cutoff_tail", 1e-6);

  cfg.period_start_ps = kv.get_double("period_start_ps");
  cfg.period_stop_ps = kv.get_double("period_stop_ps");
  cfg.period_step_ps = kv.get_double("period_step_ps", 0.005);

  cfg.J_max = kv.get_int("J_max", 40);
  cfg.J_report = kv.get_int("J_report", 7);
  cfg.norm_tol = kv.get_double("norm_tol", 1e-8);
  cfg.step_control = kv.get_double("step_control", 1e-10);
  cfg.leakage_threshold = kv.get_double("leakage_threshold", 1e-8);
  cfg.samples_per_fwhm = kv.get_double("samples_per_fwhm", 64.0);

  cfg.shaper.pixel_count = kv.get_int("shaper_pixels", 640);
  cfg.shaper.nm_per_pixel = kv.get_double("shaper_nm_per_pixel", 0.04);
  cfg.shaper.center_wavelength_nm = kv.get_double("shaper_center_nm", 800.0);
  cfg.laser_fwhm_ps = kv.get_double("laser_fwhm_ps", 0.15);
  cfg.max_clip_fraction = kv.get_double("max_clip_fraction", 1e-4);

  cfg.workers = kv.get_int("workers", 0);
  cfg.output_dir = kv.get_string("output_dir", "");

  kv.reject_unknown_keys();
  cfg.hash = kv.hash();
  cfg.origin = path.string();
  cfg.validate();
  return cfg;
}

namespace detail {

// Index-parallel loop with a deterministic result layout: workers pull
// indices from an atomic counter and write into preallocated slots, so the
// output is independent of scheduling.
template <typename Fn>
inline void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  std::size_t w = workers > 0
                      ? static_cast<std::size_t>(workers)
                      : std::max(1u, std::thread::hardware_concurrency());
  w = std::min(w, n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w - 1);
  for (std::size_t i = 0; i + 1 < w; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

inline KickSequence train_for_period(const ScanConfig& cfg, double tau_ps) {
  PhaseModulation mod{cfg.A, tau_ps, 0.0};
  return bessel_train(mod, cfg.total_P, cfg.n_max, cfg.pulse_fwhm_ps,
                      cfg.allow_truncation);
}

// Shaper mode builds the full optical chain per period: transform-limited
// input spectrum, pixelated sinusoidal phase, time-domain synthesis, then
// intensity calibration to the requested total kick strength.
inline FieldEnvelope envelope_for_period(const ScanConfig& cfg,
                                         const MoleculeSpec& spec,
                                         double tau_ps) {
  PhaseModulation mod{cfg.A, tau_ps, cfg.shaper.omega_center()};
  double domega = 0.0;
  std::size_t n = 0;
  plan_spectrum_grid(mod, cfg.laser_fwhm_ps, cfg.shaper, domega, n);
  Spectrum spec0 =
      gaussian_spectrum(cfg.laser_fwhm_ps, cfg.shaper.omega_center(), domega, n);
  Spectrum shaped =
      apply_spectral_phase(spec0, mod, cfg.shaper, cfg.max_clip_fraction);
  FieldEnvelope env = synthesize_time_domain(shaped);
  // Pixel-edge scattering has unbounded support; keep the tracked delays
  // (sub-pulses plus first replicas) and cut the pedestal beyond them.
  const double cut = taper_edges(env, shaped.max_delay_ps);
  if (cut > 0.02)
    throw NumericsError(
        "more than 2% of the shaped pulse energy lies outside the tracked "
        "delay window; widen the spectral grid");
  calibrate_to_kick_strength(env, spec.delta_alpha_A3, cfg.total_P);
  return env;
}

inline ScanResult scan_species(const ScanConfig& cfg, const MoleculeSpec& spec,
                               int workers) {
  cfg.validate();
  const PropagationParams params = cfg.params();
  const ThermalEnsemble ens =
      thermal_ensemble(spec, cfg.temperature_K, cfg.cutoff_tail);
  const PopulationResult initial =
      thermal_populations(ens, params.J_max, cfg.J_report);

  const std::size_t n = cfg.n_periods();
  ScanResult res;
  res.species = spec.name;
  res.J_report = cfg.J_report;
  res.config_hash = cfg.hash;
  res.initial = initial;
  res.periods_ps.resize(n);
  res.detunings.resize(n);
  res.populations.resize(n);
  res.energy_cm1.resize(n);

  detail::parallel_for(n, workers, [&](std::size_t i) {
    const double tau = cfg.period(i);
    PopulationResult after;
    if (cfg.pulse_model == ScanPulseModel::shaper) {
      const FieldEnvelope env = envelope_for_period(cfg, spec, tau);
      after = ensemble_populations(spec, ens, env, params, cfg.J_report);
    } else {
      const KickSequence seq = train_for_period(cfg, tau);
      const PulseMode mode = cfg.pulse_model == ScanPulseModel::finite
                                 ? PulseMode::finite
                                 : PulseMode::impulsive;
      after = ensemble_populations(spec, ens, seq, params, mode, cfg.J_report);
    }
    res.periods_ps[i] = tau;
    res.detunings[i] = detuning(tau, spec);
    res.populations[i] = after.S;
    res.energy_cm1[i] = absorbed_energy_cm1(initial, after, spec);
  });

  double emax = 0.0;
  for (double e : res.energy_cm1) emax = std::max(emax, e);
  if (emax > 0.0) {
    res = normalize_energy(res);
  } else {
    res.energy_norm.assign(n, 0.0);
    res.resonance_index = 0;
    res.resonance_period_ps = res.periods_ps.front();
  }
  return res;
}

inline void write_scan_csv(const ScanResult& scan,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(scan.config_hash));
  out << "# config_hash=" << hash_buf << '\n';
  out << "# species=" << scan.species << '\n';
  out << "# normalization="
      << (scan.per_state_normalized ? "per_state_max" : "raw") << '\n';
  out << "period_ps,detuning,energy_cm1,energy_norm";
  for (int J = 0; J <= scan.J_report; ++J) out << ",S" << J;
  out << '\n';
  for (std::size_t i = 0; i < scan.size(); ++i) {
    out << detail::format_g12(scan.periods_ps[i]) << ','
        << detail::format_g12(scan.detunings[i]) << ','
        << detail::format_g12(scan.energy_cm1[i]) << ','
        << detail::format_g12(scan.energy_norm[i]);
    for (int J = 0; J <= scan.J_report; ++J)
      out << ',' << detail::format_g12(scan.populations[i][J]);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline ScanResult read_scan_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  ScanResult scan;
  std::string line;
  bool have_header = false;
  std::size_t n_cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(1, eq - 1);
      const std::string val = line.substr(eq + 1);
      if (key.find("config_hash") != std::string::npos)
        scan.config_hash = std::stoull(val, nullptr, 16);
      else if (key.find("species") != std::string::npos)
        scan.species = val;
      else if (key.find("normalization") != std::string::npos)
        scan.per_state_normalized = (val == "per_state_max");
      continue;
    }
    if (!have_header) {
      if (line.rfind("period_ps,detuning,energy_cm1,energy_norm", 0) != 0)
        throw IoError("bad scan header in " + path.string());
      n_cols = static_cast<std::size_t>(
          std::count(line.begin(), line.end(), ',') + 1);
      if (n_cols < 5) throw IoError("scan file has no population columns");
      scan.J_report = static_cast<int>(n_cols) - 5;
      have_header = true;
      continue;
    }
    std::istringstream ss(line);
    std::vector<double> row;
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != n_cols)
      throw IoError("ragged scan row in " + path.string());
    scan.periods_ps.push_back(row[0]);
    scan.detunings.push_back(row[1]);
    scan.energy_cm1.push_back(row[2]);
    scan.energy_norm.push_back(row[3]);
    scan.populations.emplace_back(row.begin() + 4, row.end());
  }
  if (!have_header || scan.size() == 0)
    throw IoError("scan file is empty: " + path.string());
  std::size_t imax = 0;
  for (std::size_t i = 1; i < scan.size(); ++i)
    if (scan.energy_cm1[i] > scan.energy_cm1[imax]) imax = i;
  scan.resonance_index = imax;
  scan.resonance_period_ps = scan.periods_ps[imax];
  scan.initial.S.assign(scan.populations.front().size(), 0.0);
  scan.initial.J_report = scan.J_report;
  return scan;
}

// Per-state normalized populations as an 8-bit grayscale PGM: one column
// per period (ascending), one row per J with J_report at the top.
inline void emit_heatmap(const ScanResult& scan,
                         const std::filesystem::path& pgm_path) {
  if (scan.size() == 0) throw std::invalid_argument("emit_heatmap: empty scan");
  const ScanResult norm =
      scan.per_state_normalized ? scan : normalize_per_state(scan);
  const int height = norm.J_report + 1;
  const std::size_t width = norm.size();
  for (const auto& row : norm.populations)
    if (static_cast<int>(row.size()) < height)
      throw std::invalid_argument("emit_heatmap: row shorter than J_report");

  std::ofstream out(pgm_path, std::ios::binary);
  if (!out) throw IoError("cannot open " + pgm_path.string() + " for writing");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (int r = 0; r < height; ++r) {
    const int J = norm.J_report - r;
    for (std::size_t i = 0; i < width; ++i) {
      const double v = std::clamp(norm.populations[i][J], 0.0, 1.0);
      out.put(static_cast<char>(std::lround(255.0 * v)));
    }
  }
  if (!out) throw IoError("write failed for " + pgm_path.string());

  std::ofstream meta(pgm_path.string() + ".txt");
  if (!meta) throw IoError("cannot write heatmap sidecar");
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(norm.config_hash));
  meta << "species=" << norm.species << '\n'
       << "columns=period_ps " << detail::format_g12(norm.periods_ps.front())
       << ".." << detail::format_g12(norm.periods_ps.back()) << " count "
       << width << '\n'
       << "rows=J " << norm.J_report << " (top) down to 0 (bottom)\n"
       << "value=round(255 * S_J / max_over_periods(S_J))\n"
       << "config_hash=" << hash_buf << '\n';
}

inline void heatmap_from_csv(const std::filesystem::path& csv_path,
                             const std::filesystem::path& pgm_path) {
  emit_heatmap(read_scan_csv(csv_path), pgm_path);
}

inline ScanResult run_scan(const ScanConfig& cfg,
                           const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec && !std::filesystem::is_directory(outdir))
    throw IoError("cannot create output directory " + outdir.string());

  const ScanResult res = scan_species(cfg, cfg.species_a, cfg.workers);
  write_scan_csv(res, outdir / "scan.csv");
  write_scan_csv(normalize_per_state(res), outdir / "scan_normalized.csv");
  write_ensemble_csv(
      thermal_ensemble(cfg.species_a, cfg.temperature_K, cfg.cutoff_tail),
      outdir / "ensemble.csv");
  if (cfg.pulse_model == ScanPulseModel::shaper) {
    write_envelope_csv(
        envelope_for_period(cfg, cfg.species_a, res.resonance_period_ps),
        outdir / "envelope.csv");
  } else {
    write_kick_sequence_csv(train_for_period(cfg, res.resonance_period_ps),
                            outdir / "kicks.csv");
  }
  return res;
}

struct CompareResult {
  ScanResult a, b;
  std::size_t index_a = 0, index_b = 0;  // grid points nearest each revival
  double contrast_a = 0.0, contrast_b = 0.0;
};

inline std::size_t nearest_index(const std::vector<double>& grid, double x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (std::abs(grid[i] - x) < std::abs(grid[best] - x)) best = i;
  return best;
}

// Scan both species over the same period grid and report how strongly a
// train tuned to one species' revival discriminates against the other.
inline CompareResult compare_species(const ScanConfig& cfg,
                                     const std::filesystem::path& outdir) {
  if (!cfg.species_b)
    throw ConfigError("compare needs a species_b entry in the config");
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec && !std::filesystem::is_directory(outdir))
    throw IoError("cannot create output directory " + outdir.string());

  CompareResult out;
  out.a = scan_species(cfg, cfg.species_a, cfg.workers);
  out.b = scan_species(cfg, *cfg.species_b, cfg.workers);
  write_scan_csv(out.a, outdir / ("scan_" + out.a.species + ".csv"));
  write_scan_csv(out.b, outdir / ("scan_" + out.b.species + ".csv"));

  out.index_a =
      nearest_index(out.a.periods_ps, revival_time_ps(cfg.species_a));
  out.index_b =
      nearest_index(out.a.periods_ps, revival_time_ps(*cfg.species_b));
  const double ea_a = out.a.energy_cm1[out.index_a];
  const double eb_a = out.b.energy_cm1[out.index_a];
  const double ea_b = out.a.energy_cm1[out.index_b];
  const double eb_b = out.b.energy_cm1[out.index_b];
  out.contrast_a = eb_a > 0.0 ? ea_a / eb_a
                              : std::numeric_limits<double>::infinity();
  out.contrast_b = ea_b > 0.0 ? eb_b / ea_b
                              : std::numeric_limits<double>::infinity();

  {
    std::ofstream f(outdir / "compare.csv");
    if (!f) throw IoError("cannot write compare.csv");
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(cfg.hash));
    f << "# config_hash=" << hash_buf << '\n';
    f << "# species_a=" << out.a.species << " species_b=" << out.b.species
      << '\n';
    f << "period_ps,detuning_a,detuning_b,energy_a_cm1,energy_b_cm1\n";
    for (std::size_t i = 0; i < out.a.size(); ++i) {
      f << detail::format_g12(out.a.periods_ps[i]) << ','
        << detail::format_g12(out.a.detunings[i]) << ','
        << detail::format_g12(out.b.detunings[i]) << ','
        << detail::format_g12(out.a.energy_cm1[i]) << ','
        << detail::format_g12(out.b.energy_cm1[i]) << '\n';
    }
    if (!f) throw IoError("write failed for compare.csv");
  }
  {
    std::ofstream f(outdir / "selectivity.csv");
    if (!f) throw IoError("cannot write selectivity.csv");
    f << "target,revival_ps,grid_period_ps,energy_target_cm1,"
         "energy_other_cm1,contrast\n";
    f << out.a.species << ',' << detail::format_g12(revival_time_ps(cfg.species_a))
      << ',' << detail::format_g12(out.a.periods_ps[out.index_a]) << ','
      << detail::format_g12(ea_a) << ',' << detail::format_g12(eb_a) << ','
      << detail::format_g12(out.contrast_a) << '\n';
    f << out.b.species << ',' << detail::format_g12(revival_time_ps(*cfg.species_b))
      << ',' << detail::format_g12(out.a.periods_ps[out.index_b]) << ','
      << detail::format_g12(eb_b) << ',' << detail::format_g12(ea_b) << ','
      << detail::format_g12(out.contrast_b) << '\n';
    if (!f) throw IoError("write failed for selectivity.csv");
  }
  return out;
}

// Net population moved into each parity ladder. Parity is conserved, so the
// even gain over J >= 2 equals the depletion of J = 0 and the odd gain over
// J >= 3 equals the depletion of J = 1.
inline void write_parity_gain_csv(const ScanResult& scan,
                                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(scan.config_hash));
  out << "# config_hash=" << hash_buf << '\n';
  out << "# species=" << scan.species << '\n';
  out << "period_ps,detuning,even_gain,odd_gain,energy_cm1\n";
  for (std::size_t i = 0; i < scan.size(); ++i) {
    double even = 0.0, odd = 0.0;
    const auto& S = scan.populations[i];
    for (std::size_t J = 2; J < S.size(); ++J) {
      const double d = S[J] - scan.initial.S[J];
      if (J % 2 == 0)
        even += d;
      else
        odd += d;
    }
    out << detail::format_g12(scan.periods_ps[i]) << ','
        << detail::format_g12(scan.detunings[i]) << ','
        << detail::format_g12(even) << ',' << detail::format_g12(odd) << ','
        << detail::format_g12(scan.energy_cm1[i]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline ScanResult fractional_scan(const ScanConfig& cfg,
                                  const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec && !std::filesystem::is_directory(outdir))
    throw IoError("cannot create output directory " + outdir.string());
  const ScanResult res = scan_species(cfg, cfg.species_a, cfg.workers);
  write_scan_csv(res, outdir / "scan.csv");
  write_scan_csv(normalize_per_state(res), outdir / "scan_normalized.csv");
  write_parity_gain_csv(res, outdir / "parity_gain.csv");
  return res;
}

}  // namespace rotorkick
