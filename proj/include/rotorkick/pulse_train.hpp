#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rotorkick/errors.hpp"
#include "rotorkick/field.hpp"
#include "rotorkick/molecule.hpp"
#include "rotorkick/units.hpp"

namespace rotorkick {

// Sinusoidal spectral phase phi(omega) = A sin((omega - omega0) tau).
struct PhaseModulation {
  double A = 0.0;        // modulation depth, rad
  double tau_ps = 0.0;   // sub-pulse spacing
  double omega0 = 0.0;   // carrier the phase is referenced to, rad/ps

  void validate() const {
    if (A < 0.0) throw ConfigError("modulation depth A must be >= 0");
    if (!(tau_ps > 0.0)) throw ConfigError("modulation period tau must be > 0");
  }
};

struct SubKick {
  double t_ps = 0.0;
  double P = 0.0;        // dimensionless kick strength
  double fwhm_ps = 0.0;  // nominal sub-pulse duration (finite mode)
};

struct KickSequence {
  std::vector<SubKick> kicks;
  double total_P = 0.0;

  void validate() const {
    for (std::size_t i = 0; i < kicks.size(); ++i) {
      if (kicks[i].P < 0.0) throw ConfigError("kick strength must be >= 0");
      if (i > 0 && !(kicks[i].t_ps > kicks[i - 1].t_ps))
        throw ConfigError("kick times must be strictly increasing");
    }
  }
};

// 4f pulse shaper: pixels uniform in wavelength across the focal plane.
struct ShaperModel {
  int pixel_count = 640;
  double nm_per_pixel = 0.04;
  double center_wavelength_nm = 800.0;

  double window_nm() const { return pixel_count * nm_per_pixel; }
  double omega_center() const {
    return 2.0 * std::numbers::pi * units::c_nm_per_ps / center_wavelength_nm;
  }
  void validate() const {
    if (pixel_count < 2 || !(nm_per_pixel > 0.0) ||
        !(center_wavelength_nm > 0.0))
      throw ConfigError("invalid shaper geometry");
  }
};

namespace detail {

// J_n(x) for any integer order; J_{-n} = (-1)^n J_n.
inline double bessel_jn(int n, double x) {
  const double v = std::cyl_bessel_j(static_cast<double>(std::abs(n)), x);
  return (n < 0 && (n & 1)) ? -v : v;
}

// Smallest N with sum_{|n|<=N} J_n(A)^2 >= 1 - tail.
inline int bessel_significant_order(double A, double tail = 1e-10) {
  double acc = bessel_jn(0, A) * bessel_jn(0, A);
  int n = 0;
  while (acc < 1.0 - tail && n < 512) {
    ++n;
    const double j = bessel_jn(n, A);
    acc += 2.0 * j * j;
  }
  return n;
}

}  // namespace detail

// Ideal sub-pulse decomposition of a sinusoidally phase-modulated pulse:
// E(t) = sum_n J_n(A) eps(t + n tau), so sub-pulse n carries the energy
// fraction J_n(A)^2. Orders beyond n_max are dropped and the retained
// weight renormalized to conserve total_P; a retained fraction below 0.9
// is rejected unless allow_truncation is set.
inline KickSequence bessel_train(const PhaseModulation& mod, double total_P,
                                 int n_max, double pulse_fwhm_ps,
                                 bool allow_truncation = false) {
  mod.validate();
  if (total_P < 0.0) throw ConfigError("total kick strength must be >= 0");
  if (n_max < 0) throw ConfigError("n_max must be >= 0");
  if (!(pulse_fwhm_ps > 0.0)) throw ConfigError("pulse fwhm must be > 0");

  std::vector<double> w(2 * n_max + 1, 0.0);
  double retained = 0.0;
  for (int n = -n_max; n <= n_max; ++n) {
    const double j = detail::bessel_jn(n, mod.A);
    w[n + n_max] = j * j;
    retained += j * j;
  }
  if (retained < 0.9 && !allow_truncation)
    throw ConfigError("bessel_train: retained weight " +
                      std::to_string(retained) +
                      " < 0.9; increase n_max or allow truncation");

  KickSequence seq;
  const double drop = 1e-28 * retained;
  double sum = 0.0;
  for (int n = -n_max; n <= n_max; ++n) {
    const double wn = w[n + n_max];
    if (wn <= drop) continue;
    const double P = total_P * wn / retained;
    seq.kicks.push_back({static_cast<double>(n) * mod.tau_ps, P, pulse_fwhm_ps});
    sum += P;
  }
  seq.total_P = sum;
  seq.validate();
  return seq;
}

// P = (delta_alpha / 4 hbar) * integral of the squared field envelope.
// With Gaussian-units fields, eps^2 = 8 pi I / c, so the integrand is the
// calibrated intensity with a closed-form prefactor.
inline double kick_strength(const FieldEnvelope& env, double delta_alpha_A3) {
  if (!(delta_alpha_A3 > 0.0))
    throw ConfigError("polarizability anisotropy must be > 0");
  env.validate_support();
  const double pref = delta_alpha_A3 * units::cubic_angstrom_to_cm3 * 8.0 *
                      std::numbers::pi * units::w_per_cm2_to_erg_per_s_cm2 *
                      1e-12 /
                      (4.0 * units::hbar_erg_s * units::c_cm_per_s);
  const auto inten = env.intensity_w_cm2();
  double integral = 0.0;
  for (double v : inten) integral += v;
  return pref * integral * env.grid.dt;
}

struct KickStrengths {
  std::vector<double> per_pulse;
  double total = 0.0;
};

inline KickStrengths kick_strength(const KickSequence& seq) {
  KickStrengths out;
  out.per_pulse.reserve(seq.kicks.size());
  for (const auto& k : seq.kicks) {
    out.per_pulse.push_back(k.P);
    out.total += k.P;
  }
  return out;
}

// Scale the envelope's peak intensity so its kick strength equals target_P.
inline void calibrate_to_kick_strength(FieldEnvelope& env,
                                       double delta_alpha_A3,
                                       double target_P) {
  if (!(target_P >= 0.0)) throw ConfigError("target kick strength must be >= 0");
  if (env.peak_intensity_w_cm2 <= 0.0) env.peak_intensity_w_cm2 = 1.0;
  const double p0 = kick_strength(env, delta_alpha_A3);
  if (!(p0 > 0.0))
    throw ConfigError("cannot calibrate a zero field to a kick strength");
  env.peak_intensity_w_cm2 *= target_P / p0;
}

// Apply phi(omega) to the spectrum. Without a shaper the phase is exact
// (ideal line-by-line modulation). With a shaper the phase is held constant
// across each wavelength pixel, and any light falling outside the pixel
// window is clipped: an out-of-window energy fraction above
// max_clip_fraction is an error.
inline Spectrum apply_spectral_phase(
    const Spectrum& in, const PhaseModulation& mod,
    const std::optional<ShaperModel>& shaper = std::nullopt,
    double max_clip_fraction = 1e-4) {
  in.validate();
  mod.validate();
  Spectrum out = in;

  if (!shaper) {
    for (std::size_t i = 0; i < out.amps.size(); ++i) {
      const double phi = mod.A * std::sin((out.omega(i) - mod.omega0) * mod.tau_ps);
      out.amps[i] *= std::polar(1.0, phi);
    }
  } else {
    shaper->validate();
    const double lambda_min =
        shaper->center_wavelength_nm - 0.5 * shaper->window_nm();
    const double lambda_max = lambda_min + shaper->window_nm();
    double total = 0.0, clipped = 0.0;
    for (std::size_t i = 0; i < out.amps.size(); ++i) {
      const double a2 = std::norm(out.amps[i]);
      total += a2;
      const double omega = out.omega(i);
      const double lambda =
          2.0 * std::numbers::pi * units::c_nm_per_ps / omega;
      if (lambda < lambda_min || lambda >= lambda_max) {
        clipped += a2;
        out.amps[i] = 0.0;
        continue;
      }
      const int px = static_cast<int>((lambda - lambda_min) /
                                      shaper->nm_per_pixel);
      const double lambda_px =
          lambda_min + (px + 0.5) * shaper->nm_per_pixel;
      const double omega_px =
          2.0 * std::numbers::pi * units::c_nm_per_ps / lambda_px;
      const double phi = mod.A * std::sin((omega_px - mod.omega0) * mod.tau_ps);
      out.amps[i] *= std::polar(1.0, phi);
    }
    if (total > 0.0 && clipped > max_clip_fraction * total)
      throw ConfigError("spectrum extends beyond the shaper pixel window");
  }

  // Track encoded delays for the synthesis grid check. Pixelation adds
  // replicas at the pixel sampling period on top of the modulation comb.
  double delay = detail::bessel_significant_order(mod.A) * mod.tau_ps;
  if (shaper) {
    const double lc = shaper->center_wavelength_nm;
    const double domega_px = 2.0 * std::numbers::pi * units::c_nm_per_ps *
                             shaper->nm_per_pixel / (lc * lc);
    delay += 2.0 * std::numbers::pi / domega_px;
  }
  out.max_delay_ps = std::max(in.max_delay_ps, delay);
  return out;
}

// Frequency grid wide and fine enough for a given modulation: resolves the
// input pulse and spans all encoded delays with headroom.
inline void plan_spectrum_grid(const PhaseModulation& mod, double fwhm_ps,
                               const std::optional<ShaperModel>& shaper,
                               double& domega, std::size_t& n) {
  mod.validate();
  double window = 2.6 * detail::bessel_significant_order(mod.A) * mod.tau_ps +
                  16.0 * fwhm_ps;
  if (shaper) {
    const double lc = shaper->center_wavelength_nm;
    const double domega_px = 2.0 * std::numbers::pi * units::c_nm_per_ps *
                             shaper->nm_per_pixel / (lc * lc);
    const double satellite = 2.0 * std::numbers::pi / domega_px;
    window = std::max(
        window, 2.3 * (satellite +
                       detail::bessel_significant_order(mod.A) * mod.tau_ps));
  }
  const double dt_target = std::min(fwhm_ps / 64.0, 0.01);
  std::size_t want = static_cast<std::size_t>(std::ceil(window / dt_target));
  n = 64;
  while (n < want) n *= 2;
  // Keep dt exactly at target; the window grows to n * dt_target.
  domega = 2.0 * std::numbers::pi / (static_cast<double>(n) * dt_target);
}

inline void write_kick_sequence_csv(const KickSequence& seq,
                                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "n,t_ps,P,fwhm_ps\n";
  for (std::size_t i = 0; i < seq.kicks.size(); ++i) {
    const auto& k = seq.kicks[i];
    out << i << ',' << detail::format_g12(k.t_ps) << ','
        << detail::format_g12(k.P) << ',' << detail::format_g12(k.fwhm_ps)
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline KickSequence read_kick_sequence_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("n,t_ps,P,fwhm_ps", 0) != 0)
    throw IoError("bad kick sequence header in " + path.string());
  KickSequence seq;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    long idx;
    double t, P, fwhm;
    char c1, c2, c3;
    if (!(ss >> idx >> c1 >> t >> c2 >> P >> c3 >> fwhm) || c1 != ',' ||
        c2 != ',' || c3 != ',')
      throw IoError("bad kick sequence row in " + path.string());
    seq.kicks.push_back({t, P, fwhm});
    seq.total_P += P;
  }
  seq.validate();
  return seq;
}

}  // namespace rotorkick
