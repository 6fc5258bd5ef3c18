#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "rotorkick/errors.hpp"
#include "rotorkick/fft.hpp"
#include "rotorkick/units.hpp"

namespace rotorkick {

using Complex = std::complex<double>;

struct TimeGrid {
  double t0 = 0.0;   // ps
  double dt = 0.0;   // ps
  std::size_t n = 0;

  double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  double span() const { return dt * static_cast<double>(n > 0 ? n - 1 : 0); }

  void validate() const {
    if (n < 2) throw ConfigError("time grid needs at least 2 samples");
    if (!(dt > 0.0)) throw ConfigError("time grid step must be positive");
  }
};

// Complex field envelope on a uniform time grid. Samples are in arbitrary
// units; peak_intensity_w_cm2 calibrates the physical intensity at the
// envelope maximum. Carrier oscillations are not resolved.
struct FieldEnvelope {
  TimeGrid grid;
  std::vector<Complex> samples;
  double peak_intensity_w_cm2 = 0.0;

  double peak_abs2() const {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, std::norm(s));
    return m;
  }

  // Physical intensity per sample, W/cm^2.
  std::vector<double> intensity_w_cm2() const {
    const double p = peak_abs2();
    std::vector<double> out(samples.size(), 0.0);
    if (p <= 0.0) return out;
    const double scale = peak_intensity_w_cm2 / p;
    for (std::size_t i = 0; i < samples.size(); ++i)
      out[i] = scale * std::norm(samples[i]);
    return out;
  }

  // The grid must cover all non-negligible support: boundary samples below
  // rel_tol of the peak amplitude.
  void validate_support(double rel_tol = 1e-6) const {
    grid.validate();
    if (samples.size() != grid.n)
      throw ConfigError("envelope sample count does not match grid");
    const double peak = std::sqrt(peak_abs2());
    if (peak <= 0.0) return;
    const double edge =
        std::max(std::abs(samples.front()), std::abs(samples.back()));
    if (edge > rel_tol * peak)
      throw ConfigError("envelope support extends past the grid boundary");
  }
};

// Spectral envelope on a uniform angular-frequency grid centered on the
// carrier: offset delta_i = (i - n/2) * domega, in rad/ps. max_delay_ps
// tracks the largest group delay encoded by phase modulation so the
// synthesis grid can be checked against it.
struct Spectrum {
  double omega0 = 0.0;  // carrier, rad/ps
  double domega = 0.0;  // rad/ps
  std::vector<Complex> amps;
  double max_delay_ps = 0.0;

  double delta(std::size_t i) const {
    return (static_cast<double>(i) - static_cast<double>(amps.size()) / 2.0) *
           domega;
  }
  double omega(std::size_t i) const { return omega0 + delta(i); }

  // Field energy in the same arbitrary units as sum |eps|^2 dt.
  double energy() const {
    double s = 0.0;
    for (const auto& a : amps) s += std::norm(a);
    return s * domega / (2.0 * std::numbers::pi);
  }

  void validate() const {
    if (amps.size() < 2 || amps.size() % 2 != 0)
      throw ConfigError("spectrum length must be even and >= 2");
    if (!(domega > 0.0)) throw ConfigError("spectrum step must be positive");
  }
};

// Transform-limited Gaussian with the requested intensity FWHM in time.
// Time-domain amplitude exp(-2 ln2 t^2 / fwhm^2) has the spectral amplitude
// exp(-delta^2 fwhm^2 / (8 ln2)) up to an overall constant.
inline Spectrum gaussian_spectrum(double fwhm_ps, double omega0,
                                  double domega, std::size_t n) {
  if (!(fwhm_ps > 0.0)) throw ConfigError("pulse fwhm must be positive");
  Spectrum spec;
  spec.omega0 = omega0;
  spec.domega = domega;
  spec.amps.resize(n);
  spec.validate();
  const double a = 2.0 * std::numbers::ln2 / (fwhm_ps * fwhm_ps);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = spec.delta(i);
    spec.amps[i] = std::exp(-d * d / (4.0 * a));
  }
  return spec;
}

// Real Gaussian time envelope with the given intensity FWHM, sampled on a
// grid centered at t_center spanning +- half_width.
inline FieldEnvelope gaussian_envelope(double t_center, double fwhm_ps,
                                       double half_width_ps,
                                       double samples_per_fwhm,
                                       double peak_intensity_w_cm2) {
  if (!(fwhm_ps > 0.0) || !(half_width_ps > 0.0))
    throw ConfigError("gaussian envelope needs positive widths");
  if (!(samples_per_fwhm >= 4.0))
    throw ConfigError("gaussian envelope needs >= 4 samples per fwhm");
  FieldEnvelope env;
  env.grid.dt = fwhm_ps / samples_per_fwhm;
  env.grid.n =
      2 * static_cast<std::size_t>(std::ceil(half_width_ps / env.grid.dt)) + 1;
  env.grid.t0 =
      t_center - env.grid.dt * static_cast<double>(env.grid.n - 1) / 2.0;
  env.samples.resize(env.grid.n);
  const double a = 2.0 * std::numbers::ln2 / (fwhm_ps * fwhm_ps);
  for (std::size_t i = 0; i < env.grid.n; ++i) {
    const double t = env.grid.time(i) - t_center;
    env.samples[i] = std::exp(-a * t * t);
  }
  env.peak_intensity_w_cm2 = peak_intensity_w_cm2;
  return env;
}

// eps(t_j) = (domega / 2 pi) sum_k amps_k exp(+i delta_k t_j) on the
// conjugate grid t_j = (j - n/2) dt, dt = 2 pi / (n domega). Rejects grids
// too coarse to represent the encoded modulation delays.
inline FieldEnvelope synthesize_time_domain(const Spectrum& spec) {
  spec.validate();
  const std::size_t n = spec.amps.size();
  const double dt =
      2.0 * std::numbers::pi / (static_cast<double>(n) * spec.domega);
  const double t_half = std::numbers::pi / spec.domega;
  if (spec.max_delay_ps > 0.95 * t_half)
    throw ConfigError(
        "spectral grid too coarse: encoded delays exceed the representable "
        "time window");

  std::vector<Complex> work = spec.amps;
  detail::fftshift(work);
  detail::dft(work, +1);
  detail::fftshift(work);

  FieldEnvelope env;
  env.grid.dt = dt;
  env.grid.n = n;
  env.grid.t0 = -dt * static_cast<double>(n) / 2.0;
  env.samples = std::move(work);
  const double scale = spec.domega / (2.0 * std::numbers::pi);
  for (auto& s : env.samples) s *= scale;
  return env;
}

// Inverse of synthesize_time_domain for grids produced by it.
inline Spectrum spectrum_from_envelope(const FieldEnvelope& env,
                                       double omega0) {
  env.grid.validate();
  const std::size_t n = env.grid.n;
  if (n % 2 != 0) throw ConfigError("spectrum grid length must be even");
  std::vector<Complex> work = env.samples;
  detail::fftshift(work);
  detail::dft(work, -1);
  detail::fftshift(work);
  Spectrum spec;
  spec.omega0 = omega0;
  spec.domega = 2.0 * std::numbers::pi / (static_cast<double>(n) * env.grid.dt);
  spec.amps = std::move(work);
  for (auto& a : spec.amps) a *= env.grid.dt;
  return spec;
}

inline double field_energy(const FieldEnvelope& env) {
  double s = 0.0;
  for (const auto& a : env.samples) s += std::norm(a);
  return s * env.grid.dt;
}

// Roll the envelope smoothly to zero beyond +-keep_ps around the grid
// center (cos^2 ramp reaching exactly zero at the edges). Needed after
// shaper synthesis: hard pixel boundaries scatter a ~1/t amplitude pedestal
// to arbitrary delays, so the periodic grid always wraps some of it; the
// grid is planned to hold everything within max_delay_ps and the rest is
// cut here. Returns the discarded energy fraction.
inline double taper_edges(FieldEnvelope& env, double keep_ps) {
  env.grid.validate();
  if (env.samples.size() != env.grid.n)
    throw ConfigError("envelope sample count does not match grid");
  const double mid =
      env.grid.t0 + 0.5 * env.grid.dt * static_cast<double>(env.grid.n - 1);
  const double half = 0.5 * env.grid.dt * static_cast<double>(env.grid.n - 1);
  if (!(keep_ps > 0.0) || keep_ps >= half)
    throw ConfigError("taper window must lie strictly inside the grid");
  double before = 0.0, after = 0.0;
  const double ramp = half - keep_ps;
  for (std::size_t i = 0; i < env.grid.n; ++i) {
    const double d = std::abs(env.grid.time(i) - mid);
    before += std::norm(env.samples[i]);
    if (d > keep_ps) {
      const double u = std::min(1.0, (d - keep_ps) / ramp);
      const double c = std::cos(0.5 * std::numbers::pi * u);
      env.samples[i] *= c * c;
    }
    after += std::norm(env.samples[i]);
  }
  return before > 0.0 ? 1.0 - after / before : 0.0;
}

// Intensity FWHM of the tallest feature, by linear interpolation of the
// half-maximum crossings nearest the global peak.
inline double measure_fwhm(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("measure_fwhm: bad sample arrays");
  std::size_t imax = 0;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] > y[imax]) imax = i;
  const double half = y[imax] / 2.0;
  if (!(half > 0.0)) throw NumericsError("measure_fwhm: flat signal");

  double left = x.front(), right = x.back();
  bool found_l = false, found_r = false;
  for (std::size_t i = imax; i-- > 0;) {
    if (y[i] <= half) {
      const double f = (half - y[i]) / (y[i + 1] - y[i]);
      left = x[i] + f * (x[i + 1] - x[i]);
      found_l = true;
      break;
    }
  }
  for (std::size_t i = imax + 1; i < y.size(); ++i) {
    if (y[i] <= half) {
      const double f = (y[i - 1] - half) / (y[i - 1] - y[i]);
      right = x[i - 1] + f * (x[i] - x[i - 1]);
      found_r = true;
      break;
    }
  }
  if (!found_l || !found_r)
    throw NumericsError("measure_fwhm: half-maximum not bracketed");
  return right - left;
}

inline double measure_fwhm(const FieldEnvelope& env) {
  std::vector<double> t(env.grid.n), inten(env.grid.n);
  for (std::size_t i = 0; i < env.grid.n; ++i) {
    t[i] = env.grid.time(i);
    inten[i] = std::norm(env.samples[i]);
  }
  return measure_fwhm(t, inten);
}

namespace detail {

inline std::string format_g12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

inline void write_envelope_csv(const FieldEnvelope& env,
                               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto inten = env.intensity_w_cm2();
  out << "t_ps,re,im,intensity\n";
  for (std::size_t i = 0; i < env.grid.n; ++i) {
    out << detail::format_g12(env.grid.time(i)) << ','
        << detail::format_g12(env.samples[i].real()) << ','
        << detail::format_g12(env.samples[i].imag()) << ','
        << detail::format_g12(inten[i]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline FieldEnvelope read_envelope_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t_ps,re,im,intensity", 0) != 0)
    throw IoError("bad envelope header in " + path.string());
  std::vector<double> t;
  std::vector<Complex> samples;
  double peak_i = 0.0, peak_a2 = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double tv, re, im, inten;
    char c1, c2, c3;
    if (!(ss >> tv >> c1 >> re >> c2 >> im >> c3 >> inten) || c1 != ',' ||
        c2 != ',' || c3 != ',')
      throw IoError("bad envelope row in " + path.string());
    t.push_back(tv);
    samples.emplace_back(re, im);
    const double a2 = re * re + im * im;
    if (a2 > peak_a2) {
      peak_a2 = a2;
      peak_i = inten;
    }
  }
  if (t.size() < 2) throw IoError("envelope file too short: " + path.string());
  FieldEnvelope env;
  env.grid.t0 = t.front();
  env.grid.dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  env.grid.n = t.size();
  env.samples = std::move(samples);
  env.peak_intensity_w_cm2 = peak_i;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - env.grid.time(i)) > 1e-6 * std::max(1.0, env.grid.dt))
      throw IoError("envelope grid not uniform in " + path.string());
  }
  return env;
}

}  // namespace rotorkick
