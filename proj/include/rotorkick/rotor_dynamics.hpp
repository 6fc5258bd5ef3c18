#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "rotorkick/errors.hpp"
#include "rotorkick/field.hpp"
#include "rotorkick/molecule.hpp"
#include "rotorkick/pulse_train.hpp"
#include "rotorkick/units.hpp"

namespace rotorkick {

struct PropagationParams {
  int J_max = 40;
  double norm_tol = 1e-8;
  // Per-step RK45 tolerance. Norm drift accumulates to ~100x this over a
  // multi-pulse train, so keep two orders below norm_tol.
  double step_control = 1e-10;
  double leakage_threshold = 1e-8;
  double samples_per_fwhm = 64.0;

  void validate() const {
    if (J_max < 8) throw ConfigError("J_max must be >= 8");
    if (!(norm_tol > 0.0) || !(step_control > 0.0) ||
        !(leakage_threshold > 0.0))
      throw ConfigError("propagation tolerances must be positive");
    if (!(samples_per_fwhm >= 32.0))
      throw ConfigError("need >= 32 samples per fwhm");
  }
};

enum class PulseMode { impulsive, finite };

namespace detail {

// cos^2 theta couples only J' = J and J' = J +- 2 at fixed M.
inline double cos2_diagonal(int J, int M) {
  const double j = J, m = M;
  return 1.0 / 3.0 +
         (2.0 / 3.0) * (j * (j + 1.0) - 3.0 * m * m) /
             ((2.0 * j + 3.0) * (2.0 * j - 1.0));
}

// <J+2,M|cos^2 theta|J,M>
inline double cos2_offdiagonal(int J, int M) {
  const double j = J, m = M;
  return std::sqrt(((j + 1.0) * (j + 1.0) - m * m) *
                   ((j + 2.0) * (j + 2.0) - m * m) /
                   ((2.0 * j + 1.0) * (2.0 * j + 5.0))) /
         (2.0 * j + 3.0);
}

}  // namespace detail

// One M-conserving parity block: basis states J = j_min, j_min+2, ...
// up to J_max. Kicks never mix the two parities, so each block evolves
// independently.
struct CouplingMatrix {
  int M = 0;
  int j_min = 0;
  int J_max = 0;
  Eigen::MatrixXd entries;

  int dim() const { return static_cast<int>(entries.rows()); }
  int J_of(int i) const { return j_min + 2 * i; }
};

inline int block_dim(int j_min, int J_max) {
  if (j_min > J_max) throw std::invalid_argument("j_min exceeds J_max");
  return (J_max - j_min) / 2 + 1;
}

inline CouplingMatrix cos2_elements(int J_max, int M, int j_min) {
  if (std::abs(M) > J_max) throw std::invalid_argument("|M| exceeds J_max");
  if (j_min != std::abs(M) && j_min != std::abs(M) + 1)
    throw std::invalid_argument("j_min must be |M| or |M|+1");
  const int dim = block_dim(j_min, J_max);
  CouplingMatrix c;
  c.M = M;
  c.j_min = j_min;
  c.J_max = J_max;
  c.entries = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const int J = j_min + 2 * i;
    c.entries(i, i) = detail::cos2_diagonal(J, M);
    if (i + 1 < dim) {
      const double v = detail::cos2_offdiagonal(J, M);
      c.entries(i, i + 1) = v;
      c.entries(i + 1, i) = v;
    }
  }
  return c;
}

inline CouplingMatrix cos2_elements(int J_max, int M) {
  return cos2_elements(J_max, M, std::abs(M));
}

// Wavepacket within one parity block at fixed M.
struct RotorState {
  int M = 0;
  int j_min = 0;
  int J_max = 0;
  Eigen::VectorXcd amps;

  static RotorState basis(int J0, int M0, int J_max) {
    if (J0 < 0 || std::abs(M0) > J0)
      throw ConfigError("basis state needs J0 >= 0 and |M0| <= J0");
    if (J0 > J_max) throw ConfigError("J0 exceeds J_max");
    RotorState s;
    s.M = M0;
    s.j_min = std::abs(M0) + ((J0 - std::abs(M0)) % 2);
    s.J_max = J_max;
    s.amps = Eigen::VectorXcd::Zero(block_dim(s.j_min, J_max));
    s.amps((J0 - s.j_min) / 2) = 1.0;
    return s;
  }

  int dim() const { return static_cast<int>(amps.size()); }
  int J_of(int i) const { return j_min + 2 * i; }
  double norm_sq() const { return amps.squaredNorm(); }

  // Population in the two highest-J basis states; a truncation canary.
  double leakage() const {
    double s = 0.0;
    for (int i = std::max(0, dim() - 2); i < dim(); ++i)
      s += std::norm(amps(i));
    return s;
  }

  std::vector<double> populations() const {
    std::vector<double> S(static_cast<std::size_t>(J_max) + 1, 0.0);
    for (int i = 0; i < dim(); ++i) S[J_of(i)] = std::norm(amps(i));
    return S;
  }
};

// exp(+i P cos^2 theta) on one block, via the eigendecomposition of the
// real symmetric coupling matrix. Exactly unitary up to roundoff.
class KickOperator {
 public:
  explicit KickOperator(const CouplingMatrix& c2)
      : M_(c2.M), j_min_(c2.j_min), J_max_(c2.J_max) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c2.entries);
    if (es.info() != Eigen::Success)
      throw NumericsError("cos^2 eigendecomposition failed");
    evals_ = es.eigenvalues();
    evecs_ = es.eigenvectors().cast<Complex>();
  }

  void apply(double P, Eigen::VectorXcd& amps) const {
    Eigen::VectorXcd y = evecs_.adjoint() * amps;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      y(i) *= std::polar(1.0, P * evals_(i));
    amps.noalias() = evecs_ * y;
  }

  int M() const { return M_; }
  int j_min() const { return j_min_; }
  int J_max() const { return J_max_; }

 private:
  int M_, j_min_, J_max_;
  Eigen::VectorXd evals_;
  Eigen::MatrixXcd evecs_;
};

// Per-thread cache of kick operators; the matrix depends only on |M| and
// the parity block. Not synchronized: use one instance per worker.
class KickCache {
 public:
  explicit KickCache(int J_max) : J_max_(J_max) {}

  const KickOperator& get(int M, int j_min) {
    const auto key = std::make_pair(std::abs(M), j_min);
    auto it = ops_.find(key);
    if (it == ops_.end()) {
      it = ops_.emplace(key, KickOperator(cos2_elements(J_max_, std::abs(M),
                                                        j_min)))
               .first;
    }
    return it->second;
  }

  int J_max() const { return J_max_; }

 private:
  int J_max_;
  std::map<std::pair<int, int>, KickOperator> ops_;
};

namespace detail {

inline void check_state(const RotorState& state,
                        const PropagationParams& params) {
  params.validate();
  if (state.J_max < std::abs(state.M) + 8)
    throw ConfigError("J_max leaves fewer than 4 block states of headroom");
  if (state.dim() != block_dim(state.j_min, state.J_max))
    throw std::invalid_argument("state dimension does not match its block");
}

inline void check_health(const RotorState& state,
                         const PropagationParams& params) {
  char buf[128];
  const double drift = std::abs(state.norm_sq() - 1.0);
  if (drift > params.norm_tol) {
    std::snprintf(buf, sizeof(buf), "norm drift %.3e exceeds tolerance %.0e",
                  drift, params.norm_tol);
    throw NumericsError(buf);
  }
  const double leak = state.leakage();
  if (leak > params.leakage_threshold) {
    std::snprintf(buf, sizeof(buf),
                  "population %.3e leaked to the J_max boundary; raise J_max",
                  leak);
    throw NumericsError(buf);
  }
}

}  // namespace detail

// Free evolution: c_J *= exp(-i omega_J t).
inline RotorState free_propagate(const RotorState& state, double t_ps,
                                 const MoleculeSpec& spec) {
  RotorState out = state;
  for (int i = 0; i < out.dim(); ++i)
    out.amps(i) *= std::polar(1.0, -rotational_omega(spec, out.J_of(i)) * t_ps);
  return out;
}

// Instantaneous kick of strength P.
inline RotorState delta_kick(const RotorState& state, double P,
                             const PropagationParams& params,
                             KickCache* cache = nullptr) {
  detail::check_state(state, params);
  if (P < 0.0) throw std::invalid_argument("kick strength must be >= 0");
  RotorState out = state;
  if (cache) {
    if (cache->J_max() != state.J_max)
      throw std::invalid_argument("kick cache built for a different J_max");
    cache->get(state.M, state.j_min).apply(P, out.amps);
  } else {
    KickOperator op(cos2_elements(state.J_max, std::abs(state.M), state.j_min));
    op.apply(P, out.amps);
  }
  detail::check_health(out, params);
  return out;
}

namespace detail {

// Catmull-Rom interpolation of the sampled intensity, clamped at zero.
class IntensityInterp {
 public:
  IntensityInterp(const TimeGrid& grid, std::vector<double> values)
      : grid_(grid), v_(std::move(values)) {}

  double operator()(double t) const {
    const double x = (t - grid_.t0) / grid_.dt;
    if (x <= 0.0) return std::max(0.0, v_.front());
    const auto n = static_cast<std::ptrdiff_t>(v_.size());
    if (x >= static_cast<double>(n - 1)) return std::max(0.0, v_.back());
    const auto i = static_cast<std::ptrdiff_t>(x);
    const double f = x - static_cast<double>(i);
    const double p1 = v_[i], p2 = v_[i + 1];
    const double p0 = (i > 0) ? v_[i - 1] : p1;
    const double p3 = (i + 2 < n) ? v_[i + 2] : p2;
    const double val =
        p1 + 0.5 * f *
                 (p2 - p0 +
                  f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 +
                       f * (3.0 * (p1 - p2) + p3 - p0)));
    return std::max(0.0, val);
  }

 private:
  TimeGrid grid_;
  std::vector<double> v_;
};

// Cash-Karp embedded Runge-Kutta 4(5) step for dy/dt = f(t, y).
template <typename Rhs>
bool rk45_step(const Rhs& f, double t, double h, const Eigen::VectorXcd& y,
               Eigen::VectorXcd& y_out, double& err, double tol) {
  static constexpr double a2 = 1.0 / 5, a3 = 3.0 / 10, a4 = 3.0 / 5, a5 = 1.0,
                          a6 = 7.0 / 8;
  const Eigen::VectorXcd k1 = f(t, y);
  const Eigen::VectorXcd k2 = f(t + a2 * h, y + h * (k1 / 5.0));
  const Eigen::VectorXcd k3 =
      f(t + a3 * h, y + h * (3.0 / 40 * k1 + 9.0 / 40 * k2));
  const Eigen::VectorXcd k4 =
      f(t + a4 * h, y + h * (3.0 / 10 * k1 - 9.0 / 10 * k2 + 6.0 / 5 * k3));
  const Eigen::VectorXcd k5 =
      f(t + a5 * h, y + h * (-11.0 / 54 * k1 + 5.0 / 2 * k2 - 70.0 / 27 * k3 +
                             35.0 / 27 * k4));
  const Eigen::VectorXcd k6 =
      f(t + a6 * h,
        y + h * (1631.0 / 55296 * k1 + 175.0 / 512 * k2 + 575.0 / 13824 * k3 +
                 44275.0 / 110592 * k4 + 253.0 / 4096 * k5));

  y_out = y + h * (37.0 / 378 * k1 + 250.0 / 621 * k3 + 125.0 / 594 * k4 +
                   512.0 / 1771 * k6);
  const Eigen::VectorXcd y4 =
      y + h * (2825.0 / 27648 * k1 + 18575.0 / 48384 * k3 +
               13525.0 / 55296 * k4 + 277.0 / 14336 * k5 + 1.0 / 4 * k6);

  err = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double scale = tol * (1.0 + std::abs(y_out(i)));
    err = std::max(err, std::abs(y_out(i) - y4(i)) / scale);
  }
  return err <= 1.0;
}

}  // namespace detail

// Integrate the Schroedinger equation across a sampled envelope in the
// interaction picture: with c = exp(-i D (t - t_a)) c~, only the coupling
// V(t) = -P'(t) cos^2 theta drives c~, so step size follows the pulse, not
// the rotational phases. Includes the free evolution over the grid span.
inline RotorState propagate_finite_pulse(const RotorState& state,
                                         const FieldEnvelope& env,
                                         const MoleculeSpec& spec,
                                         const PropagationParams& params) {
  detail::check_state(state, params);
  env.validate_support();
  spec.validate();

  // P'(t) in 1/ps: the same conversion as kick_strength, per unit time.
  const double pref = spec.delta_alpha_A3 * units::cubic_angstrom_to_cm3 *
                      8.0 * std::numbers::pi *
                      units::w_per_cm2_to_erg_per_s_cm2 * 1e-12 /
                      (4.0 * units::hbar_erg_s * units::c_cm_per_s);
  const auto inten = env.intensity_w_cm2();
  double inten_max = 0.0;
  for (double v : inten) inten_max = std::max(inten_max, v);

  // Sampling density check against the tallest feature. A zero field needs
  // none and reduces to free evolution.
  if (inten_max > 0.0) {
    std::vector<double> t(env.grid.n);
    for (std::size_t i = 0; i < env.grid.n; ++i) t[i] = env.grid.time(i);
    const double fwhm = measure_fwhm(t, inten);
    if (env.grid.dt > fwhm / 32.0)
      throw ConfigError("envelope sampled coarser than fwhm/32");
  }

  detail::IntensityInterp rate(env.grid, inten);
  const CouplingMatrix c2 =
      cos2_elements(state.J_max, std::abs(state.M), state.j_min);
  const int dim = state.dim();
  Eigen::VectorXd omega(dim);
  for (int i = 0; i < dim; ++i)
    omega(i) = rotational_omega(spec, state.J_of(i));

  const double t_a = env.grid.t0;
  const auto rhs = [&](double t, const Eigen::VectorXcd& y) {
    const double g = pref * rate(t);
    Eigen::VectorXcd dy = Eigen::VectorXcd::Zero(dim);
    if (g == 0.0) return dy;
    const double s = t - t_a;
    for (int i = 0; i < dim; ++i) {
      Complex acc = c2.entries(i, i) * y(i);
      if (i > 0)
        acc += c2.entries(i, i - 1) *
               std::polar(1.0, (omega(i) - omega(i - 1)) * s) * y(i - 1);
      if (i + 1 < dim)
        acc += c2.entries(i, i + 1) *
               std::polar(1.0, (omega(i) - omega(i + 1)) * s) * y(i + 1);
      dy(i) = Complex(0.0, g) * acc;
    }
    return dy;
  };

  const double t_end = env.grid.time(env.grid.n - 1);
  const double span = t_end - t_a;
  Eigen::VectorXcd y = state.amps;
  double t = t_a;
  double h = span / 256.0;
  const double h_min = span * 1e-14;
  int rejects_in_a_row = 0;
  while (t < t_end) {
    h = std::min(h, t_end - t);
    Eigen::VectorXcd y_next;
    double err = 0.0;
    const bool ok =
        detail::rk45_step(rhs, t, h, y, y_next, err, params.step_control);
    if (ok) {
      t += h;
      y.swap(y_next);
      rejects_in_a_row = 0;
      const double grow =
          (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      ++rejects_in_a_row;
      h *= std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.5);
      if (h < h_min || rejects_in_a_row > 200)
        throw NumericsError("adaptive step control failed on the envelope");
    }
  }

  RotorState out = state;
  out.amps = y;
  for (int i = 0; i < dim; ++i)
    out.amps(i) *= std::polar(1.0, -omega(i) * span);
  detail::check_health(out, params);
  return out;
}

// Propagate through a kick sequence, from the first kick to the last; no
// free evolution is prepended or appended. In impulsive mode each sub-pulse
// is a delta kick; in finite mode each becomes a Gaussian segment of its
// nominal fwhm calibrated to the same integrated strength.
inline RotorState propagate_train(const RotorState& state,
                                  const KickSequence& seq,
                                  const MoleculeSpec& spec,
                                  const PropagationParams& params,
                                  PulseMode mode = PulseMode::impulsive,
                                  KickCache* cache = nullptr) {
  detail::check_state(state, params);
  seq.validate();
  spec.validate();
  if (seq.kicks.empty()) return state;

  if (mode == PulseMode::impulsive) {
    RotorState cur = state;
    for (std::size_t k = 0; k < seq.kicks.size(); ++k) {
      if (k > 0)
        cur = free_propagate(cur, seq.kicks[k].t_ps - seq.kicks[k - 1].t_ps,
                             spec);
      cur = delta_kick(cur, seq.kicks[k].P, params, cache);
    }
    return cur;
  }

  // Finite mode: non-overlapping Gaussian segments around each kick time.
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < seq.kicks.size(); ++k)
    min_gap = std::min(min_gap, seq.kicks[k].t_ps - seq.kicks[k - 1].t_ps);

  RotorState cur = state;
  // Align with the impulsive convention: the train spans first kick to last
  // kick, so the leading half-segment is rewound and the trailing one trimmed.
  double t_cursor = seq.kicks.front().t_ps;
  bool first = true;
  for (const auto& kick : seq.kicks) {
    if (!(kick.fwhm_ps > 0.0))
      throw ConfigError("finite mode needs positive sub-pulse fwhm");
    double half = 4.0 * kick.fwhm_ps;
    if (std::isfinite(min_gap)) half = std::min(half, 0.49 * min_gap);
    if (half < 2.0 * kick.fwhm_ps)
      throw ConfigError("sub-pulses overlap: spacing too small for fwhm");

    FieldEnvelope env = gaussian_envelope(kick.t_ps, kick.fwhm_ps, half,
                                          params.samples_per_fwhm, 1.0);
    if (kick.P > 0.0)
      calibrate_to_kick_strength(env, spec.delta_alpha_A3, kick.P);
    else
      env.peak_intensity_w_cm2 = 0.0;

    const double gap = env.grid.t0 - t_cursor;
    if (!first && gap < 0.0)
      throw NumericsError("finite-mode segments overlap");
    cur = free_propagate(cur, gap, spec);
    cur = propagate_finite_pulse(cur, env, spec, params);
    t_cursor = env.grid.time(env.grid.n - 1);
    first = false;
  }
  cur = free_propagate(cur, seq.kicks.back().t_ps - t_cursor, spec);
  return cur;
}

inline RotorState propagate_train(const RotorState& state,
                                  const FieldEnvelope& env,
                                  const MoleculeSpec& spec,
                                  const PropagationParams& params) {
  return propagate_finite_pulse(state, env, spec, params);
}

}  // namespace rotorkick
