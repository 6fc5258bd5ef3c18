#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rotorkick/errors.hpp"
#include "rotorkick/field.hpp"
#include "rotorkick/molecule.hpp"
#include "rotorkick/observables.hpp"
#include "rotorkick/pulse_train.hpp"
#include "rotorkick/rotor_dynamics.hpp"
#include "rotorkick/units.hpp"

namespace rotorkick {

struct EnsembleMember {
  int J0 = 0;
  int M0 = 0;
  double weight = 0.0;
};

struct ThermalEnsemble {
  double temperature_K = 0.0;
  std::vector<EnsembleMember> members;  // sorted by (J0, M0)
  int cutoff_J = 0;

  double total_weight() const {
    double s = 0.0;
    for (const auto& m : members) s += m.weight;
    return s;
  }
};

// Boltzmann-populated rotational levels with nuclear-spin statistical
// weights, truncated at the smallest cutoff keeping the dropped Boltzmann
// tail below cutoff_tail. Each (J0, M0) member gets weight w_J / (2 J0 + 1);
// levels whose spin weight vanishes are omitted.
inline ThermalEnsemble thermal_ensemble(const MoleculeSpec& spec,
                                        double temperature_K,
                                        double cutoff_tail = 1e-6) {
  spec.validate();
  if (!(temperature_K > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(cutoff_tail > 0.0) || cutoff_tail >= 1.0)
    throw ConfigError("cutoff_tail must be in (0, 1)");

  const double kT = units::k_boltzmann_cm1_per_K * temperature_K;
  std::vector<double> w;
  for (int J = 0;; ++J) {
    const double g = spin_weight(spec, J);
    const double boltz =
        std::exp(-rotational_energy_cm1(spec, J) / kT);
    const double wj = g * (2.0 * J + 1.0) * boltz;
    w.push_back(wj);
    if (J > 4 && boltz < 1e-300) break;
    if (J > 4096) throw NumericsError("thermal ensemble failed to converge");
  }
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) throw ConfigError("all thermal weights are zero");

  int cutoff = static_cast<int>(w.size()) - 1;
  double tail = 0.0;
  for (int J = static_cast<int>(w.size()) - 1; J >= 0; --J) {
    if (tail + w[J] >= cutoff_tail * total) {
      cutoff = J;
      break;
    }
    tail += w[J];
    cutoff = J - 1;
  }
  cutoff = std::max(cutoff, 0);

  double retained = 0.0;
  for (int J = 0; J <= cutoff; ++J) retained += w[J];

  ThermalEnsemble ens;
  ens.temperature_K = temperature_K;
  ens.cutoff_J = cutoff;
  for (int J = 0; J <= cutoff; ++J) {
    if (w[J] <= 0.0) continue;
    const double per_m = w[J] / ((2.0 * J + 1.0) * retained);
    for (int M = -J; M <= J; ++M) ens.members.push_back({J, M, per_m});
  }
  if (ens.members.empty()) throw ConfigError("thermal ensemble is empty");
  return ens;
}

// Initial (pre-pulse) ensemble populations on the 0..J_max grid.
inline PopulationResult thermal_populations(const ThermalEnsemble& ens,
                                            int J_max, int J_report = 7) {
  PopulationResult out;
  out.S.assign(static_cast<std::size_t>(J_max) + 1, 0.0);
  out.J_report = J_report;
  for (const auto& m : ens.members) {
    if (m.J0 > J_max) throw ConfigError("ensemble member exceeds J_max");
    out.S[m.J0] += m.weight;
  }
  return out;
}

// Weighted average of |c_J|^2 over the ensemble after the pulse train.
// Members are processed in (J0, M0) order with a plain accumulation, so the
// result is bitwise reproducible.
inline PopulationResult ensemble_populations(
    const MoleculeSpec& spec, const ThermalEnsemble& ens,
    const KickSequence& seq, const PropagationParams& params,
    PulseMode mode = PulseMode::impulsive, int J_report = 7,
    KickCache* cache = nullptr) {
  PopulationResult out;
  out.S.assign(static_cast<std::size_t>(params.J_max) + 1, 0.0);
  out.J_report = J_report;
  KickCache local(params.J_max);
  KickCache* use = cache ? cache : &local;
  for (const auto& m : ens.members) {
    RotorState s0 = RotorState::basis(m.J0, m.M0, params.J_max);
    RotorState s1 = propagate_train(s0, seq, spec, params, mode, use);
    const auto pops = s1.populations();
    for (std::size_t J = 0; J < pops.size(); ++J)
      out.S[J] += m.weight * pops[J];
  }
  return out;
}

inline PopulationResult ensemble_populations(const MoleculeSpec& spec,
                                             const ThermalEnsemble& ens,
                                             const FieldEnvelope& env,
                                             const PropagationParams& params,
                                             int J_report = 7) {
  PopulationResult out;
  out.S.assign(static_cast<std::size_t>(params.J_max) + 1, 0.0);
  out.J_report = J_report;
  for (const auto& m : ens.members) {
    RotorState s0 = RotorState::basis(m.J0, m.M0, params.J_max);
    RotorState s1 = propagate_finite_pulse(s0, env, spec, params);
    const auto pops = s1.populations();
    for (std::size_t J = 0; J < pops.size(); ++J)
      out.S[J] += m.weight * pops[J];
  }
  return out;
}

inline void write_ensemble_csv(const ThermalEnsemble& ens,
                               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "J0,M0,weight\n";
  for (const auto& m : ens.members)
    out << m.J0 << ',' << m.M0 << ',' << detail::format_g12(m.weight) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace rotorkick
