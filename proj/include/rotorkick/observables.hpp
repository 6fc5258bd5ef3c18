#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotorkick/errors.hpp"
#include "rotorkick/molecule.hpp"

namespace rotorkick {

// Ensemble-averaged populations S_J, indexed 0..J_max. J_report marks how
// many rows the CSV output carries; the vector always holds the full basis.
struct PopulationResult {
  std::vector<double> S;
  int J_report = 7;
};

struct ScanResult {
  std::string species;
  std::vector<double> periods_ps;
  std::vector<double> detunings;
  std::vector<std::vector<double>> populations;  // [period][J]
  std::vector<double> energy_cm1;
  std::vector<double> energy_norm;
  PopulationResult initial;
  int J_report = 7;
  std::size_t resonance_index = 0;
  double resonance_period_ps = 0.0;
  bool per_state_normalized = false;
  std::uint64_t config_hash = 0;

  std::size_t size() const { return periods_ps.size(); }
};

inline double absorbed_energy_cm1(const PopulationResult& before,
                                  const PopulationResult& after,
                                  const MoleculeSpec& spec) {
  if (before.S.size() != after.S.size())
    throw std::invalid_argument("population vectors have mismatched sizes");
  double e = 0.0;
  for (std::size_t J = 0; J < after.S.size(); ++J)
    e += (after.S[J] - before.S[J]) *
         rotational_energy_cm1(spec, static_cast<int>(J));
  return e;
}

// epsilon = 2 pi (T / T_rev - 1); zero exactly on resonance.
inline double detuning(double period_ps, const MoleculeSpec& spec) {
  if (!(period_ps > 0.0))
    throw std::invalid_argument("pulse period must be positive");
  return 2.0 * std::numbers::pi *
         (period_ps / revival_time_ps(spec) - 1.0);
}

// Scale each J column by its maximum over the scan, ignoring all-zero
// columns. Used for heatmap rendering.
inline ScanResult normalize_per_state(const ScanResult& scan) {
  ScanResult out = scan;
  if (out.populations.empty()) return out;
  const std::size_t cols = out.populations.front().size();
  for (std::size_t j = 0; j < cols; ++j) {
    double m = 0.0;
    for (const auto& row : out.populations) m = std::max(m, row[j]);
    if (m > 0.0)
      for (auto& row : out.populations) row[j] /= m;
  }
  out.per_state_normalized = true;
  return out;
}

// Scale the absorbed-energy trace to a unit maximum and record the argmax
// period as the empirical resonance.
inline ScanResult normalize_energy(const ScanResult& scan) {
  ScanResult out = scan;
  if (out.energy_cm1.empty())
    throw std::invalid_argument("normalize_energy: empty scan");
  std::size_t imax = 0;
  for (std::size_t i = 1; i < out.energy_cm1.size(); ++i)
    if (out.energy_cm1[i] > out.energy_cm1[imax]) imax = i;
  const double m = out.energy_cm1[imax];
  if (!(m > 0.0))
    throw NumericsError("normalize_energy: no absorption anywhere on the scan");
  out.energy_norm.resize(out.energy_cm1.size());
  for (std::size_t i = 0; i < out.energy_cm1.size(); ++i)
    out.energy_norm[i] = out.energy_cm1[i] / m;
  out.resonance_index = imax;
  out.resonance_period_ps = out.periods_ps[imax];
  return out;
}

}  // namespace rotorkick
