#pragma once

#include <cmath>
#include <string>

#include "rotorkick/errors.hpp"
#include "rotorkick/keyvalue.hpp"
#include "rotorkick/units.hpp"

namespace rotorkick {

// One rigid-rotor species. B in cm^-1, polarizability anisotropy in
// cubic angstrom, nuclear-spin degeneracy weights per rotational parity.
// Immutable after construction; safe to share across workers.
struct MoleculeSpec {
  std::string name;
  double B_cm1 = 0.0;
  double delta_alpha_A3 = 0.0;
  double weight_even = 0.0;
  double weight_odd = 0.0;

  void validate() const {
    if (!(B_cm1 > 0.0))
      throw ConfigError("species `" + name + "`: B_cm1 must be > 0");
    if (!(delta_alpha_A3 > 0.0))
      throw ConfigError("species `" + name + "`: delta_alpha_A3 must be > 0");
    if (weight_even < 0.0 || weight_odd < 0.0 ||
        !(weight_even + weight_odd > 0.0))
      throw ConfigError("species `" + name +
                        "`: spin weights must be nonnegative with a positive sum");
  }
};

// 14N2: spin-1 nuclei, symmetric (even J) to antisymmetric (odd J)
// combinations come out 6:3. B and delta_alpha are literature defaults
// and overridable per config.
inline MoleculeSpec nitrogen_14() {
  return MoleculeSpec{"14N2", 1.98958, 0.93, 6.0, 3.0};
}

// 15N2: spin-1/2 nuclei. Para (I=0) carries even J with weight 1,
// ortho (I=1) carries odd J with weight 3.
inline MoleculeSpec nitrogen_15() {
  return MoleculeSpec{"15N2", 1.8577, 0.93, 1.0, 3.0};
}

inline MoleculeSpec builtin_species(const std::string& name) {
  if (name == "14N2") return nitrogen_14();
  if (name == "15N2") return nitrogen_15();
  throw ConfigError("unknown built-in species `" + name +
                    "` (available: 14N2, 15N2)");
}

// Species definition from a `key = value` file with keys
// name, B_cm1, delta_alpha_A3, weight_even, weight_odd.
inline MoleculeSpec load_species_file(const std::string& path) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  MoleculeSpec spec;
  spec.name = kv.get_string("name");
  spec.B_cm1 = kv.get_double("B_cm1");
  spec.delta_alpha_A3 = kv.get_double("delta_alpha_A3");
  spec.weight_even = kv.get_double("weight_even");
  spec.weight_odd = kv.get_double("weight_odd");
  kv.reject_unknown_keys();
  spec.validate();
  return spec;
}

inline double rotational_energy_cm1(const MoleculeSpec& spec, int J) {
  return spec.B_cm1 * static_cast<double>(J) * static_cast<double>(J + 1);
}

// B J(J+1) as an angular frequency (rad/ps); the phase rate used by the
// propagators.
inline double rotational_omega(const MoleculeSpec& spec, int J) {
  return units::omega_from_cm1(rotational_energy_cm1(spec, J));
}

// T_rev = pi hbar / B. In wavenumber units this is 1 / (2 B c).
inline double revival_time_ps(const MoleculeSpec& spec) {
  return std::numbers::pi / units::omega_from_cm1(spec.B_cm1);
}

inline double spin_weight(const MoleculeSpec& spec, int J) {
  return (J % 2 == 0) ? spec.weight_even : spec.weight_odd;
}

}  // namespace rotorkick
