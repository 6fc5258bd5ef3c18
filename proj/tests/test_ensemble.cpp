#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "rotorkick/ensemble.hpp"
#include "rotorkick/units.hpp"

using namespace rotorkick;

namespace {

// Independent Boltzmann level weights g_J (2J+1) exp(-E_J / kT).
std::vector<double> level_weights(const MoleculeSpec& spec, double T_K,
                                  int J_top) {
  const double kT = units::k_boltzmann_cm1_per_K * T_K;
  std::vector<double> w(J_top + 1);
  for (int J = 0; J <= J_top; ++J)
    w[J] = spin_weight(spec, J) * (2.0 * J + 1.0) *
           std::exp(-rotational_energy_cm1(spec, J) / kT);
  return w;
}

double level_fraction(const ThermalEnsemble& ens, int J) {
  double s = 0.0;
  for (const auto& m : ens.members)
    if (m.J0 == J) s += m.weight;
  return s;
}

}  // namespace

TEST_CASE("thermal level fractions at 6.3 K match direct Boltzmann sums") {
  const MoleculeSpec n14 = nitrogen_14();
  const ThermalEnsemble ens = thermal_ensemble(n14, 6.3);

  const auto w = level_weights(n14, 6.3, ens.cutoff_J);
  double total = 0.0;
  for (double v : w) total += v;
  for (int J = 0; J <= ens.cutoff_J; ++J)
    CHECK(level_fraction(ens, J) == Catch::Approx(w[J] / total).margin(1e-13));

  // At 6.3 K nitrogen sits almost entirely in J = 0..2.
  CHECK(level_fraction(ens, 0) == Catch::Approx(0.513).margin(2e-3));
  CHECK(level_fraction(ens, 1) == Catch::Approx(0.310).margin(2e-3));
  CHECK(level_fraction(ens, 2) == Catch::Approx(0.168).margin(2e-3));
  CHECK(ens.total_weight() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("cutoff keeps the dropped tail below the requested fraction") {
  const MoleculeSpec n14 = nitrogen_14();
  for (double tail : {1e-4, 1e-6, 1e-9}) {
    const ThermalEnsemble ens = thermal_ensemble(n14, 6.3, tail);
    const auto w = level_weights(n14, 6.3, ens.cutoff_J + 40);
    double total = 0.0;
    for (double v : w) total += v;
    double dropped = 0.0;
    for (int J = ens.cutoff_J + 1; J < static_cast<int>(w.size()); ++J)
      dropped += w[J];
    CHECK(dropped < tail * total);
    // One level lower would violate the bound, so the cutoff is minimal.
    if (ens.cutoff_J > 0)
      CHECK(dropped + w[ens.cutoff_J] >= tail * total);
  }
  // Tighter tails can only extend the ladder.
  CHECK(thermal_ensemble(n14, 6.3, 1e-9).cutoff_J >=
        thermal_ensemble(n14, 6.3, 1e-4).cutoff_J);
}

TEST_CASE("members are sorted, M-degenerate and complete") {
  const ThermalEnsemble ens = thermal_ensemble(nitrogen_14(), 6.3);
  std::size_t expect = 0;
  for (int J = 0; J <= ens.cutoff_J; ++J) expect += 2 * J + 1;
  CHECK(ens.members.size() == expect);
  for (std::size_t i = 1; i < ens.members.size(); ++i) {
    const auto& a = ens.members[i - 1];
    const auto& b = ens.members[i];
    CHECK((a.J0 < b.J0 || (a.J0 == b.J0 && a.M0 < b.M0)));
    if (a.J0 == b.J0) CHECK(a.weight == b.weight);
  }
  for (const auto& m : ens.members) {
    CHECK(std::abs(m.M0) <= m.J0);
    CHECK(m.weight > 0.0);
  }
}

TEST_CASE("15N2 spin statistics favor odd J three to one") {
  const MoleculeSpec n15 = nitrogen_15();
  const ThermalEnsemble ens = thermal_ensemble(n15, 6.3);
  const auto w = level_weights(n15, 6.3, ens.cutoff_J);
  double total = 0.0;
  for (double v : w) total += v;
  for (int J = 0; J <= ens.cutoff_J; ++J)
    CHECK(level_fraction(ens, J) == Catch::Approx(w[J] / total).margin(1e-13));

  // Strip the Boltzmann factor: what remains is the spin-weight ratio.
  const double kT = units::k_boltzmann_cm1_per_K * 6.3;
  const double f0 = level_fraction(ens, 0);
  const double f1 = level_fraction(ens, 1) /
                    (3.0 * std::exp(-rotational_energy_cm1(n15, 1) / kT));
  CHECK(f1 / f0 == Catch::Approx(3.0).margin(1e-10));
}

TEST_CASE("very low temperature collapses to the rotational ground state") {
  const ThermalEnsemble ens = thermal_ensemble(nitrogen_15(), 0.01);
  REQUIRE(ens.members.size() == 1);
  CHECK(ens.members[0].J0 == 0);
  CHECK(ens.members[0].M0 == 0);
  CHECK(ens.members[0].weight == Catch::Approx(1.0).margin(1e-15));
  CHECK(ens.cutoff_J == 0);
}

TEST_CASE("thermal_populations lays members on the J grid") {
  const MoleculeSpec n14 = nitrogen_14();
  const ThermalEnsemble ens = thermal_ensemble(n14, 6.3);
  const PopulationResult pops = thermal_populations(ens, 20, 7);
  REQUIRE(pops.S.size() == 21);
  CHECK(pops.J_report == 7);
  for (int J = 0; J <= ens.cutoff_J; ++J)
    CHECK(pops.S[J] == Catch::Approx(level_fraction(ens, J)).margin(1e-15));
  double sum = 0.0;
  for (double s : pops.S) sum += s;
  CHECK(sum == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(thermal_populations(ens, ens.cutoff_J - 1, 2), ConfigError);
}

TEST_CASE("empty kick sequence leaves the thermal distribution untouched") {
  const MoleculeSpec n14 = nitrogen_14();
  const ThermalEnsemble ens = thermal_ensemble(n14, 4.0);
  PropagationParams params;
  params.J_max = 20;
  KickSequence empty;
  const PopulationResult before = thermal_populations(ens, params.J_max);
  const PopulationResult after =
      ensemble_populations(n14, ens, empty, params);
  REQUIRE(after.S.size() == before.S.size());
  for (std::size_t J = 0; J < after.S.size(); ++J)
    CHECK(after.S[J] == Catch::Approx(before.S[J]).margin(1e-14));
}

TEST_CASE("kicked ensemble conserves norm and rotational parity") {
  const MoleculeSpec n14 = nitrogen_14();
  const ThermalEnsemble ens = thermal_ensemble(n14, 6.3);
  PropagationParams params;
  params.J_max = 30;
  const KickSequence seq =
      bessel_train({2.5, revival_time_ps(n14), 0.0}, 5.0, 3, 0.5);
  const PopulationResult before = thermal_populations(ens, params.J_max);
  const PopulationResult after = ensemble_populations(n14, ens, seq, params);

  double sum = 0.0, even_b = 0.0, odd_b = 0.0, even_a = 0.0, odd_a = 0.0;
  for (std::size_t J = 0; J < after.S.size(); ++J) {
    sum += after.S[J];
    (J % 2 == 0 ? even_b : odd_b) += before.S[J];
    (J % 2 == 0 ? even_a : odd_a) += after.S[J];
  }
  CHECK(sum == Catch::Approx(1.0).margin(1e-10));
  // Two-photon transitions only: each parity ladder is a closed system.
  CHECK(even_a == Catch::Approx(even_b).margin(1e-10));
  CHECK(odd_a == Catch::Approx(odd_b).margin(1e-10));
  // The train must actually do something.
  CHECK(after.S[0] < before.S[0]);
}

TEST_CASE("ensemble averaging is bitwise reproducible") {
  const MoleculeSpec n14 = nitrogen_14();
  const ThermalEnsemble e1 = thermal_ensemble(n14, 6.3);
  const ThermalEnsemble e2 = thermal_ensemble(n14, 6.3);
  REQUIRE(e1.members.size() == e2.members.size());
  for (std::size_t i = 0; i < e1.members.size(); ++i)
    CHECK(std::memcmp(&e1.members[i].weight, &e2.members[i].weight,
                      sizeof(double)) == 0);

  PropagationParams params;
  params.J_max = 24;
  const KickSequence seq =
      bessel_train({2.5, revival_time_ps(n14), 0.0}, 3.0, 3, 0.5);
  const PopulationResult a = ensemble_populations(n14, e1, seq, params);
  const PopulationResult b = ensemble_populations(n14, e2, seq, params);
  CHECK(std::memcmp(a.S.data(), b.S.data(), a.S.size() * sizeof(double)) == 0);
}

TEST_CASE("finite-envelope ensemble propagation stays normalized") {
  const MoleculeSpec n14 = nitrogen_14();
  const ThermalEnsemble ens = thermal_ensemble(n14, 2.0);
  PropagationParams params;
  params.J_max = 16;
  FieldEnvelope env = gaussian_envelope(0.0, 0.1, 0.45, 64.0, 1.0);
  calibrate_to_kick_strength(env, n14.delta_alpha_A3, 1.5);
  const PopulationResult after = ensemble_populations(n14, ens, env, params);
  double sum = 0.0;
  for (double s : after.S) sum += s;
  CHECK(sum == Catch::Approx(1.0).margin(1e-8));
  CHECK(after.S[0] < thermal_populations(ens, params.J_max).S[0]);
}

TEST_CASE("ensemble csv lists one member per row") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(ROTORKICK_TEST_TMP) / "ens_csv";
  fs::create_directories(dir);
  const ThermalEnsemble ens = thermal_ensemble(nitrogen_15(), 3.0);
  const fs::path file = dir / "ensemble.csv";
  write_ensemble_csv(ens, file);

  std::ifstream in(file);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "J0,M0,weight");
  std::size_t rows = 0;
  double total = 0.0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string j, m, w;
    REQUIRE(std::getline(ss, j, ','));
    REQUIRE(std::getline(ss, m, ','));
    REQUIRE(std::getline(ss, w, ','));
    CHECK(std::stoi(j) == ens.members[rows].J0);
    CHECK(std::stoi(m) == ens.members[rows].M0);
    total += std::stod(w);
    ++rows;
  }
  CHECK(rows == ens.members.size());
  CHECK(total == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("thermal ensemble rejects unusable parameters") {
  const MoleculeSpec n14 = nitrogen_14();
  CHECK_THROWS_AS(thermal_ensemble(n14, 0.0), ConfigError);
  CHECK_THROWS_AS(thermal_ensemble(n14, -5.0), ConfigError);
  CHECK_THROWS_AS(thermal_ensemble(n14, 6.3, 0.0), ConfigError);
  CHECK_THROWS_AS(thermal_ensemble(n14, 6.3, 1.0), ConfigError);
  MoleculeSpec bad = n14;
  bad.B_cm1 = -1.0;
  CHECK_THROWS_AS(thermal_ensemble(bad, 6.3), ConfigError);
}
