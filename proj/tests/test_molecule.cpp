#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rotorkick/errors.hpp"
#include "rotorkick/keyvalue.hpp"
#include "rotorkick/molecule.hpp"

using namespace rotorkick;

TEST_CASE("built-in species carry the published constants") {
  const MoleculeSpec n14 = nitrogen_14();
  CHECK(n14.name == "14N2");
  CHECK(n14.B_cm1 == Catch::Approx(1.98958));
  CHECK(n14.delta_alpha_A3 == Catch::Approx(0.93));
  CHECK(n14.weight_even == 6.0);
  CHECK(n14.weight_odd == 3.0);

  const MoleculeSpec n15 = nitrogen_15();
  CHECK(n15.B_cm1 == Catch::Approx(1.8577));
  CHECK(n15.weight_even == 1.0);
  CHECK(n15.weight_odd == 3.0);

  CHECK(builtin_species("14N2").B_cm1 == n14.B_cm1);
  CHECK(builtin_species("15N2").B_cm1 == n15.B_cm1);
  CHECK_THROWS_AS(builtin_species("16O2"), ConfigError);
}

TEST_CASE("rotational energies follow B J (J+1)") {
  const MoleculeSpec n14 = nitrogen_14();
  CHECK(rotational_energy_cm1(n14, 0) == 0.0);
  CHECK(rotational_energy_cm1(n14, 1) == Catch::Approx(2.0 * 1.98958));
  CHECK(rotational_energy_cm1(n14, 5) == Catch::Approx(30.0 * 1.98958));
  // omega in rad/ps: 2 pi c [cm/ps] * E [1/cm]
  CHECK(rotational_omega(n14, 2) ==
        Catch::Approx(2.0 * M_PI * 0.0299792458 * 6.0 * 1.98958));
}

TEST_CASE("revival times land on the known isotopologue values") {
  // T_rev = 1 / (2 B c); about 8.38 ps and 8.98 ps for the two species.
  CHECK(revival_time_ps(nitrogen_14()) == Catch::Approx(8.38).margin(0.01));
  CHECK(revival_time_ps(nitrogen_15()) == Catch::Approx(8.98).margin(0.01));
  // exact closed form, independent path
  const double c_cm_ps = 0.0299792458;
  CHECK(revival_time_ps(nitrogen_14()) ==
        Catch::Approx(1.0 / (2.0 * 1.98958 * c_cm_ps)).epsilon(1e-12));
}

TEST_CASE("spin weights alternate with parity") {
  const MoleculeSpec n14 = nitrogen_14();
  const MoleculeSpec n15 = nitrogen_15();
  for (int J : {0, 2, 8}) {
    CHECK(spin_weight(n14, J) == 6.0);
    CHECK(spin_weight(n15, J) == 1.0);
  }
  for (int J : {1, 3, 9}) {
    CHECK(spin_weight(n14, J) == 3.0);
    CHECK(spin_weight(n15, J) == 3.0);
  }
}

TEST_CASE("species validation rejects unphysical input") {
  MoleculeSpec bad = nitrogen_14();
  bad.B_cm1 = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = nitrogen_14();
  bad.delta_alpha_A3 = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = nitrogen_14();
  bad.weight_even = -0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = nitrogen_14();
  bad.weight_even = 0.0;
  bad.weight_odd = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("species files round-trip through the key=value loader") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(ROTORKICK_TEST_TMP) / "molecule";
  fs::create_directories(dir);
  const fs::path file = dir / "custom.species";
  {
    std::ofstream out(file);
    out << "# a deuterium-like test species\n"
        << "name = X2\n"
        << "B_cm1 = 30.4\n"
        << "delta_alpha_A3 = 0.3\n"
        << "weight_even = 2\n"
        << "weight_odd = 1\n";
  }
  const MoleculeSpec spec = load_species_file(file);
  CHECK(spec.name == "X2");
  CHECK(spec.B_cm1 == Catch::Approx(30.4));
  CHECK(spec.weight_even == 2.0);

  const fs::path missing = dir / "missing_key.species";
  {
    std::ofstream out(missing);
    out << "name = Y2\nB_cm1 = 1.0\n";
  }
  CHECK_THROWS_AS(load_species_file(missing), ConfigError);
}

TEST_CASE("key=value parser rejects malformed input") {
  CHECK_THROWS_AS(KeyValueFile::parse_text("novalue\n", "t"), ConfigError);
  CHECK_THROWS_AS(KeyValueFile::parse_text("= 3\n", "t"), ConfigError);
  CHECK_THROWS_AS(KeyValueFile::parse_text("a = 1\na = 2\n", "t"), ConfigError);
  KeyValueFile kv = KeyValueFile::parse_text("a = 1\n# comment\nb = x\n", "t");
  CHECK(kv.get_int("a") == 1);
  CHECK(kv.get_string("b") == "x");
  CHECK_THROWS_AS(kv.get_double("c"), ConfigError);
  kv.reject_unknown_keys();

  KeyValueFile kv2 = KeyValueFile::parse_text("a = 1\nunused = 2\n", "t");
  (void)kv2.get_int("a");
  CHECK_THROWS_AS(kv2.reject_unknown_keys(), ConfigError);
}

TEST_CASE("config hashing is stable and content-sensitive") {
  KeyValueFile a = KeyValueFile::parse_text("x = 1\n", "t");
  KeyValueFile b = KeyValueFile::parse_text("x = 1\n", "t");
  KeyValueFile c = KeyValueFile::parse_text("x = 2\n", "t");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
}
