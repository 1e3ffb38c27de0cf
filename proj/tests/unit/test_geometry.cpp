#include <doctest.h>

#include <map>
#include <sstream>

#include "dispnet/melt.hpp"
#include "dispnet/xyz.hpp"
#include "support.hpp"

using namespace dispnet;

TEST_SUITE("geometry") {

TEST_CASE("minimum image of identical points is zero") {
  const auto cell = PeriodicCell::cubic(10.0);
  const Vec3 a(3.0, -2.0, 7.5);
  CHECK(minimum_image(a, a, &cell).norm() == 0.0);
}

TEST_CASE("minimum image wraps across the cubic boundary") {
  const auto cell = PeriodicCell::cubic(10.0);
  const Vec3 d = minimum_image(Vec3(9.5, 0, 0), Vec3::Zero(), &cell);
  CHECK(d.x() == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(d.y() == 0.0);
  CHECK(d.z() == 0.0);
}

TEST_CASE("without a cell the displacement passes through") {
  const Vec3 d = minimum_image(Vec3(1, 2, 3), Vec3::Zero(), nullptr);
  CHECK(d == Vec3(1, 2, 3));
}

TEST_CASE("degenerate lattice is rejected") {
  Mat3 l;
  l << 1, 0, 0, 2, 0, 0, 0, 0, 1;
  CHECK_THROWS_AS(PeriodicCell{l}, Error);
}

TEST_CASE("minimum image is never longer than any of the 27 neighbouring images") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-15.0, 15.0);
  Mat3 l;
  l << 10, 0, 0, 3, 9, 0, -2, 1.5, 11;  // skewed triclinic cell
  const PeriodicCell skewed(l);
  const auto cubic = PeriodicCell::cubic(7.0);
  for (const PeriodicCell* cell : {&skewed, &cubic}) {
    for (int trial = 0; trial < 500; ++trial) {
      const Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
      const Vec3 best = minimum_image(a, b, cell);
      // the result must be a lattice translate of a - b
      const Vec3 shift = cell->to_fractional(best - (a - b));
      CHECK((shift - shift.array().round().matrix()).norm() < 1e-9);
      // brute force over every translate reachable from the raw difference
      double shortest = 1e300;
      for (int i = -6; i <= 6; ++i)
        for (int j = -6; j <= 6; ++j)
          for (int k = -6; k <= 6; ++k) shortest = std::min(shortest, (a - b + cell->to_cartesian(Vec3(i, j, k))).norm());
      CHECK(best.norm() <= shortest + 1e-12);
    }
  }
}

TEST_CASE("safe radius is half the smallest face spacing") {
  Mat3 l;
  l << 10, 0, 0, 0, 8, 0, 0, 0, 12;
  CHECK(PeriodicCell(l).safe_radius() == doctest::Approx(4.0));
  CHECK(PeriodicCell(l, {true, false, true}).safe_radius() == doctest::Approx(5.0));
}

namespace {

AtomicSystem simple_cubic(int n, double spacing) {
  AtomicSystem s;
  s.species_table = SpeciesTable::polymer_default();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        s.positions.emplace_back(i * spacing, j * spacing, k * spacing);
        s.species.push_back(1);
        s.unit_ids.push_back(static_cast<int>(s.unit_ids.size()));
        s.chain_ids.push_back(0);
      }
  s.cell = PeriodicCell::cubic(n * spacing);
  return s;
}

}  // namespace

TEST_CASE("simple cubic lattice: seven atoms are the center plus its face neighbours") {
  const auto sys = simple_cubic(5, 1.0);
  const Cluster c = extract_cluster(sys, 0, 7);
  REQUIRE(c.size() == 7);
  CHECK(c.positions[0].norm() == 0.0);
  for (std::size_t j = 1; j < 7; ++j) {
    CHECK(c.positions[j].norm() == doctest::Approx(1.0));
    CHECK(c.positions[j].cwiseAbs().sum() == doctest::Approx(1.0));
  }
  CHECK(c.center_source_index == 0);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("distance ties keep the original atom order") {
  const auto sys = simple_cubic(5, 1.0);
  const Cluster c = extract_cluster(sys, 62, 7);
  // brute force: indices of the six face neighbours in ascending order
  std::vector<Vec3> expect;
  for (std::size_t j = 0; j < sys.size(); ++j) {
    const Vec3 d = minimum_image(sys.positions[j], sys.positions[62], sys.cell);
    if (std::abs(d.norm() - 1.0) < 1e-12) expect.push_back(d);
  }
  REQUIRE(expect.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) CHECK((c.positions[k + 1] - expect[k]).norm() < 1e-12);
}

TEST_CASE("non-periodic system with n_cut = N returns every atom sorted") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5, 5);
  AtomicSystem s;
  s.species_table = SpeciesTable::polymer_default();
  for (int i = 0; i < 30; ++i) {
    s.positions.emplace_back(u(rng), u(rng), u(rng));
    s.species.push_back(static_cast<SpeciesCode>(i % 3));
    s.unit_ids.push_back(i);
    s.chain_ids.push_back(0);
  }
  const Cluster c = extract_cluster(s, 11, 30);
  REQUIRE(c.size() == 30);
  CHECK_NOTHROW(c.validate());
  for (std::size_t j = 1; j < c.size(); ++j) CHECK(c.positions[j - 1].norm() <= c.positions[j].norm());
  CHECK(c.species[0] == s.species[11]);
}

TEST_CASE("cluster extraction beyond the safe radius names the shortfall") {
  const auto sys = simple_cubic(4, 1.0);  // safe radius 2: 33 atoms strictly inside
  CHECK_THROWS_WITH_AS(extract_cluster(sys, 0, 60), doctest::Contains("short by"), Error);
  CHECK_THROWS_AS(extract_cluster(sys, 999, 5), Error);
}

TEST_CASE("rigid translation leaves the cluster geometry unchanged") {
  const auto melt = test::pe_melt(3);
  AtomicSystem moved = melt;
  const Vec3 t(3.7, -12.1, 40.2);
  for (auto& p : moved.positions) p = moved.cell->wrap(p + t);
  for (std::size_t center : {0UL, 17UL, 500UL}) {
    const Cluster a = extract_cluster(melt, center, 120);
    const Cluster b = extract_cluster(moved, center, 120);
    // symmetric hydrogens tie in distance, so rounding may swap them: match as sets
    for (std::size_t j = 0; j < a.size(); ++j) {
      bool found = false;
      for (std::size_t k = 0; k < b.size() && !found; ++k)
        found = a.species[j] == b.species[k] && (a.positions[j] - b.positions[k]).norm() < 1e-10;
      CHECK(found);
    }
  }
}

TEST_CASE("PE with one chain of two monomers is a CH2-CH2 fragment") {
  MeltOptions o;
  o.monomers_per_chain = 2;
  const auto sys = generate_synthetic_melt(o, PeriodicCell::cubic(20.0));
  REQUIRE(sys.size() == 6);
  int carbons = 0, hydrogens = 0;
  for (auto s : sys.species) (sys.species_table.symbol(s) == "C" ? carbons : hydrogens) += 1;
  CHECK(carbons == 2);
  CHECK(hydrogens == 4);
  CHECK(sys.unit_ids == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("melts are reproducible bit for bit per seed") {
  MeltOptions o;
  o.kind = PolymerKind::PP;
  o.chains = 3;
  o.monomers_per_chain = 20;
  o.seed = 99;
  const auto box = PeriodicCell::cubic(25.0 * kBohrPerAngstrom);
  const auto a = generate_synthetic_melt(o, box);
  const auto b = generate_synthetic_melt(o, box);
  CHECK(a.positions == b.positions);
  CHECK(a.species == b.species);
  o.seed = 100;
  CHECK(generate_synthetic_melt(o, box).positions != a.positions);
}

TEST_CASE("non-bonded atoms respect the exclusion radius") {
  for (auto kind : {PolymerKind::PE, PolymerKind::PP, PolymerKind::PVC}) {
    MeltOptions o;
    o.kind = kind;
    o.chains = 3;
    o.monomers_per_chain = kind == PolymerKind::PE ? 60 : 25;
    o.seed = 5;
    const auto sys = generate_synthetic_melt(o, PeriodicCell::cubic(25.0 * kBohrPerAngstrom));
    CHECK_NOTHROW(sys.validate());
    const double limit = o.exclusion_radius * kBohrPerAngstrom;
    // unit ids are contiguous along a chain; PE has one backbone carbon per unit, PP and PVC two
    const int min_gap = kind == PolymerKind::PE ? 3 : 2;
    double closest = 1e300;
    for (std::size_t i = 0; i < sys.size(); ++i)
      for (std::size_t j = i + 1; j < sys.size(); ++j) {
        // such pairs sit more than two backbone carbons apart
        const bool far = sys.chain_ids[i] != sys.chain_ids[j] || std::abs(sys.unit_ids[i] - sys.unit_ids[j]) >= min_gap;
        if (!far) continue;
        closest = std::min(closest, minimum_image(sys.positions[i], sys.positions[j], sys.cell).norm());
      }
    CHECK(closest >= limit * (1.0 - 1e-12));
  }
}

TEST_CASE("unit sizes follow the monomer formula") {
  CHECK(unit_size(PolymerKind::PE) == 3);
  CHECK(unit_size(PolymerKind::PP) == 9);
  CHECK(unit_size(PolymerKind::PVC) == 6);
  for (auto kind : {PolymerKind::PE, PolymerKind::PP, PolymerKind::PVC}) {
    MeltOptions o;
    o.kind = kind;
    o.monomers_per_chain = 10;
    const auto sys = generate_synthetic_melt(o, PeriodicCell::cubic(40.0 * kBohrPerAngstrom));
    const auto units = assign_units(sys, kind);
    CHECK(units.unit_ids == sys.unit_ids);
    CHECK(units.residual_units.empty());
    std::map<int, int> counts;
    for (int u : units.unit_ids) ++counts[u];
    CHECK(counts.size() == 10);
    for (const auto& [u, n] : counts) CHECK(n == unit_size(kind));
  }
}

TEST_CASE("a chain that is not a whole number of units gets a flagged end group") {
  AtomicSystem s;
  s.species_table = SpeciesTable::polymer_default();
  for (int i = 0; i < 7; ++i) {
    s.positions.emplace_back(i, 0, 0);
    s.species.push_back(i % 3 == 0 ? 1 : 0);
    s.unit_ids.push_back(0);
    s.chain_ids.push_back(0);
  }
  const auto units = assign_units(s, PolymerKind::PE);
  CHECK(units.unit_ids == std::vector<int>{0, 0, 0, 1, 1, 1, 2});
  CHECK(units.residual_units == std::vector<int>{2});
}

TEST_CASE("unknown polymer names are rejected") {
  CHECK(parse_polymer_kind("PVC") == PolymerKind::PVC);
  CHECK_THROWS_AS(parse_polymer_kind("nylon"), Error);
}

TEST_CASE("structure files round trip through Angstrom") {
  MeltOptions o;
  o.kind = PolymerKind::PVC;
  o.monomers_per_chain = 8;
  o.seed = 1;
  const auto sys = generate_synthetic_melt(o, PeriodicCell::cubic(20.0 * kBohrPerAngstrom));
  std::stringstream ss;
  write_structure(ss, sys);
  const auto back = read_structure(ss);
  REQUIRE(back.size() == sys.size());
  CHECK(back.species == sys.species);
  CHECK(back.unit_ids == sys.unit_ids);
  CHECK(back.chain_ids == sys.chain_ids);
  REQUIRE(back.cell.has_value());
  CHECK((back.cell->lattice() - sys.cell->lattice()).norm() < 1e-9);
  for (std::size_t i = 0; i < sys.size(); ++i) CHECK((back.positions[i] - sys.positions[i]).norm() < 1e-9);
}

TEST_CASE("structure reader diagnostics") {
  SUBCASE("non-periodic without a lattice") {
    std::istringstream in("2\ncomment=x\nC 0 0 0\nH 1.0 0 0\n");
    const auto s = read_structure(in);
    CHECK_FALSE(s.cell.has_value());
    CHECK(s.positions[1].x() == doctest::Approx(kBohrPerAngstrom));
    CHECK(s.unit_ids == std::vector<int>{0, 0});
  }
  SUBCASE("truncated atom list") {
    std::istringstream in("3\n\nC 0 0 0\n");
    CHECK_THROWS_AS(read_structure(in), FormatError);
  }
  SUBCASE("malformed coordinate") {
    std::istringstream in("1\n\nC 0 zero 0\n");
    CHECK_THROWS_AS(read_structure(in), Error);
  }
  SUBCASE("metadata quoting") {
    const auto m = parse_xyz_metadata(R"(Lattice="1 0 0 0 1 0 0 0 1" pbc="T T F" flag)");
    CHECK(m.at("Lattice") == "1 0 0 0 1 0 0 0 1");
    CHECK(m.at("pbc") == "T T F");
    CHECK(m.count("flag") == 1);
  }
}

}  // TEST_SUITE
