#include <doctest.h>

#include "dispnet/pairwise.hpp"
#include "support.hpp"

using namespace dispnet;
using namespace dispnet::pairwise;

namespace {

const DispersionModel& unit_model() {
  static const DispersionModel m(test::unit_params(), SpeciesTable::polymer_default());
  return m;
}

Positions fd_forces(const Cluster& c, const DispersionModel& m, const DampingConfig& cfg, double h) {
  Positions out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int a = 0; a < 3; ++a) {
      Cluster p = c, q = c;
      p.positions[i][a] += h;
      q.positions[i][a] -= h;
      out[i][a] = -(pw_energy_forces(p, m, cfg).energy - pw_energy_forces(q, m, cfg).energy) / (2 * h);
    }
  return out;
}

}  // namespace

TEST_SUITE("mbd_engine") {

TEST_CASE("pairwise dimer with unit C6 at unit distance") {
  Cluster c;
  c.positions = {Vec3::Zero(), Vec3(0, 1, 0)};
  c.species = {0, 0};
  const auto r = pw_energy_forces(c, unit_model());
  CHECK(r.energy == doctest::Approx(-1.0).epsilon(1e-15));
  // dE/dr = 6 / r^7: the center is pulled toward +y with magnitude 6
  CHECK((r.forces[0] - Vec3(0, 6, 0)).norm() < 1e-14);
  CHECK((r.forces[1] + r.forces[0]).norm() == 0.0);
}

TEST_CASE("equilateral triangle sums three identical pairs") {
  Cluster c;
  c.positions = {Vec3::Zero(), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2, 0)};
  c.species = {0, 0, 0};
  CHECK(pw_energy_forces(c, unit_model()).energy == doctest::Approx(-3.0).epsilon(1e-14));
}

TEST_CASE("combination rule is the geometric mean") {
  CHECK(c6_combined(SpeciesDispersion{1, 4, 1}, SpeciesDispersion{1, 9, 1}) == doctest::Approx(6.0));
}

TEST_CASE("pairwise forces match central differences") {
  std::mt19937_64 rng(2);
  const DispersionModel m(test::mixed_params(), SpeciesTable::polymer_default());
  DampingConfig fermi;
  fermi.kind = DampingKind::fermi;
  for (const auto& cfg : {DampingConfig{}, fermi}) {
    const Cluster c = test::random_cluster(rng, 10, 6.0, 2.0);
    const auto f = pw_energy_forces(c, m, cfg).forces;
    const auto fd = fd_forces(c, m, cfg, 1e-5);
    double err = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, (f[i] - fd[i]).cwiseAbs().maxCoeff());
    CHECK(err / test::max_abs(fd) < 1e-8);
  }
}

TEST_CASE("Fermi damping switches off at short range and converges to one") {
  DampingConfig cfg;
  cfg.kind = DampingKind::fermi;
  const double r0 = 2.0 * vdw_radius(SpeciesDispersion{1, 1, 1});
  CHECK(damping(0.3 * r0, r0, cfg) < 1e-5);
  CHECK(damping(3.0 * r0, r0, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(damping(cfg.scale * r0, r0, cfg) == doctest::Approx(0.5));
  CHECK(damping(0.1, r0, DampingConfig{}) == 1.0);
}

TEST_CASE("coincident atoms are rejected") {
  Cluster c;
  c.positions = {Vec3::Zero(), Vec3::Zero()};
  c.species = {0, 1};
  CHECK_THROWS_AS(pw_energy_forces(c, unit_model()), Error);
}

}  // TEST_SUITE
