#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dispnet/mbd.hpp"
#include "support.hpp"

using namespace dispnet;
using namespace dispnet::mbd;
using V3L = Eigen::Matrix<long double, 3, 1>;

namespace {

Cluster two_atoms(double r, SpeciesCode a = 0, SpeciesCode b = 0) {
  Cluster c;
  c.positions = {Vec3::Zero(), Vec3(0.3 * r, -0.4 * r, std::sqrt(0.75) * r)};
  c.species = {a, b};
  return c;
}

// 5-point central differences of the energy: -dE/dr for every atom.
Positions fd_forces(const Cluster& c, const DispersionModel& m, double h) {
  Positions out(c.size(), Vec3::Zero());
  constexpr double off[4] = {2, 1, -1, -2}, w[4] = {-1, 8, -8, 1};
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int a = 0; a < 3; ++a) {
      double acc = 0.0;
      for (int s = 0; s < 4; ++s) {
        Cluster d = c;
        d.positions[i][a] += off[s] * h;
        acc += w[s] * mbd_energy(d, m).energy;
      }
      out[i][a] = -acc / (12.0 * h);
    }
  return out;
}

}  // namespace

TEST_SUITE("mbd_engine") {

TEST_CASE("effective polarizability scales the free value") {
  CHECK(effective_polarizability(SpeciesDispersion{1.0, 1.0, 1.0}) == 1.0);
  CHECK(effective_polarizability(SpeciesDispersion{2.0, 1.0, 0.9}) == doctest::Approx(1.8).epsilon(1e-15));
  CHECK_THROWS_AS(effective_polarizability(SpeciesDispersion{2.0, 1.0, 0.0}), Error);
  auto p = test::unit_params();
  p.species["C"].volume_ratio = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK_THROWS_AS(effective_polarizability("Xe", test::unit_params()), Error);
}

TEST_CASE("gaussian width from the dipole self-energy") {
  CHECK(gaussian_width(1.0) == doctest::Approx(0.6431).epsilon(1e-4));
  CHECK(gaussian_width(8.0) == doctest::Approx(2.0 * gaussian_width(1.0)).epsilon(1e-14));
  double prev = gaussian_width(1.0);
  for (double a : {0.5, 0.1, 1e-3, 1e-6}) {
    const double s = gaussian_width(a);
    CHECK(s > 0.0);
    CHECK(s < prev);
    prev = s;
  }
  CHECK_THROWS_AS(gaussian_width(0.0), Error);
}

TEST_CASE("characteristic frequency") {
  CHECK(characteristic_frequency(SpeciesDispersion{1.0, 1.0, 1.0}) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  const double w = characteristic_frequency(SpeciesDispersion{1.3, 2.1, 1.0});
  CHECK(characteristic_frequency(SpeciesDispersion{1.3, 4.2, 1.0}) == doctest::Approx(2.0 * w).epsilon(1e-15));
  CHECK(characteristic_frequency(SpeciesDispersion{2.6, 2.1, 1.0}) == doctest::Approx(w / 4.0).epsilon(1e-15));
}

TEST_CASE("modified Coulomb potential limits") {
  const double si = 0.7, sj = 0.9, beta = 0.83;
  const double x = beta * std::hypot(si, sj);
  CHECK(coulomb_gg(20.0 * x, si, sj, beta) * 20.0 * x == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(coulomb_gg(0.0, si, sj, beta) == doctest::Approx(2.0 / (std::sqrt(std::numbers::pi) * x)).epsilon(1e-15));
  CHECK(std::isfinite(coulomb_gg(1e-12, si, sj, beta)));
  CHECK(coulomb_gg(1e-9, si, sj, beta) == doctest::Approx(coulomb_gg(0.0, si, sj, beta)).epsilon(1e-12));
  CHECK(coulomb_gg(x, si, sj, beta) == doctest::Approx(std::erf(1.0) / x).epsilon(1e-15));
  for (double r : {1e-3, 0.1, 0.5, 1.0, 2.5, 7.0}) {
    const V3L d(static_cast<long double>(r), 0.0L, 0.0L);
    CHECK(coulomb_gg(r, si, sj, beta) ==
          doctest::Approx(static_cast<double>(test::coulomb_ld(d, std::hypot(si, sj), beta))).epsilon(1e-14));
  }
}

TEST_CASE("dipole tensor is symmetric and reduces to the bare tensor in the far field") {
  const double si = 0.64, sj = 0.8, beta = 1.0;
  const double x = beta * std::hypot(si, sj);
  const Vec3 dir = Vec3(1.0, -2.0, 0.5).normalized();
  const Vec3 d = 20.0 * x * dir;
  const Mat3 t = dipole_tensor(d, si, sj, beta);
  CHECK((t - t.transpose()).norm() == 0.0);
  // bare tensor by differentiating 1/r numerically in extended precision
  auto bare = [](const V3L& p) { return 1.0L / p.norm(); };
  const V3L dl = d.cast<long double>();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double ref = static_cast<double>(-test::fd_mixed(bare, dl, {a, b}, 1e-2L));
      CHECK(t(a, b) == doctest::Approx(ref).epsilon(1e-6));
    }
}

TEST_CASE("closed-form T and its gradient match finite differences of the potential") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.3, 1.5), rr(0.05, 8.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double si = w(rng), sj = w(rng), beta = 0.6 + 0.5 * w(rng);
    const Vec3 d = rr(rng) * Vec3(u(rng), u(rng), u(rng)).normalized();
    const long double s = std::hypot(static_cast<long double>(si), static_cast<long double>(sj));
    auto v = [&](const V3L& p) { return test::coulomb_ld(p, s, beta); };
    const V3L dl = d.cast<long double>();
    const Mat3 t = dipole_tensor(d, si, sj, beta);
    const auto g = dipole_tensor_gradient(d, si, sj, beta);
    Mat3 t_fd;
    std::array<Mat3, 3> g_fd;
    const long double h = 1e-3L * std::max(1.0L, dl.norm());
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        t_fd(a, b) = static_cast<double>(-test::fd_mixed(v, dl, {a, b}, h));
        for (int c = 0; c < 3; ++c) g_fd[c](a, b) = static_cast<double>(-test::fd_mixed(v, dl, {a, b, c}, h));
      }
    CHECK((t - t_fd).cwiseAbs().maxCoeff() / t_fd.cwiseAbs().maxCoeff() < 1e-6);
    double gmax = 0.0, gerr = 0.0;
    for (int c = 0; c < 3; ++c) {
      gmax = std::max(gmax, g_fd[c].cwiseAbs().maxCoeff());
      gerr = std::max(gerr, (g[c] - g_fd[c]).cwiseAbs().maxCoeff());
      // full symmetry in the three indices
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) CHECK(g[c](a, b) == doctest::Approx(g[a](c, b)).epsilon(1e-12));
    }
    CHECK(gerr / gmax < 1e-6);
  }
}

TEST_CASE("interaction matrix structure") {
  const auto params = test::mixed_params();
  const DispersionModel model(params, SpeciesTable::polymer_default());
  SUBCASE("single atom") {
    Cluster c;
    c.positions = {Vec3::Zero()};
    c.species = {1};
    const double w = characteristic_frequency(params.at("C"));
    CHECK((build_interaction_matrix(c, model) - w * w * Eigen::Matrix3d::Identity()).norm() < 1e-15);
  }
  SUBCASE("dimer blocks are the product of the component oracles") {
    const Cluster c = two_atoms(3.1, 1, 2);
    const auto C = build_interaction_matrix(c, model);
    const auto &pc = params.at("C"), &pcl = params.at("Cl");
    const double wi = characteristic_frequency(pc), wj = characteristic_frequency(pcl);
    const double ai = effective_polarizability(pc), aj = effective_polarizability(pcl);
    const Mat3 t = dipole_tensor(c.positions[0] - c.positions[1], gaussian_width(ai), gaussian_width(aj), params.beta);
    const Mat3 expect = wi * wj * std::sqrt(ai * aj) * t;
    CHECK((C.block<3, 3>(0, 3) - expect).norm() < 1e-14 * expect.norm());
    CHECK((C.block<3, 3>(3, 0) - expect.transpose()).norm() < 1e-14 * expect.norm());
    CHECK((C.block<3, 3>(0, 0) - wi * wi * Mat3::Identity()).norm() < 1e-15);
    CHECK((C.block<3, 3>(3, 3) - wj * wj * Mat3::Identity()).norm() < 1e-15);
  }
  SUBCASE("random clusters are exactly symmetric") {
    std::mt19937_64 rng(3);
    const auto C = build_interaction_matrix(test::random_cluster(rng, 12, 8.0, 2.5), model);
    CHECK((C - C.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * C.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("single atom energy vanishes") {
  const DispersionModel model(test::mixed_params(), SpeciesTable::polymer_default());
  for (SpeciesCode s : {0, 1, 2}) {
    Cluster c;
    c.positions = {Vec3::Zero()};
    c.species = {s};
    CHECK(std::abs(mbd_energy(c, model).energy) < 1e-12);
    CHECK(mbd_forces(c, model)[0].norm() == 0.0);
  }
}

TEST_CASE("identical-atom dimer approaches the London form") {
  const auto params = test::unit_params();
  const DispersionModel model(params, SpeciesTable::polymer_default());
  const double alpha = 1.0, w = characteristic_frequency(params.at("H"));
  const double scale = params.beta * std::sqrt(2.0) * gaussian_width(alpha);
  for (double f : {10.0, 14.0, 20.0, 28.0, 40.0}) {
    const double r = f * scale;
    const double london = -0.75 * alpha * alpha * w / std::pow(r, 6);
    const double e = mbd_energy(two_atoms(r), model).energy;
    CHECK(e == doctest::Approx(london).epsilon(0.01));
  }
}

TEST_CASE("energy is rotation invariant and eigenpairs reconstruct C") {
  std::mt19937_64 rng(8);
  const DispersionModel model(test::mixed_params(), SpeciesTable::polymer_default());
  const Cluster c = test::random_cluster(rng, 10, 7.0, 2.6);
  const auto res = mbd_energy(c, model);
  CHECK(res.energy < 0.0);
  const auto C = build_interaction_matrix(c, model);
  const auto& sp = res.spectrum;
  const Eigen::MatrixXd back = sp.eigenvectors * sp.eigenvalues.asDiagonal() * sp.eigenvectors.transpose();
  CHECK((back - C).norm() / C.norm() < 1e-12);
  for (int k = 0; k < 10; ++k) {
    const Mat3 q = test::random_rotation(rng);
    const double e = mbd_energy(test::transformed(c, q, Vec3(1.0, -2.0, 0.5)), model).energy;
    CHECK(std::abs(e - res.energy) < 1e-10 * std::abs(res.energy));
  }
}

TEST_CASE("non-positive eigenvalue is a hard error naming the smallest eigenvalue") {
  const DispersionModel model(test::unit_params(0.2), SpeciesTable::polymer_default());
  CHECK_THROWS_WITH_AS(mbd_energy(two_atoms(0.6), model), doctest::Contains("eigenvalue"), Error);
  CHECK_THROWS_AS(mbd_forces(two_atoms(0.6), model), Error);
}

TEST_CASE("forces match five-point differences of the energy") {
  std::mt19937_64 rng(21);
  const DispersionModel model(test::mixed_params(), SpeciesTable::polymer_default());
  for (int trial = 0; trial < 5; ++trial) {
    const Cluster c = test::random_cluster(rng, 8, 6.0, 2.4);
    const auto f = mbd_forces(c, model);
    const auto fd = fd_forces(c, model, 1e-3);
    double err = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, (f[i] - fd[i]).cwiseAbs().maxCoeff());
    CHECK(err / test::max_abs(fd) < 1e-6);
  }
}

TEST_CASE("forces sum to zero and the dimer is antisymmetric along the bond") {
  std::mt19937_64 rng(5);
  const DispersionModel model(test::mixed_params(), SpeciesTable::polymer_default());
  const Cluster c = test::random_cluster(rng, 15, 8.0, 2.5);
  const auto f = mbd_forces(c, model);
  Vec3 total = Vec3::Zero();
  double scale = 0.0;
  for (const auto& v : f) {
    total += v;
    scale += v.norm();
  }
  CHECK(total.norm() < 1e-8 * scale);

  const Cluster d = two_atoms(4.0);
  const auto fd = mbd_forces(d, model);
  CHECK((fd[0] + fd[1]).norm() < 1e-14 * fd[0].norm());
  const Vec3 axis = (d.positions[1] - d.positions[0]).normalized();
  CHECK(fd[0].cross(axis).norm() < 1e-12 * fd[0].norm());
  CHECK(fd[0].dot(axis) > 0.0);  // attraction pulls the center toward its partner
}

TEST_CASE("forces are rotation equivariant and center-only agrees with the full set") {
  std::mt19937_64 rng(6);
  const DispersionModel model(test::mixed_params(), SpeciesTable::polymer_default());
  const Cluster c = test::random_cluster(rng, 9, 7.0, 2.5);
  const auto f = mbd_forces(c, model);
  const auto center = mbd_forces(c, model, ForceTarget::center_only);
  REQUIRE(center.size() == 1);
  CHECK((center[0] - f[0]).norm() <= 1e-14 * f[0].norm());
  for (int k = 0; k < 5; ++k) {
    const Mat3 q = test::random_rotation(rng);
    const auto g = mbd_forces(test::transformed(c, q, Vec3(-3, 2, 1)), model);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((g[i] - q * f[i]).norm() < 1e-9 * test::max_abs(f));
  }
  const auto both = mbd_energy_forces(c, model);
  CHECK(both.energy == mbd_energy(c, model).energy);
}

TEST_CASE("permuting non-center atoms permutes their forces") {
  std::mt19937_64 rng(10);
  const DispersionModel model(test::mixed_params(), SpeciesTable::polymer_default());
  const Cluster c = test::random_cluster(rng, 8, 6.0, 2.5);
  std::vector<std::size_t> perm = {0, 5, 3, 7, 1, 2, 6, 4};
  Cluster p;
  for (auto i : perm) {
    p.positions.push_back(c.positions[i]);
    p.species.push_back(c.species[i]);
  }
  const auto f = mbd_forces(c, model), g = mbd_forces(p, model);
  for (std::size_t k = 0; k < perm.size(); ++k) CHECK((g[k] - f[perm[k]]).norm() < 1e-12 * test::max_abs(f));
}

TEST_CASE("parameter file parsing") {
  SUBCASE("complete file") {
    std::istringstream in(
        "# comment\nbeta = 0.83\nbohr_per_angstrom = 1.9\n"
        "species C alpha0_free=12.0 c6_free=46.6 volume_ratio=0.85\nspecies H alpha0_free=4.5 c6_free=6.5\n");
    const auto p = parse_dispersion_params(in);
    CHECK(p.beta == 0.83);
    CHECK(p.bohr_per_angstrom == 1.9);
    CHECK(p.at("C").c6_free == 46.6);
    CHECK(p.at("H").volume_ratio == 1.0);
  }
  SUBCASE("unknown keys and missing beta are rejected") {
    std::istringstream a("beta = 1\ngamma = 2\n");
    CHECK_THROWS_AS(parse_dispersion_params(a), FormatError);
    std::istringstream b("beta = 1\nspecies C alpha0_free=1 c6_free=1 colour=red\n");
    CHECK_THROWS_AS(parse_dispersion_params(b), FormatError);
    std::istringstream c("species C alpha0_free=1 c6_free=1\n");
    CHECK_THROWS_AS(parse_dispersion_params(c), FormatError);
  }
  SUBCASE("the shipped polymer parameters load") {
    const auto p = read_dispersion_params_file((test::data_dir() / "polymer.params").string());
    CHECK_NOTHROW(DispersionModel(p, SpeciesTable::polymer_default()));
  }
  SUBCASE("species missing from the file fail on use") {
    DispersionParams p = test::unit_params();
    p.species.erase("Cl");
    const DispersionModel m(p, SpeciesTable::polymer_default());
    CHECK_THROWS_AS(m.at(2), Error);
  }
}

}  // TEST_SUITE
