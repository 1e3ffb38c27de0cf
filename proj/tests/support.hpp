#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dispnet/dispersion_params.hpp"
#include "dispnet/geometry.hpp"
#include "dispnet/melt.hpp"
#include "dispnet/surrogate.hpp"

namespace dispnet::test {

/// alpha = 1, C6 = 1, ratio 1 for every species of the default table.
inline DispersionParams unit_params(double beta = 1.0) {
  DispersionParams p;
  p.beta = beta;
  for (const char* s : {"H", "C", "Cl"}) p.species[s] = SpeciesDispersion{1.0, 1.0, 1.0};
  return p;
}

/// Distinct per-species values so mixed clusters exercise every code path.
inline DispersionParams mixed_params(double beta = 1.0) {
  DispersionParams p;
  p.beta = beta;
  p.species["H"] = SpeciesDispersion{1.0, 1.0, 1.0};
  p.species["C"] = SpeciesDispersion{2.0, 3.0, 0.9};
  p.species["Cl"] = SpeciesDispersion{3.0, 6.0, 0.8};
  return p;
}

inline std::filesystem::path data_dir() { return DISPNET_SOURCE_DIR "/data"; }

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

/// Random cluster with pairwise separations >= min_sep: center at the origin,
/// remaining atoms sorted by distance as extract_cluster would produce.
inline Cluster random_cluster(std::mt19937_64& rng, std::size_t n, double radius, double min_sep,
                              int n_species = 3) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::uniform_int_distribution<int> sp(0, n_species - 1);
  Positions pts{Vec3::Zero()};
  while (pts.size() < n) {
    const Vec3 p(u(rng), u(rng), u(rng));
    if (p.norm() > radius) continue;
    bool ok = true;
    for (const auto& q : pts) ok = ok && (p - q).norm() >= min_sep;
    if (ok) pts.push_back(p);
  }
  std::stable_sort(pts.begin() + 1, pts.end(), [](const Vec3& a, const Vec3& b) { return a.norm() < b.norm(); });
  Cluster c;
  c.positions = pts;
  for (std::size_t i = 0; i < n; ++i) c.species.push_back(static_cast<SpeciesCode>(sp(rng)));
  return c;
}

inline Cluster transformed(const Cluster& c, const Mat3& q, const Vec3& t = Vec3::Zero()) {
  Cluster out = c;
  for (auto& p : out.positions) p = q * p + t;
  return out;
}

/// Small surrogate used where a full-size model would only slow tests down.
inline surrogate::ModelConfig toy_config(int n_cut = 10) {
  surrogate::ModelConfig c;
  c.n_cut = n_cut;
  c.p = 2;
  c.n_extra = 3;
  c.n_rbf = 12;
  c.embedding_width = 8;
  return c;
}

/// Initial parameters with non-zero biases so no gradient vanishes by accident.
inline diff::ParameterSet perturbed_params(const surrogate::Model& m, std::uint64_t seed) {
  auto ps = m.init_params(seed);
  std::mt19937_64 rng(seed + 1000);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps.name(i).find("_b") == std::string::npos) continue;
    for (Eigen::Index k = 0; k < ps[i].size(); ++k) ps[i].data()[k] = u(rng);
  }
  return ps;
}

/// PE melt used by the larger fixtures: 2 chains x 150 CH2 in a 30 Angstrom box.
inline AtomicSystem pe_melt(std::uint64_t seed) {
  MeltOptions o;
  o.kind = PolymerKind::PE;
  o.chains = 2;
  o.monomers_per_chain = 150;
  o.seed = seed;
  return generate_synthetic_melt(o, PeriodicCell::cubic(30.0 * kBohrPerAngstrom));
}

/// erf(r / (beta s)) / r in extended precision, the modified Coulomb potential
/// between Gaussian dipoles; independent of the library implementation.
inline long double coulomb_ld(const Eigen::Matrix<long double, 3, 1>& d, long double s, long double beta) {
  const long double r = d.norm();
  const long double x = beta * s;
  if (r == 0.0L) return 2.0L / (std::sqrt(std::acos(-1.0L)) * x);
  return std::erf(r / x) / r;
}

/// Nested central differences of f: prod_k (f(x + h e_k) - f(x - h e_k)) / 2h over
/// the listed axes, Richardson-extrapolated from steps h and h/2.
template <class F>
long double fd_mixed(const F& f, const Eigen::Matrix<long double, 3, 1>& x, const std::vector<int>& axes,
                     long double h) {
  auto at = [&](long double step) {
    const int m = static_cast<int>(axes.size());
    long double acc = 0.0L;
    for (int mask = 0; mask < (1 << m); ++mask) {
      Eigen::Matrix<long double, 3, 1> p = x;
      long double sign = 1.0L;
      for (int k = 0; k < m; ++k) {
        const long double s = (mask >> k) & 1 ? -1.0L : 1.0L;
        p[axes[k]] += s * step;
        sign *= s;
      }
      acc += sign * f(p);
    }
    return acc / std::pow(2.0L * step, static_cast<long double>(m));
  };
  return (4.0L * at(h / 2) - at(h)) / 3.0L;
}

inline double max_abs(const Positions& f) {
  double m = 0.0;
  for (const auto& v : f) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace dispnet::test
