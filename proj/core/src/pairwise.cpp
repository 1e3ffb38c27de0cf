#include "dispnet/pairwise.hpp"

#include <cmath>

#include "dispnet/mbd.hpp"

namespace dispnet::pairwise {

double c6_combined(const SpeciesDispersion& a, const SpeciesDispersion& b) { return std::sqrt(a.c6_free * b.c6_free); }

double vdw_radius(const SpeciesDispersion& s) { return 2.54 * std::pow(mbd::effective_polarizability(s), 1.0 / 7.0); }

double damping(double r, double r0, const DampingConfig& cfg) {
  if (cfg.kind == DampingKind::none) return 1.0;
  return 1.0 / (1.0 + std::exp(-cfg.steepness * (r / (cfg.scale * r0) - 1.0)));
}

namespace {

// f and df/dr
std::pair<double, double> damping_with_derivative(double r, double r0, const DampingConfig& cfg) {
  if (cfg.kind == DampingKind::none) return {1.0, 0.0};
  const double f = damping(r, r0, cfg);
  return {f, f * (1.0 - f) * cfg.steepness / (cfg.scale * r0)};
}

}  // namespace

Result pw_energy_forces(const Cluster& cluster, const DispersionModel& model, const DampingConfig& cfg) {
  const std::size_t n = cluster.size();
  Result out;
  out.forces.assign(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& si = model.at(cluster.species[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& sj = model.at(cluster.species[j]);
      const Vec3 d = cluster.positions[i] - cluster.positions[j];
      const double r = d.norm();
      if (r == 0.0) throw Error("pairwise dispersion: atoms " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      const double c6 = c6_combined(si, sj);
      const auto [f, df] = damping_with_derivative(r, vdw_radius(si) + vdw_radius(sj), cfg);
      const double r6 = std::pow(r, 6);
      out.energy -= f * c6 / r6;
      // dE_ij/dr
      const double de = -(df * c6 / r6 - 6.0 * f * c6 / (r6 * r));
      const Vec3 g = de * d / r;  // dE/dr_i
      out.forces[i] -= g;
      out.forces[j] += g;
    }
  }
  return out;
}

}  // namespace dispnet::pairwise
