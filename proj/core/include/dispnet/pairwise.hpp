#pragma once

#include "dispnet/dispersion_params.hpp"
#include "dispnet/geometry.hpp"

namespace dispnet::pairwise {

enum class DampingKind { none, fermi };

/// Short-range damping of the C6/r^6 sum. `fermi` is
/// 1 / (1 + exp(-steepness (r / (scale R0_ij) - 1))) with R0_ij the sum of
/// vdW radii R_i = 2.54 alpha_eff^(1/7) (atomic units).
struct DampingConfig {
  DampingKind kind = DampingKind::none;
  double steepness = 20.0;
  double scale = 0.94;
};

double c6_combined(const SpeciesDispersion& a, const SpeciesDispersion& b);
double vdw_radius(const SpeciesDispersion& s);
double damping(double r, double r0, const DampingConfig& cfg);

struct Result {
  double energy = 0.0;
  Positions forces;
};

/// E = -sum_{i<j} f_damp C6_ij / r^6 with C6_ij = sqrt(C6_i C6_j); forces = -grad E.
Result pw_energy_forces(const Cluster& cluster, const DispersionModel& model, const DampingConfig& damping = {});

}  // namespace dispnet::pairwise
