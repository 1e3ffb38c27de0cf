#pragma once

#include <Eigen/Core>
#include <array>

#include "dispnet/dispersion_params.hpp"
#include "dispnet/geometry.hpp"

namespace dispnet::mbd {

// Many-body dispersion in the frequency-independent (coupled oscillator)
// form. All quantities are atomic units: Bohr, Hartree, Hartree/Bohr.

/// alpha0_eff = alpha0_free * V_eff/V_free.
double effective_polarizability(const SpeciesDispersion& s);
double effective_polarizability(std::string_view symbol, const DispersionParams& params);

/// Gaussian dipole width from the dipole self-energy: (sqrt(2/(9 pi)) alpha)^(1/3).
double gaussian_width(double alpha0_eff);

/// omega = 4 C6 / (3 alpha0_free^2).
double characteristic_frequency(const SpeciesDispersion& s);
double characteristic_frequency(std::string_view symbol, const DispersionParams& params);

/// erf(r / (beta sigma_ij)) / r with sigma_ij = sqrt(sigma_i^2 + sigma_j^2).
double coulomb_gg(double r, double sigma_i, double sigma_j, double beta);

/// grad_{r_i} (x) grad_{r_j} of coulomb_gg, evaluated at disp = r_i - r_j.
Mat3 dipole_tensor(const Vec3& disp, double sigma_i, double sigma_j, double beta);

/// d T / d disp_c for c = x, y, z. The tensor is fully symmetric in its three indices.
std::array<Mat3, 3> dipole_tensor_gradient(const Vec3& disp, double sigma_i, double sigma_j, double beta);

/// 3N x 3N coupling matrix: omega_i^2 on the diagonal blocks,
/// omega_i omega_j sqrt(alpha_i alpha_j) T_ij off the diagonal.
Eigen::MatrixXd build_interaction_matrix(const Cluster& cluster, const DispersionModel& model);

struct SpectralData {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns
};

struct EnergyResult {
  double energy = 0.0;  // Hartree
  SpectralData spectrum;
};

/// E = 1/2 sum_l sqrt(lambda_l) - 3/2 sum_i omega_i. A non-positive eigenvalue
/// (atoms too close for the oscillator model) is an error, never clamped.
EnergyResult mbd_energy(const Cluster& cluster, const DispersionModel& model);

enum class ForceTarget { all, center_only };

/// F_i = -1/4 Tr[Lambda^{-1/2} S^T (dC/dr_i) S], assembled from analytic dipole
/// tensor derivatives. Returns N rows (all) or one row (center_only).
Positions mbd_forces(const Cluster& cluster, const DispersionModel& model, ForceTarget target = ForceTarget::all);
Positions mbd_forces(const Cluster& cluster, const DispersionModel& model, const SpectralData& spectrum,
                     ForceTarget target);

struct MBDResult {
  double energy = 0.0;
  Positions forces;
};

MBDResult mbd_energy_forces(const Cluster& cluster, const DispersionModel& model,
                            ForceTarget target = ForceTarget::all);

}  // namespace dispnet::mbd
