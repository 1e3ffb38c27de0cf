#include "dispnet/mbd.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dispnet::mbd {

double effective_polarizability(const SpeciesDispersion& s) {
  if (!(s.volume_ratio > 0.0)) throw Error("volume_ratio must be positive");
  if (!(s.alpha0_free > 0.0)) throw Error("alpha0_free must be positive");
  return s.alpha0_free * s.volume_ratio;
}

double effective_polarizability(std::string_view symbol, const DispersionParams& params) {
  return effective_polarizability(params.at(symbol));
}

double gaussian_width(double alpha0_eff) {
  if (!(alpha0_eff > 0.0)) throw Error("gaussian_width needs a positive polarizability");
  return std::cbrt(std::sqrt(2.0 / (9.0 * std::numbers::pi)) * alpha0_eff);
}

double characteristic_frequency(const SpeciesDispersion& s) {
  if (!(s.alpha0_free > 0.0) || !(s.c6_free > 0.0)) throw Error("characteristic_frequency needs positive alpha and C6");
  return 4.0 * s.c6_free / (3.0 * s.alpha0_free * s.alpha0_free);
}

double characteristic_frequency(std::string_view symbol, const DispersionParams& params) {
  return characteristic_frequency(params.at(symbol));
}

namespace {

double damping_length(double sigma_i, double sigma_j, double beta) {
  if (!(sigma_i > 0.0) || !(sigma_j > 0.0) || !(beta > 0.0)) {
    throw Error("coulomb_gg needs positive widths and beta");
  }
  return beta * std::sqrt(sigma_i * sigma_i + sigma_j * sigma_j);
}

// For f(r) = erf(r/s)/r the Hessian in the displacement is a I + b d d^T and
// the third derivative is b (d_ab d_c + d_ac d_b + d_bc d_a) + c d_a d_b d_c,
// with a = f'/r, b = (f'' - f'/r)/r^2, c = b'/r.
struct RadialTerms {
  double a, b, c;
};

RadialTerms radial_terms(double r, double s) {
  const double u = r / s;
  const double k = 2.0 / (s * std::sqrt(std::numbers::pi));
  if (u < 0.5) {
    // Power series in t = (r/s)^2 of f = k sum (-1)^n t^n / (n! (2n+1)), written as
    // F(q) with q = r^2: a = 2F', b = 4F'', c = 8F'''.
    const double t = u * u;
    const double s2 = s * s;
    double f1 = 0.0, f2 = 0.0, f3 = 0.0;
    double fact = 1.0;  // n!
    for (int n = 1; n <= 18; ++n) {
      fact *= n;
      const double sign = (n % 2) ? -1.0 : 1.0;
      const double coef = sign / (fact * (2.0 * n + 1.0));
      f1 += coef * n * std::pow(t, n - 1);
      if (n >= 2) f2 += coef * n * (n - 1) * std::pow(t, n - 2);
      if (n >= 3) f3 += coef * n * (n - 1) * (n - 2) * std::pow(t, n - 3);
    }
    return {2.0 * k * f1 / s2, 4.0 * k * f2 / (s2 * s2), 8.0 * k * f3 / (s2 * s2 * s2)};
  }
  const double e = std::erf(u);
  const double g = k * std::exp(-u * u);
  const double e1 = g;
  const double e2 = g * (-2.0 * r / (s * s));
  const double e3 = g * (4.0 * r * r / (s * s * s * s) - 2.0 / (s * s));
  const double r2 = r * r, r3 = r2 * r, r4 = r2 * r2;
  const double f1 = e1 / r - e / r2;
  const double f2 = e2 / r - 2.0 * e1 / r2 + 2.0 * e / r3;
  const double f3 = e3 / r - 3.0 * e2 / r2 + 6.0 * e1 / r3 - 6.0 * e / r4;
  return {f1 / r, (f2 - f1 / r) / r2, (f3 - 3.0 * f2 / r + 3.0 * f1 / r2) / r3};
}

}  // namespace

double coulomb_gg(double r, double sigma_i, double sigma_j, double beta) {
  const double s = damping_length(sigma_i, sigma_j, beta);
  if (r < 0.0) throw Error("coulomb_gg needs a non-negative separation");
  if (r == 0.0) return 2.0 / (std::sqrt(std::numbers::pi) * s);
  return std::erf(r / s) / r;
}

Mat3 dipole_tensor(const Vec3& disp, double sigma_i, double sigma_j, double beta) {
  const double s = damping_length(sigma_i, sigma_j, beta);
  const auto t = radial_terms(disp.norm(), s);
  // grad_i grad_j = -Hessian in the displacement
  return -(t.a * Mat3::Identity() + t.b * disp * disp.transpose());
}

std::array<Mat3, 3> dipole_tensor_gradient(const Vec3& disp, double sigma_i, double sigma_j, double beta) {
  const double s = damping_length(sigma_i, sigma_j, beta);
  const auto t = radial_terms(disp.norm(), s);
  std::array<Mat3, 3> out;
  for (int c = 0; c < 3; ++c) {
    Mat3 m;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double sym = (a == b ? disp[c] : 0.0) + (a == c ? disp[b] : 0.0) + (b == c ? disp[a] : 0.0);
        m(a, b) = -(t.b * sym + t.c * disp[a] * disp[b] * disp[c]);
      }
    }
    out[c] = m;
  }
  return out;
}

namespace {

struct AtomTerms {
  std::vector<double> omega, alpha, sigma;
};

AtomTerms atom_terms(const Cluster& cluster, const DispersionModel& model) {
  AtomTerms t;
  const std::size_t n = cluster.size();
  t.omega.resize(n);
  t.alpha.resize(n);
  t.sigma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = model.at(cluster.species.at(i));
    t.omega[i] = characteristic_frequency(s);
    t.alpha[i] = effective_polarizability(s);
    t.sigma[i] = gaussian_width(t.alpha[i]);
  }
  return t;
}

}  // namespace

Eigen::MatrixXd build_interaction_matrix(const Cluster& cluster, const DispersionModel& model) {
  const std::size_t n = cluster.size();
  if (cluster.species.size() != n) throw Error("cluster species/positions length mismatch");
  const auto t = atom_terms(cluster, model);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    c.block<3, 3>(3 * i, 3 * i) = t.omega[i] * t.omega[i] * Mat3::Identity();
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = t.omega[i] * t.omega[j] * std::sqrt(t.alpha[i] * t.alpha[j]);
      const Mat3 block =
          k * dipole_tensor(cluster.positions[i] - cluster.positions[j], t.sigma[i], t.sigma[j], model.beta());
      c.block<3, 3>(3 * i, 3 * j) = block;
      c.block<3, 3>(3 * j, 3 * i) = block.transpose();
    }
  }
  return c;
}

EnergyResult mbd_energy(const Cluster& cluster, const DispersionModel& model) {
  const Eigen::MatrixXd c = build_interaction_matrix(cluster, model);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success) throw Error("symmetric eigensolver failed to converge");
  EnergyResult out;
  out.spectrum.eigenvalues = solver.eigenvalues();
  out.spectrum.eigenvectors = solver.eigenvectors();
  const double lmin = out.spectrum.eigenvalues.size() ? out.spectrum.eigenvalues.minCoeff() : 1.0;
  if (!(lmin > 0.0)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "coupling matrix is not positive definite: smallest eigenvalue " << lmin
        << " (atoms too close for the oscillator model)";
    throw Error(msg.str());
  }
  double sum_sqrt = 0.0;
  for (Eigen::Index l = 0; l < out.spectrum.eigenvalues.size(); ++l) sum_sqrt += std::sqrt(out.spectrum.eigenvalues[l]);
  double sum_omega = 0.0;
  for (std::size_t i = 0; i < cluster.size(); ++i) sum_omega += characteristic_frequency(model.at(cluster.species[i]));
  out.energy = 0.5 * sum_sqrt - 1.5 * sum_omega;
  return out;
}

Positions mbd_forces(const Cluster& cluster, const DispersionModel& model, const SpectralData& spectrum,
                     ForceTarget target) {
  const std::size_t n = cluster.size();
  const auto t = atom_terms(cluster, model);
  const auto& s = spectrum.eigenvectors;
  const Eigen::VectorXd inv_sqrt = spectrum.eigenvalues.array().rsqrt();

  // Tr[Lambda^{-1/2} S^T dC S] = Tr[dC M] with M = S Lambda^{-1/2} S^T = C^{-1/2}.
  const std::size_t rows = target == ForceTarget::all ? n : 1;
  const Eigen::MatrixXd m = (s.topRows(3 * rows) * inv_sqrt.asDiagonal()) * s.transpose();

  Positions forces(rows, Vec3::Zero());
  for (std::size_t i = 0; i < rows; ++i) {
    Vec3 f = Vec3::Zero();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double k = t.omega[i] * t.omega[j] * std::sqrt(t.alpha[i] * t.alpha[j]);
      const auto dt =
          dipole_tensor_gradient(cluster.positions[i] - cluster.positions[j], t.sigma[i], t.sigma[j], model.beta());
      const auto mij = m.block<3, 3>(3 * i, 3 * j);
      for (int a = 0; a < 3; ++a) f[a] += k * dt[a].cwiseProduct(mij).sum();
    }
    // dC/dr_i touches block row i and block column i, hence 2 x 1/4.
    forces[i] = -0.5 * f;
  }
  return forces;
}

Positions mbd_forces(const Cluster& cluster, const DispersionModel& model, ForceTarget target) {
  const auto e = mbd_energy(cluster, model);
  return mbd_forces(cluster, model, e.spectrum, target);
}

MBDResult mbd_energy_forces(const Cluster& cluster, const DispersionModel& model, ForceTarget target) {
  auto e = mbd_energy(cluster, model);
  MBDResult out;
  out.energy = e.energy;
  out.forces = mbd_forces(cluster, model, e.spectrum, target);
  return out;
}

}  // namespace dispnet::mbd
