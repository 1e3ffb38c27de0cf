#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dispnet/dispersion_params.hpp"
#include "dispnet/geometry.hpp"
#include "dispnet/pairwise.hpp"
#include "dispnet/species.hpp"

namespace dispnet::evaluation {

/// Mean |pred - ref| over all force components divided by the mean |ref|
/// component, in percent. With `only`, both means run over atoms of that
/// species. Throws on an empty selection or an all-zero reference.
double mare(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref, const std::vector<SpeciesCode>& species,
            std::optional<SpeciesCode> only = std::nullopt);

/// Angle between two forces in degrees; nullopt when either is the zero vector.
std::optional<double> angular_error(const Vec3& pred, const Vec3& ref);

/// Per-component |pred - ref| / normalizer, in percent.
Vec3 are(const Vec3& pred, const Vec3& ref, double normalizer);

struct AngleHistogram {
  std::vector<double> edges = {0.0, 0.1, 1.0, 5.0, 25.0};  // bin k is [edges[k], edges[k+1]), last is open
  std::vector<std::size_t> counts;
  std::size_t excluded = 0;  // samples with a zero force vector
};

AngleHistogram angle_histogram(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref,
                               std::vector<double> edges = {0.0, 0.1, 1.0, 5.0, 25.0});

struct SpeciesMetrics {
  std::string symbol;
  std::size_t count = 0;
  double mare = 0.0;
  double mare_std = 0.0;  // spread of per-sample errors
};

struct MetricReport {
  std::size_t count = 0;
  double mare_overall = 0.0;
  double mare_overall_std = 0.0;
  std::vector<SpeciesMetrics> per_species;  // species present in the set, table order
  AngleHistogram angles;
  double mean_angle = 0.0;                  // over non-excluded samples
  std::vector<Vec3> are_values;             // one per sample, normalized by the overall mean |ref|
};

/// Per-sample error e_i = mean_a |pred_ia - ref_ia| / F~ * 100, whose mean is
/// the MARE; the reported standard deviation is that of e_i.
MetricReport evaluate(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref,
                      const std::vector<SpeciesCode>& species, const SpeciesTable& table);

/// Plain-text table: one row per species plus the overall row, with
/// MARE and its standard deviation, then the angle histogram.
std::string format_report(const MetricReport& report);

// ---- Condensed Hessian profiles ----

struct TailWindow {
  double lower = 0.5;   // fraction of the cluster radius
  double upper = 0.95;
};

struct HessianProfile {
  std::vector<double> distance;   // d_1j, ascending
  std::vector<double> condensed;  // |H_1j|_F
  double exponent = 0.0;          // p in |H| ~ d^-p
  std::size_t fit_points = 0;
  double fit_lower = 0.0, fit_upper = 0.0;  // absolute distances of the window
};

/// Least-squares slope of log|H| against log d over window points; the
/// returned exponent is minus the slope. Throws with fewer than 5 points.
double fit_tail_exponent(const std::vector<double>& distance, const std::vector<double>& condensed, double lower,
                         double upper, std::size_t* points = nullptr);

/// Profile from H_1j rows (index 0, the center, is skipped). The cluster
/// radius is the largest center distance.
HessianProfile make_profile(const Cluster& cluster, const std::vector<Mat3>& rows, const TailWindow& window = {});

/// dF_center/dr_j for the analytical MBD engine. Uses the Hessian symmetry
/// H_1j = (dF_j/dr_1)^T: only the center is displaced (4-point central
/// differences of all forces, step h in Bohr).
std::vector<Mat3> mbd_hessian_rows(const Cluster& cluster, const DispersionModel& model, double h = 5e-3);

/// Same construction for the pairwise baseline.
std::vector<Mat3> pairwise_hessian_rows(const Cluster& cluster, const DispersionModel& model,
                                        const pairwise::DampingConfig& damping = {}, double h = 5e-3);

/// `distance condensed_hessian` lines followed by a `# exponent` footer.
std::string format_profile(const HessianProfile& profile);

}  // namespace dispnet::evaluation
