#include "dispnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

#include "dispnet/mbd.hpp"

namespace dispnet::evaluation {

double mare(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref, const std::vector<SpeciesCode>& species,
            std::optional<SpeciesCode> only) {
  if (pred.size() != ref.size()) throw Error("mare: prediction and reference counts differ");
  if (only && species.size() != ref.size()) throw Error("mare: species list has the wrong length");
  double err = 0.0, norm = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (only && species[i] != *only) continue;
    err += (pred[i] - ref[i]).cwiseAbs().sum();
    norm += ref[i].cwiseAbs().sum();
    ++n;
  }
  if (n == 0) throw Error("mare: no samples selected");
  if (!(norm > 0.0)) throw Error("mare: reference forces are all zero");
  return 100.0 * err / norm;
}

std::optional<double> angular_error(const Vec3& pred, const Vec3& ref) {
  const double np = pred.norm(), nr = ref.norm();
  if (!(np > 0.0) || !(nr > 0.0)) return std::nullopt;
  const double c = std::clamp(pred.dot(ref) / (np * nr), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Vec3 are(const Vec3& pred, const Vec3& ref, double normalizer) {
  if (!(normalizer > 0.0)) throw Error("are: normalizer must be positive");
  return 100.0 * (pred - ref).cwiseAbs() / normalizer;
}

AngleHistogram angle_histogram(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref,
                               std::vector<double> edges) {
  if (pred.size() != ref.size()) throw Error("angle_histogram: prediction and reference counts differ");
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end())) throw Error("angle_histogram: edges must be ascending");
  AngleHistogram h;
  h.edges = std::move(edges);
  h.counts.assign(h.edges.size(), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto a = angular_error(pred[i], ref[i]);
    if (!a) {
      ++h.excluded;
      continue;
    }
    std::size_t bin = 0;
    while (bin + 1 < h.edges.size() && *a >= h.edges[bin + 1]) ++bin;
    ++h.counts[bin];
  }
  return h;
}

namespace {

// mean and population standard deviation of per-sample errors of a subset
std::pair<double, double> per_sample_stats(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref,
                                           const std::vector<std::size_t>& idx) {
  double norm = 0.0;
  for (auto i : idx) norm += ref[i].cwiseAbs().sum();
  norm /= 3.0 * static_cast<double>(idx.size());
  if (!(norm > 0.0)) throw Error("mare: reference forces are all zero");
  std::vector<double> e;
  for (auto i : idx) e.push_back(100.0 * (pred[i] - ref[i]).cwiseAbs().sum() / 3.0 / norm);
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= static_cast<double>(e.size());
  double var = 0.0;
  for (double v : e) var += (v - mean) * (v - mean);
  var /= static_cast<double>(e.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

MetricReport evaluate(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref,
                      const std::vector<SpeciesCode>& species, const SpeciesTable& table) {
  if (pred.size() != ref.size() || species.size() != ref.size()) throw Error("evaluate: input lengths differ");
  if (ref.empty()) throw Error("evaluate: no samples");
  MetricReport r;
  r.count = ref.size();
  std::vector<std::size_t> all(ref.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::tie(r.mare_overall, r.mare_overall_std) = per_sample_stats(pred, ref, all);

  for (std::size_t code = 0; code < table.size(); ++code) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < species.size(); ++i) {
      if (species[i] == code) idx.push_back(i);
    }
    if (idx.empty()) continue;
    SpeciesMetrics m;
    m.symbol = table.symbol(static_cast<SpeciesCode>(code));
    m.count = idx.size();
    std::tie(m.mare, m.mare_std) = per_sample_stats(pred, ref, idx);
    r.per_species.push_back(m);
  }

  r.angles = angle_histogram(pred, ref);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (auto a = angular_error(pred[i], ref[i])) {
      sum += *a;
      ++n;
    }
  }
  r.mean_angle = n ? sum / static_cast<double>(n) : 0.0;

  double norm = 0.0;
  for (const auto& f : ref) norm += f.cwiseAbs().sum();
  norm /= 3.0 * static_cast<double>(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) r.are_values.push_back(are(pred[i], ref[i], norm));
  return r;
}

std::string format_report(const MetricReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %8s %12s %12s\n", "species", "count", "MARE(%)", "std(%)");
  out << line;
  for (const auto& s : r.per_species) {
    std::snprintf(line, sizeof line, "%-10s %8zu %12.4f %12.4f\n", s.symbol.c_str(), s.count, s.mare, s.mare_std);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-10s %8zu %12.4f %12.4f\n", "overall", r.count, r.mare_overall,
                r.mare_overall_std);
  out << line;
  std::snprintf(line, sizeof line, "\nmean angle error: %.4f deg\n", r.mean_angle);
  out << line << "angle histogram (deg):\n";
  const auto& e = r.angles.edges;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (k + 1 < e.size()) {
      std::snprintf(line, sizeof line, "  [%g, %g) %zu\n", e[k], e[k + 1], r.angles.counts[k]);
    } else {
      std::snprintf(line, sizeof line, "  [%g, inf) %zu\n", e[k], r.angles.counts[k]);
    }
    out << line;
  }
  std::snprintf(line, sizeof line, "  excluded (zero force) %zu\n", r.angles.excluded);
  out << line;
  return out.str();
}

double fit_tail_exponent(const std::vector<double>& distance, const std::vector<double>& condensed, double lower,
                         double upper, std::size_t* points) {
  if (distance.size() != condensed.size()) throw Error("tail fit: distance and value counts differ");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < distance.size(); ++i) {
    const double d = distance[i];
    if (d < lower || d > upper || !(d > 0.0) || !(condensed[i] > 0.0)) continue;
    const double x = std::log(d), y = std::log(condensed[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (points) *points = m;
  if (m < 5) {
    throw Error("tail fit: only " + std::to_string(m) + " points in the window [" + std::to_string(lower) + ", " +
                std::to_string(upper) + "]; at least 5 are needed");
  }
  const double dm = static_cast<double>(m);
  const double den = dm * sxx - sx * sx;
  if (!(den > 0.0)) throw Error("tail fit: all window points share one distance");
  return -(dm * sxy - sx * sy) / den;
}

HessianProfile make_profile(const Cluster& cluster, const std::vector<Mat3>& rows, const TailWindow& window) {
  if (rows.size() != cluster.size()) throw Error("hessian profile: one row per cluster atom expected");
  if (!(window.lower >= 0.0 && window.lower < window.upper)) throw Error("hessian profile: invalid tail window");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t j = 1; j < cluster.size(); ++j) pts.emplace_back(cluster.positions[j].norm(), rows[j].norm());
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  HessianProfile p;
  double radius = 0.0;
  for (const auto& [d, h] : pts) {
    p.distance.push_back(d);
    p.condensed.push_back(h);
    radius = std::max(radius, d);
  }
  p.fit_lower = window.lower * radius;
  p.fit_upper = window.upper * radius;
  p.exponent = fit_tail_exponent(p.distance, p.condensed, p.fit_lower, p.fit_upper, &p.fit_points);
  return p;
}

namespace {

// rows[j](a, b) = dF_0^a / dr_j^b = dF_j^b / dr_0^a
std::vector<Mat3> rows_from_center_displacement(const Cluster& cluster, double h,
                                                const std::function<Positions(const Cluster&)>& forces) {
  if (!(h > 0.0)) throw Error("finite-difference step must be positive");
  std::vector<Mat3> rows(cluster.size(), Mat3::Zero());
  constexpr double kStencil[4] = {2.0, 1.0, -1.0, -2.0};
  constexpr double kWeight[4] = {-1.0, 8.0, -8.0, 1.0};
  for (int a = 0; a < 3; ++a) {
    std::vector<Vec3> acc(cluster.size(), Vec3::Zero());
    for (int s = 0; s < 4; ++s) {
      Cluster c = cluster;
      c.positions[0][a] += kStencil[s] * h;
      const Positions f = forces(c);
      for (std::size_t j = 0; j < f.size(); ++j) acc[j] += kWeight[s] * f[j];
    }
    for (std::size_t j = 0; j < cluster.size(); ++j) rows[j].row(a) = (acc[j] / (12.0 * h)).transpose();
  }
  return rows;
}

}  // namespace

std::vector<Mat3> mbd_hessian_rows(const Cluster& cluster, const DispersionModel& model, double h) {
  return rows_from_center_displacement(cluster, h, [&](const Cluster& c) {
    return mbd::mbd_forces(c, model, mbd::ForceTarget::all);
  });
}

std::vector<Mat3> pairwise_hessian_rows(const Cluster& cluster, const DispersionModel& model,
                                        const pairwise::DampingConfig& damping, double h) {
  return rows_from_center_displacement(cluster, h, [&](const Cluster& c) {
    return pairwise::pw_energy_forces(c, model, damping).forces;
  });
}

std::string format_profile(const HessianProfile& p) {
  std::ostringstream out;
  char line[96];
  out << "# distance condensed_hessian\n";
  for (std::size_t i = 0; i < p.distance.size(); ++i) {
    std::snprintf(line, sizeof line, "%.10g %.10g\n", p.distance[i], p.condensed[i]);
    out << line;
  }
  std::snprintf(line, sizeof line, "# exponent %.6f (fit over %zu points, %.4g <= d <= %.4g)\n", p.exponent,
                p.fit_points, p.fit_lower, p.fit_upper);
  out << line;
  return out.str();
}

}  // namespace dispnet::evaluation
