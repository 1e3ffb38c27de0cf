#include "dispnet/geometry.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dispnet {

PeriodicCell::PeriodicCell(const Mat3& lattice, std::array<bool, 3> periodic)
    : lattice_(lattice), periodic_(periodic) {
  if (!lattice.allFinite()) throw Error("cell lattice has non-finite entries");
  const double det = lattice.determinant();
  const double scale = lattice.row(0).norm() * lattice.row(1).norm() * lattice.row(2).norm();
  if (!(scale > 0.0) || std::abs(det) <= 1e-10 * scale) {
    throw Error("degenerate cell lattice (linearly dependent vectors)");
  }
  volume_ = std::abs(det);
  inverse_ = lattice_.transpose().inverse();
  for (int k = 0; k < 3; ++k) {
    if (!periodic_[k]) continue;
    // face spacing along k = volume / |a_{k+1} x a_{k+2}|
    const Vec3 a = lattice_.row((k + 1) % 3).transpose();
    const Vec3 b = lattice_.row((k + 2) % 3).transpose();
    safe_radius_ = std::min(safe_radius_, 0.5 * volume_ / a.cross(b).norm());
  }
}

Vec3 PeriodicCell::wrap(const Vec3& r) const {
  Vec3 s = to_fractional(r);
  for (int k = 0; k < 3; ++k) {
    if (periodic_[k]) s[k] -= std::floor(s[k]);
  }
  return to_cartesian(s);
}

Vec3 PeriodicCell::minimum_image(const Vec3& d) const {
  Vec3 s = to_fractional(d);
  for (int k = 0; k < 3; ++k) {
    if (periodic_[k]) s[k] -= std::round(s[k]);
  }
  Vec3 best = to_cartesian(s);
  double best_norm = best.squaredNorm();
  // Rounding is exact for orthogonal cells; skewed cells need the neighbouring images.
  const int range[3] = {periodic_[0] ? 1 : 0, periodic_[1] ? 1 : 0, periodic_[2] ? 1 : 0};
  for (int i = -range[0]; i <= range[0]; ++i) {
    for (int j = -range[1]; j <= range[1]; ++j) {
      for (int k = -range[2]; k <= range[2]; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        const Vec3 cand = to_cartesian(s + Vec3(i, j, k));
        const double n = cand.squaredNorm();
        if (n < best_norm) {
          best_norm = n;
          best = cand;
        }
      }
    }
  }
  return best;
}

Vec3 minimum_image(const Vec3& a, const Vec3& b, const PeriodicCell* cell) {
  const Vec3 d = a - b;
  if (!cell || !cell->any_periodic()) return d;
  return cell->minimum_image(d);
}

void AtomicSystem::validate() const {
  const std::size_t n = positions.size();
  if (species.size() != n || unit_ids.size() != n || chain_ids.size() != n) {
    throw Error("atomic system arrays disagree in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!positions[i].allFinite()) throw Error("non-finite position for atom " + std::to_string(i));
    if (unit_ids[i] < 0) throw Error("negative unit id for atom " + std::to_string(i));
    if (species[i] >= species_table.size()) {
      throw Error("species code out of table range for atom " + std::to_string(i));
    }
  }
}

void Cluster::validate() const {
  if (positions.empty()) throw Error("empty cluster");
  if (species.size() != positions.size()) throw Error("cluster species/positions length mismatch");
  if (positions[0].norm() != 0.0) throw Error("cluster center is not at the origin");
  double prev = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite()) throw Error("non-finite cluster position");
    const double d = positions[i].norm();
    if (d < prev) throw Error("cluster atoms are not ordered by distance");
    prev = d;
  }
}

Cluster extract_cluster(const AtomicSystem& system, std::size_t center, std::size_t n_cut) {
  const std::size_t n = system.size();
  if (center >= n) throw Error("cluster center index " + std::to_string(center) + " out of range");
  if (n_cut == 0) throw Error("cluster size must be positive");

  const PeriodicCell* cell = system.cell ? &*system.cell : nullptr;
  const double safe = (cell && cell->any_periodic()) ? cell->safe_radius()
                                                     : std::numeric_limits<double>::infinity();

  struct Candidate {
    double dist;
    std::size_t index;
    Vec3 disp;
  };
  std::vector<Candidate> cands;
  cands.reserve(n);
  const Vec3& rc = system.positions[center];
  for (std::size_t j = 0; j < n; ++j) {
    Vec3 d = j == center ? Vec3::Zero() : minimum_image(system.positions[j], rc, cell);
    const double dist = d.norm();
    if (dist < safe) cands.push_back({dist, j, d});
  }
  if (cands.size() < n_cut) {
    throw Error("cluster around atom " + std::to_string(center) + " needs " + std::to_string(n_cut) +
                " atoms within the safe radius but only " + std::to_string(cands.size()) +
                " are available (short by " + std::to_string(n_cut - cands.size()) + ")");
  }
  // center first; otherwise by distance, ties by original index
  std::stable_sort(cands.begin(), cands.end(), [center](const Candidate& a, const Candidate& b) {
    if ((a.index == center) != (b.index == center)) return a.index == center;
    return a.dist < b.dist;
  });

  Cluster out;
  out.center_source_index = static_cast<long long>(center);
  out.positions.reserve(n_cut);
  out.species.reserve(n_cut);
  for (std::size_t k = 0; k < n_cut; ++k) {
    out.positions.push_back(cands[k].disp);
    out.species.push_back(system.species[cands[k].index]);
  }
  return out;
}

}  // namespace dispnet
