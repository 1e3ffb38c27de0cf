#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "dispnet/species.hpp"
#include "dispnet/types.hpp"

namespace dispnet {

/// Simulation cell. Rows of `lattice` are the cell vectors (Bohr).
class PeriodicCell {
 public:
  PeriodicCell(const Mat3& lattice, std::array<bool, 3> periodic = {true, true, true});

  static PeriodicCell cubic(double length) { return PeriodicCell(Mat3::Identity() * length); }

  const Mat3& lattice() const noexcept { return lattice_; }
  const std::array<bool, 3>& periodic() const noexcept { return periodic_; }
  bool any_periodic() const noexcept { return periodic_[0] || periodic_[1] || periodic_[2]; }
  double volume() const noexcept { return volume_; }

  Vec3 to_fractional(const Vec3& r) const { return inverse_ * r; }
  Vec3 to_cartesian(const Vec3& s) const { return lattice_.transpose() * s; }

  /// Folds a position into the home cell along periodic directions.
  Vec3 wrap(const Vec3& r) const;

  /// Half the smallest distance between opposite faces over periodic directions.
  /// Inside this radius every atom has a unique nearest image.
  double safe_radius() const noexcept { return safe_radius_; }

  /// Shortest periodic image of `d` (a displacement vector).
  Vec3 minimum_image(const Vec3& d) const;

 private:
  Mat3 lattice_;
  Mat3 inverse_;  // maps cartesian -> fractional
  std::array<bool, 3> periodic_;
  double volume_ = 0.0;
  double safe_radius_ = std::numeric_limits<double>::infinity();
};

/// Displacement a - b under the minimum-image convention (plain difference without a cell).
Vec3 minimum_image(const Vec3& a, const Vec3& b, const PeriodicCell* cell);
inline Vec3 minimum_image(const Vec3& a, const Vec3& b, const std::optional<PeriodicCell>& cell) {
  return minimum_image(a, b, cell ? &*cell : nullptr);
}

struct AtomicSystem {
  Positions positions;  // Bohr
  std::vector<SpeciesCode> species;
  SpeciesTable species_table;
  std::optional<PeriodicCell> cell;
  std::vector<int> unit_ids;
  std::vector<int> chain_ids;

  std::size_t size() const noexcept { return positions.size(); }
  void validate() const;
};

/// Fixed-size neighbourhood of one atom. Index 0 is the center, at the origin;
/// distances to the center are non-decreasing with index.
struct Cluster {
  Positions positions;  // Bohr, center-relative
  std::vector<SpeciesCode> species;
  long long center_source_index = -1;

  std::size_t size() const noexcept { return positions.size(); }
  void validate() const;
};

/// The n_cut nearest atoms (minimum image) around `center`, recentered and
/// sorted by distance; ties keep the original atom order.
Cluster extract_cluster(const AtomicSystem& system, std::size_t center, std::size_t n_cut);

}  // namespace dispnet
