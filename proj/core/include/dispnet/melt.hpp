#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dispnet/geometry.hpp"

namespace dispnet {

enum class PolymerKind { PE, PP, PVC };

PolymerKind parse_polymer_kind(std::string_view name);
std::string_view to_string(PolymerKind kind);

/// Atoms per repeating unit: CH2 for PE, C3H6 for PP, C2H3Cl for PVC.
int unit_size(PolymerKind kind);

/// Idealized chain geometry, in Angstrom and degrees.
struct MeltGeometry {
  double cc_bond = 1.54;
  double ch_bond = 1.09;
  double ccl_bond = 1.77;
  double backbone_angle = 111.0;
  double substituent_angle = 109.47;  // H-C-H / H-C-X opening
  double trans_probability = 0.6;     // remaining mass split evenly over gauche+/-
  double dihedral_jitter = 10.0;      // std-dev added to the rotamer dihedral
};

struct MeltOptions {
  PolymerKind kind = PolymerKind::PE;
  int chains = 1;
  int monomers_per_chain = 10;  // PE counts CH2 groups
  std::uint64_t seed = 0;
  double exclusion_radius = 2.0;       // Angstrom, for pairs more than two backbone carbons apart
  double max_packing_fraction = 0.5;   // atoms as spheres of diameter exclusion_radius
  int step_retries = 50;
  int chain_retries = 200;
  MeltGeometry geometry;
};

/// Self-avoiding random-walk chains packed into `box`. Positions are folded
/// into the cell and stored in Bohr; atoms of a unit are contiguous, units of a
/// chain are contiguous, chains follow each other.
AtomicSystem generate_synthetic_melt(const MeltOptions& options, const PeriodicCell& box);

struct UnitAssignment {
  std::vector<int> unit_ids;
  std::vector<int> residual_units;  // units shorter than the monomer (chain-end groups)
};

/// Chunks the atoms of each chain, in file order, into monomer units.
UnitAssignment assign_units(const AtomicSystem& system, PolymerKind kind);

}  // namespace dispnet
