#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "dispnet/geometry.hpp"

namespace dispnet {

// Extended-XYZ style structure files:
//
//   <atom count>
//   Lattice="ax ay az bx by bz cx cy cz" pbc="T T T" [other key=value pairs]
//   <symbol> <x> <y> <z> [<chain_id> <unit_id>]
//
// Lengths are Angstrom on disk and Bohr in memory. Without a Lattice key (or
// with pbc="F F F") the structure is non-periodic. Missing chain/unit columns
// default to 0.

/// Parses the key=value comment line; values may be double-quoted.
std::map<std::string, std::string> parse_xyz_metadata(const std::string& line);

AtomicSystem read_structure(std::istream& in, double bohr_per_angstrom = kBohrPerAngstrom,
                            SpeciesTable table = SpeciesTable::polymer_default());
AtomicSystem read_structure_file(const std::string& path, double bohr_per_angstrom = kBohrPerAngstrom,
                                 SpeciesTable table = SpeciesTable::polymer_default());

void write_structure(std::ostream& out, const AtomicSystem& system, double bohr_per_angstrom = kBohrPerAngstrom);
void write_structure_file(const std::string& path, const AtomicSystem& system,
                          double bohr_per_angstrom = kBohrPerAngstrom);

/// A cluster as a non-periodic structure (center first).
AtomicSystem cluster_to_system(const Cluster& cluster, const SpeciesTable& table);

}  // namespace dispnet
