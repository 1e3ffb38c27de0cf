#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dispnet/geometry.hpp"
#include "dispnet/species.hpp"

namespace dispnet {

/// One training tuple: a cutoff cluster and the reference force on its center.
struct DatasetRecord {
  Cluster cluster;
  Vec3 force = Vec3::Zero();  // Hartree/Bohr, unscaled
  std::int32_t unit_id = -1;
  std::int32_t source = 0;    // input structure index

  bool operator==(const DatasetRecord& o) const {
    return cluster.positions == o.cluster.positions && cluster.species == o.cluster.species && force == o.force &&
           unit_id == o.unit_id && source == o.source;
  }
};

/// Binary dataset file, little-endian:
///   "MBDS", u32 version, u32 n_cut, u32 species count, per species (u8 length, bytes),
///   u64 record count, u8 forces_scaled,
///   then fixed-size records: n_cut species bytes, n_cut x 3 f64 positions (Bohr),
///   3 f64 force, i32 unit_id, i32 source.
struct Dataset {
  std::uint32_t n_cut = 0;
  SpeciesTable species;
  bool forces_scaled = false;  // always false for generated data; files stay physical
  std::vector<DatasetRecord> records;

  /// Throws on record-size mismatches or species codes outside the table.
  void validate() const;
};

inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset_file(const std::string& path, const Dataset& data);
Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);

}  // namespace dispnet
