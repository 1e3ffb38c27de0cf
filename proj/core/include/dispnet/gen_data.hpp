#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dispnet/dataset.hpp"
#include "dispnet/dispersion_params.hpp"
#include "dispnet/geometry.hpp"

namespace dispnet {

struct GenDataOptions {
  std::size_t n_cut = 1000;
  int workers = 1;
  /// Total records to draw. Unset means every atom of every structure.
  /// Sampling takes one atom per structure in turn (round-robin), each
  /// structure's atoms visited in a seeded random order.
  std::optional<std::size_t> samples;
  std::uint64_t seed = 0;
};

struct GenDataResult {
  Dataset dataset;
  std::size_t skipped = 0;
  std::vector<std::string> skip_messages;  // one per skipped center
};

/// Reference center-atom MBD forces for clusters cut from `structures`.
/// Records are ordered by (structure, source atom index) regardless of the
/// worker count; the source tag is the structure index.
GenDataResult gen_data(const std::vector<AtomicSystem>& structures, const DispersionParams& params,
                       const GenDataOptions& options);

/// The (structure, atom) centers gen_data will visit, in output order.
std::vector<std::pair<std::size_t, std::size_t>> select_centers(const std::vector<AtomicSystem>& structures,
                                                                const GenDataOptions& options);

}  // namespace dispnet
