#pragma once

#include <iosfwd>
#include <string>

#include "dispnet/diff.hpp"
#include "dispnet/species.hpp"
#include "dispnet/surrogate.hpp"

namespace dispnet {

/// Trained model on disk: text header (format version, config, species,
/// tensor names and shapes, terminated by `end`) followed by the raw
/// little-endian doubles of every tensor in header order.
struct Checkpoint {
  surrogate::ModelConfig config;
  SpeciesTable species;
  diff::ParameterSet params;
};

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint_file(const std::string& path);

}  // namespace dispnet
