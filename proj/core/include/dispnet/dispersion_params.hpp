#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dispnet/species.hpp"
#include "dispnet/types.hpp"

namespace dispnet {

/// Free-atom reference data for one element (atomic units).
struct SpeciesDispersion {
  double alpha0_free = 0.0;   // static polarizability, Bohr^3
  double c6_free = 0.0;       // Hartree Bohr^6
  double volume_ratio = 1.0;  // V_eff / V_free, held constant per element
};

struct DispersionParams {
  double beta = 0.0;  // range-separation constant; must come from the parameter file
  double bohr_per_angstrom = kBohrPerAngstrom;
  std::map<std::string, SpeciesDispersion, std::less<>> species;

  const SpeciesDispersion& at(std::string_view symbol) const;
  void validate() const;
};

/// Parses the plain-text parameter format:
///
///   # comment
///   beta = 0.83
///   bohr_per_angstrom = 1.8897261246
///   species C alpha0_free=12.0 c6_free=46.6 volume_ratio=0.85
///
/// Unknown keys are rejected.
DispersionParams parse_dispersion_params(std::istream& in);
DispersionParams read_dispersion_params_file(const std::string& path);

/// Parameters resolved against a species table so lookups are by code.
class DispersionModel {
 public:
  DispersionModel(const DispersionParams& params, const SpeciesTable& table);

  double beta() const noexcept { return beta_; }
  const SpeciesTable& table() const noexcept { return table_; }

  /// Throws when the element has no parameter entry.
  const SpeciesDispersion& at(SpeciesCode code) const;

 private:
  double beta_;
  SpeciesTable table_;
  std::vector<std::optional<SpeciesDispersion>> entries_;
};

}  // namespace dispnet
