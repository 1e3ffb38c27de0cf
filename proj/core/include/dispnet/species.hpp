#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dispnet {

using SpeciesCode = std::uint8_t;

/// Bijection between element symbols and dense codes 0..S-1.
class SpeciesTable {
 public:
  SpeciesTable() = default;
  explicit SpeciesTable(std::vector<std::string> symbols);

  /// H, C, Cl -- the elements of the PE/PP/PVC melts.
  static SpeciesTable polymer_default();

  std::optional<SpeciesCode> find(std::string_view symbol) const;
  SpeciesCode code(std::string_view symbol) const;  // throws on unknown symbol
  SpeciesCode add(std::string_view symbol);         // returns the existing code if present
  const std::string& symbol(SpeciesCode code) const;

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  bool operator==(const SpeciesTable&) const = default;

 private:
  std::vector<std::string> symbols_;
};

}  // namespace dispnet
