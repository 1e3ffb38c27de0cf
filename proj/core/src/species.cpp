#include "dispnet/species.hpp"

#include <algorithm>

#include "dispnet/types.hpp"

namespace dispnet {

SpeciesTable::SpeciesTable(std::vector<std::string> symbols) {
  for (const auto& s : symbols) {
    if (find(s)) throw Error("duplicate species symbol '" + s + "'");
    add(s);
  }
}

SpeciesTable SpeciesTable::polymer_default() { return SpeciesTable({"H", "C", "Cl"}); }

std::optional<SpeciesCode> SpeciesTable::find(std::string_view symbol) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end()) return std::nullopt;
  return static_cast<SpeciesCode>(it - symbols_.begin());
}

SpeciesCode SpeciesTable::code(std::string_view symbol) const {
  if (auto c = find(symbol)) return *c;
  throw Error("unknown species '" + std::string(symbol) + "'");
}

SpeciesCode SpeciesTable::add(std::string_view symbol) {
  if (auto c = find(symbol)) return *c;
  if (symbol.empty()) throw Error("empty species symbol");
  if (symbols_.size() >= 255) throw Error("species table is full (255 entries)");
  symbols_.emplace_back(symbol);
  return static_cast<SpeciesCode>(symbols_.size() - 1);
}

const std::string& SpeciesTable::symbol(SpeciesCode code) const {
  if (code >= symbols_.size()) throw Error("species code " + std::to_string(code) + " out of range");
  return symbols_[code];
}

}  // namespace dispnet
