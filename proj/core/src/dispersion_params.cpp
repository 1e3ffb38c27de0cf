#include "dispnet/dispersion_params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace dispnet {

namespace {

double parse_number(const std::string& text, const std::string& what, int line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw FormatError("line " + std::to_string(line_no) + ": bad number '" + text + "' for " + what);
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const SpeciesDispersion& DispersionParams::at(std::string_view symbol) const {
  auto it = species.find(symbol);
  if (it == species.end()) throw Error("no dispersion parameters for species '" + std::string(symbol) + "'");
  return it->second;
}

void DispersionParams::validate() const {
  if (!(beta > 0.0)) throw Error("dispersion parameter 'beta' must be set to a positive value");
  if (!(bohr_per_angstrom > 0.0)) throw Error("bohr_per_angstrom must be positive");
  for (const auto& [sym, s] : species) {
    if (!(s.alpha0_free > 0.0)) throw Error("alpha0_free for " + sym + " must be positive");
    if (!(s.c6_free > 0.0)) throw Error("c6_free for " + sym + " must be positive");
    if (!(s.volume_ratio > 0.0 && s.volume_ratio <= 2.0)) {
      throw Error("volume_ratio for " + sym + " must lie in (0, 2]");
    }
  }
}

DispersionParams parse_dispersion_params(std::istream& in) {
  DispersionParams p;
  bool have_beta = false;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head == "species") {
      std::string symbol;
      if (!(ss >> symbol)) throw FormatError("line " + std::to_string(line_no) + ": species needs a symbol");
      if (p.species.count(symbol)) throw FormatError("line " + std::to_string(line_no) + ": duplicate species " + symbol);
      SpeciesDispersion s;
      bool have_alpha = false, have_c6 = false;
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw FormatError("line " + std::to_string(line_no) + ": expected key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "alpha0_free") {
          s.alpha0_free = parse_number(val, key, line_no);
          have_alpha = true;
        } else if (key == "c6_free") {
          s.c6_free = parse_number(val, key, line_no);
          have_c6 = true;
        } else if (key == "volume_ratio") {
          s.volume_ratio = parse_number(val, key, line_no);
        } else {
          throw FormatError("line " + std::to_string(line_no) + ": unknown species key '" + key + "'");
        }
      }
      if (!have_alpha || !have_c6) {
        throw FormatError("line " + std::to_string(line_no) + ": species " + symbol + " needs alpha0_free and c6_free");
      }
      p.species.emplace(symbol, s);
      continue;
    }

    // global "key = value" (spaces around '=' optional)
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(line_no) + ": cannot parse '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "beta") {
      p.beta = parse_number(val, key, line_no);
      have_beta = true;
    } else if (key == "bohr_per_angstrom") {
      p.bohr_per_angstrom = parse_number(val, key, line_no);
    } else {
      throw FormatError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!have_beta) throw FormatError("parameter file does not set 'beta'");
  p.validate();
  return p;
}

DispersionParams read_dispersion_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open parameter file '" + path + "'");
  try {
    return parse_dispersion_params(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

DispersionModel::DispersionModel(const DispersionParams& params, const SpeciesTable& table)
    : beta_(params.beta), table_(table) {
  params.validate();
  entries_.resize(table.size());
  for (std::size_t c = 0; c < table.size(); ++c) {
    auto it = params.species.find(table.symbol(static_cast<SpeciesCode>(c)));
    if (it != params.species.end()) entries_[c] = it->second;
  }
}

const SpeciesDispersion& DispersionModel::at(SpeciesCode code) const {
  if (code >= entries_.size() || !entries_[code]) {
    const std::string name = code < table_.size() ? table_.symbol(code) : "#" + std::to_string(code);
    throw Error("no dispersion parameters for species '" + name + "'");
  }
  return *entries_[code];
}

}  // namespace dispnet
