#include "dispnet/xyz.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dispnet {

std::map<std::string, std::string> parse_xyz_metadata(const std::string& line) {
  std::map<std::string, std::string> out;
  std::size_t i = 0;
  const std::size_t n = line.size();
  auto skip_ws = [&] {
    while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  };
  while (true) {
    skip_ws();
    if (i >= n) break;
    std::size_t key_start = i;
    while (i < n && line[i] != '=' && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::string key = line.substr(key_start, i - key_start);
    if (i >= n || line[i] != '=') {
      out[key] = "";  // bare flag
      continue;
    }
    ++i;  // '='
    std::string value;
    if (i < n && line[i] == '"') {
      const std::size_t close = line.find('"', i + 1);
      if (close == std::string::npos) throw FormatError("unterminated quote in metadata key '" + key + "'");
      value = line.substr(i + 1, close - i - 1);
      i = close + 1;
    } else {
      std::size_t vstart = i;
      while (i < n && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      value = line.substr(vstart, i - vstart);
    }
    out[key] = value;
  }
  return out;
}

namespace {

std::array<bool, 3> parse_pbc(const std::string& value) {
  std::istringstream ss(value);
  std::array<bool, 3> flags{};
  for (auto& f : flags) {
    std::string tok;
    if (!(ss >> tok)) throw FormatError("pbc needs three flags, got '" + value + "'");
    if (tok == "T" || tok == "t" || tok == "True" || tok == "true" || tok == "1") {
      f = true;
    } else if (tok == "F" || tok == "f" || tok == "False" || tok == "false" || tok == "0") {
      f = false;
    } else {
      throw FormatError("bad pbc flag '" + tok + "'");
    }
  }
  return flags;
}

}  // namespace

AtomicSystem read_structure(std::istream& in, double bohr_per_angstrom, SpeciesTable table) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("structure file is empty");
  long long count = -1;
  {
    std::istringstream ss(line);
    if (!(ss >> count) || count < 0) throw FormatError("first line must be the atom count, got '" + line + "'");
  }
  if (!std::getline(in, line)) throw FormatError("missing metadata line");
  const auto meta = parse_xyz_metadata(line);

  AtomicSystem sys;
  std::array<bool, 3> pbc{true, true, true};
  if (auto it = meta.find("pbc"); it != meta.end()) pbc = parse_pbc(it->second);
  if (auto it = meta.find("Lattice"); it != meta.end()) {
    std::istringstream ss(it->second);
    Mat3 lattice;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (!(ss >> lattice(r, c))) throw FormatError("Lattice needs 9 numbers");
      }
    }
    if (pbc[0] || pbc[1] || pbc[2]) sys.cell = PeriodicCell(lattice * bohr_per_angstrom, pbc);
  }

  sys.positions.reserve(count);
  for (long long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw FormatError("expected " + std::to_string(count) + " atoms, file ends after " + std::to_string(i));
    }
    std::istringstream ss(line);
    std::string symbol;
    Vec3 r;
    if (!(ss >> symbol >> r[0] >> r[1] >> r[2])) {
      throw FormatError("malformed atom line " + std::to_string(i + 3) + ": '" + line + "'");
    }
    int chain = 0, unit = 0;
    if (ss >> chain) {
      if (!(ss >> unit)) throw FormatError("atom line " + std::to_string(i + 3) + " has a chain id but no unit id");
    }
    std::string extra;
    if (ss >> extra) throw FormatError("trailing token '" + extra + "' on atom line " + std::to_string(i + 3));
    sys.positions.push_back(r * bohr_per_angstrom);
    sys.species.push_back(table.add(symbol));
    sys.chain_ids.push_back(chain);
    sys.unit_ids.push_back(unit);
  }
  sys.species_table = std::move(table);
  sys.validate();
  return sys;
}

AtomicSystem read_structure_file(const std::string& path, double bohr_per_angstrom, SpeciesTable table) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open structure file '" + path + "'");
  try {
    return read_structure(in, bohr_per_angstrom, std::move(table));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_structure(std::ostream& out, const AtomicSystem& system, double bohr_per_angstrom) {
  system.validate();
  char buf[128];
  out << system.size() << '\n';
  if (system.cell) {
    const Mat3 l = system.cell->lattice() / bohr_per_angstrom;
    out << "Lattice=\"";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof buf, "%.12g", l(r, c));
        out << (r || c ? " " : "") << buf;
      }
    }
    const auto& p = system.cell->periodic();
    out << "\" pbc=\"" << (p[0] ? 'T' : 'F') << ' ' << (p[1] ? 'T' : 'F') << ' ' << (p[2] ? 'T' : 'F') << "\" ";
  } else {
    out << "pbc=\"F F F\" ";
  }
  out << "Properties=species:S:1:pos:R:3:chain_id:I:1:unit_id:I:1\n";
  for (std::size_t i = 0; i < system.size(); ++i) {
    const Vec3 r = system.positions[i] / bohr_per_angstrom;
    std::snprintf(buf, sizeof buf, " %.12f %.12f %.12f %d %d", r[0], r[1], r[2], system.chain_ids[i],
                  system.unit_ids[i]);
    out << system.species_table.symbol(system.species[i]) << buf << '\n';
  }
}

void write_structure_file(const std::string& path, const AtomicSystem& system, double bohr_per_angstrom) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write structure file '" + path + "'");
  write_structure(out, system, bohr_per_angstrom);
  if (!out) throw Error("write failed for '" + path + "'");
}

AtomicSystem cluster_to_system(const Cluster& cluster, const SpeciesTable& table) {
  AtomicSystem sys;
  sys.positions = cluster.positions;
  sys.species = cluster.species;
  sys.species_table = table;
  sys.unit_ids.assign(cluster.size(), 0);
  sys.chain_ids.assign(cluster.size(), 0);
  return sys;
}

}  // namespace dispnet
