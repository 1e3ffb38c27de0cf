#include "dispnet/dataset.hpp"

#include <fstream>

#include "detail/binary_io.hpp"

namespace dispnet {

using detail::write_le;

void Dataset::validate() const {
  if (n_cut == 0 && !records.empty()) throw Error("dataset: n_cut must be positive");
  if (species.size() > 255) throw Error("dataset: at most 255 species");
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& c = records[r].cluster;
    if (c.positions.size() != n_cut || c.species.size() != n_cut) {
      throw Error("dataset: record " + std::to_string(r) + " does not have n_cut atoms");
    }
    for (auto s : c.species) {
      if (s >= species.size()) throw Error("dataset: record " + std::to_string(r) + " uses an unknown species code");
    }
  }
}

void write_dataset(std::ostream& out, const Dataset& data) {
  data.validate();
  out.write("MBDS", 4);
  write_le<std::uint32_t>(out, kDatasetVersion);
  write_le<std::uint32_t>(out, data.n_cut);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.species.size()));
  for (const auto& s : data.species.symbols()) {
    if (s.empty() || s.size() > 255) throw Error("dataset: species symbol length out of range");
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  write_le<std::uint64_t>(out, data.records.size());
  write_le<std::uint8_t>(out, data.forces_scaled ? 1 : 0);
  for (const auto& r : data.records) {
    out.write(reinterpret_cast<const char*>(r.cluster.species.data()), static_cast<std::streamsize>(data.n_cut));
    for (const auto& p : r.cluster.positions) {
      for (int k = 0; k < 3; ++k) write_le(out, p[k]);
    }
    for (int k = 0; k < 3; ++k) write_le(out, r.force[k]);
    write_le<std::int32_t>(out, r.unit_id);
    write_le<std::int32_t>(out, r.source);
  }
  if (!out) throw Error("dataset: write failed");
}

void write_dataset_file(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_dataset(out, data);
  out.close();
  if (!out) throw Error("dataset: write to '" + path + "' failed");
}

Dataset read_dataset(std::istream& in) {
  detail::Reader rd(in, "dataset");
  char magic[4];
  rd.bytes(magic, 4, "magic");
  if (std::string(magic, 4) != "MBDS") throw FormatError("dataset: bad magic (not an MBDS file)", 0);
  const auto version = rd.read<std::uint32_t>("version");
  if (version != kDatasetVersion) throw FormatError("dataset: unknown format version " + std::to_string(version), 4);

  Dataset d;
  d.n_cut = rd.read<std::uint32_t>("n_cut");
  const auto n_species = rd.read<std::uint32_t>("species count");
  if (n_species > 255) throw FormatError("dataset: species count out of range", rd.offset() - 4);
  std::vector<std::string> symbols;
  for (std::uint32_t s = 0; s < n_species; ++s) {
    const auto len = rd.read<std::uint8_t>("species symbol length");
    std::string sym(len, '\0');
    rd.bytes(sym.data(), len, "species symbol");
    symbols.push_back(std::move(sym));
  }
  d.species = SpeciesTable(symbols);
  const auto count = rd.read<std::uint64_t>("record count");
  const auto scaled = rd.read<std::uint8_t>("forces_scaled flag");
  if (scaled > 1) throw FormatError("dataset: invalid forces_scaled flag", rd.offset() - 1);
  d.forces_scaled = scaled == 1;
  if (count > 0 && d.n_cut == 0) throw FormatError("dataset: records present but n_cut is 0", rd.offset());

  d.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t r = 0; r < count; ++r) {
    const long long start = rd.offset();
    DatasetRecord rec;
    rec.cluster.species.resize(d.n_cut);
    rd.bytes(reinterpret_cast<char*>(rec.cluster.species.data()), d.n_cut, "record species");
    for (auto s : rec.cluster.species) {
      if (s >= n_species) throw FormatError("dataset: species code outside the table", start);
    }
    rec.cluster.positions.resize(d.n_cut);
    for (auto& p : rec.cluster.positions) {
      for (int k = 0; k < 3; ++k) p[k] = rd.read<double>("record positions");
    }
    for (int k = 0; k < 3; ++k) rec.force[k] = rd.read<double>("record force");
    rec.unit_id = rd.read<std::int32_t>("record unit id");
    rec.source = rd.read<std::int32_t>("record source tag");
    rec.cluster.center_source_index = -1;
    d.records.push_back(std::move(rec));
  }
  if (!rd.at_end()) throw FormatError("dataset: trailing bytes after the last record", rd.offset());
  return d;
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

}  // namespace dispnet
