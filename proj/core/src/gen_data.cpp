#include "dispnet/gen_data.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "dispnet/mbd.hpp"
#include "dispnet/parallel.hpp"

namespace dispnet {

std::vector<std::pair<std::size_t, std::size_t>> select_centers(const std::vector<AtomicSystem>& structures,
                                                                const GenDataOptions& options) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (!options.samples) {
    for (std::size_t s = 0; s < structures.size(); ++s) {
      for (std::size_t i = 0; i < structures[s].size(); ++i) out.emplace_back(s, i);
    }
    return out;
  }
  std::mt19937_64 rng(options.seed);
  std::vector<std::vector<std::size_t>> order(structures.size());
  for (std::size_t s = 0; s < structures.size(); ++s) {
    order[s].resize(structures[s].size());
    std::iota(order[s].begin(), order[s].end(), std::size_t{0});
    std::shuffle(order[s].begin(), order[s].end(), rng);
  }
  const std::size_t want = *options.samples;
  for (std::size_t round = 0; out.size() < want; ++round) {
    bool any = false;
    for (std::size_t s = 0; s < structures.size() && out.size() < want; ++s) {
      if (round < order[s].size()) {
        out.emplace_back(s, order[s][round]);
        any = true;
      }
    }
    if (!any) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

GenDataResult gen_data(const std::vector<AtomicSystem>& structures, const DispersionParams& params,
                       const GenDataOptions& options) {
  if (options.n_cut == 0) throw Error("gen_data: n_cut must be positive");
  params.validate();

  // One species table for the whole file; per-structure codes are remapped.
  SpeciesTable table;
  std::vector<std::vector<SpeciesCode>> remap(structures.size());
  for (std::size_t s = 0; s < structures.size(); ++s) {
    structures[s].validate();
    for (const auto& sym : structures[s].species_table.symbols()) remap[s].push_back(table.add(sym));
  }
  const DispersionModel model(params, table);
  for (const auto& sym : table.symbols()) params.at(sym);  // every element present must be parameterized

  const auto centers = select_centers(structures, options);
  std::vector<std::optional<DatasetRecord>> slots(centers.size());
  std::vector<std::string> errors(centers.size());

  parallel_for(centers.size(), options.workers, [&](std::size_t k) {
    const auto [s, atom] = centers[k];
    const AtomicSystem& sys = structures[s];
    try {
      DatasetRecord rec;
      rec.cluster = extract_cluster(sys, atom, options.n_cut);
      for (auto& code : rec.cluster.species) code = remap[s][code];
      rec.force = mbd::mbd_forces(rec.cluster, model, mbd::ForceTarget::center_only).at(0);
      rec.unit_id = sys.unit_ids.empty() ? -1 : sys.unit_ids[atom];
      rec.source = static_cast<std::int32_t>(s);
      slots[k] = std::move(rec);
    } catch (const Error& e) {
      errors[k] = "structure " + std::to_string(s) + " atom " + std::to_string(atom) + ": " + e.what();
    }
  });

  GenDataResult res;
  res.dataset.n_cut = static_cast<std::uint32_t>(options.n_cut);
  res.dataset.species = table;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k]) {
      res.dataset.records.push_back(std::move(*slots[k]));
    } else {
      ++res.skipped;
      res.skip_messages.push_back(errors[k]);
    }
  }
  return res;
}

}  // namespace dispnet
