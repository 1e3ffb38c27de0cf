#include <doctest.h>

#include <sstream>

#include "dispnet/checkpoint.hpp"
#include "dispnet/dataset.hpp"
#include "dispnet/gen_data.hpp"
#include "dispnet/mbd.hpp"
#include "support.hpp"

using namespace dispnet;

namespace {

Dataset random_dataset(std::uint64_t seed, std::size_t count, int n_cut) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1e-3);
  Dataset d;
  d.n_cut = static_cast<std::uint32_t>(n_cut);
  d.species = SpeciesTable::polymer_default();
  for (std::size_t i = 0; i < count; ++i) {
    DatasetRecord r;
    r.cluster = test::random_cluster(rng, static_cast<std::size_t>(n_cut), 8.0, 1.5);
    r.force = Vec3(n(rng), n(rng), n(rng));
    r.unit_id = static_cast<std::int32_t>(i / 3);
    r.source = static_cast<std::int32_t>(i % 2);
    d.records.push_back(std::move(r));
  }
  return d;
}

std::string serialize(const Dataset& d) {
  std::ostringstream out(std::ios::binary);
  write_dataset(out, d);
  return out.str();
}

AtomicSystem small_melt(std::uint64_t seed) {
  MeltOptions o;
  o.kind = PolymerKind::PVC;
  o.chains = 1;
  o.monomers_per_chain = 12;
  o.seed = seed;
  return generate_synthetic_melt(o, PeriodicCell::cubic(14.0 * kBohrPerAngstrom));
}

}  // namespace

TEST_SUITE("dataio_cli") {

TEST_CASE("dataset round trip is bit exact") {
  const Dataset d = random_dataset(1, 25, 7);
  const std::string bytes = serialize(d);
  CHECK(bytes.size() == 4 + 4 + 4 + 4 + (1 + 1) + (1 + 1) + (1 + 2) + 8 + 1 + 25 * (7 + 7 * 24 + 24 + 8));
  std::istringstream in(bytes, std::ios::binary);
  const Dataset back = read_dataset(in);
  CHECK(back.n_cut == d.n_cut);
  CHECK(back.species.symbols() == d.species.symbols());
  CHECK(back.records == d.records);
  CHECK(serialize(back) == bytes);
}

TEST_CASE("empty dataset is valid") {
  Dataset d;
  d.n_cut = 10;
  d.species = SpeciesTable::polymer_default();
  std::istringstream in(serialize(d), std::ios::binary);
  const Dataset back = read_dataset(in);
  CHECK(back.records.empty());
  CHECK(back.n_cut == 10);
}

TEST_CASE("dataset reader diagnostics") {
  const std::string bytes = serialize(random_dataset(2, 4, 5));
  SUBCASE("truncation reports the byte offset") {
    for (std::size_t cut : {std::size_t{3}, std::size_t{30}, bytes.size() - 1}) {
      std::istringstream in(bytes.substr(0, cut), std::ios::binary);
      try {
        read_dataset(in);
        FAIL("truncated file accepted");
      } catch (const FormatError& e) {
        CHECK(e.offset() == static_cast<long long>(cut));
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
      }
    }
  }
  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    std::istringstream in(b, std::ios::binary);
    CHECK_THROWS_WITH(read_dataset(in), doctest::Contains("magic"));
  }
  SUBCASE("trailing bytes") {
    std::istringstream in(bytes + "zz", std::ios::binary);
    CHECK_THROWS_WITH(read_dataset(in), doctest::Contains("trailing"));
  }
  SUBCASE("invalid records are refused on write") {
    Dataset d = random_dataset(3, 2, 5);
    d.records[1].cluster.species[2] = 9;
    std::ostringstream out;
    CHECK_THROWS_AS(write_dataset(out, d), Error);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint ck;
  ck.config = test::toy_config(12);
  ck.config.rbf_trainable = false;
  ck.species = SpeciesTable::polymer_default();
  const surrogate::Model m(ck.config);
  ck.params = test::perturbed_params(m, 5);
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, ck);
  std::istringstream in(out.str(), std::ios::binary);
  const Checkpoint back = read_checkpoint(in);
  CHECK(back.params == ck.params);
  CHECK(back.species.symbols() == ck.species.symbols());
  CHECK(back.config.n_cut == 12);
  CHECK(back.config.p == ck.config.p);
  CHECK(back.config.n_extra == ck.config.n_extra);
  CHECK(back.config.n_rbf == ck.config.n_rbf);
  CHECK(back.config.embedding_width == ck.config.embedding_width);
  CHECK(back.config.rbf_trainable == false);
  CHECK(back.config.force_scale == ck.config.force_scale);
  CHECK(back.config.rbf_gamma0 == ck.config.rbf_gamma0);
  Cluster c = [] {
    std::mt19937_64 rng(8);
    return test::random_cluster(rng, 12, 6.0, 1.8);
  }();
  CHECK(surrogate::Model(back.config).force(c, back.params) == m.force(c, ck.params));

  const std::string bytes = out.str();
  std::istringstream cut(bytes.substr(0, bytes.size() - 8), std::ios::binary);
  CHECK_THROWS_AS(read_checkpoint(cut), FormatError);
  std::istringstream extra(bytes + "x", std::ios::binary);
  CHECK_THROWS_AS(read_checkpoint(extra), FormatError);
}

TEST_CASE("gen_data produces reference MBD forces") {
  const auto params = read_dispersion_params_file((test::data_dir() / "polymer.params").string());
  const std::vector<AtomicSystem> structures{small_melt(1), small_melt(2)};
  GenDataOptions o;
  o.n_cut = 24;
  o.samples = 14;
  o.seed = 3;
  const auto r = gen_data(structures, params, o);
  CHECK(r.skipped == 0);
  REQUIRE(r.dataset.records.size() == 14);
  CHECK(r.dataset.n_cut == 24);
  int per_source[2] = {0, 0};
  for (const auto& rec : r.dataset.records) ++per_source[rec.source];
  CHECK(per_source[0] == 7);  // round-robin over structures
  CHECK(per_source[1] == 7);

  const auto centers = select_centers(structures, o);
  const DispersionModel model(params, r.dataset.species);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto& rec = r.dataset.records[k];
    const auto [s, atom] = centers[k];
    const Cluster c = extract_cluster(structures[s], atom, 24);
    CHECK(c.positions == rec.cluster.positions);
    CHECK(rec.unit_id == structures[s].unit_ids[atom]);
    const Vec3 f = mbd::mbd_forces(rec.cluster, model).at(0);
    CHECK((f - rec.force).norm() <= 1e-12 * f.norm());
  }

  auto o2 = o;
  o2.workers = 3;
  CHECK(serialize(gen_data(structures, params, o2).dataset) == serialize(r.dataset));

  o2.seed = 4;
  CHECK(serialize(gen_data(structures, params, o2).dataset) != serialize(r.dataset));
}

TEST_CASE("gen_data over all atoms and with too few neighbours") {
  const auto params = read_dispersion_params_file((test::data_dir() / "polymer.params").string());
  AtomicSystem open;
  open.species_table = SpeciesTable::polymer_default();
  open.positions = {Vec3::Zero(), Vec3(3, 0, 0), Vec3(0, 3, 0)};
  open.species = {1, 0, 0};
  open.unit_ids = {0, 0, 0};
  open.chain_ids = {0, 0, 0};
  GenDataOptions o;
  o.n_cut = 3;
  auto r = gen_data({open}, params, o);
  CHECK(r.dataset.records.size() == 3);
  CHECK(r.dataset.records[2].unit_id == 0);
  o.n_cut = 4;
  r = gen_data({open}, params, o);
  CHECK(r.skipped == 3);
  CHECK(r.skip_messages[0].find("short by") != std::string::npos);
  o.n_cut = 0;
  CHECK_THROWS_AS(gen_data({open}, params, o), Error);
}

}  // TEST_SUITE
