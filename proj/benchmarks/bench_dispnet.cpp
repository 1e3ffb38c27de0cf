#include <benchmark/benchmark.h>

#include "dispnet/geometry.hpp"
#include "dispnet/mbd.hpp"
#include "dispnet/melt.hpp"
#include "dispnet/pairwise.hpp"
#include "dispnet/surrogate.hpp"

namespace {

using namespace dispnet;

const AtomicSystem& melt() {
  static const AtomicSystem sys = [] {
    MeltOptions o;
    o.kind = PolymerKind::PE;
    o.chains = 2;
    o.monomers_per_chain = 150;
    o.seed = 1;
    return generate_synthetic_melt(o, PeriodicCell::cubic(30.0 * kBohrPerAngstrom));
  }();
  return sys;
}

// Same choices as data/polymer.params; kept inline so the benchmark runs from any directory.
const DispersionModel& dispersion() {
  static const DispersionModel m = [] {
    DispersionParams p;
    p.beta = 1.1;
    p.species["H"] = SpeciesDispersion{4.5, 6.5, 0.70};
    p.species["C"] = SpeciesDispersion{12.0, 46.6, 0.85};
    p.species["Cl"] = SpeciesDispersion{15.0, 94.6, 0.85};
    return DispersionModel(p, melt().species_table);
  }();
  return m;
}

Cluster cluster(std::int64_t n) { return extract_cluster(melt(), 0, static_cast<std::size_t>(n)); }

void BM_MbdEnergy(benchmark::State& state) {
  const Cluster c = cluster(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mbd::mbd_energy(c, dispersion()).energy);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MbdEnergy)->RangeMultiplier(2)->Range(25, 400)->Unit(benchmark::kMillisecond)->Complexity();

void BM_MbdCenterForce(benchmark::State& state) {
  const Cluster c = cluster(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mbd::mbd_forces(c, dispersion(), mbd::ForceTarget::center_only));
}
BENCHMARK(BM_MbdCenterForce)->RangeMultiplier(2)->Range(25, 400)->Unit(benchmark::kMillisecond);

void BM_MbdAllForces(benchmark::State& state) {
  const Cluster c = cluster(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mbd::mbd_forces(c, dispersion(), mbd::ForceTarget::all));
}
BENCHMARK(BM_MbdAllForces)->RangeMultiplier(2)->Range(25, 200)->Unit(benchmark::kMillisecond);

void BM_PairwiseForces(benchmark::State& state) {
  const Cluster c = cluster(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(pairwise::pw_energy_forces(c, dispersion()).energy);
}
BENCHMARK(BM_PairwiseForces)->RangeMultiplier(4)->Range(25, 400);

surrogate::ModelConfig surrogate_config(std::int64_t n_cut) {
  surrogate::ModelConfig c;
  c.n_cut = static_cast<int>(n_cut);
  c.n_extra = std::min(50, c.n_cut - c.p - 1);
  return c;
}

void BM_SurrogateForce(benchmark::State& state) {
  const surrogate::Model m(surrogate_config(state.range(0)));
  const auto p = m.init_params(0);
  const Cluster c = cluster(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(m.force(c, p));
  state.counters["atoms/s"] = benchmark::Counter(static_cast<double>(state.range(0)), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_SurrogateForce)->Arg(100)->Arg(300)->Unit(benchmark::kMicrosecond);

void BM_ForceLossGradient(benchmark::State& state) {
  const surrogate::Model m(surrogate_config(state.range(0)));
  const auto p = m.init_params(0);
  auto g = p.zeros_like();
  diff::Workspace ws;
  const Cluster c = cluster(state.range(0));
  const Vec3 target(1.0, -0.5, 0.2);
  for (auto _ : state) {
    g.set_zero();
    benchmark::DoNotOptimize(m.force_loss_gradient(c, target, 1.0, p, g, ws));
  }
}
BENCHMARK(BM_ForceLossGradient)->Arg(100)->Arg(300)->Unit(benchmark::kMicrosecond);

void BM_SurrogateHessianRows(benchmark::State& state) {
  const surrogate::Model m(surrogate_config(state.range(0)));
  const auto p = m.init_params(0);
  const Cluster c = cluster(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(m.hessian_rows(c, p));
}
BENCHMARK(BM_SurrogateHessianRows)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_ClusterExtraction(benchmark::State& state) {
  const auto& sys = melt();
  std::size_t center = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_cluster(sys, center, static_cast<std::size_t>(state.range(0))));
    center = (center + 37) % sys.size();
  }
}
BENCHMARK(BM_ClusterExtraction)->Arg(100)->Arg(300);

}  // namespace
BENCHMARK_MAIN();
