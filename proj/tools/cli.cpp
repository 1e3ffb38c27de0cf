#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "dispnet/checkpoint.hpp"
#include "dispnet/dataset.hpp"
#include "dispnet/evaluation.hpp"
#include "dispnet/gen_data.hpp"
#include "dispnet/mbd.hpp"
#include "dispnet/melt.hpp"
#include "dispnet/pairwise.hpp"
#include "dispnet/parallel.hpp"
#include "dispnet/training.hpp"
#include "dispnet/xyz.hpp"

namespace dispnet::cli {

namespace {

struct GenMeltArgs {
  std::string kind = "PE";
  int chains = 2;
  int monomers = 150;
  double box = 30.0;  // Angstrom, cubic
  std::uint64_t seed = 0;
  double exclusion = 2.0;
  std::string out;
};

struct GenDataArgs {
  std::vector<std::string> structures;
  std::string params;
  std::size_t n_cut = 1000;
  int workers = default_workers();
  std::size_t samples = 0;  // 0: every atom
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::string best;     // default <out>.best
  std::string history;  // default <out>.history
  training::TrainConfig cfg;
  std::string batching = "normal";
  std::size_t unit_size = 0;
  int embedding_width = 32;
  int n_rbf = 100;
  int p = 2;
  int n_extra = 50;
  bool rbf_fixed = false;
  std::uint64_t init_seed = 0;
};

struct EvalArgs {
  std::string data;
  std::string model;
  int workers = default_workers();
};

struct PredictArgs {
  std::string cluster;
  std::string model;
  std::size_t center = 0;
};

struct HessianArgs {
  std::string structure;
  std::size_t center = 0;
  std::size_t n_cut = 300;
  std::string engine = "mbd";
  std::string params;
  std::string model;
  std::string damping = "none";
  double step = 5e-3;
  double window_lower = 0.5;
  double window_upper = 0.95;
  std::string out;
};

struct BenchArgs {
  std::string model;
  std::size_t batch = 1000;
  int workers = default_workers();
  std::uint64_t seed = 0;
};

void log_settings(const CLI::App& sub, std::ostream& err) {
  err << "# " << sub.get_name() << " settings\n";
  std::istringstream lines(sub.config_to_str(true, false));
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) err << "#   " << line << '\n';
  }
}

// Remaps a structure's species codes onto the checkpoint's table.
AtomicSystem remap_species(AtomicSystem sys, const SpeciesTable& target) {
  for (auto& s : sys.species) s = target.code(sys.species_table.symbol(s));
  sys.species_table = target;
  return sys;
}

int cmd_gen_melt(const GenMeltArgs& a, std::ostream& out) {
  MeltOptions o;
  o.kind = parse_polymer_kind(a.kind);
  o.chains = a.chains;
  o.monomers_per_chain = a.monomers;
  o.seed = a.seed;
  o.exclusion_radius = a.exclusion;
  const auto sys = generate_synthetic_melt(o, PeriodicCell::cubic(a.box * kBohrPerAngstrom));
  write_structure_file(a.out, sys);
  out << "wrote " << sys.size() << " atoms to " << a.out << '\n';
  return 0;
}

int cmd_gen_data(const GenDataArgs& a, std::ostream& out, std::ostream& err) {
  const auto params = read_dispersion_params_file(a.params);
  std::vector<AtomicSystem> structures;
  for (const auto& path : a.structures) structures.push_back(read_structure_file(path, params.bohr_per_angstrom));
  GenDataOptions o;
  o.n_cut = a.n_cut;
  o.workers = a.workers;
  o.seed = a.seed;
  if (a.samples > 0) o.samples = a.samples;
  const auto res = gen_data(structures, params, o);
  for (const auto& m : res.skip_messages) err << "skipped: " << m << '\n';
  write_dataset_file(a.out, res.dataset);
  out << "wrote " << res.dataset.records.size() << " records to " << a.out << " (" << res.skipped << " skipped)\n";
  return 0;
}

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  const Dataset data = read_dataset_file(a.data);
  if (data.records.empty()) throw Error("dataset '" + a.data + "' has no records");
  if (data.forces_scaled) throw Error("dataset forces are already scaled; expected physical forces");
  a.cfg.batching = training::parse_batching_mode(a.batching);
  a.cfg.unit_size = a.unit_size;

  surrogate::ModelConfig mc;
  mc.embedding_width = a.embedding_width;
  mc.n_rbf = a.n_rbf;
  mc.p = a.p;
  mc.n_extra = a.n_extra;
  mc.n_cut = static_cast<int>(data.n_cut);
  mc.n_species = static_cast<int>(data.species.size());
  mc.rbf_trainable = !a.rbf_fixed;
  mc.force_scale = a.cfg.force_scale;
  const surrogate::Model model(mc);
  const auto init = model.init_params(a.init_seed);

  const std::string best_path = a.best.empty() ? a.out + ".best" : a.best;
  const std::string history_path = a.history.empty() ? a.out + ".history" : a.history;
  std::ofstream history(history_path);
  if (!history) throw Error("cannot open history log '" + history_path + "'");
  history << "# epoch train_loss val_loss lr wall_seconds\n";

  const auto res = training::train(
      data.records, model, init, a.cfg,
      [&](const training::EpochLog& log, const diff::ParameterSet&) {
        history << training::format_history_line(log) << '\n' << std::flush;
        err << training::format_history_line(log) << '\n';
        return true;
      },
      [&](const std::string& w) { err << "warning: " << w << '\n'; });

  write_checkpoint_file(a.out, {mc, data.species, res.final_params});
  write_checkpoint_file(best_path, {mc, data.species, res.best_params});
  if (res.diverged) {
    err << "error: " << res.message << '\n';
    return 1;
  }
  out << "trained " << res.history.size() << " epochs; final checkpoint " << a.out << ", best (epoch "
      << res.best_epoch << ") " << best_path << '\n';
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Dataset data = read_dataset_file(a.data);
  const Checkpoint ck = read_checkpoint_file(a.model);
  if (static_cast<int>(data.n_cut) != ck.config.n_cut) throw Error("dataset n_cut differs from the model's");
  if (data.species.symbols() != ck.species.symbols()) throw Error("dataset and model species tables differ");
  if (data.records.empty()) throw Error("dataset has no records");
  const surrogate::Model model(ck.config);
  std::vector<Vec3> pred(data.records.size()), ref(data.records.size());
  std::vector<SpeciesCode> species(data.records.size());
  parallel_for(data.records.size(), a.workers, [&](std::size_t i) {
    thread_local diff::Workspace ws;
    const auto& r = data.records[i];
    pred[i] = model.force(r.cluster, ck.params, ws) / ck.config.force_scale;
    ref[i] = r.force;
    species[i] = r.cluster.species[0];
  });
  out << evaluation::format_report(evaluation::evaluate(pred, ref, species, data.species));
  return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Checkpoint ck = read_checkpoint_file(a.model);
  AtomicSystem sys = read_structure_file(a.cluster);
  sys = remap_species(std::move(sys), ck.species);
  const Cluster c = extract_cluster(sys, a.center, static_cast<std::size_t>(ck.config.n_cut));
  const surrogate::Model model(ck.config);
  const Vec3 f = model.force(c, ck.params) / ck.config.force_scale;
  char line[128];
  std::snprintf(line, sizeof line, "%.12e %.12e %.12e\n", f[0], f[1], f[2]);
  out << line;
  return 0;
}

int cmd_hessian(const HessianArgs& a, std::ostream& out) {
  std::vector<Mat3> rows;
  Cluster c;
  if (a.engine == "surrogate") {
    if (a.model.empty()) throw Error("--model is required for the surrogate engine");
    const Checkpoint ck = read_checkpoint_file(a.model);
    const auto sys = remap_species(read_structure_file(a.structure), ck.species);
    c = extract_cluster(sys, a.center, static_cast<std::size_t>(ck.config.n_cut));
    rows = surrogate::Model(ck.config).hessian_rows(c, ck.params);
  } else if (a.engine == "mbd" || a.engine == "pw") {
    if (a.params.empty()) throw Error("--params is required for the " + a.engine + " engine");
    const auto params = read_dispersion_params_file(a.params);
    const auto sys = read_structure_file(a.structure, params.bohr_per_angstrom);
    c = extract_cluster(sys, a.center, a.n_cut);
    const DispersionModel model(params, sys.species_table);
    if (a.engine == "mbd") {
      rows = evaluation::mbd_hessian_rows(c, model, a.step);
    } else {
      pairwise::DampingConfig d;
      if (a.damping == "fermi") d.kind = pairwise::DampingKind::fermi;
      else if (a.damping != "none") throw Error("unknown damping '" + a.damping + "' (expected none or fermi)");
      rows = evaluation::pairwise_hessian_rows(c, model, d, a.step);
    }
  } else {
    throw Error("unknown engine '" + a.engine + "' (expected mbd, pw or surrogate)");
  }
  const auto profile = evaluation::make_profile(c, rows, {a.window_lower, a.window_upper});
  const std::string text = evaluation::format_profile(profile);
  if (a.out.empty()) {
    out << text;
  } else {
    std::ofstream f(a.out);
    if (!f) throw Error("cannot open '" + a.out + "' for writing");
    f << text;
    out << "tail exponent " << profile.exponent << " (" << profile.fit_points << " points); profile written to "
        << a.out << '\n';
  }
  return 0;
}

// Random clusters at roughly melt density; the surrogate only needs distinct positions.
std::vector<Cluster> bench_clusters(const Checkpoint& ck, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> sp(0, ck.config.n_species - 1);
  const double density = 0.1 / std::pow(kBohrPerAngstrom, 3);  // atoms per Bohr^3
  const double radius = std::cbrt(3.0 * ck.config.n_cut / (4.0 * 3.14159265358979 * density));
  std::vector<Cluster> out;
  const std::size_t distinct = std::min<std::size_t>(count, 16);
  for (std::size_t k = 0; k < distinct; ++k) {
    std::vector<Vec3> pts{Vec3::Zero()};
    while (static_cast<int>(pts.size()) < ck.config.n_cut) {
      const Vec3 p(u(rng), u(rng), u(rng));
      if (p.norm() <= 1.0 && p.norm() > 1e-3) pts.push_back(radius * p);
    }
    std::stable_sort(pts.begin() + 1, pts.end(), [](const Vec3& a, const Vec3& b) { return a.norm() < b.norm(); });
    Cluster c;
    c.positions = pts;
    for (std::size_t i = 0; i < pts.size(); ++i) c.species.push_back(static_cast<SpeciesCode>(sp(rng)));
    out.push_back(std::move(c));
  }
  return out;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.batch == 0) throw Error("--batch must be positive");
  const Checkpoint ck = read_checkpoint_file(a.model);
  const surrogate::Model model(ck.config);
  const auto clusters = bench_clusters(ck, a.batch, a.seed);
  std::vector<Vec3> forces(a.batch);
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(a.batch, a.workers, [&](std::size_t i) {
    thread_local diff::Workspace ws;
    forces[i] = model.force(clusters[i % clusters.size()], ck.params, ws);
  });
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  char line[160];
  std::snprintf(line, sizeof line, "batch %zu, workers %d, n_cut %d: %.4f ms/atom (%.1f ms total)\n", a.batch,
                a.workers, ck.config.n_cut, ms / static_cast<double>(a.batch), ms);
  out << line;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"dispnet: many-body dispersion reference forces and a trimmed continuous-filter surrogate"};
  app.name("dispnet");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  GenMeltArgs gm;
  auto* s_melt = app.add_subcommand("gen-melt", "Generate a synthetic PE/PP/PVC melt as extended XYZ");
  s_melt->add_option("--kind", gm.kind, "Polymer: PE, PP or PVC");
  s_melt->add_option("--chains", gm.chains, "Number of chains")->check(CLI::PositiveNumber);
  s_melt->add_option("--monomers", gm.monomers, "Monomers per chain")->check(CLI::PositiveNumber);
  s_melt->add_option("--box", gm.box, "Cubic box edge (Angstrom)")->check(CLI::PositiveNumber);
  s_melt->add_option("--seed", gm.seed, "Random seed");
  s_melt->add_option("--exclusion", gm.exclusion, "Minimum non-bonded distance (Angstrom)")->check(CLI::PositiveNumber);
  s_melt->add_option("--out", gm.out, "Output structure file")->required();

  GenDataArgs gd;
  auto* s_data = app.add_subcommand("gen-data", "Compute reference MBD center forces for cutoff clusters");
  s_data->add_option("--structure", gd.structures, "Input structure file(s); the source tag is the position in this list")
      ->required();
  s_data->add_option("--params", gd.params, "Dispersion parameter file")->required();
  s_data->add_option("--n-cut", gd.n_cut, "Atoms per cluster")->check(CLI::PositiveNumber);
  s_data->add_option("--workers", gd.workers, "Worker threads (default from DISPNET_WORKERS)")->check(CLI::PositiveNumber);
  s_data->add_option("--samples", gd.samples, "Total records drawn round-robin over structures (0 = all atoms)");
  s_data->add_option("--seed", gd.seed, "Sampling seed");
  s_data->add_option("--out", gd.out, "Output dataset file")->required();

  TrainArgs tr;
  tr.cfg.workers = default_workers();
  auto* s_train = app.add_subcommand("train", "Train the surrogate by force matching");
  s_train->add_option("--data", tr.data, "Training dataset")->required();
  s_train->add_option("--out", tr.out, "Final checkpoint path")->required();
  s_train->add_option("--best", tr.best, "Best-validation checkpoint path (default <out>.best)");
  s_train->add_option("--history", tr.history, "Per-epoch log (default <out>.history)");
  s_train->add_option("--epochs", tr.cfg.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  s_train->add_option("--batch-size", tr.cfg.batch_size, "Records per batch")->check(CLI::PositiveNumber);
  s_train->add_option("--lr-initial", tr.cfg.lr_initial, "Learning rate before the switch");
  s_train->add_option("--lr-final", tr.cfg.lr_final, "Learning rate after the switch");
  s_train->add_option("--lr-switch-epoch", tr.cfg.lr_switch_epoch, "First epoch using --lr-final");
  s_train->add_option("--weight-decay", tr.cfg.weight_decay, "AdamW decoupled weight decay");
  s_train->add_option("--adam-beta1", tr.cfg.adam.beta1, "Adam first-moment decay");
  s_train->add_option("--adam-beta2", tr.cfg.adam.beta2, "Adam second-moment decay");
  s_train->add_option("--adam-eps", tr.cfg.adam.epsilon, "Adam epsilon");
  s_train->add_option("--force-scale", tr.cfg.force_scale, "Target force scaling factor")->check(CLI::PositiveNumber);
  s_train->add_option("--val-fraction", tr.cfg.val_fraction, "Validation fraction per source tag");
  s_train->add_option("--seed", tr.cfg.seed, "Split and shuffle seed");
  s_train->add_option("--batching", tr.batching, "normal or unit");
  s_train->add_option("--unit-size", tr.unit_size, "Records per monomer unit (0 = infer)");
  s_train->add_option("--workers", tr.cfg.workers, "Worker threads per batch")->check(CLI::PositiveNumber);
  s_train->add_option("--embedding-width", tr.embedding_width, "Embedding width P")->check(CLI::PositiveNumber);
  s_train->add_option("--n-rbf", tr.n_rbf, "Number of radial basis functions")->check(CLI::PositiveNumber);
  s_train->add_option("--p", tr.p, "Center neighbours with extra connections")->check(CLI::NonNegativeNumber);
  s_train->add_option("--n-extra", tr.n_extra, "Extra-connection window")->check(CLI::NonNegativeNumber);
  s_train->add_flag("--rbf-fixed", tr.rbf_fixed, "Freeze the radial basis centers and widths");
  s_train->add_option("--init-seed", tr.init_seed, "Parameter initialization seed");

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "Report MARE, per-species errors and force angles on a dataset");
  s_eval->add_option("--data", ev.data, "Test dataset")->required();
  s_eval->add_option("--model", ev.model, "Checkpoint")->required();
  s_eval->add_option("--workers", ev.workers, "Worker threads")->check(CLI::PositiveNumber);

  PredictArgs pr;
  auto* s_pred = app.add_subcommand("predict", "Print the center-atom force (Hartree/Bohr) for one cluster");
  s_pred->add_option("--cluster", pr.cluster, "Structure file holding the cluster")->required();
  s_pred->add_option("--model", pr.model, "Checkpoint")->required();
  s_pred->add_option("--center", pr.center, "Center atom index within the file");

  HessianArgs hs;
  auto* s_hess = app.add_subcommand("hessian", "Condensed-Hessian distance profile and tail exponent");
  s_hess->add_option("--structure", hs.structure, "Structure file")->required();
  s_hess->add_option("--center", hs.center, "Center atom index");
  s_hess->add_option("--n-cut", hs.n_cut, "Cluster size (mbd and pw engines)")->check(CLI::PositiveNumber);
  s_hess->add_option("--engine", hs.engine, "mbd, pw or surrogate");
  s_hess->add_option("--params", hs.params, "Dispersion parameter file (mbd, pw)");
  s_hess->add_option("--model", hs.model, "Checkpoint (surrogate)");
  s_hess->add_option("--damping", hs.damping, "Pairwise damping: none or fermi");
  s_hess->add_option("--step", hs.step, "Finite-difference step (Bohr)")->check(CLI::PositiveNumber);
  s_hess->add_option("--window-lower", hs.window_lower, "Tail window start, fraction of the cluster radius");
  s_hess->add_option("--window-upper", hs.window_upper, "Tail window end, fraction of the cluster radius");
  s_hess->add_option("--out", hs.out, "Profile output file (default: stdout)");

  BenchArgs bn;
  auto* s_bench = app.add_subcommand("bench", "Time surrogate force inference");
  s_bench->add_option("--model", bn.model, "Checkpoint")->required();
  s_bench->add_option("--batch", bn.batch, "Clusters per timed batch")->check(CLI::PositiveNumber);
  s_bench->add_option("--workers", bn.workers, "Worker threads")->check(CLI::PositiveNumber);
  s_bench->add_option("--seed", bn.seed, "Seed for the synthetic clusters");

  if (argc <= 1) {
    err << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) log_settings(*sub, err);
    if (*s_melt) return cmd_gen_melt(gm, out);
    if (*s_data) return cmd_gen_data(gd, out, err);
    if (*s_train) return cmd_train(tr, out, err);
    if (*s_eval) return cmd_eval(ev, out);
    if (*s_pred) return cmd_predict(pr, out);
    if (*s_hess) return cmd_hessian(hs, out);
    if (*s_bench) return cmd_bench(bn, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace dispnet::cli
