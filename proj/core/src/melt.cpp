#include "dispnet/melt.hpp"

#include <cmath>
#include <algorithm>
#include <array>
#include <map>
#include <numbers>
#include <random>

namespace dispnet {

PolymerKind parse_polymer_kind(std::string_view name) {
  if (name == "PE" || name == "pe") return PolymerKind::PE;
  if (name == "PP" || name == "pp") return PolymerKind::PP;
  if (name == "PVC" || name == "pvc") return PolymerKind::PVC;
  throw Error("unknown polymer kind '" + std::string(name) + "' (expected PE, PP or PVC)");
}

std::string_view to_string(PolymerKind kind) {
  switch (kind) {
    case PolymerKind::PE: return "PE";
    case PolymerKind::PP: return "PP";
    case PolymerKind::PVC: return "PVC";
  }
  return "?";
}

int unit_size(PolymerKind kind) {
  switch (kind) {
    case PolymerKind::PE: return 3;
    case PolymerKind::PP: return 9;
    case PolymerKind::PVC: return 6;
  }
  return 0;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct PlacedAtom {
  Vec3 pos;  // Angstrom
  int chain;
  int backbone;
};

struct PendingAtom {
  Vec3 pos;
  SpeciesCode species;
  int carbon;  // owning backbone carbon within the chain
};

// Cell list over the fractional coordinates of a fully periodic box. Bins are
// at least `radius` wide, so any pair closer than `radius` sits in adjacent bins.
// Removal is LIFO, matching the order in which a growing chain is unwound.
class ClashGrid {
 public:
  ClashGrid(const PeriodicCell& box, double radius) : box_(box), r2_(radius * radius) {
    const Mat3& l = box.lattice();
    for (int k = 0; k < 3; ++k) {
      const Vec3 a = l.row((k + 1) % 3), b = l.row((k + 2) % 3);
      const double width = box.volume() / a.cross(b).norm();
      n_[k] = std::max(1, static_cast<int>(std::floor(width / radius)));
    }
    bins_.resize(static_cast<std::size_t>(n_[0]) * n_[1] * n_[2]);
  }

  void push(const PlacedAtom& atom) {
    const int b = bin_of(atom.pos);
    bins_[b].push_back(static_cast<int>(atoms_.size()));
    atoms_.push_back(atom);
    atom_bins_.push_back(b);
  }

  void pop() {
    bins_[atom_bins_.back()].pop_back();
    atoms_.pop_back();
    atom_bins_.pop_back();
  }

  std::size_t size() const noexcept { return atoms_.size(); }
  const PlacedAtom& operator[](std::size_t i) const { return atoms_[i]; }

  // Pairs on the same chain within two backbone carbons are bonded or geminal and never clash.
  bool clashes(const Vec3& pos, int chain, int carbon) const {
    const std::array<int, 3> home = bin_coords(pos);
    std::array<std::vector<int>, 3> range;
    for (int k = 0; k < 3; ++k) {
      if (n_[k] >= 3) {
        for (int o = -1; o <= 1; ++o) range[k].push_back((home[k] + o + n_[k]) % n_[k]);
      } else {
        for (int o = 0; o < n_[k]; ++o) range[k].push_back(o);
      }
    }
    for (int x : range[0]) {
      for (int y : range[1]) {
        for (int z : range[2]) {
          for (int idx : bins_[(x * n_[1] + y) * n_[2] + z]) {
            const PlacedAtom& p = atoms_[idx];
            if (p.chain == chain && std::abs(p.backbone - carbon) <= 2) continue;
            if (box_.minimum_image(pos - p.pos).squaredNorm() < r2_) return true;
          }
        }
      }
    }
    return false;
  }

 private:
  std::array<int, 3> bin_coords(const Vec3& pos) const {
    Vec3 s = box_.to_fractional(pos);
    std::array<int, 3> c{};
    for (int k = 0; k < 3; ++k) {
      s[k] -= std::floor(s[k]);
      c[k] = std::min(n_[k] - 1, static_cast<int>(s[k] * n_[k]));
    }
    return c;
  }
  int bin_of(const Vec3& pos) const {
    const auto c = bin_coords(pos);
    return (c[0] * n_[1] + c[1]) * n_[2] + c[2];
  }

  const PeriodicCell& box_;
  double r2_;
  std::array<int, 3> n_{};
  std::vector<std::vector<int>> bins_;
  std::vector<PlacedAtom> atoms_;
  std::vector<int> atom_bins_;
};

class MeltBuilder {
 public:
  MeltBuilder(const MeltOptions& opt, const PeriodicCell& box_angstrom)
      : opt_(opt), geo_(opt.geometry), box_(box_angstrom), rng_(opt.seed), grid_(box_, opt.exclusion_radius) {
    const auto table = SpeciesTable::polymer_default();
    h_ = table.code("H");
    c_ = table.code("C");
    cl_ = table.code("Cl");
  }

  AtomicSystem build() {
    const int carbons_per_unit = opt_.kind == PolymerKind::PE ? 1 : 2;
    const int n_carbons = opt_.monomers_per_chain * carbons_per_unit;

    AtomicSystem sys;
    sys.species_table = SpeciesTable::polymer_default();
    sys.cell = box_;
    for (int chain = 0; chain < opt_.chains; ++chain) {
      std::vector<std::vector<PendingAtom>> per_carbon;
      bool ok = false;
      for (int attempt = 0; attempt < opt_.chain_retries && !ok; ++attempt) {
        ok = grow_chain(chain, n_carbons, per_carbon);
      }
      if (!ok) {
        throw Error("could not place chain " + std::to_string(chain) + " after " +
                    std::to_string(opt_.chain_retries) + " attempts; enlarge the box or lower the exclusion radius");
      }
      for (int k = 0; k < n_carbons; ++k) {
        const int unit = chain * opt_.monomers_per_chain + k / carbons_per_unit;
        for (const auto& a : per_carbon[k]) {
          sys.positions.push_back(box_.wrap(a.pos));
          sys.species.push_back(a.species);
          sys.unit_ids.push_back(unit);
          sys.chain_ids.push_back(chain);
        }
      }
    }
    return sys;
  }

 private:
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  Vec3 random_unit() {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do {
      v = Vec3(n(rng_), n(rng_), n(rng_));
    } while (v.norm() < 1e-8);
    return v.normalized();
  }

  double sample_dihedral() {
    const double u = uniform();
    double base = 180.0;
    if (u >= geo_.trans_probability) base = (u - geo_.trans_probability) < 0.5 * (1.0 - geo_.trans_probability) ? 60.0 : -60.0;
    std::normal_distribution<double> jitter(0.0, geo_.dihedral_jitter);
    return (base + jitter(rng_)) * kDeg;
  }

  // Places D such that |CD| = bond, angle BCD = angle, dihedral ABCD = dihedral.
  static Vec3 extend(const Vec3& a, const Vec3& b, const Vec3& c, double bond, double angle, double dihedral) {
    const Vec3 bc = (c - b).normalized();
    Vec3 n = (b - a).cross(bc);
    if (n.norm() < 1e-10) {
      n = bc.unitOrthogonal();
    }
    n.normalize();
    const Vec3 m = n.cross(bc);
    return c + bond * (-std::cos(angle) * bc + std::sin(angle) * std::cos(dihedral) * m +
                       std::sin(angle) * std::sin(dihedral) * n);
  }

  // Substituents of the carbon at `c` bonded to backbone neighbours `prev` and `next`.
  std::vector<PendingAtom> substituents(const Vec3& prev, const Vec3& c, const Vec3& next, int carbon) {
    const Vec3 u = ((c - prev).normalized() + (c - next).normalized()).normalized();
    const Vec3 w = (prev - c).cross(next - c).normalized();
    const double half = 0.5 * geo_.substituent_angle * kDeg;
    Vec3 d1 = std::cos(half) * u + std::sin(half) * w;
    Vec3 d2 = std::cos(half) * u - std::sin(half) * w;
    if (uniform() < 0.5) std::swap(d1, d2);  // atactic placement

    std::vector<PendingAtom> out;
    const bool substituted = opt_.kind != PolymerKind::PE && (carbon % 2 == 1);
    if (!substituted) {
      out.push_back({c + geo_.ch_bond * d1, h_, carbon});
      out.push_back({c + geo_.ch_bond * d2, h_, carbon});
      return out;
    }
    if (opt_.kind == PolymerKind::PVC) {
      out.push_back({c + geo_.ccl_bond * d1, cl_, carbon});
      out.push_back({c + geo_.ch_bond * d2, h_, carbon});
      return out;
    }
    // PP: methyl group on d1, hydrogen on d2
    const Vec3 cm = c + geo_.cc_bond * d1;
    out.push_back({cm, c_, carbon});
    const Vec3 axis = (cm - c).normalized();
    const Vec3 p = axis.unitOrthogonal();
    const Vec3 q = axis.cross(p);
    const double tilt = std::numbers::pi - geo_.substituent_angle * kDeg;
    const double phase = 2.0 * std::numbers::pi * uniform();
    for (int k = 0; k < 3; ++k) {
      const double phi = phase + k * 2.0 * std::numbers::pi / 3.0;
      const Vec3 dir = std::cos(tilt) * axis + std::sin(tilt) * (std::cos(phi) * p + std::sin(phi) * q);
      out.push_back({cm + geo_.ch_bond * dir, h_, carbon});
    }
    out.push_back({c + geo_.ch_bond * d2, h_, carbon});
    return out;
  }

  // Backbone has virtual carbons at both ends (index 0 and n+1) that anchor the
  // end-group substituents; real carbon k sits at backbone index k+1. Step k
  // places backbone atom k plus the substituents of backbone atom k-1. A dead
  // end pops steps, further back on each consecutive failure; the chain is
  // abandoned once the backtrack budget is spent. On failure the grid is left
  // as it was on entry.
  bool grow_chain(int chain, int n_carbons, std::vector<std::vector<PendingAtom>>& per_carbon) {
    const double bond = geo_.cc_bond;
    const double angle = geo_.backbone_angle * kDeg;
    const std::size_t grid_mark = grid_.size();
    auto abandon = [&] {
      while (grid_.size() > grid_mark) grid_.pop();
      return false;
    };

    std::vector<Vec3> bb;
    bb.reserve(n_carbons + 2);
    bb.push_back(box_.to_cartesian(Vec3(uniform(), uniform(), uniform())));
    bb.push_back(bb[0] + bond * random_unit());
    std::vector<std::size_t> step_sizes;  // atoms added by each step, step 1 = carbon 0
    std::vector<PendingAtom> atoms;
    if (grid_.clashes(bb[1], chain, 0)) return false;
    atoms.push_back({bb[1], c_, 0});
    grid_.push({bb[1], chain, 0});
    step_sizes.push_back(1);

    int budget = std::max(opt_.step_retries, 4 * n_carbons);
    int failures = 0;  // consecutive dead ends since the last forward progress
    int furthest = 2;
    int k = 2;
    while (k <= n_carbons + 1) {
      bool placed = false;
      for (int attempt = 0; attempt < opt_.step_retries && !placed; ++attempt) {
        Vec3 next;
        if (k == 2) {
          const Vec3 b = (bb[1] - bb[0]).normalized();
          Vec3 perp = random_unit();
          perp = (perp - perp.dot(b) * b).normalized();
          next = bb[1] + bond * (-std::cos(angle) * b + std::sin(angle) * perp);
        } else {
          next = extend(bb[k - 3], bb[k - 2], bb[k - 1], bond, angle, sample_dihedral());
        }
        const int carbon = k - 1;  // real index of `next` (n_carbons means virtual)
        std::vector<PendingAtom> batch;
        if (carbon < n_carbons) batch.push_back({next, c_, carbon});
        auto subs = substituents(bb[k - 2], bb[k - 1], next, k - 2);
        batch.insert(batch.end(), subs.begin(), subs.end());

        // Atoms of one batch are at most geminal to each other, so they need no mutual check.
        const bool bad = std::any_of(batch.begin(), batch.end(),
                                     [&](const PendingAtom& a) { return grid_.clashes(a.pos, chain, a.carbon); });
        if (bad) continue;
        placed = true;
        bb.push_back(next);
        for (const auto& a : batch) {
          grid_.push({a.pos, chain, a.carbon});
          atoms.push_back(a);
        }
        step_sizes.push_back(batch.size());
      }
      if (placed) {
        ++k;
        if (k > furthest) {
          furthest = k;
          failures = 0;
        }
        continue;
      }
      if (--budget < 0 || k <= 2) return abandon();
      ++failures;
      const int back = std::min(k - 2, 1 + failures);
      for (int b = 0; b < back; ++b) {
        for (std::size_t n = step_sizes.back(); n > 0; --n) {
          grid_.pop();
          atoms.pop_back();
        }
        step_sizes.pop_back();
        bb.pop_back();
      }
      k -= back;
    }

    per_carbon.assign(n_carbons, {});
    for (const auto& a : atoms) per_carbon[a.carbon].push_back(a);  // a carbon precedes its substituents
    return true;
  }

  const MeltOptions& opt_;
  const MeltGeometry& geo_;
  PeriodicCell box_;
  std::mt19937_64 rng_;
  ClashGrid grid_;
  SpeciesCode h_ = 0, c_ = 0, cl_ = 0;
};

}  // namespace

AtomicSystem generate_synthetic_melt(const MeltOptions& options, const PeriodicCell& box) {
  if (options.chains <= 0 || options.monomers_per_chain <= 0) {
    throw Error("melt needs at least one chain with at least one monomer");
  }
  if (!(options.exclusion_radius > 0.0)) throw Error("exclusion radius must be positive");
  if (!(box.periodic()[0] && box.periodic()[1] && box.periodic()[2])) throw Error("melt box must be periodic in all directions");
  // Build in Angstrom; fixed bond geometry is specified in Angstrom.
  const PeriodicCell box_a(box.lattice() / kBohrPerAngstrom, box.periodic());
  const double n_atoms = double(options.chains) * options.monomers_per_chain * unit_size(options.kind);
  const double r = 0.5 * options.exclusion_radius;
  const double fraction = n_atoms * (4.0 / 3.0) * std::numbers::pi * r * r * r / box_a.volume();
  if (fraction > options.max_packing_fraction) {
    throw Error("box too small: packing fraction " + std::to_string(fraction) + " exceeds the limit " +
                std::to_string(options.max_packing_fraction));
  }

  MeltBuilder builder(options, box_a);
  AtomicSystem sys = builder.build();
  for (auto& p : sys.positions) p *= kBohrPerAngstrom;
  sys.cell = box;
  sys.validate();
  return sys;
}

UnitAssignment assign_units(const AtomicSystem& system, PolymerKind kind) {
  const int size = unit_size(kind);
  UnitAssignment out;
  out.unit_ids.assign(system.size(), -1);

  std::vector<int> chain_order;
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < system.size(); ++i) {
    const int chain = system.chain_ids.at(i);
    auto [it, inserted] = members.try_emplace(chain);
    if (inserted) chain_order.push_back(chain);
    it->second.push_back(i);
  }

  int next_unit = 0;
  for (int chain : chain_order) {
    const auto& atoms = members[chain];
    for (std::size_t start = 0; start < atoms.size(); start += size) {
      const std::size_t end = std::min(atoms.size(), start + size);
      for (std::size_t k = start; k < end; ++k) out.unit_ids[atoms[k]] = next_unit;
      if (end - start != static_cast<std::size_t>(size)) out.residual_units.push_back(next_unit);
      ++next_unit;
    }
  }
  return out;
}

}  // namespace dispnet
