#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dispnet/diff.hpp"
#include "dispnet/geometry.hpp"

namespace dispnet::surrogate {

struct ModelConfig {
  int embedding_width = 32;  // P
  int n_rbf = 100;
  int p = 2;                 // nearest neighbours of the center that get extra windows
  int n_extra = 50;
  int n_cut = 1000;
  int n_species = 3;
  int projection_hidden = 16;
  bool rbf_trainable = true;
  double rbf_gamma0 = 10.0 / (kBohrPerAngstrom * kBohrPerAngstrom);  // 10 per square Angstrom, in Bohr^-2
  double rbf_mu_max = 15.0 * kBohrPerAngstrom;                       // 15 Angstrom, in Bohr
  double force_scale = 1e3;

  /// Throws on non-positive sizes or p + 1 + n_extra > n_cut.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Undirected edges over cluster indices (0 = center): every {0, j}, plus
/// {i, j} for 1 <= i <= p and 1 <= j <= min(i + n_extra, n_cut - 1), j != i.
/// Each pair is stored once as (smaller, larger), center edges first.
struct TrimmedGraph {
  std::vector<std::pair<int, int>> edges;
  std::size_t size() const noexcept { return edges.size(); }
};

TrimmedGraph build_trimmed_graph(const ModelConfig& config);

/// e_k = exp(-gamma_k (d - mu_k)^2).
Eigen::VectorXd rbf_encode(double d, const Eigen::VectorXd& mu, const Eigen::VectorXd& gamma);

/// ln(e^x + 1) - ln 2.
inline double ssp(double x) { return diff::ssp(x); }

/// Trimmed single-interaction-block continuous-filter network. Parameter names:
///   embedding (S x P), rbf_mu, rbf_gamma (1 x K),
///   filter_w1 (K x P), filter_b1, filter_w2 (P x P), filter_b2,
///   atomwise_in_w (P x P, no bias),
///   atomwise_w1, atomwise_b1, atomwise_w2, atomwise_b2 (P x P / 1 x P),
///   proj_w1 (P x 16), proj_b1, proj_w2 (16 x 1), proj_b2.
///
/// Energies and forces are in model units: forces approximate force_scale
/// times the reference force in Hartree/Bohr.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  const TrimmedGraph& trimmed_graph() const noexcept { return trimmed_; }
  const diff::Graph& graph() const noexcept { return graph_; }
  diff::NodeId positions_node() const noexcept { return positions_; }

  /// Fresh parameters: rbf centers evenly spaced on [0, mu_max], widths gamma0,
  /// embedding U(+-1/sqrt(P)), weights U(+-sqrt(3/fan_in)), biases zero.
  diff::ParameterSet init_params(std::uint64_t seed) const;

  /// Whether training updates this tensor (the rbf tensors are frozen when
  /// rbf_trainable is false).
  bool trainable(const std::string& name) const;

  diff::Feed feed(const Cluster& cluster) const;

  double energy(const Cluster& cluster, const diff::ParameterSet& params, diff::Workspace& ws) const;
  double energy(const Cluster& cluster, const diff::ParameterSet& params) const;

  /// -dE/dr_center.
  Vec3 force(const Cluster& cluster, const diff::ParameterSet& params, diff::Workspace& ws) const;
  Vec3 force(const Cluster& cluster, const diff::ParameterSet& params) const;

  /// H_1j = dF_center / dr_j for every j (j = 0 included), via three
  /// forward-over-reverse passes.
  std::vector<Mat3> hessian_rows(const Cluster& cluster, const diff::ParameterSet& params) const;
  Mat3 hessian_row(const Cluster& cluster, const diff::ParameterSet& params, std::size_t j) const;

  /// Squared force error |F - target|^2 * weight for one record, with its
  /// parameter gradient accumulated into `grads`. `target` is in model units.
  double force_loss_gradient(const Cluster& cluster, const Vec3& target, double weight,
                             const diff::ParameterSet& params, diff::ParameterSet& grads, diff::Workspace& ws) const;

 private:
  void check_cluster(const Cluster& cluster) const;

  ModelConfig config_;
  TrimmedGraph trimmed_;
  diff::Graph graph_;
  diff::NodeId positions_ = -1;
};

}  // namespace dispnet::surrogate
