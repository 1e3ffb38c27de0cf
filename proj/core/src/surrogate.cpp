#include "dispnet/surrogate.hpp"

#include <cmath>
#include <random>
#include <set>

namespace dispnet::surrogate {

using diff::Matrix;

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw Error(std::string("model config: ") + name + " must be positive");
  };
  positive(embedding_width, "embedding_width");
  positive(n_rbf, "n_rbf");
  positive(n_cut, "n_cut");
  positive(n_species, "n_species");
  positive(projection_hidden, "projection_hidden");
  if (n_cut < 2) throw Error("model config: n_cut must be at least 2");
  if (p < 0 || n_extra < 0) throw Error("model config: p and n_extra must be non-negative");
  if (p + 1 + n_extra > n_cut) {
    throw Error("model config: p + 1 + n_extra = " + std::to_string(p + 1 + n_extra) + " exceeds n_cut = " +
                std::to_string(n_cut));
  }
  if (!(rbf_gamma0 > 0.0) || !(rbf_mu_max > 0.0)) throw Error("model config: rbf initialization must be positive");
  if (!(force_scale > 0.0)) throw Error("model config: force_scale must be positive");
}

TrimmedGraph build_trimmed_graph(const ModelConfig& config) {
  config.validate();
  TrimmedGraph g;
  for (int j = 1; j < config.n_cut; ++j) g.edges.emplace_back(0, j);
  std::set<std::pair<int, int>> seen;
  for (int i = 1; i <= config.p; ++i) {
    const int last = std::min(i + config.n_extra, config.n_cut - 1);
    for (int j = 1; j <= last; ++j) {
      if (j == i) continue;
      const std::pair<int, int> e{std::min(i, j), std::max(i, j)};
      if (seen.insert(e).second) g.edges.push_back(e);
    }
  }
  return g;
}

Eigen::VectorXd rbf_encode(double d, const Eigen::VectorXd& mu, const Eigen::VectorXd& gamma) {
  if (mu.size() != gamma.size()) throw Error("rbf_encode: centers and widths differ in length");
  if (!(d >= 0.0)) throw Error("rbf_encode: distance must be non-negative");
  return (-(gamma.array() * (d - mu.array()).square())).exp().matrix();
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  trimmed_ = build_trimmed_graph(config_);
  const int n = config_.n_cut, P = config_.embedding_width, K = config_.n_rbf, H = config_.projection_hidden;
  auto& g = graph_;

  positions_ = g.input("positions", n, 3);
  const int species = g.index_input("species", n, config_.n_species);

  const auto x0 = g.gather_indexed(g.param("embedding", config_.n_species, P), species);
  const auto h = g.dense(x0, g.param("atomwise_in_w", P, P));

  const auto d = g.distance(positions_, trimmed_.edges);
  const auto e = g.gaussian_rbf(d, g.param("rbf_mu", 1, K), g.param("rbf_gamma", 1, K));
  const auto w1 = g.ssp(g.dense(e, g.param("filter_w1", K, P), g.param("filter_b1", 1, P)));
  const auto w = g.dense(w1, g.param("filter_w2", P, P), g.param("filter_b2", 1, P));

  // Both directions of every undirected edge share the edge's filter.
  const int m = static_cast<int>(trimmed_.size());
  std::vector<int> edge_of, src, dst;
  for (int k = 0; k < m; ++k) {
    const auto [a, b] = trimmed_.edges[k];
    edge_of.push_back(k);
    src.push_back(b);
    dst.push_back(a);
  }
  for (int k = 0; k < m; ++k) {
    const auto [a, b] = trimmed_.edges[k];
    edge_of.push_back(k);
    src.push_back(a);
    dst.push_back(b);
  }
  const auto msg = g.mul(g.gather(w, edge_of), g.gather(h, src));
  const auto conv = g.scatter_add(msg, dst, n);

  const auto v = g.dense(g.ssp(g.dense(conv, g.param("atomwise_w1", P, P), g.param("atomwise_b1", 1, P))),
                         g.param("atomwise_w2", P, P), g.param("atomwise_b2", 1, P));
  const auto x1 = g.add(x0, v);

  const auto o = g.dense(g.ssp(g.dense(x1, g.param("proj_w1", P, H), g.param("proj_b1", 1, H))),
                         g.param("proj_w2", H, 1), g.param("proj_b2", 1, 1));
  g.set_output(g.sum(o));
}

diff::ParameterSet Model::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int rows, int cols, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
  };
  const int P = config_.embedding_width, K = config_.n_rbf, H = config_.projection_hidden;
  auto dense = [&](int fan_in, int fan_out) { return uniform(fan_in, fan_out, std::sqrt(3.0 / fan_in)); };

  diff::ParameterSet ps;
  ps.add("embedding", uniform(config_.n_species, P, 1.0 / std::sqrt(double(P))));
  Matrix mu(1, K), gamma(1, K);
  for (int k = 0; k < K; ++k) mu(0, k) = K == 1 ? 0.0 : config_.rbf_mu_max * k / (K - 1);
  gamma.setConstant(config_.rbf_gamma0);
  ps.add("rbf_mu", mu);
  ps.add("rbf_gamma", gamma);
  ps.add("filter_w1", dense(K, P));
  ps.add("filter_b1", Matrix::Zero(1, P));
  ps.add("filter_w2", dense(P, P));
  ps.add("filter_b2", Matrix::Zero(1, P));
  ps.add("atomwise_in_w", dense(P, P));
  ps.add("atomwise_w1", dense(P, P));
  ps.add("atomwise_b1", Matrix::Zero(1, P));
  ps.add("atomwise_w2", dense(P, P));
  ps.add("atomwise_b2", Matrix::Zero(1, P));
  ps.add("proj_w1", dense(P, H));
  ps.add("proj_b1", Matrix::Zero(1, H));
  ps.add("proj_w2", dense(H, 1));
  ps.add("proj_b2", Matrix::Zero(1, 1));
  return ps;
}

bool Model::trainable(const std::string& name) const {
  if (name == "rbf_mu" || name == "rbf_gamma") return config_.rbf_trainable;
  return true;
}

void Model::check_cluster(const Cluster& cluster) const {
  if (cluster.size() != static_cast<std::size_t>(config_.n_cut) || cluster.species.size() != cluster.size()) {
    throw Error("cluster has " + std::to_string(cluster.size()) + " atoms; the model expects n_cut = " +
                std::to_string(config_.n_cut));
  }
}

diff::Feed Model::feed(const Cluster& cluster) const {
  check_cluster(cluster);
  diff::Feed f;
  Matrix pos(config_.n_cut, 3);
  std::vector<int> species(config_.n_cut);
  for (int i = 0; i < config_.n_cut; ++i) {
    pos.row(i) = cluster.positions[i].transpose();
    species[i] = cluster.species[i];
    if (species[i] >= config_.n_species) {
      throw Error("species code " + std::to_string(species[i]) + " outside the model's table of " +
                  std::to_string(config_.n_species));
    }
  }
  f.inputs.push_back(std::move(pos));
  f.indices.push_back(std::move(species));
  return f;
}

double Model::energy(const Cluster& cluster, const diff::ParameterSet& params, diff::Workspace& ws) const {
  const auto f = feed(cluster);
  return ws.forward(graph_, params, f);
}

double Model::energy(const Cluster& cluster, const diff::ParameterSet& params) const {
  diff::Workspace ws;
  return energy(cluster, params, ws);
}

Vec3 Model::force(const Cluster& cluster, const diff::ParameterSet& params, diff::Workspace& ws) const {
  const auto f = feed(cluster);
  ws.forward(graph_, params, f);
  ws.backward(1.0, 0.0);
  return -ws.adjoint(positions_).row(0).transpose();
}

Vec3 Model::force(const Cluster& cluster, const diff::ParameterSet& params) const {
  diff::Workspace ws;
  return force(cluster, params, ws);
}

std::vector<Mat3> Model::hessian_rows(const Cluster& cluster, const diff::ParameterSet& params) const {
  const auto f = feed(cluster);
  diff::Workspace ws;
  ws.forward(graph_, params, f);
  std::vector<Mat3> rows(cluster.size(), Mat3::Zero());
  for (int a = 0; a < 3; ++a) {
    Matrix dir = Matrix::Zero(config_.n_cut, 3);
    dir(0, a) = 1.0;
    ws.tangent(positions_, dir);
    ws.backward(0.0, 1.0);
    // adjoint row j = d(dE/dr_0a)/dr_j
    const Matrix& adj = ws.adjoint(positions_);
    for (std::size_t j = 0; j < rows.size(); ++j) rows[j].row(a) = -adj.row(j);
  }
  return rows;
}

Mat3 Model::hessian_row(const Cluster& cluster, const diff::ParameterSet& params, std::size_t j) const {
  if (j >= cluster.size()) {
    throw Error("hessian row " + std::to_string(j) + " out of range for a cluster of " + std::to_string(cluster.size()));
  }
  return hessian_rows(cluster, params)[j];
}

double Model::force_loss_gradient(const Cluster& cluster, const Vec3& target, double weight,
                                  const diff::ParameterSet& params, diff::ParameterSet& grads,
                                  diff::Workspace& ws) const {
  const auto f = feed(cluster);
  diff::GradientLossTerm term;
  term.input = positions_;
  term.rows = {0};
  term.sign = -1.0;
  term.targets = target.transpose();
  term.weight = weight;
  return diff::grad_of_loss_wrt_params(graph_, params, f, term, grads, ws);
}

}  // namespace dispnet::surrogate
