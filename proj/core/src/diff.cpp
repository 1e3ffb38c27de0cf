#include "dispnet/diff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dispnet::diff {

double ssp(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x)) - std::numbers::ln2;
  if (x < -30.0) return std::exp(x) - std::numbers::ln2;  // log1p(e^x) == e^x to double precision
  return std::log1p(std::exp(x)) - std::numbers::ln2;
}

double ssp_d1(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double ssp_d2(double x) {
  if (std::abs(x) > 30.0) {
    const double e = std::exp(-std::abs(x));
    return e / ((1.0 + e) * (1.0 + e));
  }
  const double s = ssp_d1(x);
  return s * (1.0 - s);
}

// ---- ParameterSet ----

void ParameterSet::add(std::string name, Matrix value) {
  if (find(name) >= 0) throw Error("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::ptrdiff_t ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

Matrix& ParameterSet::at(std::string_view name) {
  const auto i = find(name);
  if (i < 0) throw Error("no parameter named '" + std::string(name) + "'");
  return values_[i];
}

const Matrix& ParameterSet::at(std::string_view name) const { return const_cast<ParameterSet*>(this)->at(name); }

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  out.names_ = names_;
  for (const auto& v : values_) out.values_.push_back(Matrix::Zero(v.rows(), v.cols()));
  return out;
}

void ParameterSet::set_zero() {
  for (auto& v : values_) v.setZero();
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].rows() != other.values_[i].rows() || values_[i].cols() != other.values_[i].cols()) return false;
  }
  return true;
}

void ParameterSet::require_finite(std::string_view what) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!values_[i].allFinite()) throw Error(std::string(what) + ": non-finite entries in '" + names_[i] + "'");
  }
}

ParameterSet& ParameterSet::operator+=(const ParameterSet& other) {
  if (!same_layout(other)) throw Error("parameter sets differ in layout");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ParameterSet& ParameterSet::operator*=(double s) {
  for (auto& v : values_) v *= s;
  return *this;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] != other.values_[i]) return false;
  }
  return true;
}

// ---- Graph ----

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Graph::Node& Graph::node(NodeId id, const char* role) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw Error(std::string("graph: invalid node id for ") + role);
  }
  return nodes_[id];
}

NodeId Graph::input(std::string name, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw Error("graph: input '" + name + "' needs a positive shape");
  Node n{Op::input, rows, cols};
  n.slot = static_cast<int>(input_names_.size());
  n.name = name;
  input_names_.push_back(std::move(name));
  const NodeId id = push(std::move(n));
  input_nodes_.push_back(id);
  return id;
}

int Graph::index_input(std::string name, int length, int bound) {
  if (length <= 0 || bound <= 0) throw Error("graph: index input '" + name + "' needs a positive length and bound");
  index_slots_.push_back({std::move(name), length, bound});
  return static_cast<int>(index_slots_.size() - 1);
}

NodeId Graph::param(std::string name, int rows, int cols) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::param && nodes_[i].name == name) {
      if (nodes_[i].rows != rows || nodes_[i].cols != cols) throw Error("graph: parameter '" + name + "' redeclared with a new shape");
      return static_cast<NodeId>(i);
    }
  }
  if (rows <= 0 || cols <= 0) throw Error("graph: parameter '" + name + "' needs a positive shape");
  Node n{Op::param, rows, cols};
  n.slot = static_cast<int>(param_slots_.size());
  n.name = name;
  param_slots_.push_back({std::move(name), rows, cols});
  return push(std::move(n));
}

NodeId Graph::dense(NodeId x, NodeId w, NodeId b) {
  const Node& nx = node(x, "dense input");
  const Node& nw = node(w, "dense weight");
  if (nw.op != Op::param) throw Error("graph: dense weight must be a parameter");
  if (nw.rows != nx.cols) throw Error("graph: dense weight '" + nw.name + "' expects " + std::to_string(nw.rows) +
                                      " input columns, got " + std::to_string(nx.cols));
  if (b >= 0) {
    const Node& nb = node(b, "dense bias");
    if (nb.op != Op::param || nb.rows != 1 || nb.cols != nw.cols) throw Error("graph: dense bias must be a 1 x out parameter");
  }
  Node n{Op::dense, nx.rows, nw.cols, x, w, b};
  return push(std::move(n));
}

NodeId Graph::ssp(NodeId x) {
  const Node& nx = node(x, "ssp input");
  return push(Node{Op::ssp, nx.rows, nx.cols, x});
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Node& na = node(a, "mul operand");
  const Node& nb = node(b, "mul operand");
  if (na.rows != nb.rows || na.cols != nb.cols) throw Error("graph: mul operands differ in shape");
  return push(Node{Op::mul, na.rows, na.cols, a, b});
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Node& na = node(a, "add operand");
  const Node& nb = node(b, "add operand");
  if (na.rows != nb.rows || na.cols != nb.cols) throw Error("graph: add operands differ in shape");
  return push(Node{Op::add, na.rows, na.cols, a, b});
}

NodeId Graph::gather(NodeId x, std::vector<int> rows) {
  const Node& nx = node(x, "gather source");
  for (int r : rows) {
    if (r < 0 || r >= nx.rows) throw Error("graph: gather index out of range");
  }
  Node n{Op::gather, static_cast<int>(rows.size()), nx.cols, x};
  n.rows_a = std::move(rows);
  return push(std::move(n));
}

NodeId Graph::gather_indexed(NodeId x, int index_slot) {
  const Node& nx = node(x, "gather source");
  if (index_slot < 0 || index_slot >= static_cast<int>(index_slots_.size())) throw Error("graph: unknown index input");
  if (index_slots_[index_slot].bound > nx.rows) throw Error("graph: index input bound exceeds the gather source rows");
  Node n{Op::gather, index_slots_[index_slot].length, nx.cols, x};
  n.slot = index_slot;
  return push(std::move(n));
}

NodeId Graph::scatter_add(NodeId x, std::vector<int> rows, int out_rows) {
  const Node& nx = node(x, "scatter source");
  if (static_cast<int>(rows.size()) != nx.rows) throw Error("graph: scatter needs one target row per source row");
  for (int r : rows) {
    if (r < 0 || r >= out_rows) throw Error("graph: scatter index out of range");
  }
  Node n{Op::scatter_add, out_rows, nx.cols, x};
  n.rows_a = std::move(rows);
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x, double scale) {
  node(x, "sum input");
  Node n{Op::sum, 1, 1, x};
  n.scale = scale;
  return push(std::move(n));
}

NodeId Graph::distance(NodeId pos, std::vector<std::pair<int, int>> pairs) {
  const Node& np = node(pos, "distance positions");
  if (np.cols != 3) throw Error("graph: distance needs n x 3 positions");
  Node n{Op::distance, static_cast<int>(pairs.size()), 1, pos};
  for (auto [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= np.rows || b >= np.rows || a == b) throw Error("graph: invalid distance pair");
    n.rows_a.push_back(a);
    n.rows_b.push_back(b);
  }
  return push(std::move(n));
}

NodeId Graph::gaussian_rbf(NodeId d, NodeId mu, NodeId gamma) {
  const Node& nd = node(d, "rbf distance");
  const Node& nm = node(mu, "rbf centers");
  const Node& ng = node(gamma, "rbf widths");
  if (nd.cols != 1) throw Error("graph: rbf needs a distance column");
  if (nm.op != Op::param || ng.op != Op::param || nm.rows != 1 || ng.rows != 1 || nm.cols != ng.cols) {
    throw Error("graph: rbf centers and widths must be 1 x K parameters of equal length");
  }
  return push(Node{Op::gaussian_rbf, nd.rows, nm.cols, d, mu, gamma});
}

void Graph::set_output(NodeId id) {
  const Node& n = node(id, "output");
  if (n.rows != 1 || n.cols != 1) throw Error("graph: output must be a scalar (1 x 1) node");
  output_ = id;
}

// ---- Workspace ----

double Workspace::forward(const Graph& g, const ParameterSet& params, const Feed& feed) {
  if (g.output() < 0) throw Error("graph has no output");
  g_ = &g;
  params_ = &params;
  feed_ = &feed;
  tangent_done_ = false;

  if (feed.inputs.size() != g.input_names().size()) throw Error("feed: wrong number of inputs");
  if (feed.indices.size() != g.index_slots().size()) throw Error("feed: wrong number of index inputs");
  for (std::size_t s = 0; s < feed.indices.size(); ++s) {
    const auto& slot = g.index_slots()[s];
    if (static_cast<int>(feed.indices[s].size()) != slot.length) {
      throw Error("feed: index input '" + slot.name + "' has length " + std::to_string(feed.indices[s].size()) +
                  ", expected " + std::to_string(slot.length));
    }
    for (int v : feed.indices[s]) {
      if (v < 0 || v >= slot.bound) throw Error("feed: index input '" + slot.name + "' entry out of range");
    }
  }
  param_index_.resize(g.param_slots().size());
  for (std::size_t s = 0; s < g.param_slots().size(); ++s) {
    const auto& slot = g.param_slots()[s];
    const auto i = params.find(slot.name);
    if (i < 0) throw Error("parameter '" + slot.name + "' missing from the parameter set");
    if (params[i].rows() != slot.rows || params[i].cols() != slot.cols) {
      throw Error("parameter '" + slot.name + "' has shape " + std::to_string(params[i].rows()) + "x" +
                  std::to_string(params[i].cols()) + ", expected " + std::to_string(slot.rows) + "x" +
                  std::to_string(slot.cols));
    }
    param_index_[s] = static_cast<int>(i);
  }

  const auto& nodes = g.nodes();
  value_.resize(nodes.size());
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const auto& n = nodes[id];
    Matrix& y = value_[id];
    switch (n.op) {
      case Graph::Op::input: {
        const Matrix& in = feed.inputs[n.slot];
        if (in.rows() != n.rows || in.cols() != n.cols) throw Error("feed: input '" + n.name + "' has the wrong shape");
        y = in;
        break;
      }
      case Graph::Op::param: y = params[param_index_[n.slot]]; break;
      case Graph::Op::dense:
        y.noalias() = value_[n.a] * value_[n.b];
        if (n.c >= 0) y.rowwise() += value_[n.c].row(0);
        break;
      case Graph::Op::ssp: y = value_[n.a].unaryExpr([](double v) { return diff::ssp(v); }); break;
      case Graph::Op::mul: y = value_[n.a].cwiseProduct(value_[n.b]); break;
      case Graph::Op::add: y = value_[n.a] + value_[n.b]; break;
      case Graph::Op::gather: {
        const auto& idx = n.slot >= 0 ? feed.indices[n.slot] : n.rows_a;
        y.resize(n.rows, n.cols);
        for (int k = 0; k < n.rows; ++k) y.row(k) = value_[n.a].row(idx[k]);
        break;
      }
      case Graph::Op::scatter_add:
        y.setZero(n.rows, n.cols);
        for (std::size_t k = 0; k < n.rows_a.size(); ++k) y.row(n.rows_a[k]) += value_[n.a].row(k);
        break;
      case Graph::Op::sum: y.resize(1, 1); y(0, 0) = n.scale * value_[n.a].sum(); break;
      case Graph::Op::distance: {
        const Matrix& p = value_[n.a];
        y.resize(n.rows, 1);
        for (int k = 0; k < n.rows; ++k) {
          const double d = (p.row(n.rows_a[k]) - p.row(n.rows_b[k])).norm();
          if (!(d > 0.0)) {
            throw Error("distance: rows " + std::to_string(n.rows_a[k]) + " and " + std::to_string(n.rows_b[k]) + " coincide");
          }
          y(k, 0) = d;
        }
        break;
      }
      case Graph::Op::gaussian_rbf: {
        const Matrix& d = value_[n.a];
        const auto mu = value_[n.b].row(0);
        const auto gamma = value_[n.c].row(0);
        y.resize(n.rows, n.cols);
        for (int k = 0; k < n.rows; ++k) {
          for (int j = 0; j < n.cols; ++j) {
            const double t = d(k, 0) - mu[j];
            y(k, j) = std::exp(-gamma[j] * t * t);
          }
        }
        break;
      }
    }
  }
  return value_[g.output()](0, 0);
}

double Workspace::tangent(NodeId input, const Matrix& direction) {
  if (!g_) throw Error("tangent() needs a prior forward()");
  const auto& nodes = g_->nodes();
  if (input < 0 || input >= static_cast<NodeId>(nodes.size()) || nodes[input].op != Graph::Op::input) {
    throw Error("tangent(): node is not an input");
  }
  if (direction.rows() != nodes[input].rows || direction.cols() != nodes[input].cols) {
    throw Error("tangent(): direction has the wrong shape");
  }
  tan_.resize(nodes.size());
  has_tan_.assign(nodes.size(), 0);
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const auto& n = nodes[id];
    Matrix& t = tan_[id];
    auto ht = [&](NodeId x) { return x >= 0 && has_tan_[x]; };
    switch (n.op) {
      case Graph::Op::input:
        if (static_cast<NodeId>(id) == input) {
          t = direction;
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::param: break;
      case Graph::Op::dense:
        if (ht(n.a)) {
          t.noalias() = tan_[n.a] * value_[n.b];
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::ssp:
        if (ht(n.a)) {
          t = value_[n.a].unaryExpr([](double v) { return ssp_d1(v); }).cwiseProduct(tan_[n.a]);
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::mul:
        if (ht(n.a) || ht(n.b)) {
          t.setZero(n.rows, n.cols);
          if (ht(n.a)) t += tan_[n.a].cwiseProduct(value_[n.b]);
          if (ht(n.b)) t += value_[n.a].cwiseProduct(tan_[n.b]);
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::add:
        if (ht(n.a) || ht(n.b)) {
          t.setZero(n.rows, n.cols);
          if (ht(n.a)) t += tan_[n.a];
          if (ht(n.b)) t += tan_[n.b];
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::gather:
        if (ht(n.a)) {
          const auto& idx = n.slot >= 0 ? feed_->indices[n.slot] : n.rows_a;
          t.resize(n.rows, n.cols);
          for (int k = 0; k < n.rows; ++k) t.row(k) = tan_[n.a].row(idx[k]);
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::scatter_add:
        if (ht(n.a)) {
          t.setZero(n.rows, n.cols);
          for (std::size_t k = 0; k < n.rows_a.size(); ++k) t.row(n.rows_a[k]) += tan_[n.a].row(k);
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::sum:
        if (ht(n.a)) {
          t.resize(1, 1);
          t(0, 0) = n.scale * tan_[n.a].sum();
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::distance:
        if (ht(n.a)) {
          const Matrix& p = value_[n.a];
          const Matrix& dp = tan_[n.a];
          t.resize(n.rows, 1);
          for (int k = 0; k < n.rows; ++k) {
            const auto u = p.row(n.rows_a[k]) - p.row(n.rows_b[k]);
            const auto du = dp.row(n.rows_a[k]) - dp.row(n.rows_b[k]);
            t(k, 0) = u.dot(du) / value_[id](k, 0);
          }
          has_tan_[id] = 1;
        }
        break;
      case Graph::Op::gaussian_rbf:
        if (ht(n.a)) {
          const Matrix& d = value_[n.a];
          const auto mu = value_[n.b].row(0);
          const auto gamma = value_[n.c].row(0);
          t.resize(n.rows, n.cols);
          for (int k = 0; k < n.rows; ++k) {
            for (int j = 0; j < n.cols; ++j) {
              t(k, j) = -2.0 * gamma[j] * (d(k, 0) - mu[j]) * value_[id](k, j) * tan_[n.a](k, 0);
            }
          }
          has_tan_[id] = 1;
        }
        break;
    }
  }
  tangent_done_ = true;
  const NodeId out = g_->output();
  return has_tan_[out] ? tan_[out](0, 0) : 0.0;
}

// Adjoint rules. For y = f(x) with tangent y' = J(x) x', the pair (vbar, tbar)
// of adjoints of (y, y') pulls back to
//   xbar  += J^T vbar + (d(J x')/dx)^T tbar
//   x'bar += J^T tbar
// Only nodes that carry a tangent have a meaningful x'bar.
void Workspace::backward(double seed_v, double seed_t, ParameterSet* param_grads) {
  if (!g_) throw Error("backward() needs a prior forward()");
  const bool use_t = seed_t != 0.0;
  if (use_t && !tangent_done_) throw Error("backward() with a tangent seed needs a prior tangent()");
  if (param_grads) {
    for (std::size_t s = 0; s < param_index_.size(); ++s) {
      const auto i = param_grads->find(g_->param_slots()[s].name);
      if (i != param_index_[s] || (*param_grads)[i].rows() != (*params_)[i].rows() ||
          (*param_grads)[i].cols() != (*params_)[i].cols()) {
        throw Error("backward(): gradient set does not match the parameter layout");
      }
    }
  }

  const auto& nodes = g_->nodes();
  vbar_.resize(nodes.size());
  tbar_.resize(nodes.size());
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    vbar_[id].setZero(nodes[id].rows, nodes[id].cols);
    if (use_t && has_tan_[id]) tbar_[id].setZero(nodes[id].rows, nodes[id].cols);
  }
  const NodeId out = g_->output();
  vbar_[out](0, 0) = seed_v;
  if (use_t && has_tan_[out]) tbar_[out](0, 0) = seed_t;

  auto ht = [&](NodeId x) { return use_t && x >= 0 && has_tan_[x]; };

  for (NodeId id = static_cast<NodeId>(nodes.size()) - 1; id >= 0; --id) {
    const auto& n = nodes[id];
    const Matrix& yb = vbar_[id];
    const bool ty = ht(id);  // only then is tbar_[id] live
    switch (n.op) {
      case Graph::Op::input:
      case Graph::Op::param: break;
      case Graph::Op::dense: {
        const Matrix& w = value_[n.b];
        vbar_[n.a].noalias() += yb * w.transpose();
        vbar_[n.b].noalias() += value_[n.a].transpose() * yb;
        if (n.c >= 0) vbar_[n.c] += yb.colwise().sum();
        if (ty) {
          tbar_[n.a].noalias() += tbar_[id] * w.transpose();
          vbar_[n.b].noalias() += tan_[n.a].transpose() * tbar_[id];
        }
        break;
      }
      case Graph::Op::ssp: {
        const Matrix& x = value_[n.a];
        const Matrix s = x.unaryExpr([](double v) { return ssp_d1(v); });
        vbar_[n.a] += s.cwiseProduct(yb);
        if (ty) {
          const Matrix s2 = x.unaryExpr([](double v) { return ssp_d2(v); });
          vbar_[n.a] += s2.cwiseProduct(tan_[n.a]).cwiseProduct(tbar_[id]);
          tbar_[n.a] += s.cwiseProduct(tbar_[id]);
        }
        break;
      }
      case Graph::Op::mul: {
        const Matrix& a = value_[n.a];
        const Matrix& b = value_[n.b];
        vbar_[n.a] += b.cwiseProduct(yb);
        vbar_[n.b] += a.cwiseProduct(yb);
        if (ty) {
          const Matrix& tb = tbar_[id];
          if (has_tan_[n.b]) vbar_[n.a] += tan_[n.b].cwiseProduct(tb);
          if (has_tan_[n.a]) vbar_[n.b] += tan_[n.a].cwiseProduct(tb);
          if (has_tan_[n.a]) tbar_[n.a] += b.cwiseProduct(tb);
          if (has_tan_[n.b]) tbar_[n.b] += a.cwiseProduct(tb);
        }
        break;
      }
      case Graph::Op::add:
        vbar_[n.a] += yb;
        vbar_[n.b] += yb;
        if (ty) {
          if (has_tan_[n.a]) tbar_[n.a] += tbar_[id];
          if (has_tan_[n.b]) tbar_[n.b] += tbar_[id];
        }
        break;
      case Graph::Op::gather: {
        const auto& idx = n.slot >= 0 ? feed_->indices[n.slot] : n.rows_a;
        for (int k = 0; k < n.rows; ++k) vbar_[n.a].row(idx[k]) += yb.row(k);
        if (ty) {
          for (int k = 0; k < n.rows; ++k) tbar_[n.a].row(idx[k]) += tbar_[id].row(k);
        }
        break;
      }
      case Graph::Op::scatter_add:
        for (std::size_t k = 0; k < n.rows_a.size(); ++k) vbar_[n.a].row(k) += yb.row(n.rows_a[k]);
        if (ty) {
          for (std::size_t k = 0; k < n.rows_a.size(); ++k) tbar_[n.a].row(k) += tbar_[id].row(n.rows_a[k]);
        }
        break;
      case Graph::Op::sum:
        vbar_[n.a].array() += n.scale * yb(0, 0);
        if (ty) tbar_[n.a].array() += n.scale * tbar_[id](0, 0);
        break;
      case Graph::Op::distance: {
        const Matrix& p = value_[n.a];
        Matrix& pb = vbar_[n.a];
        for (int k = 0; k < n.rows; ++k) {
          const int ia = n.rows_a[k], ib = n.rows_b[k];
          const double d = value_[id](k, 0);
          const Eigen::RowVector3d uhat = (p.row(ia) - p.row(ib)) / d;
          Eigen::RowVector3d ub = uhat * yb(k, 0);
          if (ty) {
            const Eigen::RowVector3d du = tan_[n.a].row(ia) - tan_[n.a].row(ib);
            ub += (du - uhat * uhat.dot(du)) / d * tbar_[id](k, 0);
            const Eigen::RowVector3d utb = uhat * tbar_[id](k, 0);
            tbar_[n.a].row(ia) += utb;
            tbar_[n.a].row(ib) -= utb;
          }
          pb.row(ia) += ub;
          pb.row(ib) -= ub;
        }
        break;
      }
      case Graph::Op::gaussian_rbf: {
        const Matrix& d = value_[n.a];
        const auto mu = value_[n.b].row(0);
        const auto gamma = value_[n.c].row(0);
        const Matrix& e = value_[id];
        Matrix& db = vbar_[n.a];
        auto mub = vbar_[n.b].row(0);
        auto gb = vbar_[n.c].row(0);
        for (int k = 0; k < n.rows; ++k) {
          const double dt = ty ? tan_[n.a](k, 0) : 0.0;
          double dbar = 0.0, dtbar = 0.0;
          for (int j = 0; j < n.cols; ++j) {
            const double g = gamma[j];
            const double r = d(k, 0) - mu[j];
            const double ek = e(k, j);
            const double e_d = -2.0 * g * r * ek;                      // de/dd
            const double vb = yb(k, j);
            dbar += e_d * vb;
            mub[j] -= e_d * vb;                                        // de/dmu = -de/dd
            gb[j] -= r * r * ek * vb;                                  // de/dgamma
            if (ty) {
              const double tb = tbar_[id](k, j);
              const double e_dd = ek * (4.0 * g * g * r * r - 2.0 * g);  // d^2e/dd^2
              dbar += e_dd * dt * tb;
              dtbar += e_d * tb;
              mub[j] -= e_dd * dt * tb;
              gb[j] += (-2.0 * r * ek + 2.0 * g * r * r * r * ek) * dt * tb;
            }
          }
          db(k, 0) += dbar;
          if (ty) tbar_[n.a](k, 0) += dtbar;
        }
        break;
      }
    }
  }

  if (param_grads) {
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      if (nodes[id].op == Graph::Op::param) (*param_grads)[param_index_[nodes[id].slot]] += vbar_[id];
    }
  }
}

Matrix grad_wrt_input(const Graph& g, const ParameterSet& params, const Feed& feed, NodeId input) {
  Workspace ws;
  ws.forward(g, params, feed);
  ws.backward(1.0, 0.0);
  return ws.adjoint(input);
}

double grad_of_loss_wrt_params(const Graph& g, const ParameterSet& params, const Feed& feed,
                               const GradientLossTerm& term, ParameterSet& grads, Workspace& ws) {
  ws.forward(g, params, feed);
  ws.backward(1.0, 0.0);
  const Matrix grad = ws.adjoint(term.input);
  if (term.targets.rows() != static_cast<Eigen::Index>(term.rows.size()) || term.targets.cols() != grad.cols()) {
    throw Error("gradient loss: targets must have one row per selected input row");
  }
  // dL/dG[row] = 2 w s (s G[row] - target); the loss gradient in theta is the
  // theta-gradient of the directional derivative of the output along dL/dG.
  Matrix direction = Matrix::Zero(grad.rows(), grad.cols());
  double loss = 0.0;
  for (std::size_t k = 0; k < term.rows.size(); ++k) {
    const int row = term.rows[k];
    if (row < 0 || row >= grad.rows()) throw Error("gradient loss: row out of range");
    const auto r = term.sign * grad.row(row) - term.targets.row(k);
    loss += term.weight * r.squaredNorm();
    direction.row(row) += 2.0 * term.weight * term.sign * r;
  }
  ws.tangent(term.input, direction);
  ws.backward(0.0, 1.0, &grads);
  return loss;
}

FdReport fd_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& point,
                  const Eigen::VectorXd& analytic, const std::vector<double>& steps, double floor_fraction) {
  if (analytic.size() != point.size()) throw Error("fd_check: gradient and point differ in length");
  FdReport rep;
  rep.steps = steps;
  rep.error.assign(point.size(), std::numeric_limits<double>::infinity());
  const double floor = floor_fraction * (analytic.size() ? analytic.cwiseAbs().maxCoeff() : 0.0);
  for (double h : steps) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
      Eigen::VectorXd x = point;
      x[i] = point[i] + h;
      const double fp = f(x);
      x[i] = point[i] - h;
      const double fm = f(x);
      const double fd = (fp - fm) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(fd), floor});
      const double err = denom > 0.0 ? std::abs(analytic[i] - fd) / denom : 0.0;
      worst = std::max(worst, err);
      rep.error[i] = std::min(rep.error[i], err);
    }
    rep.max_error_per_step.push_back(worst);
  }
  rep.max_error = 0.0;
  for (double e : rep.error) rep.max_error = std::max(rep.max_error, e);
  if (steps.empty()) rep.error.assign(point.size(), 0.0);
  return rep;
}

}  // namespace dispnet::diff
