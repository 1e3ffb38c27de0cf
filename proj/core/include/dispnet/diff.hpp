#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dispnet/types.hpp"

namespace dispnet::diff {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shifted softplus ln(e^x + 1) - ln 2 and its first two derivatives,
/// with separate branches for |x| > 30 so nothing overflows.
double ssp(double x);
double ssp_d1(double x);  // logistic sigmoid
double ssp_d2(double x);

/// Named trainable tensors in insertion order. Shapes are fixed once added.
class ParameterSet {
 public:
  void add(std::string name, Matrix value);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  Matrix& operator[](std::size_t i) { return values_.at(i); }
  const Matrix& operator[](std::size_t i) const { return values_.at(i); }
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;
  std::ptrdiff_t find(std::string_view name) const;

  std::size_t scalar_count() const;

  /// Same names and shapes, all entries zero.
  ParameterSet zeros_like() const;
  void set_zero();
  bool same_layout(const ParameterSet& other) const;
  /// Throws naming the first tensor holding a NaN or infinity.
  void require_finite(std::string_view what) const;

  ParameterSet& operator+=(const ParameterSet& other);
  ParameterSet& operator*=(double s);

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

using NodeId = int;

/// Immutable-after-build evaluation graph over a closed primitive set. Each node
/// holds a 2-D value. Forward-mode tangents are taken along a single direction
/// in one designated input; parameters never carry a tangent.
class Graph {
 public:
  enum class Op { input, param, dense, ssp, mul, add, gather, scatter_add, sum, distance, gaussian_rbf };

  /// Real-valued input of fixed shape, fed at evaluation time.
  NodeId input(std::string name, int rows, int cols);
  /// Integer index vector fed at evaluation time; entries must lie in [0, bound).
  int index_input(std::string name, int length, int bound);
  /// Trainable tensor looked up by name in the ParameterSet at evaluation time.
  NodeId param(std::string name, int rows, int cols);

  /// x W (+ b). W is (in x out), b is (1 x out); both must be parameters.
  NodeId dense(NodeId x, NodeId w, NodeId b = -1);
  NodeId ssp(NodeId x);
  NodeId mul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  /// Rows of x picked by a fixed index list.
  NodeId gather(NodeId x, std::vector<int> rows);
  /// Rows of x picked by an index input.
  NodeId gather_indexed(NodeId x, int index_slot);
  /// out[rows[k]] += x[k]; out has `out_rows` rows.
  NodeId scatter_add(NodeId x, std::vector<int> rows, int out_rows);
  /// scale * (sum of all entries), a 1 x 1 value.
  NodeId sum(NodeId x, double scale = 1.0);
  /// |pos[a_k] - pos[b_k]| for each pair, a (pairs x 1) column. pos must be (n x 3).
  NodeId distance(NodeId pos, std::vector<std::pair<int, int>> pairs);
  /// exp(-gamma_k (d - mu_k)^2): d is (m x 1), mu and gamma are (1 x K) parameters.
  NodeId gaussian_rbf(NodeId d, NodeId mu, NodeId gamma);

  void set_output(NodeId node);
  NodeId output() const noexcept { return output_; }

  struct Node {
    Node(Op op_, int rows_, int cols_, NodeId a_ = -1, NodeId b_ = -1, NodeId c_ = -1)
        : op(op_), rows(rows_), cols(cols_), a(a_), b(b_), c(c_) {}
    Op op;
    int rows = 0, cols = 0;
    NodeId a = -1, b = -1, c = -1;
    std::string name;
    std::vector<int> rows_a;  // gather / scatter indices, distance first atoms
    std::vector<int> rows_b;  // distance second atoms
    int slot = -1;            // input, index input or parameter slot
    double scale = 1.0;
  };

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<std::string>& input_names() const noexcept { return input_names_; }
  const std::vector<NodeId>& input_nodes() const noexcept { return input_nodes_; }
  struct IndexSlot {
    std::string name;
    int length, bound;
  };
  const std::vector<IndexSlot>& index_slots() const noexcept { return index_slots_; }
  struct ParamSlot {
    std::string name;
    int rows, cols;
  };
  const std::vector<ParamSlot>& param_slots() const noexcept { return param_slots_; }

 private:
  NodeId push(Node n);
  const Node& node(NodeId id, const char* role) const;

  std::vector<Node> nodes_;
  std::vector<std::string> input_names_;
  std::vector<NodeId> input_nodes_;
  std::vector<IndexSlot> index_slots_;
  std::vector<ParamSlot> param_slots_;
  NodeId output_ = -1;
};

/// Values fed to a graph's inputs and index inputs, in declaration order.
struct Feed {
  std::vector<Matrix> inputs;
  std::vector<std::vector<int>> indices;
};

/// Per-evaluation scratch. One workspace per thread; the graph and parameters
/// are only read, so evaluation is reentrant across workspaces.
///
/// Passes: forward() computes values; tangent() pushes a direction through one
/// input; backward(vbar, tbar) propagates adjoint pairs (of values and of
/// tangents) from the output. Seeding (1, 0) gives the ordinary gradient;
/// seeding (0, 1) after tangent() gives the gradient of the directional
/// derivative, which is the second-order quantity force training needs.
class Workspace {
 public:
  double forward(const Graph& g, const ParameterSet& params, const Feed& feed);
  /// Requires forward(). Returns the directional derivative of the output.
  double tangent(NodeId input, const Matrix& direction);
  /// Requires forward() (and tangent() when tbar != 0). Parameter adjoints are
  /// accumulated into `param_grads` when given, which must match the layout.
  void backward(double vbar, double tbar, ParameterSet* param_grads = nullptr);

  const Matrix& value(NodeId n) const { return value_.at(n); }
  /// Adjoint of the value of `n` after backward().
  const Matrix& adjoint(NodeId n) const { return vbar_.at(n); }

 private:
  const Graph* g_ = nullptr;
  const ParameterSet* params_ = nullptr;
  const Feed* feed_ = nullptr;
  std::vector<int> param_index_;  // graph parameter slot -> ParameterSet index
  std::vector<Matrix> value_, tan_, vbar_, tbar_;
  std::vector<char> has_tan_;
  bool tangent_done_ = false;
};

/// Gradient of the scalar graph output with respect to one input node.
Matrix grad_wrt_input(const Graph& g, const ParameterSet& params, const Feed& feed, NodeId input);

/// Loss over input gradients: with G = grad of the output w.r.t. `input`,
/// the loss is sum over rows listed in `rows` of |s * G[row] - target[row]|^2 * weight.
/// Returns the loss and accumulates d loss / d theta into `grads`.
struct GradientLossTerm {
  NodeId input;
  std::vector<int> rows;       // input rows whose gradients enter the loss
  double sign = -1.0;          // prediction = sign * gradient (forces are -dE/dr)
  Matrix targets;              // rows.size() x cols
  double weight = 1.0;
};
double grad_of_loss_wrt_params(const Graph& g, const ParameterSet& params, const Feed& feed,
                               const GradientLossTerm& term, ParameterSet& grads, Workspace& ws);

/// Finite-difference comparison of an analytic gradient.
struct FdReport {
  std::vector<double> steps;
  std::vector<double> max_error_per_step;  // max over coordinates, per step
  std::vector<double> error;               // per coordinate, min over steps
  double max_error = 0.0;                  // max over coordinates of `error`
};

/// Central differences of f at `point` for each step; errors are relative to
/// max(|analytic|, |fd|, floor) with floor = floor_fraction * max|analytic|.
FdReport fd_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& point,
                  const Eigen::VectorXd& analytic, const std::vector<double>& steps,
                  double floor_fraction = 1e-6);

}  // namespace dispnet::diff
