#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "attnkit/tensor.hpp"

namespace attnkit {

using NodeId = int32_t;

// Reverse-mode differentiation over a recorded computation. Values are
// computed eagerly on append; backward() replays the tape in reverse.
// A tape is owned by a single computation; independent tapes may run
// concurrently.
class Tape {
 public:
  NodeId leaf(Tensor value);

  NodeId einsum(std::vector<NodeId> inputs, std::vector<std::string> out_axes,
                CounterChannel* counter = nullptr, std::string label = "einsum");
  NodeId softmax(NodeId input, std::string reduced_axis);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId relu(NodeId a);
  // Normalizes along `axis`, then applies per-coordinate gain and bias.
  NodeId layer_norm(NodeId x, std::string axis, NodeId gain, NodeId bias, double eps = 1e-5);
  // table[rows, d] selected by index list; result carries row_axes + d axis.
  NodeId gather_rows(NodeId table, std::vector<int64_t> rows, std::vector<Axis> row_axes);
  // Mean of (logsumexp - target logit) over rows of logits[k, v].
  NodeId cross_entropy_mean(NodeId logits, std::vector<int64_t> targets);
  NodeId reshape(NodeId a, std::vector<Axis> new_axes);
  NodeId rename(NodeId a, std::vector<std::string> names);

  const Tensor& value(NodeId id) const;
  size_t size() const { return nodes_.size(); }

  // Gradients of the scalar `output` with respect to every leaf.
  std::unordered_map<NodeId, Tensor> backward(NodeId output) const;

 private:
  enum class Op { Leaf, Einsum, Softmax, Add, Scale, Relu, LayerNorm, GatherRows, CrossEntropy, Reshape, Rename };

  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    // op payloads
    std::vector<std::string> out_axes;
    std::string axis;
    double c = 0.0;
    std::vector<int64_t> indices;
    std::vector<Axis> axes_spec;
  };

  NodeId push(Node n);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
};

struct GradientReport {
  std::vector<double> per_coord_rel_err;
  double max_rel_err = 0.0;
};

// Central-difference check of an analytic gradient. Step is scaled per
// coordinate: step * max(1, |x_i|).
GradientReport finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                 const Tensor& analytic_grad, double step = 1e-5);

}  // namespace attnkit
