#include "attnkit/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attnkit {

namespace {

void accumulate(std::unordered_map<NodeId, Tensor>& grads, NodeId id, Tensor g) {
  auto it = grads.find(id);
  if (it == grads.end())
    grads.emplace(id, std::move(g));
  else
    it->second = add(it->second, g);
}

}  // namespace

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw std::invalid_argument("node not on tape");
}

const Tensor& Tape::value(NodeId id) const {
  check(id);
  return nodes_[id].value;
}

NodeId Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::einsum(std::vector<NodeId> inputs, std::vector<std::string> out_axes,
                    CounterChannel* counter, std::string label) {
  std::vector<EinsumOperand> ops;
  for (NodeId id : inputs) {
    check(id);
    ops.emplace_back(nodes_[id].value);
  }
  Node n;
  n.op = Op::Einsum;
  n.value = attnkit::einsum(ops, out_axes, counter, label);
  n.inputs = std::move(inputs);
  n.out_axes = std::move(out_axes);
  return push(std::move(n));
}

NodeId Tape::softmax(NodeId input, std::string reduced_axis) {
  check(input);
  Node n;
  n.op = Op::Softmax;
  n.value = attnkit::softmax(nodes_[input].value, reduced_axis);
  n.inputs = {input};
  n.axis = std::move(reduced_axis);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  Node n;
  n.op = Op::Add;
  n.value = attnkit::add(nodes_[a].value, nodes_[b].value);
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
  check(a);
  Node n;
  n.op = Op::Scale;
  n.value = attnkit::scale(nodes_[a].value, c);
  n.inputs = {a};
  n.c = c;
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
  check(a);
  Node n;
  n.op = Op::Relu;
  n.value = nodes_[a].value;
  for (double& v : n.value.data()) v = std::max(v, 0.0);
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Tape::layer_norm(NodeId x, std::string axis, NodeId gain, NodeId bias, double eps) {
  check(x);
  check(gain);
  check(bias);
  const Tensor& xv = nodes_[x].value;
  const int k = xv.axis_index(axis);
  if (k < 0) throw std::invalid_argument("layer_norm: axis '" + axis + "' not found");
  const int64_t d = xv.axes()[k].size;
  if (nodes_[gain].value.numel() != d || nodes_[bias].value.numel() != d)
    throw std::invalid_argument("layer_norm: gain/bias size mismatch");
  if (static_cast<size_t>(k) != xv.axes().size() - 1)
    throw std::invalid_argument("layer_norm: normalized axis must be the last axis");

  Node n;
  n.op = Op::LayerNorm;
  n.value = Tensor(xv.axes());
  const double* px = xv.data().data();
  const double* pg = nodes_[gain].value.data().data();
  const double* pb = nodes_[bias].value.data().data();
  double* py = n.value.data().data();
  const int64_t rows = xv.numel() / d;
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = px + r * d;
    double mu = 0.0;
    for (int64_t i = 0; i < d; ++i) mu += xr[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(d);
    const double s = std::sqrt(var + eps);
    for (int64_t i = 0; i < d; ++i) py[r * d + i] = pg[i] * (xr[i] - mu) / s + pb[i];
  }
  n.inputs = {x, gain, bias};
  n.axis = std::move(axis);
  n.c = eps;
  return push(std::move(n));
}

NodeId Tape::gather_rows(NodeId table, std::vector<int64_t> rows, std::vector<Axis> row_axes) {
  check(table);
  const Tensor& tv = nodes_[table].value;
  if (tv.rank() != 2) throw std::invalid_argument("gather_rows: table must be rank 2");
  const int64_t nrows = tv.axes()[0].size;
  const int64_t d = tv.axes()[1].size;
  if (numel_of(row_axes) != static_cast<int64_t>(rows.size()))
    throw std::invalid_argument("gather_rows: row_axes do not match index count");
  for (int64_t r : rows)
    if (r < 0 || r >= nrows) throw std::invalid_argument("gather_rows: row index out of range");

  std::vector<Axis> out_axes = row_axes;
  out_axes.push_back(tv.axes()[1]);
  Node n;
  n.op = Op::GatherRows;
  n.value = Tensor(out_axes);
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy_n(tv.data().data() + rows[i] * d, d, n.value.data().data() + static_cast<int64_t>(i) * d);
  n.inputs = {table};
  n.indices = std::move(rows);
  n.axes_spec = std::move(row_axes);
  return push(std::move(n));
}

NodeId Tape::cross_entropy_mean(NodeId logits, std::vector<int64_t> targets) {
  check(logits);
  const Tensor& lv = nodes_[logits].value;
  if (lv.rank() != 2) throw std::invalid_argument("cross_entropy_mean: logits must be rank 2");
  const int64_t k = lv.axes()[0].size;
  const int64_t v = lv.axes()[1].size;
  if (static_cast<int64_t>(targets.size()) != k)
    throw std::invalid_argument("cross_entropy_mean: target count mismatch");
  for (int64_t t : targets)
    if (t < 0 || t >= v) throw std::invalid_argument("cross_entropy_mean: target out of range");

  double loss = 0.0;
  const double* pl = lv.data().data();
  for (int64_t r = 0; r < k; ++r) {
    const double* row = pl + r * v;
    double mx = row[0];
    for (int64_t i = 1; i < v; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (int64_t i = 0; i < v; ++i) sum += std::exp(row[i] - mx);
    loss += mx + std::log(sum) - row[targets[r]];
  }
  Node n;
  n.op = Op::CrossEntropy;
  n.value = Tensor(std::vector<Axis>{}, {loss / static_cast<double>(k)});
  n.inputs = {logits};
  n.indices = std::move(targets);
  return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, std::vector<Axis> new_axes) {
  check(a);
  const Tensor& av = nodes_[a].value;
  if (numel_of(new_axes) != av.numel()) throw std::invalid_argument("reshape: element count mismatch");
  Node n;
  n.op = Op::Reshape;
  n.value = Tensor(new_axes, av.data());
  n.inputs = {a};
  n.axes_spec = std::move(new_axes);
  return push(std::move(n));
}

NodeId Tape::rename(NodeId a, std::vector<std::string> names) {
  check(a);
  Node n;
  n.op = Op::Rename;
  n.value = nodes_[a].value.renamed(names);
  n.inputs = {a};
  return push(std::move(n));
}

std::unordered_map<NodeId, Tensor> Tape::backward(NodeId output) const {
  check(output);
  const Tensor& out_val = nodes_[output].value;
  if (out_val.rank() != 0) throw std::invalid_argument("backward: output is not a scalar");

  std::unordered_map<NodeId, Tensor> grads;
  grads.emplace(output, Tensor(std::vector<Axis>{}, {1.0}));

  for (NodeId id = output; id >= 0; --id) {
    auto git = grads.find(id);
    if (git == grads.end()) continue;
    const Node& node = nodes_[id];
    const Tensor g = git->second;  // copy: map may rehash while accumulating

    switch (node.op) {
      case Op::Leaf:
        break;
      case Op::Einsum: {
        for (size_t i = 0; i < node.inputs.size(); ++i) {
          std::vector<EinsumOperand> ops;
          for (size_t j = 0; j < node.inputs.size(); ++j)
            if (j != i) ops.emplace_back(nodes_[node.inputs[j]].value);
          ops.emplace_back(g);
          Tensor gi = detail::einsum_broadcast(ops, nodes_[node.inputs[i]].value.axes());
          accumulate(grads, node.inputs[i], std::move(gi));
        }
        break;
      }
      case Op::Softmax: {
        // dx = w * (g - sum_axis(g * w))
        const Tensor& w = node.value;
        const int k = w.axis_index(node.axis);
        const std::vector<int64_t> s = strides_of(w.axes());
        const int64_t nk = w.axes()[k].size;
        const int64_t sk = s[k];
        Tensor dx(w.axes());
        const int64_t total = w.numel();
        const int64_t inner = sk;
        const int64_t block = nk * sk;
        const double* pw = w.data().data();
        const double* pg = g.data().data();
        double* pd = dx.data().data();
        for (int64_t base = 0; base < total; base += block) {
          for (int64_t off = 0; off < inner; ++off) {
            double dot = 0.0;
            for (int64_t i = 0; i < nk; ++i) dot += pg[base + off + i * sk] * pw[base + off + i * sk];
            for (int64_t i = 0; i < nk; ++i) {
              const int64_t p = base + off + i * sk;
              pd[p] = pw[p] * (pg[p] - dot);
            }
          }
        }
        accumulate(grads, node.inputs[0], std::move(dx));
        break;
      }
      case Op::Add:
        accumulate(grads, node.inputs[0], g);
        accumulate(grads, node.inputs[1], g);
        break;
      case Op::Scale:
        accumulate(grads, node.inputs[0], attnkit::scale(g, node.c));
        break;
      case Op::Relu: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        Tensor dx = g;
        for (int64_t i = 0; i < dx.numel(); ++i)
          if (x.data()[i] <= 0.0) dx.data()[i] = 0.0;
        accumulate(grads, node.inputs[0], std::move(dx));
        break;
      }
      case Op::LayerNorm: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        const Tensor& gain = nodes_[node.inputs[1]].value;
        const int64_t d = gain.numel();
        const int64_t rows = x.numel() / d;
        const double eps = node.c;
        Tensor dx(x.axes());
        Tensor dgain(gain.axes());
        Tensor dbias(nodes_[node.inputs[2]].value.axes());
        const double* px = x.data().data();
        const double* pg = gain.data().data();
        const double* pdy = g.data().data();
        for (int64_t r = 0; r < rows; ++r) {
          const double* xr = px + r * d;
          const double* dyr = pdy + r * d;
          double mu = 0.0;
          for (int64_t i = 0; i < d; ++i) mu += xr[i];
          mu /= static_cast<double>(d);
          double var = 0.0;
          for (int64_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
          var /= static_cast<double>(d);
          const double s = std::sqrt(var + eps);
          double mean_dxh = 0.0, mean_dxh_xh = 0.0;
          for (int64_t i = 0; i < d; ++i) {
            const double xh = (xr[i] - mu) / s;
            const double dxh = dyr[i] * pg[i];
            dgain.data()[i] += dyr[i] * xh;
            dbias.data()[i] += dyr[i];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh;
          }
          mean_dxh /= static_cast<double>(d);
          mean_dxh_xh /= static_cast<double>(d);
          for (int64_t i = 0; i < d; ++i) {
            const double xh = (xr[i] - mu) / s;
            dx.data()[r * d + i] = (dyr[i] * pg[i] - mean_dxh - xh * mean_dxh_xh) / s;
          }
        }
        accumulate(grads, node.inputs[0], std::move(dx));
        accumulate(grads, node.inputs[1], std::move(dgain));
        accumulate(grads, node.inputs[2], std::move(dbias));
        break;
      }
      case Op::GatherRows: {
        const Tensor& table = nodes_[node.inputs[0]].value;
        const int64_t d = table.axes()[1].size;
        Tensor dt(table.axes());
        for (size_t i = 0; i < node.indices.size(); ++i) {
          const double* src = g.data().data() + static_cast<int64_t>(i) * d;
          double* dst = dt.data().data() + node.indices[i] * d;
          for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        accumulate(grads, node.inputs[0], std::move(dt));
        break;
      }
      case Op::CrossEntropy: {
        const Tensor& logits = nodes_[node.inputs[0]].value;
        const int64_t k = logits.axes()[0].size;
        const int64_t v = logits.axes()[1].size;
        const double gs = g.data()[0] / static_cast<double>(k);
        Tensor dl = attnkit::softmax(logits, logits.axes()[1].name);
        for (int64_t r = 0; r < k; ++r) dl.data()[r * v + node.indices[r]] -= 1.0;
        for (double& x : dl.data()) x *= gs;
        accumulate(grads, node.inputs[0], std::move(dl));
        break;
      }
      case Op::Reshape: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        accumulate(grads, node.inputs[0], Tensor(x.axes(), g.data()));
        break;
      }
      case Op::Rename: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        std::vector<std::string> names;
        for (const Axis& ax : x.axes()) names.push_back(ax.name);
        accumulate(grads, node.inputs[0], g.renamed(names));
        break;
      }
    }
  }

  std::unordered_map<NodeId, Tensor> leaf_grads;
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
    if (nodes_[id].op != Op::Leaf) continue;
    auto it = grads.find(id);
    leaf_grads.emplace(id, it != grads.end() ? it->second : Tensor(nodes_[id].value.axes()));
  }
  return leaf_grads;
}

GradientReport finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                 const Tensor& analytic_grad, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");
  GradientReport report;
  Tensor probe = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double xi = x.data()[i];
    const double h = step * std::max(1.0, std::fabs(xi));
    probe.data()[i] = xi + h;
    const double fp = f(probe);
    probe.data()[i] = xi - h;
    const double fm = f(probe);
    probe.data()[i] = xi;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad.data()[i];
    const double rel =
        std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    report.per_coord_rel_err.push_back(rel);
    report.max_rel_err = std::max(report.max_rel_err, rel);
  }
  return report;
}

}  // namespace attnkit
