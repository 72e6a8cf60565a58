#include "attnkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace attnkit {

namespace {

template <class F>
void for_each_offset(const std::vector<int64_t>& dims, const std::vector<int64_t>& sa,
                     const std::vector<int64_t>& sb, const std::vector<int64_t>& sr, F&& f) {
  const int r = static_cast<int>(dims.size());
  int64_t oa = 0, ob = 0, orr = 0;
  std::vector<int64_t> idx(dims.size(), 0);
  for (;;) {
    f(oa, ob, orr);
    int k = r - 1;
    for (; k >= 0; --k) {
      ++idx[k];
      oa += sa[k];
      ob += sb[k];
      orr += sr[k];
      if (idx[k] < dims[k]) break;
      idx[k] = 0;
      oa -= sa[k] * dims[k];
      ob -= sb[k] * dims[k];
      orr -= sr[k] * dims[k];
    }
    if (k < 0) break;
  }
}

std::vector<int64_t> map_strides(const std::vector<Axis>& space, const std::vector<Axis>& axes) {
  const std::vector<int64_t> own = strides_of(axes);
  std::vector<int64_t> s(space.size(), 0);
  for (size_t i = 0; i < space.size(); ++i) {
    for (size_t j = 0; j < axes.size(); ++j) {
      if (axes[j].name == space[i].name) {
        s[i] = own[j];
        break;
      }
    }
  }
  return s;
}

void check_unique_names(const std::vector<Axis>& axes) {
  for (size_t i = 0; i < axes.size(); ++i)
    for (size_t j = i + 1; j < axes.size(); ++j)
      if (axes[i].name == axes[j].name)
        throw std::invalid_argument("duplicate axis name '" + axes[i].name + "'");
}

struct Resolved {
  const double* data;
  std::vector<Axis> axes;
};

// One pairwise contraction step: everything not in `keep` is summed out.
Tensor contract_pair(const Resolved& a, const Resolved& b, const std::set<std::string>& keep,
                     CounterChannel* counter, const std::string& label) {
  std::vector<Axis> space = a.axes;
  for (const Axis& ax : b.axes) {
    bool found = false;
    for (const Axis& sx : space) {
      if (sx.name == ax.name) {
        if (sx.size != ax.size)
          throw std::invalid_argument("axis size mismatch on '" + ax.name + "'");
        found = true;
        break;
      }
    }
    if (!found) space.push_back(ax);
  }
  std::vector<Axis> out_axes;
  for (const Axis& ax : space)
    if (keep.count(ax.name)) out_axes.push_back(ax);

  Tensor result(out_axes);
  std::vector<int64_t> dims;
  dims.reserve(space.size());
  for (const Axis& ax : space) dims.push_back(ax.size);
  const std::vector<int64_t> sa = map_strides(space, a.axes);
  const std::vector<int64_t> sb = map_strides(space, b.axes);
  const std::vector<int64_t> sr = map_strides(space, out_axes);

  const double* pa = a.data;
  const double* pb = b.data;
  double* pr = result.data().data();
  for_each_offset(dims, sa, sb, sr,
                  [&](int64_t oa, int64_t ob, int64_t orr) { pr[orr] += pa[oa] * pb[ob]; });

  if (counter) counter->record(label, numel_of(space));
  return result;
}

// Sum out every axis of `src` that is not in `target` (target keeps src order).
Tensor project_sum(const Resolved& src, const std::vector<Axis>& target) {
  Tensor result(target);
  std::vector<int64_t> dims;
  for (const Axis& ax : src.axes) dims.push_back(ax.size);
  const std::vector<int64_t> ss = strides_of(src.axes);
  const std::vector<int64_t> sr = map_strides(src.axes, target);
  const std::vector<int64_t> zero(src.axes.size(), 0);
  const double* ps = src.data;
  double* pr = result.data().data();
  for_each_offset(dims, ss, zero, sr, [&](int64_t os, int64_t, int64_t orr) { pr[orr] += ps[os]; });
  return result;
}

// Permute into `out` order, replicating along axes absent from `src`.
Tensor expand_permute(const Resolved& src, const std::vector<Axis>& out) {
  Tensor result(out);
  std::vector<int64_t> dims;
  for (const Axis& ax : out) dims.push_back(ax.size);
  const std::vector<int64_t> sr = strides_of(out);
  const std::vector<int64_t> ss = map_strides(out, src.axes);
  const std::vector<int64_t> zero(out.size(), 0);
  const double* ps = src.data;
  double* pr = result.data().data();
  for_each_offset(dims, ss, zero, sr, [&](int64_t os, int64_t, int64_t orr) { pr[orr] = ps[os]; });
  return result;
}

Tensor einsum_impl(const std::vector<EinsumOperand>& operands, const std::vector<Axis>& out_axes,
                   CounterChannel* counter, const std::string& label) {
  if (operands.empty()) throw std::invalid_argument("einsum: empty operand list");

  std::vector<Resolved> ops;
  ops.reserve(operands.size());
  for (const EinsumOperand& op : operands) {
    Resolved r{op.tensor->data().data(), op.tensor->axes()};
    if (!op.names.empty()) {
      if (op.names.size() != r.axes.size())
        throw std::invalid_argument("einsum: binding name count does not match operand rank");
      for (size_t i = 0; i < r.axes.size(); ++i) r.axes[i].name = op.names[i];
    }
    check_unique_names(r.axes);
    ops.push_back(std::move(r));
  }
  // Cross-operand size consistency.
  for (size_t i = 0; i < ops.size(); ++i)
    for (const Axis& ax : ops[i].axes)
      for (size_t j = i + 1; j < ops.size(); ++j)
        for (const Axis& bx : ops[j].axes)
          if (ax.name == bx.name && ax.size != bx.size)
            throw std::invalid_argument("einsum: axis size mismatch on '" + ax.name + "'");

  Tensor held;  // owns the running intermediate
  Resolved cur = ops[0];
  for (size_t i = 1; i < ops.size(); ++i) {
    std::set<std::string> keep;
    for (const Axis& ax : out_axes) keep.insert(ax.name);
    for (size_t j = i + 1; j < ops.size(); ++j)
      for (const Axis& ax : ops[j].axes) keep.insert(ax.name);
    std::string step_label = label;
    if (ops.size() > 2) step_label += "#" + std::to_string(i);
    held = contract_pair(cur, ops[i], keep, counter, step_label);
    cur = Resolved{held.data().data(), held.axes()};
  }

  // Drop leftover axes (single-operand case), then lay out as requested.
  std::vector<Axis> kept;
  for (const Axis& ax : cur.axes) {
    bool in_out = false;
    for (const Axis& ox : out_axes) in_out |= ox.name == ax.name;
    if (in_out) kept.push_back(ax);
  }
  Tensor reduced;
  if (kept.size() != cur.axes.size()) {
    reduced = project_sum(cur, kept);
    cur = Resolved{reduced.data().data(), reduced.axes()};
  }
  return expand_permute(cur, out_axes);
}

}  // namespace

Tensor::Tensor(std::vector<Axis> axes) : axes_(std::move(axes)), data_(numel_of(axes_), 0.0) {
  for (const Axis& ax : axes_)
    if (ax.size < 1) throw std::invalid_argument("axis '" + ax.name + "' must have size >= 1");
  check_unique_names(axes_);
}

Tensor::Tensor(std::vector<Axis> axes, std::vector<double> data) : Tensor(std::move(axes)) {
  if (static_cast<int64_t>(data.size()) != numel())
    throw std::invalid_argument("data length does not match axis sizes");
  data_ = std::move(data);
}

int Tensor::axis_index(const std::string& name) const {
  for (size_t i = 0; i < axes_.size(); ++i)
    if (axes_[i].name == name) return static_cast<int>(i);
  return -1;
}

int64_t Tensor::axis_size(const std::string& name) const {
  const int i = axis_index(name);
  if (i < 0) throw std::invalid_argument("axis '" + name + "' not found");
  return axes_[i].size;
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  return const_cast<Tensor*>(this)->at(idx);
}

double& Tensor::at(std::initializer_list<int64_t> idx) {
  if (static_cast<int>(idx.size()) != rank()) throw std::invalid_argument("index rank mismatch");
  const std::vector<int64_t> s = strides_of(axes_);
  int64_t off = 0;
  size_t k = 0;
  for (int64_t i : idx) off += i * s[k++];
  return data_[off];
}

Tensor Tensor::renamed(const std::vector<std::string>& names) const {
  if (names.size() != axes_.size()) throw std::invalid_argument("rename: name count mismatch");
  std::vector<Axis> axes = axes_;
  for (size_t i = 0; i < names.size(); ++i) axes[i].name = names[i];
  return Tensor(std::move(axes), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

std::vector<int64_t> strides_of(const std::vector<Axis>& axes) {
  std::vector<int64_t> s(axes.size(), 1);
  for (int i = static_cast<int>(axes.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * axes[i + 1].size;
  return s;
}

int64_t numel_of(const std::vector<Axis>& axes) {
  int64_t n = 1;
  for (const Axis& ax : axes) n *= ax.size;
  return n;
}

Tensor einsum(const std::vector<EinsumOperand>& operands, const std::vector<std::string>& out,
              CounterChannel* counter, const std::string& label) {
  if (operands.empty()) throw std::invalid_argument("einsum: empty operand list");
  // Resolve output sizes; every out axis must exist in some operand.
  std::vector<Axis> out_axes;
  for (const std::string& name : out) {
    int64_t size = -1;
    for (const EinsumOperand& op : operands) {
      const std::vector<Axis>& axes = op.tensor->axes();
      for (size_t i = 0; i < axes.size(); ++i) {
        const std::string& n = op.names.empty() ? axes[i].name : op.names[i];
        if (n == name) size = axes[i].size;
      }
    }
    if (size < 0) throw std::invalid_argument("einsum: out axis '" + name + "' not found in any operand");
    out_axes.push_back(Axis{name, size});
  }
  check_unique_names(out_axes);
  return einsum_impl(operands, out_axes, counter, label);
}

namespace detail {

Tensor einsum_broadcast(const std::vector<EinsumOperand>& operands, const std::vector<Axis>& out,
                        CounterChannel* counter, const std::string& label) {
  return einsum_impl(operands, out, counter, label);
}

}  // namespace detail

Tensor softmax(const Tensor& t, const std::string& reduced_axis) {
  const int k = t.axis_index(reduced_axis);
  if (k < 0) throw std::invalid_argument("softmax: axis '" + reduced_axis + "' not found");
  const std::vector<int64_t> s = strides_of(t.axes());
  const int64_t nk = t.axes()[k].size;
  const int64_t sk = s[k];

  Tensor out(t.axes());
  std::vector<Axis> rest = t.axes();
  rest.erase(rest.begin() + k);
  std::vector<int64_t> rest_dims;
  for (const Axis& ax : rest) rest_dims.push_back(ax.size);
  std::vector<int64_t> rest_strides = s;
  rest_strides.erase(rest_strides.begin() + k);
  const std::vector<int64_t> zero(rest.size(), 0);

  const double* pin = t.data().data();
  double* pout = out.data().data();
  for_each_offset(rest_dims, rest_strides, zero, zero, [&](int64_t base, int64_t, int64_t) {
    double mx = pin[base];
    for (int64_t i = 1; i < nk; ++i) mx = std::max(mx, pin[base + i * sk]);
    double sum = 0.0;
    for (int64_t i = 0; i < nk; ++i) {
      const double e = std::exp(pin[base + i * sk] - mx);
      pout[base + i * sk] = e;
      sum += e;
    }
    for (int64_t i = 0; i < nk; ++i) pout[base + i * sk] /= sum;
  });
  return out;
}

Tensor normal_init(std::vector<Axis> axes, double stddev, Rng& rng) {
  if (stddev < 0.0) throw std::invalid_argument("normal_init: negative stddev");
  Tensor t(std::move(axes));
  for (double& v : t.data()) v = stddev == 0.0 ? 0.0 : stddev * rng.normal();
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!(a.axes() == b.axes())) throw std::invalid_argument("add: axis sets differ");
  Tensor out = a;
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Tensor scale(const Tensor& t, double c) {
  Tensor out = t;
  for (double& v : out.data()) v *= c;
  return out;
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.axes()); }

Tensor identity_matrix(const Axis& rows, const Axis& cols) {
  Tensor t({rows, cols});
  const int64_t d = std::min(rows.size, cols.size);
  for (int64_t i = 0; i < d; ++i) t.data()[i * cols.size + i] = 1.0;
  return t;
}

}  // namespace attnkit
