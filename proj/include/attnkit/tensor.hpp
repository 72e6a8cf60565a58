#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "attnkit/rng.hpp"

namespace attnkit {

struct Axis {
  std::string name;
  int64_t size = 1;
};

inline bool operator==(const Axis& a, const Axis& b) { return a.name == b.name && a.size == b.size; }

// Append-only multiply tally. Each einsum evaluation step records
// (label, product of union-axis sizes).
class CounterChannel {
 public:
  void record(const std::string& label, int64_t multiplies) { records_.emplace_back(label, multiplies); }
  const std::vector<std::pair<std::string, int64_t>>& records() const { return records_; }
  int64_t total() const {
    int64_t t = 0;
    for (const auto& r : records_) t += r.second;
    return t;
  }
  void clear() { records_.clear(); }

 private:
  std::vector<std::pair<std::string, int64_t>> records_;
};

// Dense row-major tensor with named axes; the universal value type here.
// Immutable by convention once built (operations return fresh tensors).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Axis> axes);
  Tensor(std::vector<Axis> axes, std::vector<double> data);

  const std::vector<Axis>& axes() const { return axes_; }
  int rank() const { return static_cast<int>(axes_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  int axis_index(const std::string& name) const;  // -1 if absent
  int64_t axis_size(const std::string& name) const;
  bool has_axis(const std::string& name) const { return axis_index(name) >= 0; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double at(std::initializer_list<int64_t> idx) const;
  double& at(std::initializer_list<int64_t> idx);

  // Same data, new axis names (positional).
  Tensor renamed(const std::vector<std::string>& names) const;

  bool all_finite() const;
  double max_abs() const;

 private:
  std::vector<Axis> axes_;
  std::vector<double> data_;
};

std::vector<int64_t> strides_of(const std::vector<Axis>& axes);
int64_t numel_of(const std::vector<Axis>& axes);

struct EinsumOperand {
  const Tensor* tensor;
  std::vector<std::string> names;  // empty: use the tensor's own axis names

  EinsumOperand(const Tensor& t) : tensor(&t) {}  // NOLINT: implicit by design
  EinsumOperand(const Tensor& t, std::vector<std::string> n) : tensor(&t), names(std::move(n)) {}
};

// Generalized contraction. Semantics: broadcast all operands to the union of
// their axes, multiply componentwise, sum over axes absent from `out`.
// Multi-operand calls evaluate as left-to-right pairwise contractions; each
// pairwise step appends (label, union-size product) to the counter.
Tensor einsum(const std::vector<EinsumOperand>& operands, const std::vector<std::string>& out,
              CounterChannel* counter = nullptr, const std::string& label = "einsum");

Tensor softmax(const Tensor& t, const std::string& reduced_axis);

Tensor normal_init(std::vector<Axis> axes, double stddev, Rng& rng);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& t, double c);
Tensor zeros_like(const Tensor& t);

// Identity (or zero-padded identity when rectangular) across two axes.
Tensor identity_matrix(const Axis& rows, const Axis& cols);

namespace detail {

// Internal variant used by the autograd adjoints: axes listed in `out` that
// appear in no operand are broadcast to the given size instead of rejected.
Tensor einsum_broadcast(const std::vector<EinsumOperand>& operands, const std::vector<Axis>& out,
                        CounterChannel* counter = nullptr, const std::string& label = "einsum");

}  // namespace detail

}  // namespace attnkit
