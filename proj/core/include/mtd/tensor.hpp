#pragma once

// Dense row-major tensors and a reverse-mode gradient tape.
//
// `Tensor` is a plain value (shape + 64-bit data). Differentiable computation
// goes through a `Tape`: leaves are registered with `Tape::leaf`, primitives
// below append nodes, and `Tape::backward` propagates adjoints in reverse
// recording order. A `Var` is a lightweight handle (tape + node id).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtd/error.hpp"

namespace mtd {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 extents. A rank-1 tensor of length n is viewed as a 1 x n row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to a node recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Identifies the primitive that produced a node. Used in error messages and
/// by the fault-injection hook of the verification harness.
enum class Primitive : std::uint8_t {
  leaf,
  matmul,
  add,
  add_row,
  sub,
  mul,
  scale_rows,
  scale,
  concat,
  sigmoid,
  leaky_relu,
  tanh,
  exp,
  log,
  mean,
  sum,
  segment_softmax,
  gather_rows,
  scatter_add_rows,
  bce_with_logits,
  softmax_cross_entropy,
  reshape,
};

const char* primitive_name(Primitive p);

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends a node; `inputs` decide whether it requires grad.
  Var record(Primitive op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  Primitive primitive(Var v) const;

  /// Gradient of the last backward() loss w.r.t. `v`. Zero-filled when `v`
  /// did not influence the loss.
  Tensor grad(Var v) const;

  /// Accumulation slot used by backward rules; nullptr when `v` needs no grad.
  Tensor* grad_slot(std::uint32_t id);

  /// Reverse sweep from a scalar loss. A tape supports exactly one sweep.
  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Primitive op = Primitive::leaf;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owned(Var v, const char* what) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// --- primitives -----------------------------------------------------------

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kLogClamp = 1e-12;

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// a[m, n] + row[n] broadcast over rows.
Var add_row(Var a, Var row);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Multiplies row r of a[m, n] by w[r]; w holds m values.
Var scale_rows(Var a, Var w);
Var scale(Var a, double s);
/// Concatenates rank-2 tensors with equal row counts along the last axis.
Var concat(std::span<const Var> parts);
Var sigmoid(Var a);
Var leaky_relu(Var a, double slope = kLeakySlope);
Var tanh(Var a);
Var exp(Var a);
/// Natural log with the input clamped to >= kLogClamp.
Var log(Var a);
/// Mean of a rank-2 tensor over `axis`; the result is rank 1.
Var mean(Var a, std::size_t axis);
Var sum(Var a);
/// Softmax within each segment of a flat logit vector. Each segment lists
/// element indices; a segment may not be empty and an index may appear in at
/// most one segment. Elements covered by no segment produce 0.
Var segment_softmax(Var logits, const std::vector<std::vector<std::uint32_t>>& segments);
Var gather_rows(Var a, std::span<const std::uint32_t> index);
/// Same data, new shape with an equal element count.
Var reshape(Var a, Shape shape);
/// out[index[e]] += a[e] for an output with `out_rows` rows.
Var scatter_add_rows(Var a, std::span<const std::uint32_t> index, std::size_t out_rows);
/// sum_e weight[e] * BCE(sigmoid(logit[e]), target[e]) as a scalar, computed
/// in the overflow-free softplus form.
Var bce_with_logits(Var logits, std::span<const double> targets, std::span<const double> weights);
/// sum_r weight[r] * -log softmax(logits[r])[cls[r]] over rows of logits[P, C].
Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> cls,
                          std::span<const double> weights);

namespace debug {
/// Flips the sign of one primitive's backward rule. Used only by the
/// verification harness to prove that gradient checks detect faults.
void inject_sign_fault(std::optional<Primitive> p);
std::optional<Primitive> injected_sign_fault();
}  // namespace debug

}  // namespace mtd
