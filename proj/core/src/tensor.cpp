#include "mtd/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

namespace mtd {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + to_string(shape_) + " holds " +
                     std::to_string(element_count(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor(Shape{rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  return 1;
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
  return data_[0];
}

const Tensor& Var::value() const {
  if (!tape_) throw Error("var: null handle");
  return tape_->value(*this);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(*this); }

const char* primitive_name(Primitive p) {
  switch (p) {
    case Primitive::leaf: return "leaf";
    case Primitive::matmul: return "matmul";
    case Primitive::add: return "add";
    case Primitive::add_row: return "add_row";
    case Primitive::sub: return "sub";
    case Primitive::mul: return "mul";
    case Primitive::scale_rows: return "scale_rows";
    case Primitive::scale: return "scale";
    case Primitive::concat: return "concat";
    case Primitive::sigmoid: return "sigmoid";
    case Primitive::leaky_relu: return "leaky_relu";
    case Primitive::tanh: return "tanh";
    case Primitive::exp: return "exp";
    case Primitive::log: return "log";
    case Primitive::mean: return "mean";
    case Primitive::sum: return "sum";
    case Primitive::segment_softmax: return "segment_softmax";
    case Primitive::gather_rows: return "gather_rows";
    case Primitive::scatter_add_rows: return "scatter_add_rows";
    case Primitive::bce_with_logits: return "bce_with_logits";
    case Primitive::softmax_cross_entropy: return "softmax_cross_entropy";
    case Primitive::reshape: return "reshape";
  }
  return "?";
}

namespace debug {
namespace {
std::atomic<int> g_fault{-1};
}
void inject_sign_fault(std::optional<Primitive> p) { g_fault.store(p ? static_cast<int>(*p) : -1); }
std::optional<Primitive> injected_sign_fault() {
  const int v = g_fault.load();
  if (v < 0) return std::nullopt;
  return static_cast<Primitive>(v);
}
}  // namespace debug

// --- tape -----------------------------------------------------------------

void Tape::check_owned(Var v, const char* what) const {
  if (v.tape() != this) throw Error(std::string(what) + ": variable is detached from this tape");
  if (v.id() >= nodes_.size()) throw Error(std::string(what) + ": unknown tape id " + std::to_string(v.id()));
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Primitive::leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Primitive op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (backward_done_) throw Error(std::string(primitive_name(op)) + ": tape already consumed by backward()");
  bool rg = false;
  for (const auto& in : inputs) {
    check_owned(in, primitive_name(op));
    rg = rg || nodes_[in.id()].requires_grad;
  }
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Tape::value(Var v) const {
  check_owned(v, "value");
  return nodes_[v.id()].value;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v, "requires_grad");
  return nodes_[v.id()].requires_grad;
}

Primitive Tape::primitive(Var v) const {
  check_owned(v, "primitive");
  return nodes_[v.id()].op;
}

Tensor Tape::grad(Var v) const {
  check_owned(v, "grad");
  const auto& n = nodes_[v.id()];
  if (n.grad.shape() == n.value.shape() && !n.grad.empty()) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

Tensor* Tape::grad_slot(std::uint32_t id) {
  auto& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return &n.grad;
}

void Tape::backward(Var loss) {
  check_owned(loss, "backward");
  if (backward_done_) throw Error("backward: tape already consumed; record a fresh tape");
  const auto& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + to_string(lv.shape()));
  backward_done_ = true;
  Tensor* seed = grad_slot(loss.id());
  if (!seed) return;
  (*seed)[0] = 1.0;
  const auto fault = debug::injected_sign_fault();
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    // Rules only write to their inputs' slots, never their own.
    Tensor g = std::move(n.grad);
    if (fault && *fault == n.op) {
      for (auto& x : g.data()) x = -x;
    }
    n.backward(*this, g);
    n.grad = std::move(g);
  }
}

// --- helpers --------------------------------------------------------------

namespace {

Tape& tape_of(Var a, const char* op) {
  if (!a.valid()) throw Error(std::string(op) + ": null variable");
  return *a.tape();
}

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape() != b.tape()) throw Error(std::string(op) + ": operands live on different tapes");
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + to_string(t.shape()));
}

// Accumulates f(i) into a grad slot when one exists.
template <typename F>
void accumulate(Tape& t, std::uint32_t id, F&& f) {
  if (Tensor* g = t.grad_slot(id)) {
    auto d = g->data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += f(i);
  }
}

// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m,k] += g[m,n] * b[k,n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gi[j] * bp[j];
      ci[p] += s;
    }
  }
}

// c[k,n] += a[m,k]^T * g[m,n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Primitive op, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a, primitive_name(op));
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const Var in[] = {a};
  const auto id = a.id();
  return t.record(op, std::move(y), in, [id, deriv](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(Var(&tp, id));
    accumulate(tp, id, [&](std::size_t i) { return g[i] * deriv(xv[i]); });
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// --- primitives -----------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, "matmul");
  require_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) shape_fail("matmul", av.shape(), bv.shape());
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor c(Shape{m, n}, 0.0);
  gemm_nn(av.data().data(), bv.data().data(), c.data().data(), m, k, n);
  const Var in[] = {a, b};
  const auto ia = a.id(), ib = b.id();
  return t.record(Primitive::matmul, std::move(c), in, [ia, ib, m, k, n](Tape& tp, const Tensor& g) {
    if (Tensor* ga = tp.grad_slot(ia)) {
      gemm_nt(g.data().data(), tp.value(Var(&tp, ib)).data().data(), ga->data().data(), m, n, k);
    }
    if (Tensor* gb = tp.grad_slot(ib)) {
      gemm_tn(tp.value(Var(&tp, ia)).data().data(), g.data().data(), gb->data().data(), m, k, n);
    }
  });
}

namespace {
template <typename Combine, typename DA, typename DB>
Var binary_same_shape(Var a, Var b, Primitive op, Combine combine, DA da, DB db) {
  Tape& t = tape_of(a, primitive_name(op));
  require_same_tape(a, b, primitive_name(op));
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail(primitive_name(op), av.shape(), bv.shape());
  Tensor c(av.shape());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = combine(av[i], bv[i]);
  const Var in[] = {a, b};
  const auto ia = a.id(), ib = b.id();
  return t.record(op, std::move(c), in, [ia, ib, da, db](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(Var(&tp, ia));
    const Tensor& y = tp.value(Var(&tp, ib));
    accumulate(tp, ia, [&](std::size_t i) { return g[i] * da(x[i], y[i]); });
    accumulate(tp, ib, [&](std::size_t i) { return g[i] * db(x[i], y[i]); });
  });
}
}  // namespace

Var add(Var a, Var b) {
  return binary_same_shape(
      a, b, Primitive::add, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary_same_shape(
      a, b, Primitive::sub, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary_same_shape(
      a, b, Primitive::mul, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, "add_row");
  require_same_tape(a, row, "add_row");
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_rank2("add_row", av);
  if (rv.size() != av.cols()) shape_fail("add_row", av.shape(), rv.shape());
  const std::size_t m = av.rows(), n = av.cols();
  Tensor c(av.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = av[i * n + j] + rv[j];
  const Var in[] = {a, row};
  const auto ia = a.id(), ir = row.id();
  return t.record(Primitive::add_row, std::move(c), in, [ia, ir, m, n](Tape& tp, const Tensor& g) {
    accumulate(tp, ia, [&](std::size_t i) { return g[i]; });
    if (Tensor* gr = tp.grad_slot(ir)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gr)[j] += g[i * n + j];
    }
  });
}

Var scale_rows(Var a, Var w) {
  Tape& t = tape_of(a, "scale_rows");
  require_same_tape(a, w, "scale_rows");
  const Tensor& av = a.value();
  const Tensor& wv = w.value();
  require_rank2("scale_rows", av);
  if (wv.size() != av.rows()) shape_fail("scale_rows", av.shape(), wv.shape());
  const std::size_t m = av.rows(), n = av.cols();
  Tensor c(av.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = av[i * n + j] * wv[i];
  const Var in[] = {a, w};
  const auto ia = a.id(), iw = w.id();
  return t.record(Primitive::scale_rows, std::move(c), in, [ia, iw, m, n](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(Var(&tp, ia));
    const Tensor& s = tp.value(Var(&tp, iw));
    if (Tensor* ga = tp.grad_slot(ia)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[i * n + j] * s[i];
    }
    if (Tensor* gw = tp.grad_slot(iw)) {
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * x[i * n + j];
        (*gw)[i] += acc;
      }
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a, "scale");
  const Tensor& av = a.value();
  Tensor c(av.shape());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] * s;
  const Var in[] = {a};
  const auto ia = a.id();
  return t.record(Primitive::scale, std::move(c), in, [ia, s](Tape& tp, const Tensor& g) {
    accumulate(tp, ia, [&](std::size_t i) { return g[i] * s; });
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape& t = tape_of(parts[0], "concat");
  const std::size_t m = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  std::vector<std::uint32_t> ids;
  for (const auto& p : parts) {
    require_same_tape(parts[0], p, "concat");
    const Tensor& v = p.value();
    require_rank2("concat", v);
    if (v.rows() != m) shape_fail("concat", parts[0].value().shape(), v.shape());
    widths.push_back(v.cols());
    ids.push_back(p.id());
    total += v.cols();
  }
  Tensor c(Shape{m, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.data().data() + i * widths[k], widths[k], c.data().data() + i * total + off);
    off += widths[k];
  }
  return t.record(Primitive::concat, std::move(c), parts, [ids, widths, m, total](Tape& tp, const Tensor& g) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (Tensor* gk = tp.grad_slot(ids[k])) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) (*gk)[i * widths[k] + j] += g[i * total + o + j];
      }
      o += widths[k];
    }
  });
}

Var sigmoid(Var a) {
  return unary(a, Primitive::sigmoid, stable_sigmoid, [](double x) {
    const double s = stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, Primitive::leaky_relu, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x) { return x > 0 ? 1.0 : slope; });
}

Var tanh(Var a) {
  return unary(a, Primitive::tanh, [](double x) { return std::tanh(x); }, [](double x) {
    const double y = std::tanh(x);
    return 1.0 - y * y;
  });
}

Var exp(Var a) {
  return unary(a, Primitive::exp, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary(
      a, Primitive::log, [](double x) { return std::log(std::max(x, kLogClamp)); },
      [](double x) { return x < kLogClamp ? 0.0 : 1.0 / x; });
}

Var mean(Var a, std::size_t axis) {
  Tape& t = tape_of(a, "mean");
  const Tensor& av = a.value();
  require_rank2("mean", av);
  if (axis > 1) throw ShapeError("mean: axis " + std::to_string(axis) + " out of range for " + to_string(av.shape()));
  const std::size_t m = av.rows(), n = av.cols();
  const std::size_t out_n = axis == 0 ? n : m;
  const double inv = 1.0 / static_cast<double>(axis == 0 ? m : n);
  Tensor c(Shape{out_n}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[axis == 0 ? j : i] += av[i * n + j] * inv;
  const Var in[] = {a};
  const auto ia = a.id();
  return t.record(Primitive::mean, std::move(c), in, [ia, axis, m, n, inv](Tape& tp, const Tensor& g) {
    if (Tensor* ga = tp.grad_slot(ia)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[axis == 0 ? j : i] * inv;
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a, "sum");
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.data()) s += x;
  const Var in[] = {a};
  const auto ia = a.id();
  return t.record(Primitive::sum, Tensor::scalar(s), in, [ia](Tape& tp, const Tensor& g) {
    const double gv = g[0];
    accumulate(tp, ia, [gv](std::size_t) { return gv; });
  });
}

Var segment_softmax(Var logits, const std::vector<std::vector<std::uint32_t>>& segments) {
  Tape& t = tape_of(logits, "segment_softmax");
  const Tensor& lv = logits.value();
  Tensor y(lv.shape(), 0.0);
  std::vector<char> seen(lv.size(), 0);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.empty()) throw Error("segment_softmax: segment " + std::to_string(s) + " is empty");
    double mx = -std::numeric_limits<double>::infinity();
    for (auto e : seg) {
      if (e >= lv.size()) throw ShapeError("segment_softmax: index " + std::to_string(e) + " out of range for " + to_string(lv.shape()));
      if (seen[e]) throw Error("segment_softmax: index " + std::to_string(e) + " appears in two segments");
      seen[e] = 1;
      mx = std::max(mx, lv[e]);
    }
    double z = 0.0;
    for (auto e : seg) z += (y[e] = std::exp(lv[e] - mx));
    for (auto e : seg) y[e] /= z;
  }
  const Var in[] = {logits};
  const auto il = logits.id();
  const auto out_id = static_cast<std::uint32_t>(t.size());
  return t.record(Primitive::segment_softmax, std::move(y), in,
                  [il, out_id, segments](Tape& tp, const Tensor& g) {
                    Tensor* gl = tp.grad_slot(il);
                    if (!gl) return;
                    const Tensor& yv = tp.value(Var(&tp, out_id));
                    for (const auto& seg : segments) {
                      double dot = 0.0;
                      for (auto e : seg) dot += g[e] * yv[e];
                      for (auto e : seg) (*gl)[e] += yv[e] * (g[e] - dot);
                    }
                  });
}

Var gather_rows(Var a, std::span<const std::uint32_t> index) {
  Tape& t = tape_of(a, "gather_rows");
  const Tensor& av = a.value();
  require_rank2("gather_rows", av);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor c(Shape{index.size(), n});
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= m) throw ShapeError("gather_rows: row " + std::to_string(index[e]) + " out of range for " + to_string(av.shape()));
    std::copy_n(av.data().data() + index[e] * n, n, c.data().data() + e * n);
  }
  const Var in[] = {a};
  const auto ia = a.id();
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return t.record(Primitive::gather_rows, std::move(c), in, [ia, idx = std::move(idx), n](Tape& tp, const Tensor& g) {
    if (Tensor* ga = tp.grad_slot(ia)) {
      for (std::size_t e = 0; e < idx.size(); ++e)
        for (std::size_t j = 0; j < n; ++j) (*ga)[idx[e] * n + j] += g[e * n + j];
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a, "reshape");
  const Tensor& av = a.value();
  if (element_count(shape) != av.size()) shape_fail("reshape", av.shape(), shape);
  const Var in[] = {a};
  const auto ia = a.id();
  return t.record(Primitive::reshape, Tensor(std::move(shape), av.storage()), in, [ia](Tape& tp, const Tensor& g) {
    accumulate(tp, ia, [&](std::size_t i) { return g[i]; });
  });
}

Var scatter_add_rows(Var a, std::span<const std::uint32_t> index, std::size_t out_rows) {
  Tape& t = tape_of(a, "scatter_add_rows");
  const Tensor& av = a.value();
  require_rank2("scatter_add_rows", av);
  if (av.rows() != index.size())
    shape_fail("scatter_add_rows", av.shape(), Shape{index.size()});
  const std::size_t n = av.cols();
  Tensor c(Shape{out_rows, n}, 0.0);
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= out_rows) throw ShapeError("scatter_add_rows: row " + std::to_string(index[e]) + " out of range for " + std::to_string(out_rows) + " rows");
    for (std::size_t j = 0; j < n; ++j) c[index[e] * n + j] += av[e * n + j];
  }
  const Var in[] = {a};
  const auto ia = a.id();
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return t.record(Primitive::scatter_add_rows, std::move(c), in, [ia, idx = std::move(idx), n](Tape& tp, const Tensor& g) {
    if (Tensor* ga = tp.grad_slot(ia)) {
      for (std::size_t e = 0; e < idx.size(); ++e)
        for (std::size_t j = 0; j < n; ++j) (*ga)[e * n + j] += g[idx[e] * n + j];
    }
  });
}

Var bce_with_logits(Var logits, std::span<const double> targets, std::span<const double> weights) {
  Tape& t = tape_of(logits, "bce_with_logits");
  const Tensor& lv = logits.value();
  if (targets.size() != lv.size() || weights.size() != lv.size())
    shape_fail("bce_with_logits", lv.shape(), Shape{targets.size(), weights.size()});
  // BCE(sigmoid(x), y) = softplus(x) - y x = max(x,0) - y x + log1p(exp(-|x|))
  double total = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    const double x = lv[i];
    total += weights[i] * (std::max(x, 0.0) - targets[i] * x + std::log1p(std::exp(-std::abs(x))));
  }
  const Var in[] = {logits};
  const auto il = logits.id();
  std::vector<double> y(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  return t.record(Primitive::bce_with_logits, Tensor::scalar(total), in,
                  [il, y = std::move(y), w = std::move(w)](Tape& tp, const Tensor& g) {
                    const Tensor& x = tp.value(Var(&tp, il));
                    accumulate(tp, il, [&](std::size_t i) { return g[0] * w[i] * (stable_sigmoid(x[i]) - y[i]); });
                  });
}

Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> cls, std::span<const double> weights) {
  Tape& t = tape_of(logits, "softmax_cross_entropy");
  const Tensor& lv = logits.value();
  require_rank2("softmax_cross_entropy", lv);
  const std::size_t p = lv.rows(), c = lv.cols();
  if (cls.size() != p || weights.size() != p)
    shape_fail("softmax_cross_entropy", lv.shape(), Shape{cls.size(), weights.size()});
  Tensor prob(lv.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < p; ++r) {
    if (cls[r] >= c) throw ShapeError("softmax_cross_entropy: class " + std::to_string(cls[r]) + " out of range for " + std::to_string(c) + " classes");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, lv[r * c + k]);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(lv[r * c + k] - mx);
    for (std::size_t k = 0; k < c; ++k) prob[r * c + k] = std::exp(lv[r * c + k] - mx) / z;
    total += weights[r] * -(lv[r * c + cls[r]] - mx - std::log(z));
  }
  const Var in[] = {logits};
  const auto il = logits.id();
  std::vector<std::uint32_t> k(cls.begin(), cls.end());
  std::vector<double> w(weights.begin(), weights.end());
  return t.record(Primitive::softmax_cross_entropy, Tensor::scalar(total), in,
                  [il, prob = std::move(prob), k = std::move(k), w = std::move(w), c](Tape& tp, const Tensor& g) {
                    if (Tensor* gl = tp.grad_slot(il)) {
                      for (std::size_t r = 0; r < k.size(); ++r)
                        for (std::size_t j = 0; j < c; ++j)
                          (*gl)[r * c + j] += g[0] * w[r] * (prob[r * c + j] - (j == k[r] ? 1.0 : 0.0));
                    }
                  });
}

}  // namespace mtd
