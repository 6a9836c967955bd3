#include "favc/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "favc/fft.hpp"

namespace favc::ad {

namespace {

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) fail_shape("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->on_tape()) continue;
    if (!tape)
      tape = t->tape();
    else if (tape != t->tape())
      fail_shape("operands belong to different tapes");
  }
  return tape;
}

void check_result(Tape* tape, const Tensor& out, const char* op) {
  if (tape && tape->check_finite && !out.all_finite())
    fail_numeric(std::string(op) + ": non-finite value in output");
}

// Splits [..., L] into (rows, L).
std::pair<int64_t, int> trailing_axis(const Tensor& a, const char* op) {
  if (a.ndim() < 2) fail_shape(std::string(op) + ": needs at least 2 dims");
  int l = a.dim(a.ndim() - 1);
  if (l == 0) fail_shape(std::string(op) + ": empty trailing axis");
  return {a.size() / l, l};
}

std::vector<int> drop_last(const std::vector<int>& shape) {
  return std::vector<int>(shape.begin(), shape.end() - 1);
}

}  // namespace

// ---- Tensor -----------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  values_ = std::make_shared<std::vector<double>>(
      static_cast<size_t>(shape_size(shape_)), 0.0);
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  Tensor t;
  int64_t n = shape_size(shape);
  if (static_cast<int64_t>(values.size()) != n)
    fail_shape("value count " + std::to_string(values.size()) +
               " does not match shape " + shape_str(shape));
  t.shape_ = std::move(shape);
  t.values_ = std::make_shared<std::vector<double>>(std::move(values));
  return t;
}

int64_t Tensor::size() const { return values_ ? static_cast<int64_t>(values_->size()) : 0; }

double Tensor::value() const {
  if (size() != 1) fail_shape("value() on non-scalar tensor " + shape_str(shape_));
  return (*values_)[0];
}

bool Tensor::all_finite() const {
  for (double v : *values_)
    if (!std::isfinite(v)) return false;
  return true;
}

// ---- Tape -------------------------------------------------------------------

Tensor Tape::watch(const Tensor& t) {
  if (t.on_tape()) fail_shape("watch: tensor is already on a tape");
  Tensor out = t;  // shares values
  out.tape_ = this;
  out.node_ = add_node(t.size());
  return out;
}

int Tape::add_node(int64_t out_size) {
  nodes_.push_back({out_size, nullptr});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_backward(int id, BackwardFn fn) {
  nodes_[static_cast<size_t>(id)].backward = std::move(fn);
}

Tensor Tape::adopt(Tensor t, int node) {
  t.tape_ = this;
  t.node_ = node;
  return t;
}

void Tape::backward(const Tensor& root) {
  if (root.tape() != this || !root.on_tape())
    fail_shape("backward: root is not on this tape");
  if (root.size() != 1) fail_shape("backward: root must be scalar");
  grads_.assign(nodes_.size(), {});
  for (size_t i = 0; i < nodes_.size(); ++i)
    grads_[i].assign(static_cast<size_t>(nodes_[i].size), 0.0);
  grads_[static_cast<size_t>(root.node())][0] = 1.0;
  for (int i = root.node(); i >= 0; --i) {
    auto& fn = nodes_[static_cast<size_t>(i)].backward;
    if (fn) fn(*this);
  }
}

const std::vector<double>& Tape::grad(const Tensor& t) const {
  if (t.tape() != const_cast<Tape*>(this) || !t.on_tape())
    fail_shape("grad: tensor is not on this tape");
  if (grads_.empty()) fail_shape("grad: backward() has not run");
  return grads_[static_cast<size_t>(t.node())];
}

// ---- ParameterSet -----------------------------------------------------------

Tensor& ParameterSet::add(const std::string& name, Tensor init, bool decay,
                          bool trainable) {
  if (index_.count(name)) fail_config("duplicate parameter name: " + name);
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(init), decay, trainable});
  return entries_.back().value;
}

bool ParameterSet::has(const std::string& name) const {
  return index_.count(name) != 0;
}

ParameterSet::Entry& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail_config("unknown parameter: " + name);
  return entries_[it->second];
}

const ParameterSet::Entry& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail_config("unknown parameter: " + name);
  return entries_[it->second];
}

int64_t ParameterSet::value_count(bool trainable_only) const {
  int64_t n = 0;
  for (const auto& e : entries_)
    if (!trainable_only || e.trainable) n += e.value.size();
  return n;
}

// ---- pointwise helpers -----------------------------------------------------

namespace {

// fwd(x) -> y; dfdx(x, y) -> local derivative.
template <class Fwd, class Dfdx>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Dfdx dfdx) {
  Tensor out(a.shape());
  const double* x = a.data();
  double* y = out.data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) y[i] = fwd(x[i]);
  Tape* tape = common_tape({&a});
  check_result(tape, out, name);
  if (!tape) return out;
  int id = tape->add_node(n);
  out = tape->adopt(out, id);
  Tensor ain = a;
  Tensor oref = out;
  tape->set_backward(id, [ain, oref, id, n, dfdx](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    const double* x = ain.data();
    const double* y = oref.data();
    for (int64_t i = 0; i < n; ++i)
      ga[static_cast<size_t>(i)] += dfdx(x[i], y[i]) * g[static_cast<size_t>(i)];
  });
  return out;
}

template <class Fwd, class DfdA, class DfdB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 DfdA dfda, DfdB dfdb) {
  if (a.shape() != b.shape())
    fail_shape(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
               " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  const double* xa = a.data();
  const double* xb = b.data();
  double* y = out.data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) y[i] = fwd(xa[i], xb[i]);
  Tape* tape = common_tape({&a, &b});
  check_result(tape, out, name);
  if (!tape) return out;
  int id = tape->add_node(n);
  out = tape->adopt(out, id);
  Tensor ain = a, bin = b;
  tape->set_backward(id, [ain, bin, id, n, dfda, dfdb](Tape& t) {
    const auto& g = t.grad_slot(id);
    const double* xa = ain.data();
    const double* xb = bin.data();
    if (ain.on_tape()) {
      auto& ga = t.grad_slot(ain.node());
      for (int64_t i = 0; i < n; ++i)
        ga[static_cast<size_t>(i)] += dfda(xa[i], xb[i]) * g[static_cast<size_t>(i)];
    }
    if (bin.on_tape()) {
      auto& gb = t.grad_slot(bin.node());
      for (int64_t i = 0; i < n; ++i)
        gb[static_cast<size_t>(i)] += dfdb(xa[i], xb[i]) * g[static_cast<size_t>(i)];
    }
  });
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      a, "scale", [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Tensor add_const(const Tensor& a, double c) {
  return unary_op(
      a, "add_const", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      a, "neg", [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor log_eps(const Tensor& a, double eps) {
  return unary_op(
      a, "log_eps", [eps](double x) { return std::log(x + eps); },
      [eps](double x, double) { return 1.0 / (x + eps); });
}

Tensor elu(const Tensor& a) {
  return unary_op(
      a, "elu", [](double x) { return x > 0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_op(
      a, "leaky_relu", [slope](double x) { return x >= 0 ? x : slope * x; },
      [slope](double x, double) { return x >= 0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0;
  const double* x = a.data();
  for (int64_t i = 0; i < a.size(); ++i) s += x[i];
  Tensor out = Tensor::scalar(s);
  Tape* tape = common_tape({&a});
  check_result(tape, out, "sum");
  if (!tape) return out;
  int id = tape->add_node(1);
  out = tape->adopt(out, id);
  Tensor ain = a;
  tape->set_backward(id, [ain, id](Tape& t) {
    double g = t.grad_slot(id)[0];
    auto& ga = t.grad_slot(ain.node());
    for (auto& v : ga) v += g;
  });
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) fail_shape("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size())
    fail_shape("dot: size mismatch " + shape_str(a.shape()) + " vs " +
               shape_str(b.shape()));
  double s = 0;
  const double* xa = a.data();
  const double* xb = b.data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) s += xa[i] * xb[i];
  Tensor out = Tensor::scalar(s);
  Tape* tape = common_tape({&a, &b});
  check_result(tape, out, "dot");
  if (!tape) return out;
  int id = tape->add_node(1);
  out = tape->adopt(out, id);
  Tensor ain = a, bin = b;
  tape->set_backward(id, [ain, bin, id, n](Tape& t) {
    double g = t.grad_slot(id)[0];
    if (ain.on_tape()) {
      auto& ga = t.grad_slot(ain.node());
      const double* xb = bin.data();
      for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += g * xb[i];
    }
    if (bin.on_tape()) {
      auto& gb = t.grad_slot(bin.node());
      const double* xa = ain.data();
      for (int64_t i = 0; i < n; ++i) gb[static_cast<size_t>(i)] += g * xa[i];
    }
  });
  return out;
}

// ---- softmax ---------------------------------------------------------------

Tensor softmax(const Tensor& a) {
  if (a.ndim() < 1 || a.ndim() > 2) fail_shape("softmax: expects 1-D or 2-D");
  int d = a.dim(a.ndim() - 1);
  if (d == 0) fail_shape("softmax over empty axis");
  int64_t rows = a.size() / d;
  Tensor out(a.shape());
  const double* x = a.data();
  double* y = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    double* yr = y + r * d;
    double mx = xr[0];
    for (int i = 1; i < d; ++i) mx = std::max(mx, xr[i]);
    double s = 0;
    for (int i = 0; i < d; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      s += yr[i];
    }
    for (int i = 0; i < d; ++i) yr[i] /= s;
  }
  Tape* tape = common_tape({&a});
  check_result(tape, out, "softmax");
  if (!tape) return out;
  int id = tape->add_node(a.size());
  out = tape->adopt(out, id);
  Tensor ain = a;
  Tensor oref = out;
  tape->set_backward(id, [ain, oref, id, rows, d](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    const double* y = oref.data();
    for (int64_t r = 0; r < rows; ++r) {
      const double* yr = y + r * d;
      const double* gr = g.data() + r * d;
      double gy = 0;
      for (int i = 0; i < d; ++i) gy += gr[i] * yr[i];
      double* gar = ga.data() + r * d;
      for (int i = 0; i < d; ++i) gar[i] += yr[i] * (gr[i] - gy);
    }
  });
  return out;
}

// ---- time-axis statistics -------------------------------------------------

Tensor time_mean(const Tensor& a) {
  auto [rows, l] = trailing_axis(a, "time_mean");
  Tensor out(drop_last(a.shape()));
  const double* x = a.data();
  double* y = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0;
    for (int i = 0; i < l; ++i) s += x[r * l + i];
    y[r] = s / l;
  }
  Tape* tape = common_tape({&a});
  check_result(tape, out, "time_mean");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor ain = a;
  tape->set_backward(id, [ain, id, rows, l](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    for (int64_t r = 0; r < rows; ++r)
      for (int i = 0; i < l; ++i)
        ga[static_cast<size_t>(r * l + i)] += g[static_cast<size_t>(r)] / l;
  });
  return out;
}

Tensor time_std(const Tensor& a) {
  auto [rows, l] = trailing_axis(a, "time_std");
  Tensor out(drop_last(a.shape()));
  const double* x = a.data();
  double* y = out.data();
  std::vector<double> mu(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0;
    for (int i = 0; i < l; ++i) s += x[r * l + i];
    mu[static_cast<size_t>(r)] = s / l;
    double v = 0;
    for (int i = 0; i < l; ++i) {
      double d = x[r * l + i] - mu[static_cast<size_t>(r)];
      v += d * d;
    }
    y[r] = std::sqrt(v / l);  // population std; 0 for length-1 axis
  }
  Tape* tape = common_tape({&a});
  check_result(tape, out, "time_std");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor ain = a;
  Tensor oref = out;
  auto mu_saved = std::make_shared<std::vector<double>>(std::move(mu));
  tape->set_backward(id, [ain, oref, mu_saved, id, rows, l](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    const double* x = ain.data();
    const double* s = oref.data();
    for (int64_t r = 0; r < rows; ++r) {
      if (s[r] <= 0) continue;
      double c = g[static_cast<size_t>(r)] / (l * s[r]);
      for (int i = 0; i < l; ++i)
        ga[static_cast<size_t>(r * l + i)] +=
            c * (x[r * l + i] - (*mu_saved)[static_cast<size_t>(r)]);
    }
  });
  return out;
}

namespace {
Tensor time_extremum(const Tensor& a, const char* name, bool want_max) {
  auto [rows, l] = trailing_axis(a, name);
  Tensor out(drop_last(a.shape()));
  const double* x = a.data();
  double* y = out.data();
  auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    int best = 0;
    for (int i = 1; i < l; ++i) {
      bool better = want_max ? x[r * l + i] > x[r * l + best]
                             : x[r * l + i] < x[r * l + best];
      if (better) best = i;
    }
    (*arg)[static_cast<size_t>(r)] = best;
    y[r] = x[r * l + best];
  }
  Tape* tape = common_tape({&a});
  check_result(tape, out, name);
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor ain = a;
  tape->set_backward(id, [ain, arg, id, rows, l](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    for (int64_t r = 0; r < rows; ++r)
      ga[static_cast<size_t>(r * l + (*arg)[static_cast<size_t>(r)])] +=
          g[static_cast<size_t>(r)];
  });
  return out;
}
}  // namespace

Tensor time_max(const Tensor& a) { return time_extremum(a, "time_max", true); }
Tensor time_min(const Tensor& a) { return time_extremum(a, "time_min", false); }

// ---- shape ops -------------------------------------------------------------

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_size(shape) != a.size())
    fail_shape("reshape: cannot view " + shape_str(a.shape()) + " as " +
               shape_str(shape));
  Tensor out = Tensor::from(std::move(shape), a.values());
  Tape* tape = common_tape({&a});
  if (!tape) return out;
  int id = tape->add_node(a.size());
  out = tape->adopt(out, id);
  Tensor ain = a;
  tape->set_backward(id, [ain, id](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail_shape("concat: no inputs");
  std::vector<int> rest(parts[0].shape().begin() + 1, parts[0].shape().end());
  int dim0 = 0;
  int64_t total = 0;
  for (const auto& p : parts) {
    std::vector<int> r(p.shape().begin() + 1, p.shape().end());
    if (r != rest)
      fail_shape("concat: trailing dims mismatch " + shape_str(p.shape()));
    dim0 += p.dim(0);
    total += p.size();
  }
  std::vector<int> out_shape = {dim0};
  out_shape.insert(out_shape.end(), rest.begin(), rest.end());
  std::vector<double> vals;
  vals.reserve(static_cast<size_t>(total));
  for (const auto& p : parts)
    vals.insert(vals.end(), p.values().begin(), p.values().end());
  Tensor out = Tensor::from(std::move(out_shape), std::move(vals));

  std::vector<const Tensor*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  Tape* tape = nullptr;
  for (auto* p : ptrs) {
    if (!p->on_tape()) continue;
    if (!tape)
      tape = p->tape();
    else if (tape != p->tape())
      fail_shape("concat: operands on different tapes");
  }
  if (!tape) return out;
  int id = tape->add_node(total);
  out = tape->adopt(out, id);
  std::vector<Tensor> saved = parts;
  tape->set_backward(id, [saved, id](Tape& t) {
    const auto& g = t.grad_slot(id);
    size_t off = 0;
    for (const auto& p : saved) {
      size_t n = static_cast<size_t>(p.size());
      if (p.on_tape()) {
        auto& gp = t.grad_slot(p.node());
        for (size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  });
  return out;
}

Tensor slice1d(const Tensor& a, int start, int len) {
  if (a.ndim() != 1) fail_shape("slice1d: expects 1-D input");
  if (start < 0 || len < 0 || start + len > a.dim(0))
    fail_shape("slice1d: range [" + std::to_string(start) + ", " +
               std::to_string(start + len) + ") out of bounds for " +
               shape_str(a.shape()));
  std::vector<double> vals(a.values().begin() + start,
                           a.values().begin() + start + len);
  Tensor out = Tensor::from({len}, std::move(vals));
  Tape* tape = common_tape({&a});
  if (!tape) return out;
  int id = tape->add_node(len);
  out = tape->adopt(out, id);
  Tensor ain = a;
  tape->set_backward(id, [ain, id, start, len](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    for (int i = 0; i < len; ++i) ga[static_cast<size_t>(start + i)] += g[static_cast<size_t>(i)];
  });
  return out;
}

Tensor select_row(const Tensor& a, int row) {
  if (a.ndim() != 2) fail_shape("select_row: expects 2-D input");
  int n = a.dim(0), d = a.dim(1);
  if (row < 0 || row >= n) fail_shape("select_row: row out of range");
  std::vector<double> vals(a.values().begin() + static_cast<int64_t>(row) * d,
                           a.values().begin() + static_cast<int64_t>(row + 1) * d);
  Tensor out = Tensor::from({d}, std::move(vals));
  Tape* tape = common_tape({&a});
  if (!tape) return out;
  int id = tape->add_node(d);
  out = tape->adopt(out, id);
  Tensor ain = a;
  tape->set_backward(id, [ain, id, row, d](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    for (int i = 0; i < d; ++i)
      ga[static_cast<size_t>(static_cast<int64_t>(row) * d + i)] += g[static_cast<size_t>(i)];
  });
  return out;
}

// ---- linear ----------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.ndim() != 2) fail_shape("linear: weight must be 2-D, got " + shape_str(w.shape()));
  int m = w.dim(0), n = w.dim(1);
  if (b.ndim() != 1 || b.dim(0) != m)
    fail_shape("linear: bias " + shape_str(b.shape()) + " does not match weight " +
               shape_str(w.shape()));
  bool batched = x.ndim() == 2;
  if (!batched && x.ndim() != 1) fail_shape("linear: input must be 1-D or 2-D");
  int rows = batched ? x.dim(0) : 1;
  int xn = batched ? x.dim(1) : x.dim(0);
  if (xn != n)
    fail_shape("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
               shape_str(w.shape()));
  Tensor out(batched ? std::vector<int>{rows, m} : std::vector<int>{m});
  const double* xp = x.data();
  const double* wp = w.data();
  const double* bp = b.data();
  double* yp = out.data();
  for (int r = 0; r < rows; ++r)
    for (int i = 0; i < m; ++i) {
      double s = bp[i];
      const double* wr = wp + static_cast<int64_t>(i) * n;
      const double* xr = xp + static_cast<int64_t>(r) * n;
      for (int j = 0; j < n; ++j) s += wr[j] * xr[j];
      yp[static_cast<int64_t>(r) * m + i] = s;
    }
  Tape* tape = common_tape({&x, &w, &b});
  check_result(tape, out, "linear");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor xin = x, win = w, bin = b;
  tape->set_backward(id, [xin, win, bin, id, rows, m, n](Tape& t) {
    const auto& g = t.grad_slot(id);
    const double* xp = xin.data();
    const double* wp = win.data();
    if (xin.on_tape()) {
      auto& gx = t.grad_slot(xin.node());
      for (int r = 0; r < rows; ++r)
        for (int i = 0; i < m; ++i) {
          double gv = g[static_cast<size_t>(static_cast<int64_t>(r) * m + i)];
          const double* wr = wp + static_cast<int64_t>(i) * n;
          double* gxr = gx.data() + static_cast<int64_t>(r) * n;
          for (int j = 0; j < n; ++j) gxr[j] += gv * wr[j];
        }
    }
    if (win.on_tape()) {
      auto& gw = t.grad_slot(win.node());
      for (int r = 0; r < rows; ++r)
        for (int i = 0; i < m; ++i) {
          double gv = g[static_cast<size_t>(static_cast<int64_t>(r) * m + i)];
          const double* xr = xp + static_cast<int64_t>(r) * n;
          double* gwr = gw.data() + static_cast<int64_t>(i) * n;
          for (int j = 0; j < n; ++j) gwr[j] += gv * xr[j];
        }
    }
    if (bin.on_tape()) {
      auto& gb = t.grad_slot(bin.node());
      for (int r = 0; r < rows; ++r)
        for (int i = 0; i < m; ++i)
          gb[static_cast<size_t>(i)] += g[static_cast<size_t>(static_cast<int64_t>(r) * m + i)];
    }
  });
  return out;
}

// ---- conv1d ----------------------------------------------------------------

namespace {
struct ConvDims {
  int batch, cin, len, cout, k, lout;
  bool batched_input;
};

ConvDims conv_dims(const Tensor& x, const Tensor& kern, int stride, int pad,
                   const char* op) {
  if (kern.ndim() != 3)
    fail_shape(std::string(op) + ": kernel must be 3-D, got " + shape_str(kern.shape()));
  bool batched = x.ndim() == 3;
  if (!batched && x.ndim() != 2)
    fail_shape(std::string(op) + ": input must be [C,L] or [N,C,L], got " +
               shape_str(x.shape()));
  ConvDims d{};
  d.batched_input = batched;
  d.batch = batched ? x.dim(0) : 1;
  d.cin = batched ? x.dim(1) : x.dim(0);
  d.len = batched ? x.dim(2) : x.dim(1);
  d.k = kern.dim(2);
  if (stride <= 0) fail_shape(std::string(op) + ": stride must be positive");
  if (pad < 0) fail_shape(std::string(op) + ": negative padding");
  return d;
}
}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& kern, int stride, int pad) {
  ConvDims d = conv_dims(x, kern, stride, pad, "conv1d");
  d.cout = kern.dim(0);
  if (kern.dim(1) != d.cin)
    fail_shape("conv1d: kernel " + shape_str(kern.shape()) + " expects " +
               std::to_string(kern.dim(1)) + " input channels, input has " +
               std::to_string(d.cin) + " (" + shape_str(x.shape()) + ")");
  if (d.k % 2 == 0) fail_shape("conv1d: kernel length must be odd");
  if (d.len + 2 * pad < d.k)
    fail_shape("conv1d: padded length " + std::to_string(d.len + 2 * pad) +
               " shorter than kernel " + std::to_string(d.k));
  d.lout = (d.len + 2 * pad - d.k) / stride + 1;

  Tensor out(d.batched_input ? std::vector<int>{d.batch, d.cout, d.lout}
                             : std::vector<int>{d.cout, d.lout});
  const double* xp = x.data();
  const double* kp = kern.data();
  double* yp = out.data();
  for (int b = 0; b < d.batch; ++b)
    for (int co = 0; co < d.cout; ++co) {
      double* yrow = yp + (static_cast<int64_t>(b) * d.cout + co) * d.lout;
      for (int ci = 0; ci < d.cin; ++ci) {
        const double* xrow = xp + (static_cast<int64_t>(b) * d.cin + ci) * d.len;
        const double* krow = kp + (static_cast<int64_t>(co) * d.cin + ci) * d.k;
        for (int j = 0; j < d.lout; ++j) {
          int base = j * stride - pad;
          int t0 = std::max(0, -base);
          int t1 = std::min(d.k, d.len - base);
          double s = 0;
          for (int t = t0; t < t1; ++t) s += krow[t] * xrow[base + t];
          yrow[j] += s;
        }
      }
    }
  Tape* tape = common_tape({&x, &kern});
  check_result(tape, out, "conv1d");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor xin = x, kin = kern;
  tape->set_backward(id, [xin, kin, id, d, stride, pad](Tape& t) {
    const auto& g = t.grad_slot(id);
    const double* xp = xin.data();
    const double* kp = kin.data();
    if (xin.on_tape()) {
      auto& gx = t.grad_slot(xin.node());
      for (int b = 0; b < d.batch; ++b)
        for (int co = 0; co < d.cout; ++co) {
          const double* grow = g.data() + (static_cast<int64_t>(b) * d.cout + co) * d.lout;
          for (int ci = 0; ci < d.cin; ++ci) {
            double* gxrow = gx.data() + (static_cast<int64_t>(b) * d.cin + ci) * d.len;
            const double* krow = kp + (static_cast<int64_t>(co) * d.cin + ci) * d.k;
            for (int j = 0; j < d.lout; ++j) {
              int base = j * stride - pad;
              int t0 = std::max(0, -base);
              int t1 = std::min(d.k, d.len - base);
              double gv = grow[j];
              for (int t = t0; t < t1; ++t) gxrow[base + t] += gv * krow[t];
            }
          }
        }
    }
    if (kin.on_tape()) {
      auto& gk = t.grad_slot(kin.node());
      for (int b = 0; b < d.batch; ++b)
        for (int co = 0; co < d.cout; ++co) {
          const double* grow = g.data() + (static_cast<int64_t>(b) * d.cout + co) * d.lout;
          for (int ci = 0; ci < d.cin; ++ci) {
            const double* xrow = xp + (static_cast<int64_t>(b) * d.cin + ci) * d.len;
            double* gkrow = gk.data() + (static_cast<int64_t>(co) * d.cin + ci) * d.k;
            for (int j = 0; j < d.lout; ++j) {
              int base = j * stride - pad;
              int t0 = std::max(0, -base);
              int t1 = std::min(d.k, d.len - base);
              double gv = grow[j];
              for (int t = t0; t < t1; ++t) gkrow[t] += gv * xrow[base + t];
            }
          }
        }
    }
  });
  return out;
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& kern, int stride,
                        int pad, int crop_to) {
  ConvDims d = conv_dims(x, kern, stride, pad, "conv_transpose1d");
  if (kern.dim(0) != d.cin)
    fail_shape("conv_transpose1d: kernel " + shape_str(kern.shape()) +
               " expects " + std::to_string(kern.dim(0)) +
               " input channels, input has " + std::to_string(d.cin));
  d.cout = kern.dim(1);
  int natural = (d.len - 1) * stride - 2 * pad + d.k;
  if (natural <= 0) fail_shape("conv_transpose1d: empty natural output");
  if (crop_to < 0) crop_to = natural;
  if (crop_to > natural)
    fail_shape("conv_transpose1d: crop_to " + std::to_string(crop_to) +
               " exceeds natural length " + std::to_string(natural));
  d.lout = crop_to;

  Tensor out(d.batched_input ? std::vector<int>{d.batch, d.cout, d.lout}
                             : std::vector<int>{d.cout, d.lout});
  const double* xp = x.data();
  const double* kp = kern.data();
  double* yp = out.data();
  for (int b = 0; b < d.batch; ++b)
    for (int ci = 0; ci < d.cin; ++ci) {
      const double* xrow = xp + (static_cast<int64_t>(b) * d.cin + ci) * d.len;
      for (int co = 0; co < d.cout; ++co) {
        double* yrow = yp + (static_cast<int64_t>(b) * d.cout + co) * d.lout;
        const double* krow = kp + (static_cast<int64_t>(ci) * d.cout + co) * d.k;
        for (int j = 0; j < d.len; ++j) {
          double xv = xrow[j];
          int base = j * stride - pad;
          int t0 = std::max(0, -base);
          int t1 = std::min(d.k, d.lout - base);
          for (int t = t0; t < t1; ++t) yrow[base + t] += xv * krow[t];
        }
      }
    }
  Tape* tape = common_tape({&x, &kern});
  check_result(tape, out, "conv_transpose1d");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor xin = x, kin = kern;
  tape->set_backward(id, [xin, kin, id, d, stride, pad](Tape& t) {
    const auto& g = t.grad_slot(id);
    const double* xp = xin.data();
    const double* kp = kin.data();
    if (xin.on_tape()) {
      // adjoint of the scatter = conv1d of the upstream gradient
      auto& gx = t.grad_slot(xin.node());
      for (int b = 0; b < d.batch; ++b)
        for (int ci = 0; ci < d.cin; ++ci) {
          double* gxrow = gx.data() + (static_cast<int64_t>(b) * d.cin + ci) * d.len;
          for (int co = 0; co < d.cout; ++co) {
            const double* grow = g.data() + (static_cast<int64_t>(b) * d.cout + co) * d.lout;
            const double* krow = kp + (static_cast<int64_t>(ci) * d.cout + co) * d.k;
            for (int j = 0; j < d.len; ++j) {
              int base = j * stride - pad;
              int t0 = std::max(0, -base);
              int t1 = std::min(d.k, d.lout - base);
              double s = 0;
              for (int t = t0; t < t1; ++t) s += grow[base + t] * krow[t];
              gxrow[j] += s;
            }
          }
        }
    }
    if (kin.on_tape()) {
      auto& gk = t.grad_slot(kin.node());
      for (int b = 0; b < d.batch; ++b)
        for (int ci = 0; ci < d.cin; ++ci) {
          const double* xrow = xp + (static_cast<int64_t>(b) * d.cin + ci) * d.len;
          for (int co = 0; co < d.cout; ++co) {
            const double* grow = g.data() + (static_cast<int64_t>(b) * d.cout + co) * d.lout;
            double* gkrow = gk.data() + (static_cast<int64_t>(ci) * d.cout + co) * d.k;
            for (int j = 0; j < d.len; ++j) {
              double xv = xrow[j];
              int base = j * stride - pad;
              int t0 = std::max(0, -base);
              int t1 = std::min(d.k, d.lout - base);
              for (int t = t0; t < t1; ++t) gkrow[t] += xv * grow[base + t];
            }
          }
        }
    }
  });
  return out;
}

// ---- batchnorm / layernorm -------------------------------------------------

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean,
                 std::vector<double>& running_var, bool training,
                 double momentum, double eps) {
  if (x.ndim() != 2 && x.ndim() != 3)
    fail_shape("batchnorm: expects [N,C] or [N,C,L], got " + shape_str(x.shape()));
  int n = x.dim(0);
  int c = x.dim(1);
  int l = x.ndim() == 3 ? x.dim(2) : 1;
  if (gamma.size() != c || beta.size() != c)
    fail_shape("batchnorm: affine size mismatch for C=" + std::to_string(c));
  if (static_cast<int>(running_mean.size()) != c ||
      static_cast<int>(running_var.size()) != c)
    fail_shape("batchnorm: running buffer size mismatch");
  const int64_t m = static_cast<int64_t>(n) * l;
  if (m == 0) fail_shape("batchnorm: empty batch");

  std::vector<double> mu(static_cast<size_t>(c), 0.0), var(static_cast<size_t>(c), 0.0);
  const double* xp = x.data();
  auto at = [&](int bi, int ci, int li) -> int64_t {
    return (static_cast<int64_t>(bi) * c + ci) * l + li;
  };
  if (training) {
    for (int ci = 0; ci < c; ++ci) {
      double s = 0;
      for (int bi = 0; bi < n; ++bi)
        for (int li = 0; li < l; ++li) s += xp[at(bi, ci, li)];
      mu[static_cast<size_t>(ci)] = s / static_cast<double>(m);
      double v = 0;
      for (int bi = 0; bi < n; ++bi)
        for (int li = 0; li < l; ++li) {
          double dd = xp[at(bi, ci, li)] - mu[static_cast<size_t>(ci)];
          v += dd * dd;
        }
      var[static_cast<size_t>(ci)] = v / static_cast<double>(m);
    }
    for (int ci = 0; ci < c; ++ci) {
      running_mean[static_cast<size_t>(ci)] =
          (1.0 - momentum) * running_mean[static_cast<size_t>(ci)] +
          momentum * mu[static_cast<size_t>(ci)];
      running_var[static_cast<size_t>(ci)] =
          (1.0 - momentum) * running_var[static_cast<size_t>(ci)] +
          momentum * var[static_cast<size_t>(ci)];
    }
  } else {
    mu.assign(running_mean.begin(), running_mean.end());
    var.assign(running_var.begin(), running_var.end());
  }

  Tensor out(x.shape());
  double* yp = out.data();
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.size()));
  const double* gp = gamma.data();
  const double* bp = beta.data();
  std::vector<double> inv_sd(static_cast<size_t>(c));
  for (int ci = 0; ci < c; ++ci)
    inv_sd[static_cast<size_t>(ci)] = 1.0 / std::sqrt(var[static_cast<size_t>(ci)] + eps);
  for (int bi = 0; bi < n; ++bi)
    for (int ci = 0; ci < c; ++ci)
      for (int li = 0; li < l; ++li) {
        int64_t idx = at(bi, ci, li);
        double xh = (xp[idx] - mu[static_cast<size_t>(ci)]) * inv_sd[static_cast<size_t>(ci)];
        (*xhat)[static_cast<size_t>(idx)] = xh;
        yp[idx] = gp[ci] * xh + bp[ci];
      }

  Tape* tape = common_tape({&x, &gamma, &beta});
  check_result(tape, out, "batchnorm");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor xin = x, gin = gamma, bin = beta;
  auto inv_saved = std::make_shared<std::vector<double>>(std::move(inv_sd));
  tape->set_backward(id, [xin, gin, bin, xhat, inv_saved, id, n, c, l, m,
                          training](Tape& t) {
    const auto& g = t.grad_slot(id);
    const double* gp = gin.data();
    auto at = [&](int bi, int ci, int li) -> int64_t {
      return (static_cast<int64_t>(bi) * c + ci) * l + li;
    };
    for (int ci = 0; ci < c; ++ci) {
      double sum_g = 0, sum_gx = 0;
      for (int bi = 0; bi < n; ++bi)
        for (int li = 0; li < l; ++li) {
          int64_t idx = at(bi, ci, li);
          sum_g += g[static_cast<size_t>(idx)];
          sum_gx += g[static_cast<size_t>(idx)] * (*xhat)[static_cast<size_t>(idx)];
        }
      if (gin.on_tape()) t.grad_slot(gin.node())[static_cast<size_t>(ci)] += sum_gx;
      if (bin.on_tape()) t.grad_slot(bin.node())[static_cast<size_t>(ci)] += sum_g;
      if (xin.on_tape()) {
        auto& gx = t.grad_slot(xin.node());
        double inv = (*inv_saved)[static_cast<size_t>(ci)];
        double gamma_c = gp[ci];
        for (int bi = 0; bi < n; ++bi)
          for (int li = 0; li < l; ++li) {
            int64_t idx = at(bi, ci, li);
            double gi = g[static_cast<size_t>(idx)];
            if (training) {
              gx[static_cast<size_t>(idx)] +=
                  gamma_c * inv *
                  (gi - sum_g / static_cast<double>(m) -
                   (*xhat)[static_cast<size_t>(idx)] * sum_gx / static_cast<double>(m));
            } else {
              gx[static_cast<size_t>(idx)] += gamma_c * inv * gi;
            }
          }
      }
    }
  });
  return out;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps) {
  if (x.ndim() != 1 && x.ndim() != 2)
    fail_shape("layernorm: expects [D] or [N,D], got " + shape_str(x.shape()));
  int d = x.dim(x.ndim() - 1);
  int rows = x.ndim() == 2 ? x.dim(0) : 1;
  if (gamma.size() != d || beta.size() != d)
    fail_shape("layernorm: affine size mismatch for D=" + std::to_string(d));
  Tensor out(x.shape());
  const double* xp = x.data();
  const double* gp = gamma.data();
  const double* bp = beta.data();
  double* yp = out.data();
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.size()));
  auto inv_sd = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const double* xr = xp + static_cast<int64_t>(r) * d;
    double mu = 0;
    for (int i = 0; i < d; ++i) mu += xr[i];
    mu /= d;
    double v = 0;
    for (int i = 0; i < d; ++i) {
      double dd = xr[i] - mu;
      v += dd * dd;
    }
    v /= d;
    double inv = 1.0 / std::sqrt(v + eps);
    (*inv_sd)[static_cast<size_t>(r)] = inv;
    for (int i = 0; i < d; ++i) {
      double xh = (xr[i] - mu) * inv;
      (*xhat)[static_cast<size_t>(static_cast<int64_t>(r) * d + i)] = xh;
      yp[static_cast<int64_t>(r) * d + i] = gp[i] * xh + bp[i];
    }
  }
  Tape* tape = common_tape({&x, &gamma, &beta});
  check_result(tape, out, "layernorm");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor xin = x, gin = gamma, bin = beta;
  tape->set_backward(id, [xin, gin, bin, xhat, inv_sd, id, rows, d](Tape& t) {
    const auto& g = t.grad_slot(id);
    const double* gp = gin.data();
    for (int r = 0; r < rows; ++r) {
      const double* gr = g.data() + static_cast<int64_t>(r) * d;
      const double* xh = xhat->data() + static_cast<int64_t>(r) * d;
      double sum_gg = 0, sum_ggx = 0;
      for (int i = 0; i < d; ++i) {
        double gg = gr[i] * gp[i];
        sum_gg += gg;
        sum_ggx += gg * xh[i];
      }
      if (gin.on_tape()) {
        auto& ggamma = t.grad_slot(gin.node());
        for (int i = 0; i < d; ++i) ggamma[static_cast<size_t>(i)] += gr[i] * xh[i];
      }
      if (bin.on_tape()) {
        auto& gbeta = t.grad_slot(bin.node());
        for (int i = 0; i < d; ++i) gbeta[static_cast<size_t>(i)] += gr[i];
      }
      if (xin.on_tape()) {
        auto& gx = t.grad_slot(xin.node());
        double inv = (*inv_sd)[static_cast<size_t>(r)];
        for (int i = 0; i < d; ++i) {
          double gg = gr[i] * gp[i];
          gx[static_cast<size_t>(static_cast<int64_t>(r) * d + i)] +=
              inv * (gg - sum_gg / d - xh[i] * sum_ggx / d);
        }
      }
    }
  });
  return out;
}

Tensor channel_bias(const Tensor& x, const Tensor& b) {
  if (x.ndim() != 2 && x.ndim() != 3)
    fail_shape("channel_bias: expects [C,L] or [N,C,L]");
  int n = x.ndim() == 3 ? x.dim(0) : 1;
  int c = x.ndim() == 3 ? x.dim(1) : x.dim(0);
  int l = x.dim(x.ndim() - 1);
  if (b.ndim() != 1 || b.dim(0) != c)
    fail_shape("channel_bias: bias " + shape_str(b.shape()) +
               " does not match channels " + std::to_string(c));
  Tensor out(x.shape());
  const double* xp = x.data();
  const double* bp = b.data();
  double* yp = out.data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci)
      for (int li = 0; li < l; ++li) {
        int64_t idx = (static_cast<int64_t>(ni) * c + ci) * l + li;
        yp[idx] = xp[idx] + bp[ci];
      }
  Tape* tape = common_tape({&x, &b});
  check_result(tape, out, "channel_bias");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor xin = x, bin = b;
  tape->set_backward(id, [xin, bin, id, n, c, l](Tape& t) {
    const auto& g = t.grad_slot(id);
    if (xin.on_tape()) {
      auto& gx = t.grad_slot(xin.node());
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (bin.on_tape()) {
      auto& gb = t.grad_slot(bin.node());
      for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci)
          for (int li = 0; li < l; ++li)
            gb[static_cast<size_t>(ci)] +=
                g[static_cast<size_t>((static_cast<int64_t>(ni) * c + ci) * l + li)];
    }
  });
  return out;
}

// ---- model-specific primitives --------------------------------------------

Tensor signed_l1_normalize(const Tensor& a, double eps) {
  if (a.ndim() != 3) fail_shape("signed_l1_normalize: expects [T,S,B]");
  int tn = a.dim(0), s = a.dim(1), b = a.dim(2);
  Tensor out(a.shape());
  const double* xp = a.data();
  double* yp = out.data();
  auto at = [&](int ti, int si, int bi) -> int64_t {
    return (static_cast<int64_t>(ti) * s + si) * b + bi;
  };
  for (int ti = 0; ti < tn; ++ti)
    for (int bi = 0; bi < b; ++bi) {
      double denom = eps;
      for (int si = 0; si < s; ++si) denom += std::fabs(xp[at(ti, si, bi)]);
      for (int si = 0; si < s; ++si) yp[at(ti, si, bi)] = xp[at(ti, si, bi)] / denom;
    }
  Tape* tape = common_tape({&a});
  check_result(tape, out, "signed_l1_normalize");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor ain = a;
  tape->set_backward(id, [ain, id, tn, s, b, eps](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& ga = t.grad_slot(ain.node());
    const double* xp = ain.data();
    auto at = [&](int ti, int si, int bi) -> int64_t {
      return (static_cast<int64_t>(ti) * s + si) * b + bi;
    };
    for (int ti = 0; ti < tn; ++ti)
      for (int bi = 0; bi < b; ++bi) {
        double denom = eps;
        double gdota = 0;
        for (int si = 0; si < s; ++si) {
          denom += std::fabs(xp[at(ti, si, bi)]);
          gdota += g[static_cast<size_t>(at(ti, si, bi))] * xp[at(ti, si, bi)];
        }
        double d2 = denom * denom;
        for (int si = 0; si < s; ++si) {
          double x = xp[at(ti, si, bi)];
          double sg = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
          ga[static_cast<size_t>(at(ti, si, bi))] +=
              g[static_cast<size_t>(at(ti, si, bi))] / denom - sg * gdota / d2;
        }
      }
  });
  return out;
}

Tensor mix_sources(const Tensor& w, const Tensor& h) {
  if (w.ndim() != 3 || h.ndim() != 3)
    fail_shape("mix_sources: expects w [T,S,B] and h [S,C,L]");
  int tn = w.dim(0), s = w.dim(1), b = w.dim(2);
  int hs = h.dim(0), c = h.dim(1), l = h.dim(2);
  if (hs != s) fail_shape("mix_sources: source count mismatch");
  if (b <= 0 || c % b != 0)
    fail_shape("mix_sources: block count " + std::to_string(b) +
               " does not divide channels " + std::to_string(c));
  int block = c / b;
  Tensor out({tn, c, l});
  const double* wp = w.data();
  const double* hp = h.data();
  double* yp = out.data();
  for (int ti = 0; ti < tn; ++ti)
    for (int ci = 0; ci < c; ++ci) {
      int bi = ci / block;
      double* yrow = yp + (static_cast<int64_t>(ti) * c + ci) * l;
      for (int si = 0; si < s; ++si) {
        double wv = wp[(static_cast<int64_t>(ti) * s + si) * b + bi];
        if (wv == 0.0) continue;
        const double* hrow = hp + (static_cast<int64_t>(si) * c + ci) * l;
        for (int li = 0; li < l; ++li) yrow[li] += wv * hrow[li];
      }
    }
  Tape* tape = common_tape({&w, &h});
  check_result(tape, out, "mix_sources");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor win = w, hin = h;
  tape->set_backward(id, [win, hin, id, tn, s, b, c, l, block](Tape& t) {
    const auto& g = t.grad_slot(id);
    const double* wp = win.data();
    const double* hp = hin.data();
    if (win.on_tape()) {
      auto& gw = t.grad_slot(win.node());
      for (int ti = 0; ti < tn; ++ti)
        for (int si = 0; si < s; ++si)
          for (int bi = 0; bi < b; ++bi) {
            double acc = 0;
            for (int ci = bi * block; ci < (bi + 1) * block; ++ci) {
              const double* grow = g.data() + (static_cast<int64_t>(ti) * c + ci) * l;
              const double* hrow = hp + (static_cast<int64_t>(si) * c + ci) * l;
              for (int li = 0; li < l; ++li) acc += grow[li] * hrow[li];
            }
            gw[static_cast<size_t>((static_cast<int64_t>(ti) * s + si) * b + bi)] += acc;
          }
    }
    if (hin.on_tape()) {
      auto& gh = t.grad_slot(hin.node());
      for (int si = 0; si < s; ++si)
        for (int ci = 0; ci < c; ++ci) {
          int bi = ci / block;
          double* ghrow = gh.data() + (static_cast<int64_t>(si) * c + ci) * l;
          for (int ti = 0; ti < tn; ++ti) {
            double wv = wp[(static_cast<int64_t>(ti) * s + si) * b + bi];
            if (wv == 0.0) continue;
            const double* grow = g.data() + (static_cast<int64_t>(ti) * c + ci) * l;
            for (int li = 0; li < l; ++li) ghrow[li] += wv * grow[li];
          }
        }
    }
  });
  return out;
}

// ---- spectral primitive -----------------------------------------------------

namespace {
thread_local int64_t g_rfft_evals = 0;
}

int64_t rfft_power_eval_count() { return g_rfft_evals; }
void reset_rfft_power_eval_count() { g_rfft_evals = 0; }

Tensor rfft_power(const Tensor& frame) {
  if (frame.ndim() != 1) fail_shape("rfft_power: expects 1-D frame");
  int n = frame.dim(0);
  if (n < 2 || n % 2 != 0) fail_shape("rfft_power: frame length must be even");
  ++g_rfft_evals;
  auto spectrum = std::make_shared<std::vector<std::complex<double>>>(
      fft::rfft(frame.data(), n));
  Tensor out({n / 2 + 1});
  double* yp = out.data();
  for (size_t k = 0; k < spectrum->size(); ++k) yp[k] = std::norm((*spectrum)[k]);
  Tape* tape = common_tape({&frame});
  check_result(tape, out, "rfft_power");
  if (!tape) return out;
  int id = tape->add_node(out.size());
  out = tape->adopt(out, id);
  Tensor fin = frame;
  tape->set_backward(id, [fin, spectrum, id, n](Tape& t) {
    const auto& g = t.grad_slot(id);
    auto& gf = t.grad_slot(fin.node());
    auto grad = fft::rfft_power_adjoint(*spectrum, g.data(), n);
    for (int i = 0; i < n; ++i) gf[static_cast<size_t>(i)] += grad[static_cast<size_t>(i)];
  });
  return out;
}

}  // namespace favc::ad
