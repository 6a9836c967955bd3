#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "favc/common.hpp"

namespace favc::ad {

class Tape;

// Dense row-major 64-bit tensor. Optionally attached to a tape node, in which
// case gradients w.r.t. it can be queried after Tape::backward.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  static Tensor scalar(double v);
  static Tensor from(std::vector<int> shape, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const;
  bool empty() const { return !values_; }

  const double* data() const { return values_->data(); }
  double* data() { return values_->data(); }
  const std::vector<double>& values() const { return *values_; }
  std::vector<double>& mutable_values() { return *values_; }
  double value() const;  // scalar convenience

  bool on_tape() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape* tape() const { return tape_; }

  // True when every stored value is finite.
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> values_;
  Tape* tape_ = nullptr;
  int node_ = -1;
  friend class Tape;
};

// Reverse-mode tape. Nodes are appended in forward order (which is already a
// topological order); backward visits them exactly once in reverse order with
// a fixed accumulation sequence, so gradients are bit-reproducible.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  // Registers a leaf whose gradient is wanted (parameters, probe inputs).
  Tensor watch(const Tensor& t);

  // Internal: reserves a node and returns its id; ops attach the closure
  // once the result tensor (and thus the id) is known.
  int add_node(int64_t out_size);
  void set_backward(int id, BackwardFn fn);

  void backward(const Tensor& root);

  // Gradient of the last backward() w.r.t. a watched/derived tensor.
  const std::vector<double>& grad(const Tensor& t) const;
  std::vector<double>& grad_slot(int node) { return grads_[static_cast<size_t>(node)]; }

  size_t node_count() const { return nodes_.size(); }

  // When set, every op validates that its output is finite.
  bool check_finite = false;

  // Attaches a result tensor to this tape.
  Tensor adopt(Tensor t, int node);

 private:
  struct Node {
    int64_t size = 0;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

// Named parameter registry with stable iteration order. `decay` marks
// parameters subject to weight decay; `trainable=false` entries are running
// buffers (batch-norm statistics) that persist in checkpoints but receive no
// gradient.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool decay = true;
    bool trainable = true;
  };

  Tensor& add(const std::string& name, Tensor init, bool decay,
              bool trainable = true);
  bool has(const std::string& name) const;
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  int64_t value_count(bool trainable_only = true) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// ---- primitive operations -------------------------------------------------
// Every op works on plain tensors; when an argument carries a tape node the
// result is recorded with an exact reverse-mode rule.

// pointwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor log_eps(const Tensor& a, double eps = kEps);  // log(x + eps)
Tensor elu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);

// reductions
Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
Tensor dot(const Tensor& a, const Tensor& b);

// softmax over the last axis (1-D or 2-D input)
Tensor softmax(const Tensor& a);

// statistics over the trailing (time) axis: [..., L] -> [...]
Tensor time_mean(const Tensor& a);
Tensor time_std(const Tensor& a);  // population std; length-1 axis gives 0
Tensor time_max(const Tensor& a);
Tensor time_min(const Tensor& a);

// shape
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor concat(const std::vector<Tensor>& parts);  // along axis 0
Tensor slice1d(const Tensor& a, int start, int len);
Tensor select_row(const Tensor& a, int row);  // [N,D] -> [D]

// neural-network kernels
// x: [n] or [N,n]; w: [m,n]; b: [m]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
// x: [C,L] or [N,C,L]; k: [Cout,Cin,K]; zero padding
Tensor conv1d(const Tensor& x, const Tensor& k, int stride, int pad);
// x: [C,L] or [N,C,L]; k: [Cin,Cout,K]; adjoint of conv1d; crop_to<0 keeps
// the natural output length (L-1)*stride - 2*pad + K
Tensor conv_transpose1d(const Tensor& x, const Tensor& k, int stride, int pad,
                        int crop_to = -1);

// Batch norm over [N,C] (stats across N) or [N,C,L] (stats across N and L).
// Running buffers are plain value arrays updated in training mode with the
// given momentum; eval mode normalizes with them.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean,
                 std::vector<double>& running_var, bool training,
                 double momentum = 0.1, double eps = kEps);

// Layer norm over the last axis ([D] or [N,D]).
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps = kEps);

// Adds a per-channel bias to [N,C,L] or [C,L].
Tensor channel_bias(const Tensor& x, const Tensor& b);

// Signed L1 normalization of attention scores over the source axis:
// a: [T,S,B]; out[t,s,b] = a[t,s,b] / (sum_j |a[t,j,b]| + eps).
Tensor signed_l1_normalize(const Tensor& a, double eps = kEps);

// Block-wise source mixing: w: [T,S,B], h: [S,C,L], B divides C;
// out[t,c,l] = sum_s w[t,s,b(c)] * h[s,c,l] with b(c) = c / (C/B).
Tensor mix_sources(const Tensor& w, const Tensor& h);

// Power spectrum of a real frame: [n] -> [n/2+1], n even.
Tensor rfft_power(const Tensor& frame);

// Thread-local counter of rfft_power evaluations; lets tests assert that a
// spectral path was (or was not) exercised.
int64_t rfft_power_eval_count();
void reset_rfft_power_eval_count();

}  // namespace favc::ad
