#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vmask/rng.hpp"

namespace vmask::tg {

class Tape;

// Dense 64-bit float tensor. Copies share storage (value semantics are not
// needed anywhere in this codebase; aliasing keeps gradients attached to the
// parameter they belong to). Gradient buffers are allocated lazily.
class Tensor {
 public:
  struct Storage {
    std::vector<int> shape;
    std::vector<double> data;
    std::shared_ptr<std::vector<double>> grad;  // null until first needed
    bool requires_grad = false;
    const Tape* tape = nullptr;  // tape that recorded this tensor as an output
    uint64_t tape_gen = 0;
  };

  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng);

  bool defined() const { return st_ != nullptr; }
  const std::vector<int>& shape() const { return st_->shape; }
  int rank() const { return static_cast<int>(st_->shape.size()); }
  // 2-d accessors; rank-1 tensors count as a single row.
  int rows() const { return rank() == 2 ? st_->shape[0] : 1; }
  int cols() const { return rank() == 2 ? st_->shape[1] : st_->shape[0]; }
  size_t size() const { return st_->data.size(); }
  bool is_scalar() const { return defined() && size() == 1; }

  double item() const;

  std::vector<double>& data() { return st_->data; }
  const std::vector<double>& data() const { return st_->data; }
  double operator()(int r, int c) const { return st_->data[static_cast<size_t>(r) * cols() + c]; }
  double& operator()(int r, int c) { return st_->data[static_cast<size_t>(r) * cols() + c]; }
  double operator[](size_t i) const { return st_->data[i]; }
  double& at(size_t i) { return st_->data[i]; }

  void set_requires_grad(bool b) { st_->requires_grad = b; }
  bool requires_grad() const { return defined() && st_->requires_grad; }

  // Allocates a zero gradient buffer on first use.
  std::vector<double>& grad();
  std::shared_ptr<std::vector<double>> grad_ptr();
  bool has_grad() const { return defined() && st_->grad != nullptr; }
  void zero_grad();

  std::shared_ptr<Storage> st_;
};

// Reverse-mode tape. Ops executed while a Tape is active record a backward
// closure; Tape::backward replays them in exact reverse order. A tape is
// single-threaded; distinct tapes on different threads do not interact.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // Drops all recorded ops and invalidates tensors produced so far.
  void reset();
  size_t num_ops() const { return entries_.size(); }
  uint64_t gen() const { return gen_; }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients of every tracked
  // tensor. Leaf gradients accumulate across repeated calls; intermediate
  // buffers are re-zeroed each call.
  void backward(const Tensor& loss);

  bool tracked(const Tensor& t) const;
  void record(std::function<void()> fn, Tensor& out);

 private:
  struct Entry {
    std::function<void()> fn;
    std::shared_ptr<std::vector<double>> out_grad;
  };
  std::vector<Entry> entries_;
  uint64_t gen_ = 1;
  Tape* prev_ = nullptr;
};

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

// Binary elementwise; equal shapes, or b a length-n vector broadcast over the
// rows of an m x n matrix.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);
Tensor tanh_(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp_(const Tensor& a);
Tensor log_(const Tensor& a);  // throws on non-positive input
Tensor neg(const Tensor& a);

Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor softmax_rows(const Tensor& a);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor conv1d_maxpool(const Tensor& seq, const Tensor& filters, const Tensor& bias, int width);
Tensor dropout(const Tensor& a, double rho, Rng& rng, bool training);

// Row t of the output is row t of x scaled by v[t].
Tensor row_scale(const Tensor& x, const Tensor& v);
// Per-row dot product of two m x n matrices -> length-m vector.
Tensor rows_dot(const Tensor& a, const Tensor& b);
Tensor column(const Tensor& x, int j);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_vec(const std::vector<Tensor>& parts);
Tensor as_row(const Tensor& v);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

std::string shape_str(const std::vector<int>& shape);

}  // namespace vmask::tg
