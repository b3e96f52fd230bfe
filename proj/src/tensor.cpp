#include "vmask/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace vmask::tg {

namespace {

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    n *= static_cast<size_t>(d);
  }
  return n;
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<int> shape) {
  st_ = std::make_shared<Storage>();
  st_->data.assign(shape_numel(shape), 0.0);
  st_->shape = std::move(shape);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  st_ = std::make_shared<Storage>();
  st_->shape = std::move(shape);
  st_->data = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data().begin(), t.data().end(), v);
  return t;
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

double Tensor::item() const {
  if (!is_scalar()) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
  return st_->data[0];
}

std::vector<double>& Tensor::grad() {
  if (!st_->grad) st_->grad = std::make_shared<std::vector<double>>(st_->data.size(), 0.0);
  return *st_->grad;
}

std::shared_ptr<std::vector<double>> Tensor::grad_ptr() {
  grad();
  return st_->grad;
}

void Tensor::zero_grad() {
  if (st_ && st_->grad) std::fill(st_->grad->begin(), st_->grad->end(), 0.0);
}

// ---- Tape -------------------------------------------------------------------

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::reset() {
  entries_.clear();
  ++gen_;
}

bool Tape::tracked(const Tensor& t) const {
  if (!t.defined()) return false;
  if (t.st_->requires_grad) return true;
  return t.st_->tape == this && t.st_->tape_gen == gen_;
}

void Tape::record(std::function<void()> fn, Tensor& out) {
  out.st_->tape = this;
  out.st_->tape_gen = gen_;
  entries_.push_back({std::move(fn), out.grad_ptr()});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar()) {
    throw std::invalid_argument("backward requires a scalar loss");
  }
  if (loss.st_->tape != this || loss.st_->tape_gen != gen_) {
    throw std::invalid_argument("backward: loss is not on the active tape");
  }
  for (Entry& e : entries_) std::fill(e.out_grad->begin(), e.out_grad->end(), 0.0);
  (*loss.st_->grad)[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
}

// ---- op helpers ---------------------------------------------------------------

namespace {

// Grad buffer for an input if it should receive gradient, else null.
std::shared_ptr<std::vector<double>> in_grad(Tape* tp, const Tensor& t) {
  if (!tp->tracked(t)) return nullptr;
  return const_cast<Tensor&>(t).grad_ptr();
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

// true if b is a vector broadcastable over the rows of matrix a
bool row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.shape()[1];
}

void check_binary(const char* op, const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b) && !row_broadcast(a, b)) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
}

enum class BinOp { Add, Sub, Mul };

Tensor binary(const char* name, BinOp op, const Tensor& a, const Tensor& b) {
  check_binary(name, a, b);
  const bool bcast = !same_shape(a, b);
  const int m = a.rows(), n = a.cols();
  Tensor out(a.shape());
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& od = out.data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const size_t k = static_cast<size_t>(i) * n + j;
      const double bv = bcast ? bd[j] : bd[k];
      switch (op) {
        case BinOp::Add: od[k] = ad[k] + bv; break;
        case BinOp::Sub: od[k] = ad[k] - bv; break;
        case BinOp::Mul: od[k] = ad[k] * bv; break;
      }
    }
  }
  Tape* tp = Tape::active();
  if (tp && (tp->tracked(a) || tp->tracked(b))) {
    auto ga = in_grad(tp, a);
    auto gb = in_grad(tp, b);
    auto go = out.grad_ptr();
    auto as = a.st_;
    auto bs = b.st_;
    tp->record(
        [op, bcast, m, n, ga, gb, go, as, bs]() {
          for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
              const size_t k = static_cast<size_t>(i) * n + j;
              const size_t kb = bcast ? static_cast<size_t>(j) : k;
              const double g = (*go)[k];
              switch (op) {
                case BinOp::Add:
                  if (ga) (*ga)[k] += g;
                  if (gb) (*gb)[kb] += g;
                  break;
                case BinOp::Sub:
                  if (ga) (*ga)[k] += g;
                  if (gb) (*gb)[kb] -= g;
                  break;
                case BinOp::Mul:
                  if (ga) (*ga)[k] += g * bs->data[kb];
                  if (gb) (*gb)[kb] += g * as->data[k];
                  break;
              }
            }
          }
        },
        out);
  }
  return out;
}

Tensor unary(const Tensor& a, const std::function<double(double)>& f,
             const std::function<double(double /*x*/, double /*y*/)>& df) {
  Tensor out(a.shape());
  const auto& ad = a.data();
  auto& od = out.data();
  for (size_t k = 0; k < ad.size(); ++k) od[k] = f(ad[k]);
  Tape* tp = Tape::active();
  if (tp && tp->tracked(a)) {
    auto ga = in_grad(tp, a);
    auto go = out.grad_ptr();
    auto as = a.st_;
    auto os = out.st_;
    tp->record(
        [df, ga, go, as, os]() {
          for (size_t k = 0; k < as->data.size(); ++k) {
            (*ga)[k] += (*go)[k] * df(as->data[k], os->data[k]);
          }
        },
        out);
  }
  return out;
}

}  // namespace

// ---- ops ----------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& od = out.data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = ad[static_cast<size_t>(i) * k + p];
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        od[static_cast<size_t>(i) * n + j] += av * bd[static_cast<size_t>(p) * n + j];
      }
    }
  }
  Tape* tp = Tape::active();
  if (tp && (tp->tracked(a) || tp->tracked(b))) {
    auto ga = in_grad(tp, a);
    auto gb = in_grad(tp, b);
    auto go = out.grad_ptr();
    auto as = a.st_;
    auto bs = b.st_;
    tp->record(
        [m, k, n, ga, gb, go, as, bs]() {
          if (ga) {  // dA = dC . B^T
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < n; ++j) {
                const double g = (*go)[static_cast<size_t>(i) * n + j];
                if (g == 0.0) continue;
                for (int p = 0; p < k; ++p)
                  (*ga)[static_cast<size_t>(i) * k + p] += g * bs->data[static_cast<size_t>(p) * n + j];
              }
          }
          if (gb) {  // dB = A^T . dC
            for (int i = 0; i < m; ++i)
              for (int p = 0; p < k; ++p) {
                const double av = as->data[static_cast<size_t>(i) * k + p];
                if (av == 0.0) continue;
                for (int j = 0; j < n; ++j)
                  (*gb)[static_cast<size_t>(p) * n + j] += av * (*go)[static_cast<size_t>(i) * n + j];
              }
          }
        },
        out);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinOp::Mul, a, b); }

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh_(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log_(const Tensor& a) {
  for (double x : a.data()) {
    if (x <= 0.0) throw std::domain_error("log: non-positive input " + std::to_string(x));
  }
  return unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor neg(const Tensor& a) {
  return unary(
      a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double c) {
  return unary(
      a, [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Tensor add_const(const Tensor& a, double c) {
  return unary(
      a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor softmax_rows(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("softmax_rows: expected matrix, got " + shape_str(a.shape()));
  const int m = a.rows(), n = a.cols();
  Tensor out(a.shape());
  const auto& ad = a.data();
  auto& od = out.data();
  for (int i = 0; i < m; ++i) {
    const size_t off = static_cast<size_t>(i) * n;
    double mx = ad[off];
    for (int j = 1; j < n; ++j) mx = std::max(mx, ad[off + j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      od[off + j] = std::exp(ad[off + j] - mx);
      z += od[off + j];
    }
    for (int j = 0; j < n; ++j) od[off + j] /= z;
  }
  Tape* tp = Tape::active();
  if (tp && tp->tracked(a)) {
    auto ga = in_grad(tp, a);
    auto go = out.grad_ptr();
    auto os = out.st_;
    tp->record(
        [m, n, ga, go, os]() {
          for (int i = 0; i < m; ++i) {
            const size_t off = static_cast<size_t>(i) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += (*go)[off + j] * os->data[off + j];
            for (int j = 0; j < n; ++j)
              (*ga)[off + j] += os->data[off + j] * ((*go)[off + j] - dot);
          }
        },
        out);
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("cross_entropy: expected matrix, got " + shape_str(logits.shape()));
  }
  const int m = logits.rows(), c = logits.cols();
  if (static_cast<int>(labels.size()) != m) {
    throw std::invalid_argument("cross_entropy: batch " + std::to_string(m) + " vs " +
                                std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= c) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                  " out of range [0," + std::to_string(c) + ")");
    }
  }
  const auto& zd = logits.data();
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const size_t off = static_cast<size_t>(i) * c;
    double mx = zd[off];
    for (int j = 1; j < c; ++j) mx = std::max(mx, zd[off + j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp(zd[off + j] - mx);
    total += mx + std::log(s) - zd[off + labels[i]];
  }
  Tensor out = Tensor::scalar(total / m);
  Tape* tp = Tape::active();
  if (tp && tp->tracked(logits)) {
    auto gz = in_grad(tp, logits);
    auto go = out.grad_ptr();
    auto zs = logits.st_;
    tp->record(
        [m, c, gz, go, zs, labels]() {
          const double g = (*go)[0] / m;
          for (int i = 0; i < m; ++i) {
            const size_t off = static_cast<size_t>(i) * c;
            double mx = zs->data[off];
            for (int j = 1; j < c; ++j) mx = std::max(mx, zs->data[off + j]);
            double s = 0.0;
            for (int j = 0; j < c; ++j) s += std::exp(zs->data[off + j] - mx);
            for (int j = 0; j < c; ++j) {
              const double p = std::exp(zs->data[off + j] - mx) / s;
              (*gz)[off + j] += g * (p - (j == labels[i] ? 1.0 : 0.0));
            }
          }
        },
        out);
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) {
    throw std::invalid_argument("embedding_lookup: table must be 2-d, got " + shape_str(table.shape()));
  }
  const int v = table.rows(), d = table.cols();
  const int l = static_cast<int>(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " out of range [0," + std::to_string(v) + ")");
    }
  }
  Tensor out({l, d});
  const auto& td = table.data();
  auto& od = out.data();
  for (int t = 0; t < l; ++t) {
    std::copy_n(td.begin() + static_cast<size_t>(ids[t]) * d, d, od.begin() + static_cast<size_t>(t) * d);
  }
  Tape* tp = Tape::active();
  if (tp && tp->tracked(table)) {
    auto gt = in_grad(tp, table);
    auto go = out.grad_ptr();
    tp->record(
        [l, d, gt, go, ids]() {
          for (int t = 0; t < l; ++t) {
            const size_t src = static_cast<size_t>(t) * d;
            const size_t dst = static_cast<size_t>(ids[t]) * d;
            for (int j = 0; j < d; ++j) (*gt)[dst + j] += (*go)[src + j];
          }
        },
        out);
  }
  return out;
}

Tensor conv1d_maxpool(const Tensor& seq, const Tensor& filters, const Tensor& bias, int width) {
  if (seq.rank() != 2 || filters.rank() != 2) {
    throw std::invalid_argument("conv1d_maxpool: seq and filters must be 2-d");
  }
  const int l = seq.rows(), d = seq.cols();
  const int f = filters.rows();
  if (filters.cols() != width * d) {
    throw std::invalid_argument("conv1d_maxpool: filters " + shape_str(filters.shape()) +
                                " incompatible with width " + std::to_string(width) + " and dim " +
                                std::to_string(d));
  }
  if (bias.size() != static_cast<size_t>(f)) {
    throw std::invalid_argument("conv1d_maxpool: bias size mismatch");
  }
  if (l < width) {
    throw std::invalid_argument("conv1d_maxpool: sequence length " + std::to_string(l) +
                                " shorter than filter width " + std::to_string(width));
  }
  const int windows = l - width + 1;
  const int wd = width * d;
  Tensor out({f});
  const auto& sd = seq.data();
  const auto& fd = filters.data();
  const auto& bd = bias.data();
  auto& od = out.data();
  // argmax over time per filter, ties to the earliest window
  std::vector<int> arg(f, 0);
  std::vector<double> pre(f, 0.0);  // pre-relu value at the argmax
  for (int q = 0; q < f; ++q) {
    double best = -std::numeric_limits<double>::infinity();
    int best_t = 0;
    for (int t = 0; t < windows; ++t) {
      double z = bd[q];
      const size_t foff = static_cast<size_t>(q) * wd;
      const size_t soff = static_cast<size_t>(t) * d;
      for (int j = 0; j < wd; ++j) z += fd[foff + j] * sd[soff + j];
      const double a = z > 0.0 ? z : 0.0;
      if (a > best) {
        best = a;
        best_t = t;
        pre[q] = z;
      }
    }
    od[q] = best;
    arg[q] = best_t;
  }
  Tape* tp = Tape::active();
  if (tp && (tp->tracked(seq) || tp->tracked(filters) || tp->tracked(bias))) {
    auto gs = in_grad(tp, seq);
    auto gf = in_grad(tp, filters);
    auto gb = in_grad(tp, bias);
    auto go = out.grad_ptr();
    auto ss = seq.st_;
    auto fs = filters.st_;
    tp->record(
        [f, d, wd, gs, gf, gb, go, ss, fs, arg, pre]() {
          for (int q = 0; q < f; ++q) {
            if (pre[q] <= 0.0) continue;  // relu kink or dead window
            const double g = (*go)[q];
            if (g == 0.0) continue;
            const size_t foff = static_cast<size_t>(q) * wd;
            const size_t soff = static_cast<size_t>(arg[q]) * d;
            if (gb) (*gb)[q] += g;
            for (int j = 0; j < wd; ++j) {
              if (gf) (*gf)[foff + j] += g * ss->data[soff + j];
              if (gs) (*gs)[soff + j] += g * fs->data[foff + j];
            }
          }
        },
        out);
  }
  return out;
}

Tensor dropout(const Tensor& a, double rho, Rng& rng, bool training) {
  if (rho < 0.0 || rho >= 1.0) {
    throw std::invalid_argument("dropout: rho " + std::to_string(rho) + " outside [0,1)");
  }
  if (!training || rho == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rho);
  std::vector<double> mask(a.size());
  for (double& mk : mask) mk = rng.uniform01() < rho ? 0.0 : keep_scale;
  Tensor out(a.shape());
  const auto& ad = a.data();
  auto& od = out.data();
  for (size_t k = 0; k < ad.size(); ++k) od[k] = ad[k] * mask[k];
  Tape* tp = Tape::active();
  if (tp && tp->tracked(a)) {
    auto ga = in_grad(tp, a);
    auto go = out.grad_ptr();
    tp->record(
        [ga, go, mask]() {
          for (size_t k = 0; k < mask.size(); ++k) (*ga)[k] += (*go)[k] * mask[k];
        },
        out);
  }
  return out;
}

Tensor row_scale(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2 || v.rank() != 1 || v.shape()[0] != x.rows()) {
    throw std::invalid_argument("row_scale: shapes " + shape_str(x.shape()) + " and " +
                                shape_str(v.shape()) + " incompatible");
  }
  const int m = x.rows(), n = x.cols();
  Tensor out(x.shape());
  const auto& xd = x.data();
  const auto& vd = v.data();
  auto& od = out.data();
  for (int i = 0; i < m; ++i) {
    const size_t off = static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) od[off + j] = xd[off + j] * vd[i];
  }
  Tape* tp = Tape::active();
  if (tp && (tp->tracked(x) || tp->tracked(v))) {
    auto gx = in_grad(tp, x);
    auto gv = in_grad(tp, v);
    auto go = out.grad_ptr();
    auto xs = x.st_;
    auto vs = v.st_;
    tp->record(
        [m, n, gx, gv, go, xs, vs]() {
          for (int i = 0; i < m; ++i) {
            const size_t off = static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
              const double g = (*go)[off + j];
              if (gx) (*gx)[off + j] += g * vs->data[i];
              if (gv) (*gv)[i] += g * xs->data[off + j];
            }
          }
        },
        out);
  }
  return out;
}

Tensor rows_dot(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || !same_shape(a, b)) {
    throw std::invalid_argument("rows_dot: shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()) + " incompatible");
  }
  const int m = a.rows(), n = a.cols();
  Tensor out({m});
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& od = out.data();
  for (int i = 0; i < m; ++i) {
    const size_t off = static_cast<size_t>(i) * n;
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += ad[off + j] * bd[off + j];
    od[i] = s;
  }
  Tape* tp = Tape::active();
  if (tp && (tp->tracked(a) || tp->tracked(b))) {
    auto ga = in_grad(tp, a);
    auto gb = in_grad(tp, b);
    auto go = out.grad_ptr();
    auto as = a.st_;
    auto bs = b.st_;
    tp->record(
        [m, n, ga, gb, go, as, bs]() {
          for (int i = 0; i < m; ++i) {
            const size_t off = static_cast<size_t>(i) * n;
            const double g = (*go)[i];
            for (int j = 0; j < n; ++j) {
              if (ga) (*ga)[off + j] += g * bs->data[off + j];
              if (gb) (*gb)[off + j] += g * as->data[off + j];
            }
          }
        },
        out);
  }
  return out;
}

Tensor column(const Tensor& x, int j) {
  if (x.rank() != 2 || j < 0 || j >= x.cols()) {
    throw std::invalid_argument("column: index " + std::to_string(j) + " invalid for " +
                                shape_str(x.shape()));
  }
  const int m = x.rows(), n = x.cols();
  Tensor out({m});
  for (int i = 0; i < m; ++i) out.at(i) = x(i, j);
  Tape* tp = Tape::active();
  if (tp && tp->tracked(x)) {
    auto gx = in_grad(tp, x);
    auto go = out.grad_ptr();
    tp->record(
        [m, n, j, gx, go]() {
          for (int i = 0; i < m; ++i) (*gx)[static_cast<size_t>(i) * n + j] += (*go)[i];
        },
        out);
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  const int n = parts[0].cols();
  int m = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.cols() != n) {
      throw std::invalid_argument("concat_rows: column mismatch at " + shape_str(p.shape()));
    }
    m += p.rows();
  }
  Tensor out({m, n});
  auto& od = out.data();
  size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), od.begin() + off);
    off += p.size();
  }
  Tape* tp = Tape::active();
  if (tp) {
    bool any = false;
    for (const Tensor& p : parts) any = any || tp->tracked(p);
    if (any) {
      std::vector<std::shared_ptr<std::vector<double>>> gs;
      std::vector<size_t> sizes;
      for (const Tensor& p : parts) {
        gs.push_back(in_grad(tp, p));
        sizes.push_back(p.size());
      }
      auto go = out.grad_ptr();
      tp->record(
          [gs, sizes, go]() {
            size_t off = 0;
            for (size_t i = 0; i < gs.size(); ++i) {
              if (gs[i]) {
                for (size_t k = 0; k < sizes[i]; ++k) (*gs[i])[k] += (*go)[off + k];
              }
              off += sizes[i];
            }
          },
          out);
    }
  }
  return out;
}

Tensor concat_vec(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_vec: empty input");
  int total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) throw std::invalid_argument("concat_vec: expected vectors");
    total += p.shape()[0];
  }
  Tensor out({total});
  auto& od = out.data();
  size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), od.begin() + off);
    off += p.size();
  }
  Tape* tp = Tape::active();
  if (tp) {
    bool any = false;
    for (const Tensor& p : parts) any = any || tp->tracked(p);
    if (any) {
      std::vector<std::shared_ptr<std::vector<double>>> gs;
      std::vector<size_t> sizes;
      for (const Tensor& p : parts) {
        gs.push_back(in_grad(tp, p));
        sizes.push_back(p.size());
      }
      auto go = out.grad_ptr();
      tp->record(
          [gs, sizes, go]() {
            size_t off = 0;
            for (size_t i = 0; i < gs.size(); ++i) {
              if (gs[i]) {
                for (size_t k = 0; k < sizes[i]; ++k) (*gs[i])[k] += (*go)[off + k];
              }
              off += sizes[i];
            }
          },
          out);
    }
  }
  return out;
}

Tensor as_row(const Tensor& v) {
  if (v.rank() != 1) throw std::invalid_argument("as_row: expected vector, got " + shape_str(v.shape()));
  const int n = v.shape()[0];
  Tensor out({1, n}, v.data());
  Tape* tp = Tape::active();
  if (tp && tp->tracked(v)) {
    auto gv = in_grad(tp, v);
    auto go = out.grad_ptr();
    tp->record(
        [gv, go]() {
          for (size_t k = 0; k < gv->size(); ++k) (*gv)[k] += (*go)[k];
        },
        out);
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  Tensor out = Tensor::scalar(s);
  Tape* tp = Tape::active();
  if (tp && tp->tracked(a)) {
    auto ga = in_grad(tp, a);
    auto go = out.grad_ptr();
    tp->record(
        [ga, go]() {
          const double g = (*go)[0];
          for (double& x : *ga) x += g;
        },
        out);
  }
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

}  // namespace vmask::tg
