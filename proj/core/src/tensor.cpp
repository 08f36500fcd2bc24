#include "ngf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ngf {

namespace {

thread_local Tape* g_active_tape = nullptr;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    std::ostringstream os;
    os << op << ": shape mismatch " << shape_str(a.shape()) << " vs "
       << shape_str(b.shape());
    fail(os.str());
  }
}

bool track(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void mark_and_record(Tensor& out, std::initializer_list<const Tensor*> inputs,
                     std::function<void()> backward_fn) {
  if (!track(inputs)) return;
  out.set_requires_grad(true);
  Tape::active()->record(std::move(backward_fn));
}

double stable_softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double stable_sigmoid(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Elementwise unary op with dval = f'(x) computed from (x, y).
Tensor unary_op(const Tensor& a, const char* /*name*/,
                const std::function<double(double)>& f,
                const std::function<double(double, double)>& df) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.value(static_cast<std::int64_t>(i)));
  Tensor y(a.shape(), std::move(out));
  auto ad = a.data();
  auto yd = y.data();
  mark_and_record(y, {&a}, [ad, yd, df]() {
    if (yd->grad.empty()) return;
    if (!ad->requires_grad) return;
    ad->ensure_grad();
    for (std::size_t i = 0; i < yd->grad.size(); ++i)
      ad->grad[i] += yd->grad[i] * df(ad->values[i], yd->values[i]);
  });
  return y;
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : d_(std::make_shared<TensorData>()) {
  for (auto d : shape)
    if (d <= 0) fail("Tensor: non-positive dimension in " + shape_str(shape));
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    std::ostringstream os;
    os << "Tensor: shape " << shape_str(shape) << " wants " << shape_numel(shape)
       << " values, got " << values.size();
    fail(os.str());
  }
  d_->shape = std::move(shape);
  d_->values = std::move(values);
  d_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)), value);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::from_vector(std::vector<double> values, bool requires_grad) {
  Shape s{static_cast<std::int64_t>(values.size())};
  return Tensor(std::move(s), std::move(values), requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) fail("item: tensor has " + std::to_string(numel()) + " values");
  return d_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  d_->ensure_grad();
  return d_->grad;
}

bool Tensor::all_finite() const {
  for (double v : d_->values)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  Tensor y(a.shape(), std::move(out));
  auto ad = a.data(), bd = b.data(), yd = y.data();
  mark_and_record(y, {&a, &b}, [ad, bd, yd]() {
    if (yd->grad.empty()) return;
    if (ad->requires_grad) {
      ad->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i) ad->grad[i] += yd->grad[i];
    }
    if (bd->requires_grad) {
      bd->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i) bd->grad[i] += yd->grad[i];
    }
  });
  return y;
}

Tensor add(const Tensor& a, double c) {
  return unary_op(a, "add_const", [c](double x) { return x + c; },
                  [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  Tensor y(a.shape(), std::move(out));
  auto ad = a.data(), bd = b.data(), yd = y.data();
  mark_and_record(y, {&a, &b}, [ad, bd, yd]() {
    if (yd->grad.empty()) return;
    if (ad->requires_grad) {
      ad->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i) ad->grad[i] += yd->grad[i];
    }
    if (bd->requires_grad) {
      bd->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i) bd->grad[i] -= yd->grad[i];
    }
  });
  return y;
}

Tensor neg(const Tensor& a) {
  return unary_op(a, "neg", [](double x) { return -x; },
                  [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  Tensor y(a.shape(), std::move(out));
  auto ad = a.data(), bd = b.data(), yd = y.data();
  mark_and_record(y, {&a, &b}, [ad, bd, yd]() {
    if (yd->grad.empty()) return;
    if (ad->requires_grad) {
      ad->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i)
        ad->grad[i] += yd->grad[i] * bd->values[i];
    }
    if (bd->requires_grad) {
      bd->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i)
        bd->grad[i] += yd->grad[i] * ad->values[i];
    }
  });
  return y;
}

Tensor mul(const Tensor& a, double c) {
  return unary_op(a, "mul_const", [c](double x) { return x * c; },
                  [c](double, double) { return c; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] / b.values()[i];
  Tensor y(a.shape(), std::move(out));
  auto ad = a.data(), bd = b.data(), yd = y.data();
  mark_and_record(y, {&a, &b}, [ad, bd, yd]() {
    if (yd->grad.empty()) return;
    if (ad->requires_grad) {
      ad->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i)
        ad->grad[i] += yd->grad[i] / bd->values[i];
    }
    if (bd->requires_grad) {
      bd->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i)
        bd->grad[i] -= yd->grad[i] * ad->values[i] / (bd->values[i] * bd->values[i]);
    }
  });
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    std::ostringstream os;
    os << "matmul: incompatible shapes " << shape_str(a.shape()) << " x "
       << shape_str(b.shape());
    fail(os.str());
  }
  const std::int64_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n * m), 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t l = 0; l < k; ++l) {
      const double x = av[static_cast<std::size_t>(i * k + l)];
      if (x == 0.0) continue;
      const double* brow = bv.data() + l * m;
      double* orow = out.data() + i * m;
      for (std::int64_t j = 0; j < m; ++j) orow[j] += x * brow[j];
    }
  Tensor y({n, m}, std::move(out));
  auto ad = a.data(), bd = b.data(), yd = y.data();
  mark_and_record(y, {&a, &b}, [ad, bd, yd, n, k, m]() {
    if (yd->grad.empty()) return;
    const auto& g = yd->grad;
    if (ad->requires_grad) {
      ad->ensure_grad();
      // dA = G * B^T
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t l = 0; l < k; ++l) {
          double acc = 0.0;
          const double* grow = g.data() + i * m;
          const double* brow = bd->values.data() + l * m;
          for (std::int64_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          ad->grad[static_cast<std::size_t>(i * k + l)] += acc;
        }
    }
    if (bd->requires_grad) {
      bd->ensure_grad();
      // dB = A^T * G
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t l = 0; l < k; ++l) {
          const double x = ad->values[static_cast<std::size_t>(i * k + l)];
          if (x == 0.0) continue;
          const double* grow = g.data() + i * m;
          double* brow = bd->grad.data() + l * m;
          for (std::int64_t j = 0; j < m; ++j) brow[j] += x * grow[j];
        }
    }
  });
  return y;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor y = Tensor::scalar(s);
  auto ad = a.data(), yd = y.data();
  mark_and_record(y, {&a}, [ad, yd]() {
    if (yd->grad.empty()) return;
    if (!ad->requires_grad) return;
    ad->ensure_grad();
    const double g = yd->grad[0];
    for (double& gi : ad->grad) gi += g;
  });
  return y;
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor y = Tensor::scalar(s * inv);
  auto ad = a.data(), yd = y.data();
  mark_and_record(y, {&a}, [ad, yd, inv]() {
    if (yd->grad.empty()) return;
    if (!ad->requires_grad) return;
    ad->ensure_grad();
    const double g = yd->grad[0] * inv;
    for (double& gi : ad->grad) gi += g;
  });
  return y;
}

Tensor exp_t(const Tensor& a) {
  return unary_op(a, "exp", [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
  for (double v : a.values())
    if (v <= 0.0) fail("log: non-positive input " + std::to_string(v));
  return unary_op(a, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sin_t(const Tensor& a) {
  return unary_op(a, "sin", [](double x) { return std::sin(x); },
                  [](double x, double) { return std::cos(x); });
}

Tensor cos_t(const Tensor& a) {
  return unary_op(a, "cos", [](double x) { return std::cos(x); },
                  [](double x, double) { return -std::sin(x); });
}

Tensor relu(const Tensor& a) {
  return unary_op(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary_op(a, "softplus", [](double x) { return stable_softplus(x); },
                  [](double x, double) { return stable_sigmoid(x); });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, "sigmoid", [](double x) { return stable_sigmoid(x); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_t(const Tensor& a) {
  return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax(const Tensor& a) {
  if (a.rank() < 1) fail("softmax: rank-0 tensor");
  const std::int64_t cols = a.shape().back();
  const std::int64_t rows = a.numel() / cols;
  std::vector<double> out(a.values().size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = a.values().data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = x[0];
    for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::int64_t j = 0; j < cols; ++j) y[j] /= z;
  }
  Tensor y(a.shape(), std::move(out));
  auto ad = a.data(), yd = y.data();
  mark_and_record(y, {&a}, [ad, yd, rows, cols]() {
    if (yd->grad.empty()) return;
    if (!ad->requires_grad) return;
    ad->ensure_grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* s = yd->values.data() + r * cols;
      const double* g = yd->grad.data() + r * cols;
      double dot = 0.0;
      for (std::int64_t j = 0; j < cols; ++j) dot += s[j] * g[j];
      double* out_g = ad->grad.data() + r * cols;
      for (std::int64_t j = 0; j < cols; ++j) out_g[j] += s[j] * (g[j] - dot);
    }
  });
  return y;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) fail("concat: empty input");
  const int rank = parts[0].rank();
  if (axis < 0 || axis >= rank) fail("concat: bad axis");
  Shape out_shape = parts[0].shape();
  std::int64_t axis_total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != rank) fail("concat: rank mismatch");
    for (int d = 0; d < rank; ++d)
      if (d != axis && p.dim(d) != out_shape[static_cast<std::size_t>(d)])
        fail("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
             shape_str(out_shape));
    axis_total += p.dim(axis);
  }
  out_shape[static_cast<std::size_t>(axis)] = axis_total;

  // outer = product of dims before axis, inner = product after.
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[static_cast<std::size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= out_shape[static_cast<std::size_t>(d)];

  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  std::int64_t offset = 0;
  for (const Tensor& p : parts) {
    const std::int64_t pa = p.dim(axis);
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = p.values().data() + o * pa * inner;
      double* dst = out.data() + (o * axis_total + offset) * inner;
      std::copy(src, src + pa * inner, dst);
    }
    offset += pa;
  }
  Tensor y(out_shape, std::move(out));

  bool any_rg = false;
  for (const Tensor& p : parts) any_rg = any_rg || p.requires_grad();
  if (Tape::active() && any_rg) {
    y.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorData>> pd;
    std::vector<std::int64_t> pa;
    for (const Tensor& p : parts) {
      pd.push_back(p.data());
      pa.push_back(p.dim(axis));
    }
    auto yd = y.data();
    Tape::active()->record([pd, pa, yd, outer, inner, axis_total]() {
      if (yd->grad.empty()) return;
      std::int64_t offset = 0;
      for (std::size_t i = 0; i < pd.size(); ++i) {
        if (pd[i]->requires_grad) {
          pd[i]->ensure_grad();
          for (std::int64_t o = 0; o < outer; ++o) {
            const double* src = yd->grad.data() + (o * axis_total + offset) * inner;
            double* dst = pd[i]->grad.data() + o * pa[i] * inner;
            for (std::int64_t j = 0; j < pa[i] * inner; ++j) dst[j] += src[j];
          }
        }
        offset += pa[i];
      }
    });
  }
  return y;
}

Tensor gather(const Tensor& a, const std::vector<std::int64_t>& rows) {
  if (a.rank() != 2) fail("gather: expects a 2-D tensor, got " + shape_str(a.shape()));
  const std::int64_t n = a.dim(0), d = a.dim(1);
  for (auto r : rows)
    if (r < 0 || r >= n) fail("gather: row " + std::to_string(r) + " out of range");
  std::vector<double> out(rows.size() * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(a.values().data() + rows[i] * d, a.values().data() + (rows[i] + 1) * d,
              out.data() + static_cast<std::int64_t>(i) * d);
  Tensor y({static_cast<std::int64_t>(rows.size()), d}, std::move(out));
  auto ad = a.data(), yd = y.data();
  mark_and_record(y, {&a}, [ad, yd, rows, d]() {
    if (yd->grad.empty()) return;
    if (!ad->requires_grad) return;
    ad->ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double* g = yd->grad.data() + static_cast<std::int64_t>(i) * d;
      double* dst = ad->grad.data() + rows[i] * d;
      for (std::int64_t j = 0; j < d; ++j) dst[j] += g[j];
    }
  });
  return y;
}

Tensor scatter_rows(const std::vector<std::int64_t>& rows, const Tensor& src,
                    std::int64_t n_rows) {
  if (src.rank() != 2) fail("scatter_rows: expects 2-D source");
  if (static_cast<std::int64_t>(rows.size()) != src.dim(0))
    fail("scatter_rows: index count does not match source rows");
  const std::int64_t d = src.dim(1);
  for (auto r : rows)
    if (r < 0 || r >= n_rows) fail("scatter_rows: row out of range");
  std::vector<double> out(static_cast<std::size_t>(n_rows * d), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* s = src.values().data() + static_cast<std::int64_t>(i) * d;
    double* dst = out.data() + rows[i] * d;
    for (std::int64_t j = 0; j < d; ++j) dst[j] += s[j];
  }
  Tensor y({n_rows, d}, std::move(out));
  auto sd = src.data(), yd = y.data();
  mark_and_record(y, {&src}, [sd, yd, rows, d]() {
    if (yd->grad.empty()) return;
    if (!sd->requires_grad) return;
    sd->ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double* g = yd->grad.data() + rows[i] * d;
      double* dst = sd->grad.data() + static_cast<std::int64_t>(i) * d;
      for (std::int64_t j = 0; j < d; ++j) dst[j] += g[j];
    }
  });
  return y;
}

Tensor scale_rows(const Tensor& m, const Tensor& s) {
  if (m.rank() != 2) fail("scale_rows: expects 2-D tensor");
  if (s.numel() != m.dim(0))
    fail("scale_rows: scale length " + std::to_string(s.numel()) +
         " does not match rows " + std::to_string(m.dim(0)));
  const std::int64_t n = m.dim(0), d = m.dim(1);
  std::vector<double> out(m.values().size());
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = s.values()[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < d; ++j)
      out[static_cast<std::size_t>(i * d + j)] = m.values()[static_cast<std::size_t>(i * d + j)] * w;
  }
  Tensor y(m.shape(), std::move(out));
  auto md = m.data(), sd = s.data(), yd = y.data();
  mark_and_record(y, {&m, &s}, [md, sd, yd, n, d]() {
    if (yd->grad.empty()) return;
    if (md->requires_grad) {
      md->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) {
        const double w = sd->values[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < d; ++j)
          md->grad[static_cast<std::size_t>(i * d + j)] +=
              yd->grad[static_cast<std::size_t>(i * d + j)] * w;
      }
    }
    if (sd->requires_grad) {
      sd->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j)
          acc += yd->grad[static_cast<std::size_t>(i * d + j)] *
                 md->values[static_cast<std::size_t>(i * d + j)];
        sd->grad[static_cast<std::size_t>(i)] += acc;
      }
    }
  });
  return y;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2) fail("add_rowvec: expects 2-D tensor");
  if (v.numel() != m.dim(1))
    fail("add_rowvec: vector length " + std::to_string(v.numel()) +
         " does not match columns " + std::to_string(m.dim(1)));
  const std::int64_t n = m.dim(0), d = m.dim(1);
  std::vector<double> out(m.values().size());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j)
      out[static_cast<std::size_t>(i * d + j)] =
          m.values()[static_cast<std::size_t>(i * d + j)] + v.values()[static_cast<std::size_t>(j)];
  Tensor y(m.shape(), std::move(out));
  auto md = m.data(), vd = v.data(), yd = y.data();
  mark_and_record(y, {&m, &v}, [md, vd, yd, n, d]() {
    if (yd->grad.empty()) return;
    if (md->requires_grad) {
      md->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i) md->grad[i] += yd->grad[i];
    }
    if (vd->requires_grad) {
      vd->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j)
          vd->grad[static_cast<std::size_t>(j)] += yd->grad[static_cast<std::size_t>(i * d + j)];
    }
  });
  return y;
}

Tensor scale(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) fail("scale: scale tensor must hold exactly one value");
  const double w = s.values()[0];
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * w;
  Tensor y(a.shape(), std::move(out));
  auto ad = a.data(), sd = s.data(), yd = y.data();
  mark_and_record(y, {&a, &s}, [ad, sd, yd]() {
    if (yd->grad.empty()) return;
    if (ad->requires_grad) {
      ad->ensure_grad();
      const double w = sd->values[0];
      for (std::size_t i = 0; i < yd->grad.size(); ++i) ad->grad[i] += yd->grad[i] * w;
    }
    if (sd->requires_grad) {
      sd->ensure_grad();
      double acc = 0.0;
      for (std::size_t i = 0; i < yd->grad.size(); ++i) acc += yd->grad[i] * ad->values[i];
      sd->grad[0] += acc;
    }
  });
  return y;
}

Tensor cumsum_exclusive(const Tensor& a) {
  if (a.rank() != 1) fail("cumsum_exclusive: expects 1-D tensor");
  const std::int64_t n = a.numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = acc;
    acc += a.values()[static_cast<std::size_t>(i)];
  }
  Tensor y(a.shape(), std::move(out));
  auto ad = a.data(), yd = y.data();
  mark_and_record(y, {&a}, [ad, yd, n]() {
    if (yd->grad.empty()) return;
    if (!ad->requires_grad) return;
    ad->ensure_grad();
    // dL/dx_i = sum_{j>i} g_j
    double suffix = 0.0;
    for (std::int64_t i = n - 1; i >= 0; --i) {
      ad->grad[static_cast<std::size_t>(i)] += suffix;
      suffix += yd->grad[static_cast<std::size_t>(i)];
    }
  });
  return y;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    fail("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  Tensor y(shape, a.values());
  auto ad = a.data(), yd = y.data();
  mark_and_record(y, {&a}, [ad, yd]() {
    if (yd->grad.empty()) return;
    if (!ad->requires_grad) return;
    ad->ensure_grad();
    for (std::size_t i = 0; i < yd->grad.size(); ++i) ad->grad[i] += yd->grad[i];
  });
  return y;
}

Tensor detach(const Tensor& a) {
  auto d = std::make_shared<TensorData>();
  d->shape = a.shape();
  d->values = a.values();
  d->requires_grad = false;
  return Tensor(std::move(d));
}

Tensor clamp01(const Tensor& a) {
  return unary_op(a, "clamp01",
                  [](double x) { return std::clamp(x, 0.0, 1.0); },
                  [](double x, double) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; });
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  if (!std::isfinite(loss.item()))
    throw std::runtime_error("backward: loss is not finite");
  Tape* tape = Tape::active();
  if (tape == nullptr) throw std::runtime_error("backward: no active tape");
  loss.data()->ensure_grad();
  loss.data()->grad[0] += 1.0;
  tape->replay_reverse();
}

double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& point, double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
  Tensor p(point.shape(), point.values(), true);
  std::vector<double> analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = f(p);
    if (y.numel() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
    if (!std::isfinite(y.item()))
      throw std::runtime_error("grad_check: f returned a non-finite value");
    backward(y);
    analytic = p.grad();
  }
  double max_err = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    std::vector<double> vals = point.values();
    vals[static_cast<std::size_t>(i)] += step;
    const double fp = f(Tensor(point.shape(), vals)).item();
    vals[static_cast<std::size_t>(i)] -= 2.0 * step;
    const double fm = f(Tensor(point.shape(), vals)).item();
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("grad_check: f returned a non-finite value");
    const double fd = (fp - fm) / (2.0 * step);
    const double an = analytic[static_cast<std::size_t>(i)];
    const double err = std::abs(an - fd) / std::max(1.0, std::abs(an));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace ngf
