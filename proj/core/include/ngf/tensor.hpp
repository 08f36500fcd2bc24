#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ngf {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until touched by a backward pass

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
  }
};

/// Ordered record of executed primitives. Backward replays it in reverse
/// execution order, which keeps gradient accumulation bit-for-bit
/// reproducible in serial mode.
class Tape {
 public:
  void record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }
  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  static Tape* active();

  /// RAII activation of a tape on the current thread.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  void replay_reverse() const {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
};

/// Shape-carrying array of 64-bit reals with optional participation in
/// reverse-mode differentiation. Value semantics over shared storage.
class Tensor {
 public:
  Tensor() : d_(std::make_shared<TensorData>()) {}
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_vector(std::vector<double> values, bool requires_grad = false);

  const Shape& shape() const { return d_->shape; }
  std::int64_t numel() const { return static_cast<std::int64_t>(d_->values.size()); }
  std::int64_t dim(int i) const { return d_->shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(d_->shape.size()); }

  const std::vector<double>& values() const { return d_->values; }
  std::vector<double>& mutable_values() { return d_->values; }
  double value(std::int64_t i) const { return d_->values[static_cast<std::size_t>(i)]; }
  double item() const;

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) { d_->requires_grad = rg; }
  const std::vector<double>& grad() const;
  void zero_grad() { d_->grad.assign(d_->values.size(), 0.0); }

  std::shared_ptr<TensorData> data() const { return d_; }

  bool all_finite() const;

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<TensorData> d_;
  friend Tensor detach(const Tensor&);
};

// ---- primitive operations -------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double c);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor mul(const Tensor& a, double c);
Tensor div(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sin_t(const Tensor& a);
Tensor cos_t(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor softmax(const Tensor& a);  // over last axis
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor gather(const Tensor& a, const std::vector<std::int64_t>& rows);
Tensor scatter_rows(const std::vector<std::int64_t>& rows, const Tensor& src,
                    std::int64_t n_rows);
Tensor scale_rows(const Tensor& m, const Tensor& s);   // s: length-B vector
Tensor add_rowvec(const Tensor& m, const Tensor& v);   // v: length-D vector
Tensor scale(const Tensor& a, const Tensor& s);        // s: 1-element tensor
Tensor cumsum_exclusive(const Tensor& a);              // 1-D
Tensor reshape(const Tensor& a, Shape shape);
Tensor detach(const Tensor& a);
Tensor clamp01(const Tensor& a);  // gradient masked to the interior

/// Seeds d(loss)/d(loss)=1 and replays the active tape in reverse.
void backward(const Tensor& loss);

/// Max relative error between analytic gradients of `f` at `point` and
/// central finite differences with the given step.
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& point, double step);

}  // namespace ngf
