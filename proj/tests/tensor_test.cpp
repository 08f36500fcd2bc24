#include <doctest.h>

#include <cmath>

#include "ngf/rng.hpp"
#include "ngf/tensor.hpp"

using namespace ngf;

namespace {

Tensor param(std::vector<std::int64_t> shape, std::vector<double> v) {
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

TEST_CASE("matmul by identity returns the operand") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {3.0, -1.5, 2.0, 7.0});
  Tensor out = matmul(eye, m);
  for (int i = 0; i < 4; ++i) CHECK(out.value(i) == m.value(i));
}

TEST_CASE("softplus at zero is ln 2") {
  CHECK(softplus(Tensor::scalar(0.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax of a constant vector is uniform") {
  Tensor out = softmax(Tensor::from_vector({0.0, 0.0, 0.0}));
  for (int i = 0; i < 3; ++i) CHECK(out.value(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("gather selects rows") {
  Tensor m({2, 2}, {1, 2, 3, 4});
  Tensor row = gather(m, {1});
  CHECK(row.value(0) == 3.0);
  CHECK(row.value(1) == 4.0);
}

TEST_CASE("shape mismatch is rejected with both shapes named") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({3}, {1, 2, 3});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2, 2]"), std::invalid_argument);
}

TEST_CASE("log of a non-positive value is rejected") {
  CHECK_THROWS_AS(log_t(Tensor::scalar(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(log_t(Tensor::scalar(-1.0)), std::invalid_argument);
}

TEST_CASE("backward: d(x^2)/dx = 2x") {
  Tensor x = param({1}, {3.0});
  Tape tape;
  Tape::Scope scope(tape);
  backward(mul(x, x));
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward: d(sin x)/dx at 0 is 1") {
  Tensor x = param({1}, {0.0});
  Tape tape;
  Tape::Scope scope(tape);
  backward(sin_t(x));
  CHECK(x.grad()[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("backward through sum of softmax gives a zero gradient") {
  Tensor v = param({4}, {0.3, -1.0, 2.0, 0.1});
  Tape tape;
  Tape::Scope scope(tape);
  backward(sum(softmax(v)));
  for (double g : v.grad()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor x = param({2}, {1.0, 2.0});
  Tape tape;
  Tape::Scope scope(tape);
  CHECK_THROWS_AS(backward(mul(x, x)), std::invalid_argument);
}

TEST_CASE("grad_check: quadratic") {
  Tensor x = param({1}, {1.5});
  const double err = grad_check([](const Tensor& t) { return mul(t, t); }, x, 1e-5);
  CHECK(err <= 1e-7);
}

TEST_CASE("grad_check: softplus of sum on a random 8-vector") {
  Rng rng(42);
  Tensor x = param({8}, rng.uniform_vector(8, -1.0, 1.0));
  const double err =
      grad_check([](const Tensor& t) { return softplus(sum(t)); }, x, 1e-5);
  CHECK(err <= 1e-6);
}

TEST_CASE("grad_check covers every primitive at 1e-6") {
  Rng rng(7);
  auto check = [&](const std::function<Tensor(const Tensor&)>& f,
                   std::vector<std::int64_t> shape, double lo, double hi, double tol) {
    const std::int64_t n = shape_numel(shape);
    Tensor x = param(std::move(shape), rng.uniform_vector(static_cast<std::size_t>(n), lo, hi));
    CHECK(grad_check(f, x, 1e-5) <= tol);
  };
  Tensor other({6}, {0.3, -0.2, 0.9, 0.1, -0.5, 0.4});
  check([&](const Tensor& t) { return sum(add(t, other)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(sub(t, other)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(mul(t, other)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(neg(t)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(div(other, t)); }, {6}, 0.5, 2.0, 1e-6);
  Tensor m({3, 2}, {0.1, 0.4, -0.2, 0.8, 0.5, -0.6});
  check([&](const Tensor& t) { return sum(matmul(t, m)); }, {2, 3}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return mean(t); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(exp_t(t)); }, {6}, -1, 1, 1e-5);
  check([&](const Tensor& t) { return sum(log_t(t)); }, {6}, 0.5, 2.0, 1e-6);
  check([&](const Tensor& t) { return sum(sin_t(t)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(cos_t(t)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(relu(t)); }, {6}, 0.1, 1.0, 1e-6);
  check([&](const Tensor& t) { return sum(softplus(t)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(mul(sigmoid(t), other)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(mul(tanh_t(t), other)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(mul(softmax(t), other)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(concat({t, other}, 0)); }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(mul(gather(reshape(t, {3, 2}), {2, 0}),
                                              Tensor({2, 2}, {1, 2, 3, 4}))); },
        {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(mul(scatter_rows({1, 3}, reshape(t, {2, 3}), 5),
                                              Tensor({5, 3}, std::vector<double>(15, 0.7)))); },
        {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) {
    return sum(scale_rows(reshape(t, {3, 2}), Tensor::from_vector({0.5, -1.0, 2.0})));
  }, {6}, -1, 1, 1e-6);
  check([&](const Tensor& t) { return sum(cumsum_exclusive(t)); }, {6}, -1, 1, 1e-6);
}

TEST_CASE("gradients add over a sum of losses (linearity)") {
  Tensor x = param({3}, {0.4, -0.9, 1.3});
  std::vector<double> g_sum;
  {
    Tape tape;
    Tape::Scope scope(tape);
    backward(add(sum(mul(x, x)), sum(sin_t(x))));
    g_sum = x.grad();
  }
  x.zero_grad();
  std::vector<double> g_a, g_b;
  {
    Tape tape;
    Tape::Scope scope(tape);
    backward(sum(mul(x, x)));
    g_a = x.grad();
  }
  x.zero_grad();
  {
    Tape tape;
    Tape::Scope scope(tape);
    backward(sum(sin_t(x)));
    g_b = x.grad();
  }
  for (std::size_t i = 0; i < g_sum.size(); ++i)
    CHECK(g_sum[i] == g_a[i] + g_b[i]);
}

TEST_CASE("parameters off the loss path keep a zero gradient") {
  Tensor used = param({2}, {1.0, 2.0});
  Tensor unused = param({2}, {5.0, 6.0});
  Tape tape;
  Tape::Scope scope(tape);
  backward(sum(mul(used, used)));
  for (double g : unused.grad()) CHECK(g == 0.0);
}

TEST_CASE("reverse replay is bit-identical across repeated runs") {
  Rng rng(99);
  const auto vals = rng.uniform_vector(12, -1.0, 1.0);
  auto run = [&vals]() {
    Tensor x({3, 4}, vals, true);
    Tape tape;
    Tape::Scope scope(tape);
    backward(mean(mul(softmax(x), exp_t(x))));
    return x.grad();
  };
  CHECK(run() == run());
}

TEST_CASE("detach blocks gradient flow") {
  Tensor x = param({1}, {2.0});
  Tape tape;
  Tape::Scope scope(tape);
  backward(mul(detach(x), x));
  CHECK(x.grad()[0] == 2.0);  // only the live factor
}
