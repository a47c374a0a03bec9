#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "amtl/gradcheck.hpp"
#include "amtl/rng.hpp"
#include "amtl/tensor.hpp"

using amtl::Shape;
using amtl::Tensor;

namespace {

Tensor<double> random_tensor(Shape shape, amtl::Rng& rng, double scale = 1.0) {
  Tensor<double> t = Tensor<double>::zeros(shape);
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_CASE("matmul identity") {
  Tensor<double> a({1, 2, 3, 4}, {2, 2});
  Tensor<double> eye({1, 0, 0, 1}, {2, 2});
  Tensor<double> out = matmul(a, eye);
  CHECK(out.values() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor<double> a({1, 2, 3, 4}, {2, 2});
  Tensor<double> b({1, 2, 3}, {3, 1});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,2]"), std::invalid_argument);
}

TEST_CASE("softmax of uniform input is uniform") {
  Tensor<double> x({0, 0, 0}, {3});
  Tensor<double> y = softmax_rows(x);
  for (double v : y.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and are nonnegative") {
  amtl::Rng rng(7);
  Tensor<double> x = random_tensor({5, 4}, rng, 3.0);
  Tensor<double> y = softmax_rows(x);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      const double v = y.values()[r * 4 + c];
      CHECK(v >= 0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("frobenius norm squared of all-ones 2x2 is 4") {
  Tensor<double> x({1, 1, 1, 1}, {2, 2});
  CHECK(frobenius_norm_sq(x).item() == doctest::Approx(4.0));
}

TEST_CASE("backward of sum gives ones") {
  Tensor<double> w({2, 5, -1}, {3}, true);
  Tensor<double> loss = sum(w);
  loss.backward();
  CHECK(w.grad() == std::vector<double>{1, 1, 1});
}

TEST_CASE("backward of sum of squares doubles the input") {
  Tensor<double> w({1, -2, 3}, {3}, true);
  Tensor<double> loss = sum(mul(w, w));
  loss.backward();
  CHECK(w.grad() == std::vector<double>{2, -4, 6});
}

TEST_CASE("disconnected parameter keeps a zero gradient") {
  Tensor<double> w({1, 2}, {2}, true);
  Tensor<double> other({3.0}, {1}, true);
  Tensor<double> loss = sum(mul(other, other));
  loss.backward();
  CHECK(w.grad() == std::vector<double>{0, 0});
}

TEST_CASE("backward requires a scalar loss") {
  Tensor<double> w({1, 2}, {2}, true);
  Tensor<double> y = mul(w, w);
  CHECK_THROWS_AS(y.backward(), std::invalid_argument);
}

TEST_CASE("repeated backward without rebuilding is an error") {
  Tensor<double> w({1, 2}, {2}, true);
  Tensor<double> loss = sum(w);
  loss.backward();
  CHECK_THROWS_AS(loss.backward(), std::runtime_error);
}

TEST_CASE("gradient linearity: sum of losses equals summed backward passes") {
  amtl::Rng rng(11);
  Tensor<double> w = random_tensor({4}, rng);
  w.set_requires_grad(true);

  Tensor<double> l1 = sum(mul(w, w));
  Tensor<double> l2 = mean(w);
  add(l1, l2).backward();
  std::vector<double> combined = w.grad();

  w.zero_grad();
  sum(mul(w, w)).backward();
  mean(w).backward();
  for (std::size_t i = 0; i < combined.size(); ++i) {
    CHECK(w.grad()[i] == doctest::Approx(combined[i]).epsilon(1e-12));
  }
}

TEST_CASE("grad_reverse forward is bit-identical and backward negates and scales") {
  Tensor<double> x({1, 2, 3}, {3}, true);
  Tensor<double> y = grad_reverse(x, 1.0);
  CHECK(y.values() == x.values());

  sum(y).backward();
  CHECK(x.grad() == std::vector<double>{-1, -1, -1});

  Tensor<double> x2({5, -7}, {2}, true);
  Tensor<double> y2 = grad_reverse(x2, 0.5);
  Tensor<double> weights({1, -2}, {2});
  sum(mul(y2, weights)).backward();
  CHECK(x2.grad()[0] == doctest::Approx(-0.5));
  CHECK(x2.grad()[1] == doctest::Approx(1.0));
}

TEST_CASE("grad_reverse rejects negative scale") {
  Tensor<double> x({1.0}, {1});
  CHECK_THROWS_AS(grad_reverse(x, -0.1), std::invalid_argument);
}

TEST_CASE("detach cuts the graph") {
  Tensor<double> w({2.0}, {1}, true);
  Tensor<double> y = mul(w, w);
  Tensor<double> z = mul(y.detach(), w);
  z.backward();
  CHECK(w.grad() == std::vector<double>{4.0});  // only the live factor contributes
}

TEST_CASE("finite differences agree with autodiff on elementwise compositions") {
  amtl::Rng rng(23);
  Tensor<double> a = random_tensor({6}, rng);
  Tensor<double> b = random_tensor({6}, rng);
  auto f = [&]() {
    return sum(mul(add(a, b), tanh(sub(scale(a, 0.5), b))));
  };
  auto report = amtl::finite_difference_check("elementwise", f, {{"a", a}, {"b", b}});
  CHECK(report.max_relative_error < 1e-6);
}

TEST_CASE("finite differences agree on linalg ops") {
  amtl::Rng rng(29);
  Tensor<double> a = random_tensor({3, 4}, rng);
  Tensor<double> b = random_tensor({4, 2}, rng);
  Tensor<double> v = random_tensor({4}, rng);
  auto f = [&]() {
    Tensor<double> prod = matmul(a, b);                  // [3,2]
    Tensor<double> mv = matvec(transpose(b), v);         // [2]
    Tensor<double> joined = concat<double>({reshape(prod, Shape{6}), mv, slice(v, 1, 3)});
    return add(frobenius_norm_sq(joined), mean(row(a, 1)));
  };
  auto report = amtl::finite_difference_check("linalg", f, {{"a", a}, {"b", b}, {"v", v}});
  CHECK(report.max_relative_error < 1e-6);
}

TEST_CASE("finite differences agree on softmax, sigmoid and reductions") {
  amtl::Rng rng(31);
  Tensor<double> x = random_tensor({3, 5}, rng, 2.0);
  Tensor<double> c = random_tensor({3, 5}, rng);
  auto f = [&]() {
    Tensor<double> s = softmax_rows(x);
    Tensor<double> g = sigmoid(mean_rows(mul(s, c)));
    return sum(g);
  };
  auto report = amtl::finite_difference_check("softmax_sigmoid", f, {{"x", x}});
  CHECK(report.max_relative_error < 1e-6);
}

TEST_CASE("finite difference check on a constant function reports zero error") {
  Tensor<double> w({1.0, 2.0}, {2});
  auto f = [&]() { return Tensor<double>::scalar(3.0); };
  auto report = amtl::finite_difference_check("constant", f, {{"w", w}});
  CHECK(report.max_relative_error == 0.0);
}

TEST_CASE("finite difference check validates epsilon and finiteness") {
  Tensor<double> w({1.0}, {1});
  auto f = [&]() { return sum(mul(w, w)); };
  CHECK_THROWS_AS(amtl::finite_difference_check("eps", f, {{"w", w}}, 1e-2), std::invalid_argument);

  Tensor<double> bad({std::nan("")}, {1});
  auto g = [&]() { return sum(bad); };
  CHECK_THROWS_WITH_AS(amtl::finite_difference_check("nan", g, {{"bad", bad}}), doctest::Contains("bad"),
                       std::invalid_argument);
}

TEST_CASE("gradcheck report max equals the per-parameter maximum") {
  amtl::Rng rng(41);
  Tensor<double> a = random_tensor({3}, rng);
  Tensor<double> b = random_tensor({3}, rng);
  auto f = [&]() { return sum(mul(a, sigmoid(b))); };
  auto report = amtl::finite_difference_check("max_check", f, {{"a", a}, {"b", b}});
  double expected = 0;
  for (const auto& [name, err] : report.per_parameter) expected = std::max(expected, err);
  CHECK(report.max_relative_error == expected);
  CHECK(report.per_parameter.size() == 2);
}

TEST_CASE("gather_rows routes gradients to selected rows only") {
  Tensor<double> table({1, 2, 3, 4, 5, 6}, {3, 2}, true);
  Tensor<double> picked = gather_rows(table, {2, 2});
  sum(picked).backward();
  CHECK(table.grad() == std::vector<double>{0, 0, 0, 0, 2, 2});
}

TEST_CASE("tensor invariants are validated") {
  CHECK_THROWS_AS(Tensor<double>({1, 2}, {3}), std::invalid_argument);
  Tensor<double> x({1, 2}, {2});
  CHECK_THROWS_AS(x.item(), std::invalid_argument);
  CHECK_THROWS_AS(gather_rows(x, {}), std::invalid_argument);
}
