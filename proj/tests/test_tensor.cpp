#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "acne/grad_check.hpp"
#include "acne/rng.hpp"
#include "acne/tensor.hpp"

using namespace acne;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -2.0,
                             double hi = 2.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul identity and hand-computed products") {
  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> a({2, 2}, {1, 2, 3, 4});
  auto r = matmul(eye, a);
  CHECK(r.data() == std::vector<double>{1, 2, 3, 4});

  Tensor<double> row({1, 2}, {1, 2});
  Tensor<double> col({2, 1}, {3, 4});
  CHECK(matmul(row, col).value() == doctest::Approx(11.0));

  Tensor<double> bad({3, 2}, std::vector<double>(6, 0.0));
  CHECK_THROWS_AS(matmul(a, bad), ShapeError);
}

TEST_CASE("matmul gradient vs central finite differences") {
  Rng rng(7);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto res = grad_check_many(
      [](const std::vector<Tensor<double>>& xs) {
        return total_sum(matmul(xs[0], xs[1]));
      },
      {a, b});
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("elementwise basics") {
  auto s = sigmoid(Tensor<double>::scalar(0.0));
  CHECK(s.value() == doctest::Approx(0.5));

  Tensor<double> x({2}, {-3.0, 3.0});
  auto r = relu(x);
  CHECK(r.data() == std::vector<double>{0.0, 3.0});

  // d/dx sigmoid at 0 is 0.25
  auto gc = grad_check(
      [](const Tensor<double>& t) { return total_sum(sigmoid(t)); },
      Tensor<double>::scalar(0.0));
  CHECK(gc.max_rel_err < 1e-6);
  Tape<double> tape;
  auto v = tape.var(Tensor<double>::scalar(0.0));
  tape.backward(total_sum(sigmoid(v)));
  CHECK(tape.grad(v).value() == doctest::Approx(0.25));
}

TEST_CASE("broadcasting rules") {
  Tensor<double> a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> b({3}, {10, 20, 30});
  auto r = add(a, b);
  CHECK(r.data() == std::vector<double>{11, 22, 33, 14, 25, 36});

  Tensor<double> col({2, 1}, {1, 2});
  auto r2 = mul(a, col);
  CHECK(r2.data() == std::vector<double>{1, 2, 3, 8, 10, 12});

  Tensor<double> bad({4}, {1, 2, 3, 4});
  CHECK_THROWS_AS(add(a, bad), ShapeError);
}

TEST_CASE("broadcast gradients reduce correctly") {
  Rng rng(11);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4}, rng);
  auto col = random_tensor({3, 1}, rng);
  for (auto kind : {BinaryKind::add, BinaryKind::sub, BinaryKind::mul}) {
    auto res = grad_check_many(
        [kind](const std::vector<Tensor<double>>& xs) {
          return total_sum(binary_op(kind, xs[0], xs[1]));
        },
        {a, b});
    CHECK(res.max_rel_err < 1e-4);
    auto res2 = grad_check_many(
        [kind](const std::vector<Tensor<double>>& xs) {
          return total_sum(binary_op(kind, xs[0], xs[1]));
        },
        {a, col});
    CHECK(res2.max_rel_err < 1e-4);
  }
}

TEST_CASE("guarded division") {
  Tensor<double> a({2}, {1.0, 1.0});
  Tensor<double> d({2}, {0.0, 2.0});
  auto r = div(a, d);
  CHECK(r.data()[0] == doctest::Approx(1.0 / guard_eps<double>()));
  CHECK(r.data()[1] == doctest::Approx(0.5));

  // Near-guard denominators are reported through the result, not a crash.
  auto gc = grad_check_many(
      [](const std::vector<Tensor<double>>& xs) {
        return total_sum(div(xs[0], xs[1]));
      },
      {Tensor<double>({1}, {1.0}), Tensor<double>({1}, {1e-13})});
  CHECK(std::isfinite(gc.max_rel_err));
}

TEST_CASE("log and sqrt reject negative input") {
  Tensor<double> neg({1}, {-1.0});
  CHECK_THROWS_AS(vlog(neg), NumericError);
  CHECK_THROWS_AS(vsqrt(neg), NumericError);
}

TEST_CASE("reduce basics") {
  Tensor<double> x({2, 2}, {1, 3, 5, 7});
  auto m = reduce_mean(x, 0);
  CHECK(m.data() == std::vector<double>{3, 5});

  Tensor<double> empty({0, 2}, {});
  CHECK_THROWS_WITH_AS(reduce_sum(empty, 0), "reduce: empty reduction",
                       ShapeError);
  CHECK_THROWS_AS(reduce_sum(x, 2), ShapeError);
}

TEST_CASE("reduce max ties route gradient to the lowest index") {
  Tape<double> tape;
  auto x = tape.var(Tensor<double>({3}, {2, 2, 1}));
  auto m = reduce_max(x, 0);
  CHECK(m.value() == doctest::Approx(2.0));
  tape.backward(m);
  CHECK(tape.grad(x).data() == std::vector<double>{1, 0, 0});
}

TEST_CASE("softmax values") {
  Tensor<double> z({3}, {0, 0, 0});
  auto s = softmax_axis(z, 0);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(s.data()[i] == doctest::Approx(1.0 / 3.0));

  Tensor<double> big({2}, {1000.0, 0.0});
  auto sb = softmax_axis(big, 0);
  CHECK(sb.data()[0] == doctest::Approx(1.0));
  CHECK(sb.data()[1] == doctest::Approx(0.0));

  // shift invariance
  Tensor<double> logits({3}, {0.3, -1.2, 2.0});
  auto s1 = softmax_axis(logits, 0);
  auto s2 = softmax_axis(add_scalar(logits, 5.0), 0);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(s1.data()[i] == doctest::Approx(s2.data()[i]));
}

TEST_CASE("softmax jacobian vs finite differences") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_tensor({5}, rng);
    auto c = random_tensor({5}, rng);
    auto res = grad_check(
        [&c](const Tensor<double>& t) {
          return total_sum(mul(softmax_axis(t, 0), c));
        },
        x);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("backward basics") {
  Tape<double> tape;
  auto x = tape.var(Tensor<double>({3}, {4, 5, 6}));
  tape.backward(total_sum(x));
  CHECK(tape.grad(x).data() == std::vector<double>{1, 1, 1});

  Tape<double> tape2;
  auto y = tape2.var(Tensor<double>({2}, {1, 2}));
  tape2.backward(total_sum(mul(y, y)));
  CHECK(tape2.grad(y).data() == std::vector<double>{2, 4});

  Tape<double> tape3;
  auto z = tape3.var(Tensor<double>({2}, {1, 2}));
  CHECK_THROWS_AS(tape3.backward(mul(z, z)), ShapeError);
}

TEST_CASE("unreachable leaves get zero gradient") {
  Tape<double> tape;
  auto used = tape.var(Tensor<double>({2}, {1, 2}));
  auto unused = tape.var(Tensor<double>({2}, {3, 4}));
  tape.backward(total_sum(used));
  CHECK(tape.grad(unused).data() == std::vector<double>{0, 0});
}

TEST_CASE("backward is deterministic") {
  Rng rng(21);
  auto x0 = random_tensor({4, 4}, rng);
  std::vector<double> first;
  for (int run = 0; run < 2; ++run) {
    Tape<double> tape;
    auto x = tape.var(x0);
    auto h = relu(matmul(x, x));
    auto loss = total_sum(mul(h, sigmoid(x)));
    tape.backward(loss);
    auto g = tape.grad(x).data();
    if (run == 0)
      first = g;
    else
      CHECK(g == first);  // bitwise identical
  }
}

TEST_CASE("grad_check on trivial functions") {
  Rng rng(5);
  auto x = random_tensor({6}, rng);
  auto res = grad_check(
      [](const Tensor<double>& t) { return total_sum(t); }, x);
  CHECK(res.max_rel_err < 1e-9);

  auto res2 = grad_check(
      [](const Tensor<double>& t) { return total_sum(sigmoid(t)); }, x);
  CHECK(res2.max_rel_err < 1e-6);
}

TEST_CASE("primitive gradient battery: 100 random trials each") {
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto x = random_tensor({2, 5}, rng);
    auto pos = random_tensor({2, 5}, rng, 0.1, 2.0);
    auto other = random_tensor({2, 5}, rng);
    auto denom = random_tensor({2, 5}, rng, 0.5, 2.0);

    for (auto kind : {UnaryKind::relu, UnaryKind::sigmoid, UnaryKind::tanh_fn,
                      UnaryKind::exp_fn, UnaryKind::square}) {
      auto r = grad_check(
          [kind](const Tensor<double>& t) {
            return total_sum(unary_op(kind, t));
          },
          x);
      worst = std::max(worst, r.max_rel_err);
    }
    for (auto kind : {UnaryKind::log_fn, UnaryKind::sqrt_fn}) {
      auto r = grad_check(
          [kind](const Tensor<double>& t) {
            return total_sum(unary_op(kind, t));
          },
          pos);
      worst = std::max(worst, r.max_rel_err);
    }
    auto rdiv = grad_check_many(
        [](const std::vector<Tensor<double>>& xs) {
          return total_sum(div(xs[0], xs[1]));
        },
        {x, denom});
    worst = std::max(worst, rdiv.max_rel_err);
    auto rsum = grad_check(
        [](const Tensor<double>& t) {
          return total_sum(mul_scalar(reduce_sum(t, 1), 0.5));
        },
        other);
    worst = std::max(worst, rsum.max_rel_err);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("softmax output sums to one and is nonnegative") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({4, 7}, rng, -5.0, 5.0);
    auto s = softmax_axis(x, 1);
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(s(r, c) >= 0.0);
        sum += s(r, c);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("reshape and transpose round trip with gradients") {
  Rng rng(17);
  auto x = random_tensor({3, 4}, rng);
  auto res = grad_check(
      [](const Tensor<double>& t) {
        return total_sum(square(transpose(reshape(t, {4, 3}))));
      },
      x);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("non-finite outputs are reported") {
  Tensor<double> huge({1}, {1e308});
  CHECK_THROWS_AS(vexp(huge), NumericError);
}
