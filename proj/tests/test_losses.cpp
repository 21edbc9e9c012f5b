#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "acne/grad_check.hpp"
#include "acne/layers.hpp"
#include "acne/losses.hpp"
#include "acne/rng.hpp"

using namespace acne;

TEST_CASE("bce values") {
  Tensor<double> near_one({1}, {1.0 - 1e-7});
  CHECK(bce<double>({1}, near_one).value() == doctest::Approx(0.0).epsilon(1e-5));

  Tensor<double> half({2}, {0.5, 0.5});
  CHECK(bce<double>({1, 0}, half).value() == doctest::Approx(std::log(2.0)));

  CHECK_THROWS_AS(bce<double>({1, 0, 1}, half), ShapeError);
}

TEST_CASE("bce gradient") {
  Rng rng(3);
  std::vector<std::uint8_t> y = {1, 0, 1, 1, 0, 0};
  std::vector<double> w(6);
  for (auto& v : w) v = rng.uniform(0.05, 0.95);
  auto res = grad_check(
      [&y](const Tensor<double>& t) { return bce(y, t); },
      Tensor<double>({6}, w));
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("sign_min_l2") {
  Tensor<double> v({3}, {0.6, -0.8, 0.0});
  Tensor<double> vflip({3}, {-0.6, 0.8, 0.0});
  CHECK(sign_min_l2(v, vflip).value() == doctest::Approx(0.0));

  // orthogonal unit vectors give 2 through either branch
  Tensor<double> e1({2}, {1.0, 0.0});
  Tensor<double> e2({2}, {0.0, 1.0});
  CHECK(sign_min_l2(e1, e2).value() == doctest::Approx(2.0));

  // sign invariance holds exactly
  Tensor<double> a({3}, {0.3, -0.2, 0.93});
  Tensor<double> b({3}, {0.1, 0.99, -0.05});
  Tensor<double> aneg({3}, {-0.3, 0.2, -0.93});
  CHECK(sign_min_l2(a, b).value() == sign_min_l2(aneg, b).value());
}

TEST_CASE("sign_min_l2 tie uses the plus branch") {
  // v orthogonal to v*: both branches evaluate to 2, gradient must follow
  // d||v + v*||^2 / dv = 2 (v + v*).
  Tape<double> tape;
  auto v = tape.var(Tensor<double>({2}, {1.0, 0.0}));
  Tensor<double> vstar({2}, {0.0, 1.0});
  tape.backward(sign_min_l2(v, vstar));
  auto g = tape.grad(v);
  CHECK(g.data()[0] == doctest::Approx(2.0));
  CHECK(g.data()[1] == doctest::Approx(2.0));
}

TEST_CASE("line fitting loss") {
  std::array<double, 3> theta_star = {0.0, 1.0, 0.0};
  Tensor<double> perfect({3}, {0.0, -1.0, 0.0});  // same line, flipped sign
  std::optional<Tensor<double>> scores =
      Tensor<double>({4}, {1.0 - 1e-7, 1e-7, 1.0 - 1e-7, 1e-7});
  std::vector<std::uint8_t> y = {1, 0, 1, 0};
  LossWeights lw;
  auto terms = loss_line_fitting(perfect, theta_star, scores, y, lw);
  CHECK(terms.total.value() == doctest::Approx(0.0).epsilon(1e-5));

  LossWeights no_fit;
  no_fit.alpha = 0.0;
  auto bce_only = loss_line_fitting(perfect, theta_star, scores, y, no_fit);
  CHECK(bce_only.alpha_term == 0.0);
  CHECK(bce_only.total.value() == doctest::Approx(bce_only.beta_term));
}

TEST_CASE("classification loss") {
  Tensor<double> strong({4}, {20.0, -5.0, -5.0, -5.0});
  CHECK(loss_classification(strong, 0).value() ==
        doctest::Approx(0.0).epsilon(1e-5));

  Tensor<double> uniform = Tensor<double>::zeros({10});
  CHECK(loss_classification(uniform, 3).value() ==
        doctest::Approx(std::log(10.0)));

  CHECK_THROWS_AS(loss_classification(uniform, 10), ShapeError);

  // gradient is softmax - onehot
  Rng rng(5);
  std::vector<double> logits(5);
  for (auto& v : logits) v = rng.uniform(-2.0, 2.0);
  Tape<double> tape;
  auto lv = tape.var(Tensor<double>({5}, logits));
  tape.backward(loss_classification(lv, 2));
  auto g = tape.grad(lv);
  auto probs = softmax_axis(Tensor<double>({5}, logits), 0);
  for (std::size_t i = 0; i < 5; ++i) {
    const double want = probs.data()[i] - (i == 2 ? 1.0 : 0.0);
    CHECK(g.data()[i] == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("stereo loss schedule and sign flip invariance") {
  Rng rng(7);
  std::array<double, 9> fstar{};
  double norm = 0.0;
  for (auto& v : fstar) {
    v = rng.uniform(-1.0, 1.0);
    norm += v * v;
  }
  for (auto& v : fstar) v /= std::sqrt(norm);
  std::vector<double> fneg(9);
  for (int i = 0; i < 9; ++i) fneg[i] = -fstar[i];
  Tensor<double> fhat({3, 3}, fneg);

  std::vector<std::uint8_t> y = {1, 0, 1};
  std::optional<Tensor<double>> perfect_scores =
      Tensor<double>({3}, {1.0 - 1e-7, 1e-7, 1.0 - 1e-7});
  std::vector<Tensor<double>> intermediates = {*perfect_scores,
                                               *perfect_scores};

  LossWeights lw;
  lw.alpha_enable_step = 20000;

  // Before the enable step the alpha term contributes exactly zero.
  auto early = loss_stereo(fhat, fstar, perfect_scores, intermediates, y, lw,
                           19999);
  CHECK(early.alpha_term == 0.0);
  auto late = loss_stereo(fhat, fstar, perfect_scores, intermediates, y, lw,
                          20000);
  // F_hat = -F*: the sign-min term is zero, only supervision remains.
  CHECK(late.alpha_term == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(late.total.value() == doctest::Approx(0.0).epsilon(1e-5));

  // invariance under a simultaneous sign flip
  std::vector<double> somehat(9);
  for (int i = 0; i < 9; ++i) somehat[i] = rng.uniform(-1.0, 1.0);
  std::array<double, 9> fstar_neg;
  for (int i = 0; i < 9; ++i) fstar_neg[i] = -fstar[i];
  std::vector<double> somehat_neg(9);
  for (int i = 0; i < 9; ++i) somehat_neg[i] = -somehat[i];
  LossWeights always;
  always.alpha_enable_step = 0;
  auto l1 = loss_stereo(Tensor<double>({3, 3}, somehat), fstar,
                        perfect_scores, intermediates, y, always, 5);
  auto l2 = loss_stereo(Tensor<double>({3, 3}, somehat_neg), fstar_neg,
                        perfect_scores, intermediates, y, always, 5);
  CHECK(l1.total.value() == doctest::Approx(l2.total.value()).epsilon(1e-12));
}

TEST_CASE("stereo loss gradient on a tiny instance") {
  Rng rng(11);
  const std::size_t n = 12;
  std::array<double, 9> fstar{};
  double norm = 0.0;
  for (auto& v : fstar) {
    v = rng.uniform(-1.0, 1.0);
    norm += v * v;
  }
  for (auto& v : fstar) v /= std::sqrt(norm);
  std::vector<std::uint8_t> y(n);
  for (auto& v : y) v = rng.below(2);

  // Check d loss / d (pre-sigmoid logits and raw F entries) together.
  std::vector<double> logits(n), fraw(9);
  for (auto& v : logits) v = rng.uniform(-1.0, 1.0);
  for (auto& v : fraw) v = rng.uniform(-1.0, 1.0);
  LossWeights lw;
  lw.alpha_enable_step = 0;
  auto res = grad_check_many(
      [&](const std::vector<Tensor<double>>& xs) {
        std::optional<Tensor<double>> scores = sigmoid(xs[0]);
        // normalize F along the tape like the head does
        auto f = reshape(xs[1], {3, 3});
        auto fn = div(f, vsqrt(total_sum(square(f))));
        std::vector<Tensor<double>> inter = {*scores};
        auto terms = loss_stereo(fn, fstar, scores, inter, y, lw, 100);
        return terms.total;
      },
      {Tensor<double>({n}, logits), Tensor<double>({9}, fraw)});
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("metric helpers") {
  std::array<double, 3> t = {0.6, -0.8, 0.0};
  CHECK(sign_min_l2_distance(t, t) == doctest::Approx(0.0));
  std::array<double, 3> tneg = {-0.6, 0.8, 0.0};
  CHECK(sign_min_l2_distance(t, tneg) == doctest::Approx(0.0));

  ClassifierTally tally;
  tally.correct = 10;
  tally.total = 10;
  CHECK(tally.accuracy() == doctest::Approx(1.0));

  std::vector<double> scores = {0.9, 0.1, 0.8, 0.2};
  std::vector<std::uint8_t> y = {1, 0, 1, 0};
  auto prf = inlier_prf(scores, y);
  CHECK(prf.precision == doctest::Approx(1.0));
  CHECK(prf.recall == doctest::Approx(1.0));
  CHECK(prf.f1 == doctest::Approx(1.0));
}

TEST_CASE("full line-fitting loss gradient through the network (64-bit)") {
  Rng rng(13);
  NetworkConfig cfg;
  cfg.arb_count = 2;
  cfg.channels = 8;
  cfg.acn_per_arb = 2;
  cfg.gn_groups = 2;
  cfg.input_dim = 2;
  cfg.head = HeadKind::line_fit;
  auto params = init_network_params<double>(cfg, 21);

  const std::size_t n = 16;
  std::vector<double> pts(n * 2);
  std::vector<std::uint8_t> y(n);
  // half on a line, half random
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    if (i % 2 == 0) {
      pts[i * 2] = x;
      pts[i * 2 + 1] = 0.3 * x - 0.2;
      y[i] = 1;
    } else {
      pts[i * 2] = x;
      pts[i * 2 + 1] = rng.uniform(-1.0, 1.0);
      y[i] = 0;
    }
  }
  const double tn = std::sqrt(0.3 * 0.3 + 1.0 + 0.2 * 0.2);
  std::array<double, 3> theta_star = {0.3 / tn, -1.0 / tn, -0.2 / tn};
  Tensor<double> cloud({n, 2}, pts);
  LossWeights lw;

  std::vector<Tensor<double>> leaves;
  std::vector<std::string> names;
  for_each_param(params, [&](const std::string& name, Tensor<double>& t) {
    names.push_back(name);
    leaves.push_back(t);
  });

  auto loss_fn = [&](const std::vector<Tensor<double>>& xs) {
    NetworkParams<double> live = params;
    std::size_t idx = 0;
    for_each_param(live,
                   [&](const std::string&, Tensor<double>& t) { t = xs[idx++]; });
    auto fwd = network_forward(live, cfg, cloud);
    auto theta = fit_line(cloud, fwd.weights);
    auto terms = loss_line_fitting(theta, theta_star,
                                   fwd.output->local, y, lw);
    return terms.total;
  };
  // eps = 1e-4: exact-invariance directions (softmax logit shifts) have a
  // true zero gradient, and central differences there are pure round-off.
  auto res = grad_check_many(loss_fn, leaves, 1e-4);
  CHECK(res.max_rel_err < 1e-3);
}
