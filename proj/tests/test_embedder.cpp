#include <cmath>

#include <doctest.h>

#include "oracles.hpp"
#include "pul/data_io.hpp"
#include "pul/embedder.hpp"
#include "pul/errors.hpp"
#include "test_helpers.hpp"

using namespace pul;

TEST_CASE("forward: zero weights give a zero embedding") {
  EmbedModel m = make_model(EmbedArch::one_hidden, 4, 3, 2, 2);
  const std::vector<float> x{1.0f, -2.0f, 3.0f, 0.5f};
  const auto e = forward(m, x);
  for (double v : e) CHECK(v == 0.0);
}

TEST_CASE("forward: identity weights pass nonnegative input through") {
  EmbedModel m = make_model(EmbedArch::linear, 3, 0, 3, 2);
  for (int i = 0; i < 3; ++i) m.w1.at(i, i) = 1.0;
  const std::vector<float> x{0.25f, 0.0f, 7.5f};
  const auto e = forward(m, x);
  REQUIRE(e.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(e[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("forward: matches an independent matmul-and-rectify computation") {
  const EmbedModel m = testutil::random_model(EmbedArch::one_hidden, 5, 4, 3, 2, 1337);
  const FloatMatrix xs = testutil::random_features(6, 5, 42);
  for (std::size_t i = 0; i < xs.rows; ++i) {
    const auto got = forward(m, xs.row(i));
    const auto want = oracle::forward(m, xs.row(i));
    REQUIRE(got.size() == want.size());
    for (std::size_t j = 0; j < got.size(); ++j)
      CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
    for (double v : got) CHECK(v >= 0.0);
  }
}

TEST_CASE("forward: dimension mismatch is rejected") {
  const EmbedModel m = make_model(EmbedArch::linear, 4, 0, 2, 2);
  const std::vector<float> x{1.0f, 2.0f};
  CHECK_THROWS_AS(forward(m, x), InvalidInput);
}

TEST_CASE("classify: zero classifier gives the uniform distribution") {
  EmbedModel m = testutil::random_model(EmbedArch::one_hidden, 4, 3, 3, 5, 9);
  for (double& v : m.wc.data) v = 0.0;
  for (double& v : m.bc) v = 0.0;
  const std::vector<float> x{0.1f, 0.2f, 0.3f, 0.4f};
  const auto p = classify(m, x);
  for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("classify: a dominant logit saturates") {
  EmbedModel m = make_model(EmbedArch::linear, 2, 0, 2, 3);
  m.w1.at(0, 0) = 1.0;
  m.w1.at(1, 1) = 1.0;
  m.bc = {1e6, 0.0, 0.0};
  const std::vector<float> x{1.0f, 1.0f};
  const auto p = classify(m, x);
  CHECK(p[0] >= 1.0 - 1e-6);
}

TEST_CASE("classify: matches a hand softmax on a fixed tiny model") {
  EmbedModel m = make_model(EmbedArch::linear, 1, 0, 1, 2);
  m.w1.at(0, 0) = 1.0;
  m.wc.at(0, 0) = 1.0;
  m.wc.at(1, 0) = -1.0;
  const std::vector<float> x{2.0f};  // logits (2, -2)
  const auto p = classify(m, x);
  const double z0 = std::exp(2.0), z1 = std::exp(-2.0);
  CHECK(p[0] == doctest::Approx(z0 / (z0 + z1)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(z1 / (z0 + z1)).epsilon(1e-12));
}

TEST_CASE("classify: probabilities sum to one on random models") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EmbedModel m = testutil::random_model(EmbedArch::one_hidden, 6, 5, 4, 7, 100 + seed, 0.6);
    const FloatMatrix xs = testutil::random_features(1, 6, 200 + seed);
    const auto p = classify(m, xs.row(0));
    double sum = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("loss_and_grad: certain correct prediction gives zero loss and gradients") {
  EmbedModel m = make_model(EmbedArch::linear, 1, 0, 1, 2);
  m.w1.at(0, 0) = 1.0;
  m.wc.at(0, 0) = 1.0;
  m.bc = {1e6, 0.0};  // class 0 certain regardless of input
  FloatMatrix xs(1, 1);
  xs.at(0, 0) = 1.0f;
  const std::vector<int> y{0};
  const GradientSet g = loss_and_grad(m, xs, y);
  CHECK(g.batch_loss == 0.0);
  for (const auto* arr : oracle::grad_arrays(g, m.arch))
    for (double v : *arr) CHECK(v == 0.0);
}

TEST_CASE("loss_and_grad: uniform two-class prediction costs ln 2") {
  EmbedModel m = make_model(EmbedArch::linear, 2, 0, 2, 2);  // zero logits
  FloatMatrix xs(3, 2);
  for (float& v : xs.data) v = 0.5f;
  const std::vector<int> y{0, 1, 0};
  const GradientSet g = loss_and_grad(m, xs, y);
  CHECK(g.batch_loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("loss_and_grad: out-of-range label is rejected") {
  const EmbedModel m = make_model(EmbedArch::linear, 2, 0, 2, 2);
  FloatMatrix xs(1, 2);
  CHECK_THROWS_AS(loss_and_grad(m, xs, std::vector<int>{2}), InvalidInput);
  CHECK_THROWS_AS(loss_and_grad(m, xs, std::vector<int>{-1}), InvalidInput);
}

TEST_CASE("loss_and_grad: analytic gradients match central finite differences") {
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    const auto arch = trial % 2 == 0 ? EmbedArch::one_hidden : EmbedArch::linear;
    const EmbedModel m = testutil::random_model(arch, 4, 3, 3, 3, 500 + trial);
    const FloatMatrix xs = testutil::random_features(4, 4, 600 + trial);
    Rng rng(700 + trial);
    std::vector<int> y(4);
    for (int& v : y) v = static_cast<int>(rng.uniform_index(3));
    const auto report = oracle::finite_diff_check(m, xs, y, 1e-5, 1e-7);
    CHECK(report.max_rel_err <= 1e-4);
  }
}

TEST_CASE("sgd_update: no momentum means a plain gradient step") {
  EmbedModel m = make_model(EmbedArch::linear, 1, 0, 1, 2);
  m.w1.at(0, 0) = 2.0;
  GradientSet g;
  g.g.w1 = Matrix(1, 1);
  g.g.w1.at(0, 0) = 3.0;
  g.g.b1.assign(1, 0.0);
  g.g.wc = Matrix(2, 1);
  g.g.bc.assign(2, 0.0);
  Velocity v = zero_velocity(m);
  sgd_update(m, g, 0.1, 0.0, v);
  CHECK(m.w1.at(0, 0) == doctest::Approx(2.0 - 0.1 * 3.0).epsilon(1e-15));
}

TEST_CASE("sgd_update: zero gradient and velocity leave the model unchanged") {
  EmbedModel m = testutil::random_model(EmbedArch::one_hidden, 3, 2, 2, 2, 11);
  const std::string before = serialize_model(m);
  GradientSet g;
  g.g.w1 = Matrix(m.w1.rows, m.w1.cols);
  g.g.b1.assign(m.b1.size(), 0.0);
  g.g.w2 = Matrix(m.w2.rows, m.w2.cols);
  g.g.b2.assign(m.b2.size(), 0.0);
  g.g.wc = Matrix(m.wc.rows, m.wc.cols);
  g.g.bc.assign(m.bc.size(), 0.0);
  Velocity v = zero_velocity(m);
  sgd_update(m, g, 0.5, 0.9, v);
  CHECK(serialize_model(m) == before);
}

TEST_CASE("sgd_update: two momentum steps match the hand-unrolled recurrence") {
  // v1 = g1, p1 = p0 - lr v1; v2 = mu g1 + g2, p2 = p1 - lr v2
  const double p0 = 1.0, g1 = 0.4, g2 = -0.2, lr = 0.1, mu = 0.9;
  EmbedModel m = make_model(EmbedArch::linear, 1, 0, 1, 2);
  m.w1.at(0, 0) = p0;
  auto grad = [&](double gv) {
    GradientSet g;
    g.g.w1 = Matrix(1, 1);
    g.g.w1.at(0, 0) = gv;
    g.g.b1.assign(1, 0.0);
    g.g.wc = Matrix(2, 1);
    g.g.bc.assign(2, 0.0);
    return g;
  };
  Velocity v = zero_velocity(m);
  sgd_update(m, grad(g1), lr, mu, v);
  sgd_update(m, grad(g2), lr, mu, v);
  const double expect = p0 - lr * g1 - lr * (mu * g1 + g2);
  CHECK(m.w1.at(0, 0) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("fine_tune: memorizes one sample per class") {
  // Mask keeps exactly one sample per pseudo class; loss must decrease.
  const FloatMatrix xs = testutil::random_features(9, 4, 77, 2.0);
  const std::vector<int> labels{0, 0, 0, 1, 1, 1, 2, 2, 2};
  const std::vector<std::uint8_t> mask{1, 0, 0, 1, 0, 0, 1, 0, 0};
  const EmbedModel init = testutil::random_model(EmbedArch::one_hidden, 4, 8, 4, 3, 5, 0.3);
  SgdConfig sgd;
  sgd.epochs_per_iter = 60;
  sgd.learning_rate = 0.05;
  Rng rng(1);
  const auto result = fine_tune(init, xs, labels, mask, 3, sgd, rng);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());
  CHECK(result.epoch_loss.back() < 0.1);
}

TEST_CASE("fine_tune: zero selected samples is an error") {
  const FloatMatrix xs = testutil::random_features(4, 3, 8);
  const std::vector<int> labels{0, 1, 0, 1};
  const std::vector<std::uint8_t> mask{0, 0, 0, 0};
  const EmbedModel init = testutil::random_model(EmbedArch::linear, 3, 0, 2, 2, 3);
  SgdConfig sgd;
  Rng rng(1);
  CHECK_THROWS_AS(fine_tune(init, xs, labels, mask, 2, sgd, rng), EmptyTrainingSet);
}

TEST_CASE("fine_tune: linearly separable clusters reach perfect training accuracy") {
  FloatMatrix xs(20, 2);
  std::vector<int> labels(20);
  Rng data_rng(21);
  for (int i = 0; i < 20; ++i) {
    const int c = i < 10 ? 0 : 1;
    xs.at(i, 0) = static_cast<float>((c == 0 ? -3.0 : 3.0) + data_rng.normal(0.0, 0.3));
    xs.at(i, 1) = static_cast<float>(data_rng.normal(0.0, 0.3));
    labels[i] = c;
  }
  const std::vector<std::uint8_t> mask(20, 1);
  const EmbedModel init = testutil::random_model(EmbedArch::one_hidden, 2, 8, 4, 2, 17, 0.3);
  SgdConfig sgd;
  sgd.epochs_per_iter = 80;
  sgd.learning_rate = 0.05;
  Rng rng(2);
  const auto result = fine_tune(init, xs, labels, mask, 2, sgd, rng);
  int correct = 0;
  for (int i = 0; i < 20; ++i) {
    const auto p = classify(result.model, xs.row(i));
    correct += (p[labels[i]] > 0.5);
  }
  CHECK(correct == 20);
}

TEST_CASE("fine_tune: unselected samples never influence the result") {
  FloatMatrix xs = testutil::random_features(10, 3, 31);
  const std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 0, 1, 1, 0, 1, 1};
  const EmbedModel init = testutil::random_model(EmbedArch::one_hidden, 3, 4, 3, 2, 19);
  SgdConfig sgd;
  sgd.epochs_per_iter = 5;

  Rng rng_a(99);
  const auto a = fine_tune(init, xs, labels, mask, 2, sgd, rng_a);

  // Scribble over every masked-out row, keep the seed.
  for (std::size_t i = 0; i < xs.rows; ++i)
    if (!mask[i])
      for (auto& v : xs.row(i)) v = -1234.5f;
  Rng rng_b(99);
  const auto b = fine_tune(init, xs, labels, mask, 2, sgd, rng_b);

  CHECK(serialize_model(a.model) == serialize_model(b.model));
  CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("fine_tune: identical inputs and seed give identical model bytes") {
  const FloatMatrix xs = testutil::random_features(12, 4, 55);
  std::vector<int> labels(12);
  for (int i = 0; i < 12; ++i) labels[i] = i % 3;
  const std::vector<std::uint8_t> mask(12, 1);
  const EmbedModel init = testutil::random_model(EmbedArch::one_hidden, 4, 5, 3, 3, 23);
  SgdConfig sgd;
  Rng rng_a(7), rng_b(7);
  const auto a = fine_tune(init, xs, labels, mask, 3, sgd, rng_a);
  const auto b = fine_tune(init, xs, labels, mask, 3, sgd, rng_b);
  CHECK(serialize_model(a.model) == serialize_model(b.model));
}
