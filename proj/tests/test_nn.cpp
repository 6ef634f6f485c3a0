#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "support/util.hpp"
#include "vmask/nn.hpp"

using namespace vmask;

namespace {

// Random model whose ReLU pre-activations stay away from the kink so central
// finite differences are well defined.
Model safe_random_model(ModelRole role, const std::vector<std::size_t>& dims,
                        Rng& rng, const Tensor& probe) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    Model m = init_model(role, dims, rng);
    ForwardCache fc = model_forward(m, probe);
    double closest = 1e9;
    for (const Tensor& pre : fc.preacts)
      for (double v : pre.data) closest = std::min(closest, std::fabs(v));
    if (closest > 1e-3) return m;
  }
  throw std::runtime_error("could not sample a kink-free model");
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("fc_forward matches y = x W^T + b") {
  LinearLayer l;
  l.weight = Tensor(2, 3);  // out x in
  for (std::size_t i = 0; i < 6; ++i) l.weight.data[i] = double(i + 1);
  l.bias = Tensor(2);
  l.bias[0] = 0.5;
  l.bias[1] = -0.5;
  Tensor x(1, 3);
  x.data = {1, 2, 3};
  Tensor y = fc_forward(l, x);
  CHECK(y.at(0, 0) == doctest::Approx(1 + 4 + 9 + 0.5));
  CHECK(y.at(0, 1) == doctest::Approx(4 + 10 + 18 - 0.5));
}

TEST_CASE("relu and relu_backward") {
  Tensor x(1, 4);
  x.data = {-1.0, 0.0, 0.5, 2.0};
  Tensor y = relu(x);
  CHECK(y.data[0] == 0.0);
  CHECK(y.data[1] == 0.0);
  CHECK(y.data[2] == 0.5);
  CHECK(y.data[3] == 2.0);

  Tensor g(1, 4);
  g.data = {1, 1, 1, 1};
  Tensor gx = relu_backward(x, g);
  CHECK(gx.data[0] == 0.0);
  CHECK(gx.data[1] == 0.0);  // gradient at exactly zero is zero
  CHECK(gx.data[2] == 1.0);
  CHECK(gx.data[3] == 1.0);
}

TEST_CASE("softmax_ce loss and probabilities") {
  Tensor logits(2, 3);
  logits.data = {1.0, 2.0, 3.0, 0.0, 0.0, 0.0};
  CeResult ce = softmax_ce(logits, {2, 0});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const double expected =
      (-std::log(std::exp(3.0) / z) - std::log(1.0 / 3.0)) / 2.0;
  CHECK(ce.loss == doctest::Approx(expected));
  // grad rows are (softmax - onehot) / batch and sum to zero.
  for (std::size_t i = 0; i < 2; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) s += ce.grad.at(i, j);
    CHECK(s == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax_ce is stable under large logits") {
  Tensor logits(1, 2);
  logits.data = {1000.0, 0.0};
  CeResult ce = softmax_ce(logits, {0});
  CHECK(std::isfinite(ce.loss));
  CHECK(ce.loss == doctest::Approx(0.0).epsilon(1e-9));
  CeResult worst = softmax_ce(logits, {1});
  CHECK(std::isfinite(worst.loss));
  CHECK(worst.loss == doctest::Approx(1000.0));
}

TEST_CASE("softmax_ce gradient matches finite differences") {
  Rng rng(3);
  Tensor logits(3, 4);
  for (double& v : logits.data) v = rng.uniform(-2, 2);
  std::vector<int> y{1, 3, 0};
  CeResult ce = softmax_ce(logits, y);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double fd = testutil::fd_slot(
        [&] { return softmax_ce(logits, y).loss; }, logits.data[i]);
    CHECK(testutil::rel_err(fd, ce.grad.data[i]) <= 1e-6);
  }
}

TEST_CASE("accuracy breaks argmax ties toward the lower index") {
  Tensor logits(2, 3);
  logits.data = {1.0, 1.0, 0.0, 0.0, 2.0, 2.0};
  CHECK(accuracy(logits, {0, 1}) == doctest::Approx(1.0));
  CHECK(accuracy(logits, {1, 2}) == doctest::Approx(0.0));
}

TEST_CASE("init_model dims, bounds, and determinism") {
  std::vector<std::size_t> dims{6, 5, 3};
  Rng a(11), b(11);
  Model m1 = init_model(ModelRole::Bottom, dims, a);
  Model m2 = init_model(ModelRole::Bottom, dims, b);
  CHECK(m1.depth() == 2);
  CHECK(model_dims(m1) == dims);
  for (std::size_t j = 0; j < m1.depth(); ++j) {
    const double bound = 1.0 / std::sqrt(double(m1.layers[j].in_dim()));
    for (double v : m1.layers[j].weight.data) {
      CHECK(v >= -bound);
      CHECK(v <= bound);
    }
    CHECK(max_abs_diff(m1.layers[j].weight, m2.layers[j].weight) == 0.0);
    CHECK(max_abs_diff(m1.layers[j].bias, m2.layers[j].bias) == 0.0);
  }
}

TEST_CASE("model_forward/model_backward gradients match finite differences") {
  Rng rng(5);
  Tensor x(4, 6);
  for (double& v : x.data) v = rng.uniform(-1, 1);
  std::vector<int> y{0, 2, 1, 2};
  Model m = safe_random_model(ModelRole::Bottom, {6, 5, 3}, rng, x);

  auto loss = [&] {
    return softmax_ce(model_forward(m, x).output, y).loss;
  };
  ForwardCache fc = model_forward(m, x);
  CeResult ce = softmax_ce(fc.output, y);
  BackwardResult br = model_backward(m, fc, ce.grad);

  for (std::size_t j = 0; j < m.depth(); ++j) {
    for (std::size_t i = 0; i < m.layers[j].weight.size(); ++i) {
      double fd = testutil::fd_slot(loss, m.layers[j].weight.data[i]);
      CHECK(testutil::rel_err(fd, br.grads[j].weight.data[i]) <= 1e-4);
    }
    for (std::size_t i = 0; i < m.layers[j].bias.size(); ++i) {
      double fd = testutil::fd_slot(loss, m.layers[j].bias.data[i]);
      CHECK(testutil::rel_err(fd, br.grads[j].bias.data[i]) <= 1e-4);
    }
  }

  // Input gradient too (a bottom model receives it from the top).
  for (std::size_t i = 0; i < x.size(); ++i) {
    double fd = testutil::fd_slot(loss, x.data[i]);
    CHECK(testutil::rel_err(fd, br.grad_input.data[i]) <= 1e-4);
  }
}

TEST_CASE("sgd_step applies lr-scaled gradients and refuses masked layers") {
  Rng rng(9);
  Model m = init_model(ModelRole::Bottom, {3, 2}, rng);
  Model before = m;
  std::vector<LayerGrad> grads(1);
  grads[0].weight = Tensor(2, 3);
  grads[0].bias = Tensor(2);
  for (double& v : grads[0].weight.data) v = 1.0;
  grads[0].bias[0] = 2.0;
  sgd_step(m, grads, 0.5);
  CHECK(m.layers[0].weight.data[0] ==
        doctest::Approx(before.layers[0].weight.data[0] - 0.5));
  CHECK(m.layers[0].bias[0] == doctest::Approx(before.layers[0].bias[0] - 1.0));

  m.layers[0].mask_status = MaskStatus::Masked;
  CHECK_THROWS_AS(sgd_step(m, grads, 0.5), std::runtime_error);
}

}  // TEST_SUITE
