#include <doctest.h>

#include "vaestream/error.hpp"
#include "vaestream/nn.hpp"

#include <cmath>

using namespace vaestream;
using namespace vaestream::nn;

namespace {

Vector random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
  return v;
}

}  // namespace

TEST_CASE("he normal init matches 2/fan_in variance and zero bias") {
  Rng rng(7);
  const Layer layer = he_normal_init({1, 100000, Activation::Linear}, rng);
  const double mean = layer.weights.mean();
  const double var = (layer.weights.array() - mean).square().sum() / static_cast<double>(layer.weights.size() - 1);
  CHECK(std::abs(var - 2.0) < 0.1);
  CHECK(layer.bias.isZero(0.0));

  Rng a(11), b(11);
  CHECK(he_normal_init({3, 4, Activation::LeakyRelu}, a).weights == he_normal_init({3, 4, Activation::LeakyRelu}, b).weights);
  CHECK_THROWS_AS(he_normal_init({0, 4, Activation::Linear}, rng), ConfigError);
}

TEST_CASE("activations") {
  CHECK(activate(Activation::LeakyRelu, -1.0) == doctest::Approx(-0.01));
  CHECK(activate(Activation::LeakyRelu, 2.0) == 2.0);
  CHECK(activate(Activation::Sigmoid, 0.0) == 0.5);
  CHECK(activate(Activation::Linear, -3.5) == -3.5);
}

TEST_CASE("forward pass") {
  Mlp identity({{3, 3, Activation::Linear}});
  identity.layers()[0].weights = Matrix::Identity(3, 3);
  Vector x(3);
  x << 0.5, -2.0, 7.0;
  CHECK(identity.forward(x).col(0) == x);

  CHECK_THROWS_AS(identity.forward(Vector::Zero(2)), ConfigError);
  CHECK_THROWS_AS(Mlp({{2, 3, Activation::Linear}, {4, 1, Activation::Linear}}), ConfigError);

  Mlp sig({{1, 1, Activation::Sigmoid}});
  CHECK(sig.forward(Vector::Zero(1))(0, 0) == 0.5);
}

TEST_CASE("backward pass") {
  Rng rng(3);
  const Mlp net = Mlp::he_normal({{4, 5, Activation::LeakyRelu}, {5, 2, Activation::Sigmoid}}, rng);
  ForwardCache cache;
  const Matrix out = net.forward(random_vector(4, rng), &cache);

  SUBCASE("zero upstream gives zero gradients") {
    for (const auto& g : net.backward(cache, Matrix::Zero(out.rows(), out.cols()))) {
      CHECK(g.weights.isZero(0.0));
      CHECK(g.bias.isZero(0.0));
    }
  }

  SUBCASE("input gradient of a linear layer is W^T g") {
    Mlp lin({{2, 2, Activation::Linear}});
    lin.layers()[0].weights << 1.0, 2.0, 3.0, 4.0;
    ForwardCache c;
    Vector in(2);
    in << 0.3, -0.7;
    lin.forward(in, &c);
    Vector up(2);
    up << 1.0, -1.0;
    Matrix input_grad;
    lin.backward(c, up, &input_grad);
    // W^T [1,-1] = [1-3, 2-4]
    CHECK(input_grad(0, 0) == doctest::Approx(-2.0));
    CHECK(input_grad(1, 0) == doctest::Approx(-2.0));
  }

  SUBCASE("mismatched cache is rejected") {
    ForwardCache empty;
    CHECK_THROWS_AS(net.backward(empty, out), ContractError);
  }
}

TEST_CASE("gradient check on random small networks") {
  Rng rng(2024);
  const std::vector<std::vector<LayerSpec>> shapes = {
      {{3, 5, Activation::LeakyRelu}, {5, 3, Activation::Sigmoid}},
      {{2, 4, Activation::LeakyRelu}, {4, 4, Activation::LeakyRelu}, {4, 2, Activation::Sigmoid}},
      {{4, 6, Activation::LeakyRelu}, {6, 4, Activation::Linear}},
  };
  for (int trial = 0; trial < 20; ++trial) {
    const auto& specs = shapes[static_cast<std::size_t>(trial) % shapes.size()];
    const Mlp net = Mlp::he_normal(specs, rng);
    const std::size_t d_in = specs.front().input_width;
    const std::size_t d_out = specs.back().output_width;
    const Vector x = random_vector(d_in, rng);
    const bool sigmoid_out = specs.back().activation == Activation::Sigmoid;
    const Vector target = random_vector(d_out, rng, 0.05, 0.95);
    const LossKind kind = sigmoid_out ? LossKind::BinaryCrossEntropy : LossKind::SquaredError;
    CHECK(grad_check(net, x, target, kind) < 1e-4);
  }
}

TEST_CASE("gradient check detects a sign-flipped backward pass") {
  Rng rng(5);
  const Mlp net = Mlp::he_normal({{3, 4, Activation::LeakyRelu}, {4, 3, Activation::Sigmoid}}, rng);
  BackwardFn flipped = [](const Mlp& m, const ForwardCache& c, const Matrix& up) {
    Gradients g = m.backward(c, up);
    for (auto& layer : g) {
      layer.weights = -layer.weights;
      layer.bias = -layer.bias;
    }
    return g;
  };
  Vector x = random_vector(3, rng);
  Vector target = random_vector(3, rng, 0.1, 0.9);
  CHECK(grad_check(net, x, target, LossKind::BinaryCrossEntropy, 1e-5, flipped) > 0.1);
}

TEST_CASE("gradient check on a degenerate zero network stays finite") {
  Mlp zero({{2, 2, Activation::LeakyRelu}, {2, 2, Activation::Linear}});
  const double err = grad_check(zero, Vector::Zero(2), Vector::Zero(2), LossKind::SquaredError);
  CHECK(std::isfinite(err));
  CHECK(err < 1e-4);
}

TEST_CASE("adam step") {
  SUBCASE("one unit-gradient step moves each parameter by about lr") {
    Mlp net({{2, 2, Activation::Linear}});
    AdamState state(net, AdamConfig{});
    Gradients g = net.zero_gradients();
    for (auto& layer : g) {
      layer.weights.setOnes();
      layer.bias.setOnes();
    }
    adam_step(net, g, state);
    // m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps)
    const double expected = -0.001 / (1.0 + 1e-8);
    for (std::size_t i = 0; i < net.parameter_count(); ++i) CHECK(net.parameter(i) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(state.step == 1);
  }

  SUBCASE("zero gradients leave parameters unchanged") {
    Rng rng(1);
    Mlp net = Mlp::he_normal({{3, 2, Activation::LeakyRelu}}, rng);
    const Mlp before = net;
    AdamState state(net, AdamConfig{});
    for (int i = 0; i < 5; ++i) adam_step(net, net.zero_gradients(), state);
    CHECK(net.layers()[0].weights == before.layers()[0].weights);
  }

  SUBCASE("non-finite gradient aborts without modifying anything") {
    Rng rng(1);
    Mlp net = Mlp::he_normal({{3, 2, Activation::LeakyRelu}}, rng);
    const Mlp before = net;
    AdamState state(net, AdamConfig{});
    Gradients g = net.zero_gradients();
    g[0].weights(0, 0) = std::nan("");
    CHECK_THROWS_AS(adam_step(net, g, state), NumericError);
    CHECK(net.layers()[0].weights == before.layers()[0].weights);
    CHECK(state.step == 0);
  }

  SUBCASE("deterministic trajectories") {
    auto run = [] {
      Rng rng(99);
      Mlp net = Mlp::he_normal({{2, 3, Activation::LeakyRelu}, {3, 2, Activation::Sigmoid}}, rng);
      AdamState state(net, AdamConfig{});
      for (int i = 0; i < 10; ++i) {
        ForwardCache c;
        const Vector x = random_vector(2, rng, 0.0, 1.0);
        const Matrix out = net.forward(x, &c);
        adam_step(net, net.backward(c, recon_loss_grad(x, out, LossKind::BinaryCrossEntropy)), state);
      }
      return net.layers()[1].weights;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("reconstruction losses") {
  Vector x(2);
  x << 0.2, 0.9;
  CHECK(recon_loss(x, x, LossKind::SquaredError) == 0.0);
  CHECK(recon_loss(Vector::Zero(2), Vector::Ones(2), LossKind::SquaredError) == 2.0);
  CHECK(recon_loss(Vector::Ones(1), Vector::Constant(1, 0.5), LossKind::BinaryCrossEntropy) ==
        doctest::Approx(-std::log(0.5)));
  CHECK_THROWS_AS(recon_loss(Vector::Constant(1, 1.5), Vector::Constant(1, 0.5), LossKind::BinaryCrossEntropy),
                  DomainError);

  // Saturated predictions are clamped: finite loss, zero derivative.
  const double saturated = recon_loss(Vector::Ones(1), Vector::Zero(1), LossKind::BinaryCrossEntropy);
  CHECK(saturated == doctest::Approx(-std::log(kBceClamp)));
  CHECK(recon_loss_grad(Vector::Ones(1), Vector::Zero(1), LossKind::BinaryCrossEntropy)(0, 0) == 0.0);

  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const Vector a = random_vector(4, rng, 0.0, 1.0);
    const Vector b = random_vector(4, rng, 0.0, 1.0);
    CHECK(recon_loss(a, b, LossKind::SquaredError) >= 0.0);
    CHECK(recon_loss(a, b, LossKind::BinaryCrossEntropy) >= 0.0);
  }
}

TEST_CASE("relative error guards tiny denominators") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1.0, 1.1) == doctest::Approx(0.1 / 1.1));
  CHECK(relative_error(1e-9, 2e-9) == doctest::Approx(1e-9 / 1e-6));
}
