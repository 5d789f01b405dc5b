#pragma once

// Dense multilayer perceptron with explicit forward/backward passes.
//
// Samples are stored column-wise: a batch of B inputs of width d is a d x B
// matrix. All arithmetic is double precision.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace vaestream::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

enum class Activation { LeakyRelu, Sigmoid, Linear };

enum class LossKind { BinaryCrossEntropy, SquaredError };

inline constexpr double kDefaultLeakySlope = 0.01;
inline constexpr double kBceClamp = 1e-7;

struct LayerSpec {
  std::size_t input_width = 1;
  std::size_t output_width = 1;
  Activation activation = Activation::Linear;

  bool operator==(const LayerSpec&) const = default;
};

struct Layer {
  LayerSpec spec;
  Matrix weights;  // output_width x input_width
  Vector bias;     // output_width
};

struct LayerGrad {
  Matrix weights;
  Vector bias;
};

using Gradients = std::vector<LayerGrad>;

/// Values recorded by a forward pass that the backward pass needs.
struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> activations;  // output of each layer (post-activation)
  std::vector<Matrix> preactivations;
};

/// He-normal initialised layer: weights ~ N(0, 2 / input_width), zero bias.
Layer he_normal_init(const LayerSpec& spec, Rng& rng);

double activate(Activation act, double v, double leaky_slope = kDefaultLeakySlope);

class Mlp {
 public:
  Mlp() = default;

  /// Zero-initialised network. Throws ConfigError if consecutive widths do not chain.
  explicit Mlp(std::vector<LayerSpec> specs, double leaky_slope = kDefaultLeakySlope);

  static Mlp he_normal(std::vector<LayerSpec> specs, Rng& rng,
                       double leaky_slope = kDefaultLeakySlope);

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t parameter_count() const;
  double leaky_slope() const { return leaky_slope_; }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Forward pass over a batch (columns). `cache` may be null for inference.
  Matrix forward(const Matrix& input, ForwardCache* cache = nullptr) const;

  /// Backward pass. `upstream` is dLoss/dOutput with the same shape as the
  /// forward output. When `input_grad` is non-null it receives dLoss/dInput.
  Gradients backward(const ForwardCache& cache, const Matrix& upstream,
                     Matrix* input_grad = nullptr) const;

  Gradients zero_gradients() const;

  /// Flattened parameter access used by finite-difference checks.
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;

  bool all_finite() const;

 private:
  std::vector<Layer> layers_;
  double leaky_slope_ = kDefaultLeakySlope;
};

double flat_gradient(const Gradients& grads, std::size_t index);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  AdamConfig config;
  Gradients first_moment;
  Gradients second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const Mlp& model, AdamConfig cfg);
};

/// One bias-corrected Adam update. Throws NumericError, leaving both the
/// model and the state untouched, if any gradient entry is non-finite.
void adam_step(Mlp& model, const Gradients& grads, AdamState& state);

/// Summed reconstruction loss of a single sample. For BCE the target must
/// lie in [0,1]; x_hat is clamped into [kBceClamp, 1 - kBceClamp].
double recon_loss(const Vector& x, const Vector& x_hat, LossKind kind);

/// Per-column summed reconstruction losses.
Eigen::RowVectorXd recon_loss_columns(const Matrix& x, const Matrix& x_hat, LossKind kind);

/// Per-column BCE evaluated from sigmoid pre-activations, equal to
/// recon_loss_columns(x, sigmoid(logits), BinaryCrossEntropy) including the
/// clamp, without the cancellation in log(1 - p) when p is close to 1.
Eigen::RowVectorXd bce_from_logits_columns(const Matrix& x, const Matrix& logits);

/// Elementwise dLoss/dx_hat. Clamped BCE entries get a zero derivative.
Matrix recon_loss_grad(const Matrix& x, const Matrix& x_hat, LossKind kind);

using BackwardFn =
    std::function<Gradients(const Mlp&, const ForwardCache&, const Matrix&)>;

/// |a - n| / max(|a|, |n|, floor); the floor keeps all-zero cases finite.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Worst analytic-vs-central-difference discrepancy over every parameter of
/// `model` for loss recon_loss(target, model(input)). `backward` defaults to
/// Mlp::backward and exists so tests can inject faults.
double grad_check(const Mlp& model, const Vector& input, const Vector& target,
                  LossKind kind, double step = 1e-5, const BackwardFn& backward = {});

}  // namespace vaestream::nn
