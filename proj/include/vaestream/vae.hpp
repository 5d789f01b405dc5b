#pragma once

#include "vaestream/nn.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace vaestream::vae {

using nn::LossKind;
using nn::Matrix;
using nn::Rng;
using nn::Vector;

struct VaeConfig {
  std::size_t input_dim = 2;
  /// Encoder hidden widths; the decoder uses them in reverse order.
  std::vector<std::size_t> hidden = {64, 8};
  /// Latent size k. Zero means "use the last hidden width".
  std::size_t latent_dim = 0;
  double beta = 1.0;
  LossKind loss = LossKind::BinaryCrossEntropy;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  nn::AdamConfig adam{};
  double leaky_slope = nn::kDefaultLeakySlope;
  /// Std of Gaussian input corruption during training (denoising ablation); 0 disables.
  double input_noise = 0.0;

  std::size_t resolved_latent() const;
  /// Throws ConfigError when a field is out of range.
  void validate() const;

  bool operator==(const VaeConfig&) const = default;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

struct Encoding {
  Vector mu;
  Vector log_var;
};

/// KL(N(mu, exp(log_var)) || N(0, I)) summed over latent dimensions.
double kl_loss(const Vector& mu, const Vector& log_var);

/// z = mu + exp(log_var / 2) * eps, eps ~ N(0, I) drawn from `rng`.
Vector reparameterize(const Vector& mu, const Vector& log_var, Rng& rng);

struct VaeGradients {
  nn::Gradients encoder;
  nn::Gradients decoder;
};

struct TrainReport {
  bool skipped = false;             // empty data
  std::size_t batches = 0;
  std::vector<double> epoch_losses;  // mean training loss per epoch
};

class Vae {
 public:
  /// He-normal initialised encoder and decoder.
  Vae(VaeConfig config, Rng& init_rng);
  /// Wraps explicit networks; shapes are validated against `config`.
  Vae(VaeConfig config, nn::Mlp encoder, nn::Mlp decoder);

  const VaeConfig& config() const { return config_; }
  std::size_t latent_dim() const { return latent_; }
  std::size_t input_dim() const { return config_.input_dim; }

  const nn::Mlp& encoder() const { return encoder_; }
  const nn::Mlp& decoder() const { return decoder_; }
  nn::Mlp& encoder() { return encoder_; }
  nn::Mlp& decoder() { return decoder_; }

  Encoding encode(const Vector& x) const;

  /// Scoring-mode loss: z = mu, no sampling.
  LossBreakdown loss(const Vector& x) const;
  /// Training-mode loss with an explicit standard-normal sample.
  LossBreakdown loss_with_noise(const Vector& x, const Vector& eps) const;

  double score(const Vector& x) const { return loss(x).total; }
  /// Scores every column of `xs`.
  Eigen::RowVectorXd score_batch(const Matrix& xs) const;

  /// Gradient of the batch-mean training loss for fixed noise `eps` (k x B).
  VaeGradients gradients(const Matrix& xs, const Matrix& eps, double* mean_loss = nullptr) const;
  /// As above with separate encoder inputs and reconstruction targets.
  VaeGradients gradients(const Matrix& inputs, const Matrix& targets, const Matrix& eps,
                         double* mean_loss = nullptr) const;

  /// E passes over `data` in shuffled mini-batches, one Adam update per batch.
  TrainReport train_epochs(std::span<const Vector> data, Rng& rng);
  TrainReport train_epochs(std::span<const Vector> data, std::size_t epochs, Rng& rng);

 private:
  double train_batch(const Matrix& xs, Rng& rng);
  /// Reconstruction loss of each column of `targets` decoded from `latent`.
  Eigen::RowVectorXd recon_columns(const Matrix& targets, const Matrix& latent) const;

  VaeConfig config_;
  std::size_t latent_ = 0;
  nn::Mlp encoder_;
  nn::Mlp decoder_;
  nn::AdamState encoder_opt_;
  nn::AdamState decoder_opt_;
};

std::vector<nn::LayerSpec> encoder_specs(const VaeConfig& config);
std::vector<nn::LayerSpec> decoder_specs(const VaeConfig& config);

}  // namespace vaestream::vae
