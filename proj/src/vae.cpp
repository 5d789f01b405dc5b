#include "vaestream/vae.hpp"

#include "vaestream/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vaestream::vae {

namespace {

using nn::Activation;
using nn::LayerSpec;

Eigen::RowVectorXd kl_columns(const Matrix& mu, const Matrix& log_var) {
  return 0.5 * (mu.array().square() + log_var.array().exp() - log_var.array() - 1.0)
                   .matrix()
                   .colwise()
                   .sum();
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

}  // namespace

std::size_t VaeConfig::resolved_latent() const {
  if (latent_dim > 0) return latent_dim;
  return hidden.empty() ? 0 : hidden.back();
}

void VaeConfig::validate() const {
  if (input_dim == 0) throw ConfigError("model.input_dim must be >= 1");
  if (resolved_latent() == 0) throw ConfigError("model.latent_dim must be >= 1 (or hidden non-empty)");
  for (auto w : hidden) {
    if (w == 0) throw ConfigError("model.hidden widths must be >= 1");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("model.beta must be finite and >= 0");
  if (epochs == 0) throw ConfigError("model.epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("model.batch_size must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("model.learning_rate must be > 0");
  if (!(input_noise >= 0.0)) throw ConfigError("model.input_noise must be >= 0");
}

std::vector<LayerSpec> encoder_specs(const VaeConfig& config) {
  std::vector<LayerSpec> specs;
  std::size_t width = config.input_dim;
  for (auto h : config.hidden) {
    specs.push_back({width, h, Activation::LeakyRelu});
    width = h;
  }
  specs.push_back({width, 2 * config.resolved_latent(), Activation::Linear});
  return specs;
}

std::vector<LayerSpec> decoder_specs(const VaeConfig& config) {
  std::vector<LayerSpec> specs;
  std::size_t width = config.resolved_latent();
  for (auto it = config.hidden.rbegin(); it != config.hidden.rend(); ++it) {
    specs.push_back({width, *it, Activation::LeakyRelu});
    width = *it;
  }
  specs.push_back({width, config.input_dim, Activation::Sigmoid});
  return specs;
}

double kl_loss(const Vector& mu, const Vector& log_var) {
  if (mu.size() != log_var.size()) throw ConfigError("mu/log_var size mismatch");
  return kl_columns(mu, log_var)(0);
}

Vector reparameterize(const Vector& mu, const Vector& log_var, Rng& rng) {
  if (mu.size() != log_var.size()) throw ConfigError("mu/log_var size mismatch");
  const Matrix eps = standard_normal(mu.size(), 1, rng);
  return mu + ((0.5 * log_var.array()).exp() * eps.col(0).array()).matrix();
}

Vae::Vae(VaeConfig config, Rng& init_rng) : config_(std::move(config)) {
  config_.validate();
  latent_ = config_.resolved_latent();
  encoder_ = nn::Mlp::he_normal(encoder_specs(config_), init_rng, config_.leaky_slope);
  decoder_ = nn::Mlp::he_normal(decoder_specs(config_), init_rng, config_.leaky_slope);
  encoder_opt_ = nn::AdamState(encoder_, config_.adam);
  decoder_opt_ = nn::AdamState(decoder_, config_.adam);
}

Vae::Vae(VaeConfig config, nn::Mlp encoder, nn::Mlp decoder)
    : config_(std::move(config)), encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  config_.validate();
  latent_ = config_.resolved_latent();
  if (encoder_.input_width() != config_.input_dim || encoder_.output_width() != 2 * latent_) {
    throw ConfigError("encoder must map input_dim -> 2 * latent_dim");
  }
  if (decoder_.input_width() != latent_ || decoder_.output_width() != config_.input_dim) {
    throw ConfigError("decoder must map latent_dim -> input_dim");
  }
  encoder_opt_ = nn::AdamState(encoder_, config_.adam);
  decoder_opt_ = nn::AdamState(decoder_, config_.adam);
}

Encoding Vae::encode(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != config_.input_dim) {
    throw ConfigError("instance has " + std::to_string(x.size()) + " features, model expects " +
                      std::to_string(config_.input_dim));
  }
  const Matrix h = encoder_.forward(x);
  if (!h.allFinite()) throw NumericError("non-finite encoder output");
  const auto k = static_cast<Eigen::Index>(latent_);
  return Encoding{h.col(0).head(k), h.col(0).tail(k)};
}

Eigen::RowVectorXd Vae::recon_columns(const Matrix& targets, const Matrix& latent) const {
  if (config_.loss == nn::LossKind::BinaryCrossEntropy &&
      decoder_.layers().back().spec.activation == nn::Activation::Sigmoid) {
    nn::ForwardCache cache;
    decoder_.forward(latent, &cache);
    return nn::bce_from_logits_columns(targets, cache.preactivations.back());
  }
  return nn::recon_loss_columns(targets, decoder_.forward(latent), config_.loss);
}

LossBreakdown Vae::loss(const Vector& x) const {
  const Encoding enc = encode(x);
  LossBreakdown out;
  out.recon = recon_columns(x, enc.mu)(0);
  out.kl = kl_loss(enc.mu, enc.log_var);
  out.total = out.recon + config_.beta * out.kl;
  if (!std::isfinite(out.total)) throw NumericError("non-finite VAE loss");
  return out;
}

LossBreakdown Vae::loss_with_noise(const Vector& x, const Vector& eps) const {
  const Encoding enc = encode(x);
  if (static_cast<std::size_t>(eps.size()) != latent_) throw ConfigError("noise size must equal latent_dim");
  const Vector z = enc.mu + ((0.5 * enc.log_var.array()).exp() * eps.array()).matrix();
  LossBreakdown out;
  out.recon = recon_columns(x, z)(0);
  out.kl = kl_loss(enc.mu, enc.log_var);
  out.total = out.recon + config_.beta * out.kl;
  return out;
}

Eigen::RowVectorXd Vae::score_batch(const Matrix& xs) const {
  if (static_cast<std::size_t>(xs.rows()) != config_.input_dim) {
    throw ConfigError("batch rows do not match model input_dim");
  }
  if (xs.cols() == 0) return Eigen::RowVectorXd();
  const auto k = static_cast<Eigen::Index>(latent_);
  const Matrix h = encoder_.forward(xs);
  const Matrix mu = h.topRows(k);
  const Matrix log_var = h.bottomRows(k);
  Eigen::RowVectorXd out = recon_columns(xs, mu) + config_.beta * kl_columns(mu, log_var);
  if (!out.allFinite()) throw NumericError("non-finite VAE score");
  return out;
}

VaeGradients Vae::gradients(const Matrix& xs, const Matrix& eps, double* mean_loss) const {
  return gradients(xs, xs, eps, mean_loss);
}

VaeGradients Vae::gradients(const Matrix& inputs, const Matrix& targets, const Matrix& eps,
                            double* mean_loss) const {
  const auto k = static_cast<Eigen::Index>(latent_);
  const double batch = static_cast<double>(inputs.cols());
  const double beta = config_.beta;

  nn::ForwardCache enc_cache;
  const Matrix h = encoder_.forward(inputs, &enc_cache);
  const Matrix mu = h.topRows(k);
  const Matrix log_var = h.bottomRows(k);
  const Matrix std_dev = (0.5 * log_var.array()).exp().matrix();
  const Matrix z = mu + std_dev.cwiseProduct(eps);

  nn::ForwardCache dec_cache;
  const Matrix x_hat = decoder_.forward(z, &dec_cache);

  if (mean_loss) {
    *mean_loss =
        ((config_.loss == nn::LossKind::BinaryCrossEntropy &&
                  decoder_.layers().back().spec.activation == nn::Activation::Sigmoid
              ? nn::bce_from_logits_columns(targets, dec_cache.preactivations.back())
              : nn::recon_loss_columns(targets, x_hat, config_.loss)) +
         beta * kl_columns(mu, log_var))
            .sum() /
        batch;
  }

  const Matrix d_xhat = nn::recon_loss_grad(targets, x_hat, config_.loss) / batch;
  Matrix d_z;
  VaeGradients grads;
  grads.decoder = decoder_.backward(dec_cache, d_xhat, &d_z);

  // d/dmu and d/dlog_var of the reparameterised sample plus the KL term.
  Matrix d_h(2 * k, inputs.cols());
  d_h.topRows(k) = d_z + (beta / batch) * mu;
  d_h.bottomRows(k) = (d_z.array() * eps.array() * 0.5 * std_dev.array() +
                       (beta / batch) * 0.5 * (log_var.array().exp() - 1.0))
                          .matrix();
  grads.encoder = encoder_.backward(enc_cache, d_h);
  return grads;
}

double Vae::train_batch(const Matrix& xs, Rng& rng) {
  Matrix inputs = xs;
  if (config_.input_noise > 0.0) {
    inputs = (xs + config_.input_noise * standard_normal(xs.rows(), xs.cols(), rng))
                 .cwiseMax(0.0)
                 .cwiseMin(1.0);
  }
  const Matrix eps = standard_normal(static_cast<Eigen::Index>(latent_), xs.cols(), rng);
  double mean_loss = 0.0;
  const VaeGradients grads = gradients(inputs, xs, eps, &mean_loss);
  // Validate both before touching either network so a failure leaves the model intact.
  for (const auto* g : {&grads.encoder, &grads.decoder}) {
    for (const auto& layer : *g) {
      if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
        throw NumericError("non-finite gradient during VAE training");
      }
    }
  }
  nn::adam_step(encoder_, grads.encoder, encoder_opt_);
  nn::adam_step(decoder_, grads.decoder, decoder_opt_);
  return mean_loss;
}

TrainReport Vae::train_epochs(std::span<const Vector> data, Rng& rng) {
  return train_epochs(data, config_.epochs, rng);
}

TrainReport Vae::train_epochs(std::span<const Vector> data, std::size_t epochs, Rng& rng) {
  TrainReport report;
  if (data.empty()) {
    report.skipped = true;
    return report;
  }
  const auto d = static_cast<Eigen::Index>(config_.input_dim);
  for (const auto& x : data) {
    if (x.size() != d) throw ConfigError("training instance has wrong dimension");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = config_.batch_size;

  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      Matrix xs(d, static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) xs.col(static_cast<Eigen::Index>(j)) = data[order[start + j]];
      loss_sum += train_batch(xs, rng) * static_cast<double>(count);
      ++report.batches;
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return report;
}

}  // namespace vaestream::vae
