#include "vaestream/nn.hpp"

#include "vaestream/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vaestream::nn {

namespace {

void apply_activation(Activation act, double slope, Matrix& m) {
  switch (act) {
    case Activation::Linear:
      return;
    case Activation::LeakyRelu:
      m = m.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
      return;
    case Activation::Sigmoid:
      m = m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      return;
  }
}

// Multiplies `grad` in place by the activation derivative.
void scale_by_derivative(Activation act, double slope, const Matrix& pre, const Matrix& post,
                         Matrix& grad) {
  switch (act) {
    case Activation::Linear:
      return;
    case Activation::LeakyRelu:
      grad = grad.cwiseProduct(
          pre.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
      return;
    case Activation::Sigmoid:
      grad = grad.cwiseProduct(post.cwiseProduct((1.0 - post.array()).matrix()));
      return;
  }
}

double clamp_prob(double p) { return std::clamp(p, kBceClamp, 1.0 - kBceClamp); }

void check_bce_target(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("binary cross-entropy target outside [0,1]: " + std::to_string(x));
  }
}

}  // namespace

double activate(Activation act, double v, double leaky_slope) {
  Matrix m(1, 1);
  m(0, 0) = v;
  apply_activation(act, leaky_slope, m);
  return m(0, 0);
}

Layer he_normal_init(const LayerSpec& spec, Rng& rng) {
  if (spec.input_width == 0 || spec.output_width == 0) {
    throw ConfigError("layer widths must be >= 1");
  }
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(spec.input_width)));
  Layer layer{spec, Matrix(spec.output_width, spec.input_width), Vector::Zero(spec.output_width)};
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = normal(rng);
  }
  return layer;
}

Mlp::Mlp(std::vector<LayerSpec> specs, double leaky_slope) : leaky_slope_(leaky_slope) {
  if (specs.empty()) throw ConfigError("MLP needs at least one layer");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.input_width == 0 || s.output_width == 0) throw ConfigError("layer widths must be >= 1");
    if (i > 0 && specs[i - 1].output_width != s.input_width) {
      throw ConfigError("layer " + std::to_string(i) + " input width " +
                        std::to_string(s.input_width) + " does not match previous output width " +
                        std::to_string(specs[i - 1].output_width));
    }
    layers_.push_back(Layer{s, Matrix::Zero(s.output_width, s.input_width), Vector::Zero(s.output_width)});
  }
}

Mlp Mlp::he_normal(std::vector<LayerSpec> specs, Rng& rng, double leaky_slope) {
  Mlp mlp(std::move(specs), leaky_slope);
  for (auto& layer : mlp.layers_) layer = he_normal_init(layer.spec, rng);
  return mlp;
}

std::size_t Mlp::input_width() const { return layers_.empty() ? 0 : layers_.front().spec.input_width; }

std::size_t Mlp::output_width() const { return layers_.empty() ? 0 : layers_.back().spec.output_width; }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Matrix Mlp::forward(const Matrix& input, ForwardCache* cache) const {
  if (static_cast<std::size_t>(input.rows()) != input_width()) {
    throw ConfigError("input has " + std::to_string(input.rows()) + " rows, expected " +
                      std::to_string(input_width()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
    cache->preactivations.clear();
  }
  Matrix current = input;
  for (const auto& layer : layers_) {
    Matrix pre = layer.weights * current;
    pre.colwise() += layer.bias;
    Matrix post = pre;
    apply_activation(layer.spec.activation, leaky_slope_, post);
    if (cache) {
      cache->inputs.push_back(std::move(current));
      cache->preactivations.push_back(std::move(pre));
      cache->activations.push_back(post);
    }
    current = std::move(post);
  }
  return current;
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& upstream, Matrix* input_grad) const {
  if (cache.inputs.size() != layers_.size()) {
    throw ContractError("forward cache does not match this network");
  }
  if (upstream.rows() != cache.activations.back().rows() ||
      upstream.cols() != cache.activations.back().cols()) {
    throw ContractError("upstream gradient shape does not match cached output");
  }
  Gradients grads(layers_.size());
  Matrix delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    scale_by_derivative(layer.spec.activation, leaky_slope_, cache.preactivations[k],
                        cache.activations[k], delta);
    grads[k].weights = delta * cache.inputs[k].transpose();
    grads[k].bias = delta.rowwise().sum();
    if (k > 0 || input_grad) delta = layer.weights.transpose() * delta;
  }
  if (input_grad) *input_grad = std::move(delta);
  return grads;
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  g.reserve(layers_.size());
  for (const auto& l : layers_) {
    g.push_back(LayerGrad{Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

double& Mlp::parameter(std::size_t index) {
  for (auto& l : layers_) {
    const auto nw = static_cast<std::size_t>(l.weights.size());
    if (index < nw) return l.weights.data()[index];
    index -= nw;
    const auto nb = static_cast<std::size_t>(l.bias.size());
    if (index < nb) return l.bias.data()[index];
    index -= nb;
  }
  throw ContractError("parameter index out of range");
}

double Mlp::parameter(std::size_t index) const { return const_cast<Mlp*>(this)->parameter(index); }

bool Mlp::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

double flat_gradient(const Gradients& grads, std::size_t index) {
  for (const auto& g : grads) {
    const auto nw = static_cast<std::size_t>(g.weights.size());
    if (index < nw) return g.weights.data()[index];
    index -= nw;
    const auto nb = static_cast<std::size_t>(g.bias.size());
    if (index < nb) return g.bias.data()[index];
    index -= nb;
  }
  throw ContractError("gradient index out of range");
}

AdamState::AdamState(const Mlp& model, AdamConfig cfg)
    : config(cfg), first_moment(model.zero_gradients()), second_moment(model.zero_gradients()) {}

void adam_step(Mlp& model, const Gradients& grads, AdamState& state) {
  auto& layers = model.layers();
  if (grads.size() != layers.size() || state.first_moment.size() != layers.size()) {
    throw ContractError("gradient/optimizer state shape does not match model");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].weights.rows() != layers[k].weights.rows() ||
        grads[k].weights.cols() != layers[k].weights.cols() ||
        grads[k].bias.size() != layers[k].bias.size()) {
      throw ContractError("gradient shape does not match layer " + std::to_string(k));
    }
    if (!grads[k].weights.allFinite() || !grads[k].bias.allFinite()) {
      throw NumericError("non-finite gradient in layer " + std::to_string(k));
    }
  }

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() -= c.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + c.epsilon);
  };
  for (std::size_t k = 0; k < grads.size(); ++k) {
    update(layers[k].weights, grads[k].weights, state.first_moment[k].weights,
           state.second_moment[k].weights);
    update(layers[k].bias, grads[k].bias, state.first_moment[k].bias, state.second_moment[k].bias);
  }
}

double recon_loss(const Vector& x, const Vector& x_hat, LossKind kind) {
  if (x.size() != x_hat.size()) throw ConfigError("reconstruction size mismatch");
  return recon_loss_columns(x, x_hat, kind)(0);
}

Eigen::RowVectorXd recon_loss_columns(const Matrix& x, const Matrix& x_hat, LossKind kind) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) {
    throw ConfigError("reconstruction shape mismatch");
  }
  Eigen::RowVectorXd out(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double target = x(i, j);
      if (kind == LossKind::SquaredError) {
        const double diff = target - x_hat(i, j);
        sum += diff * diff;
      } else {
        check_bce_target(target);
        const double p = clamp_prob(x_hat(i, j));
        sum -= target * std::log(p) + (1.0 - target) * std::log(1.0 - p);
      }
    }
    out(j) = sum;
  }
  return out;
}

Eigen::RowVectorXd bce_from_logits_columns(const Matrix& x, const Matrix& logits) {
  if (x.rows() != logits.rows() || x.cols() != logits.cols()) {
    throw ConfigError("reconstruction shape mismatch");
  }
  // Clamping p into [c, 1 - c] is clamping the logit into [-L, L].
  const double bound = std::log((1.0 - kBceClamp) / kBceClamp);
  Eigen::RowVectorXd out(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double target = x(i, j);
      check_bce_target(target);
      const double a = std::clamp(logits(i, j), -bound, bound);
      // -x log(sigmoid(a)) - (1 - x) log(1 - sigmoid(a)) = softplus(a) - x a
      sum += std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))) - target * a;
    }
    out(j) = sum;
  }
  return out;
}

Matrix recon_loss_grad(const Matrix& x, const Matrix& x_hat, LossKind kind) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) {
    throw ConfigError("reconstruction shape mismatch");
  }
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double target = x(i, j);
      const double p = x_hat(i, j);
      if (kind == LossKind::SquaredError) {
        g(i, j) = 2.0 * (p - target);
      } else {
        check_bce_target(target);
        if (p <= kBceClamp || p >= 1.0 - kBceClamp) {
          g(i, j) = 0.0;
        } else {
          g(i, j) = -target / p + (1.0 - target) / (1.0 - p);
        }
      }
    }
  }
  return g;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double grad_check(const Mlp& model, const Vector& input, const Vector& target, LossKind kind,
                  double step, const BackwardFn& backward) {
  ForwardCache cache;
  const Matrix out = model.forward(input, &cache);
  const Matrix upstream = recon_loss_grad(target, out, kind);
  const Gradients analytic =
      backward ? backward(model, cache, upstream) : model.backward(cache, upstream);

  Mlp probe = model;
  auto loss_at = [&]() { return recon_loss_columns(target, probe.forward(input), kind)(0); };

  double worst = 0.0;
  for (std::size_t p = 0; p < model.parameter_count(); ++p) {
    const double original = probe.parameter(p);
    probe.parameter(p) = original + step;
    const double up = loss_at();
    probe.parameter(p) = original - step;
    const double down = loss_at();
    probe.parameter(p) = original;
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, relative_error(flat_gradient(analytic, p), numeric));
  }
  return worst;
}

}  // namespace vaestream::nn
