#include "avq/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include <json.hpp>

#include "avq/error.hpp"
#include "avq/log.hpp"
#include "avq/media_io.hpp"
#include "avq/rng.hpp"

namespace avq {

namespace {

constexpr std::string_view kModule = "neural";
constexpr double kRhoClampLo = 1e-6;
constexpr double kRhoClampHi = 1.0 - 1e-6;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void add_bias_rows(Matrix& z, const std::vector<double>& biases) {
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const double b = biases[r];
    for (double& v : z.row(r)) v += b;
  }
}

void apply_activation(Matrix& z, Activation activation) {
  switch (activation) {
    case Activation::Linear:
      break;
    case Activation::Sigmoid:
      for (std::size_t r = 0; r < z.rows(); ++r)
        for (double& v : z.row(r)) v = sigmoid(v);
      break;
    case Activation::Softmax:
      for (std::size_t j = 0; j < z.cols(); ++j) {
        double hi = z(0, j);
        for (std::size_t r = 1; r < z.rows(); ++r) hi = std::max(hi, z(r, j));
        double total = 0.0;
        for (std::size_t r = 0; r < z.rows(); ++r) {
          const double e = std::exp(z(r, j) - hi);
          z(r, j) = e;
          total += e;
        }
        for (std::size_t r = 0; r < z.rows(); ++r) z(r, j) /= total;
      }
      break;
  }
}

DenseLayer init_layer(std::size_t input, std::size_t output,
                      Activation activation, Rng& rng) {
  DenseLayer layer;
  layer.weights = Matrix(output, input);
  layer.biases.assign(output, 0.0);
  layer.activation = activation;
  const double bound =
      std::sqrt(6.0 / static_cast<double>(input + output));
  for (std::size_t r = 0; r < output; ++r)
    for (double& w : layer.weights.row(r)) w = rng.uniform(-bound, bound);
  return layer;
}

DenseLayer zero_like(const DenseLayer& layer) {
  DenseLayer g;
  g.weights = Matrix(layer.weights.rows(), layer.weights.cols());
  g.biases.assign(layer.biases.size(), 0.0);
  g.activation = layer.activation;
  return g;
}

Matrix gather_columns(const Matrix& src, std::span<const std::size_t> idx) {
  Matrix out(src.rows(), idx.size());
  for (std::size_t r = 0; r < src.rows(); ++r) {
    const auto row = src.row(r);
    auto dst = out.row(r);
    for (std::size_t k = 0; k < idx.size(); ++k) dst[k] = row[idx[k]];
  }
  return out;
}

// Adaptive-moment update for one parameter tensor; every tensor of a network
// gets its own instance and all are stepped once per batch so the bias
// correction stays in sync.
class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(double* params, const double* grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
      const double g = grads[i];
      m_[i] = 0.9 * m_[i] + 0.1 * g;
      v_[i] = 0.999 * v_[i] + 0.001 * g * g;
      params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + 1e-8);
    }
  }

 private:
  double lr_;
  long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

void guard_finite(double loss, std::size_t epoch, std::size_t batch_start) {
  if (!std::isfinite(loss))
    throw Error(ErrorCode::NonFiniteLoss, kModule,
                "loss diverged at epoch " + std::to_string(epoch) +
                    ", batch offset " + std::to_string(batch_start));
}

double fd_relative_error(double analytic, double numeric) {
  const double denom =
      std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Linear: return "linear";
    case Activation::Softmax: return "softmax";
  }
  return "unknown";
}

Activation activation_from_name(std::string_view name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "linear") return Activation::Linear;
  if (name == "softmax") return Activation::Softmax;
  throw Error(ErrorCode::MalformedHeader, kModule,
              "unknown activation '" + std::string(name) + "'");
}

double kl_sparsity(std::span<const double> rho_hat, double rho) {
  double total = 0.0;
  for (double raw : rho_hat) {
    const double r = std::clamp(raw, kRhoClampLo, kRhoClampHi);
    total += rho * std::log(rho / r) +
             (1.0 - rho) * std::log((1.0 - rho) / (1.0 - r));
  }
  return total;
}

Matrix layer_forward(const DenseLayer& layer, const Matrix& input) {
  if (input.rows() != layer.input_size())
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "layer expects " + std::to_string(layer.input_size()) +
                    " inputs, got " + std::to_string(input.rows()));
  Matrix z(layer.output_size(), input.cols());
  gemm(layer.weights, false, input, false, z);
  add_bias_rows(z, layer.biases);
  apply_activation(z, layer.activation);
  return z;
}

double autoencoder_loss(const AutoencoderParams& params, const Matrix& batch,
                        const AutoencoderConfig& cfg, AutoencoderParams* grad) {
  const DenseLayer& enc = params.encoder;
  const DenseLayer& dec = params.decoder;
  const std::size_t f = batch.rows();
  const std::size_t m = batch.cols();
  const std::size_t h = enc.output_size();
  if (m == 0) throw Error(ErrorCode::EmptyInput, kModule, "empty batch");
  if (enc.input_size() != f || dec.input_size() != h || dec.output_size() != f)
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "autoencoder shapes do not match a " + std::to_string(f) +
                    "-row batch");

  Matrix hidden(h, m);
  gemm(enc.weights, false, batch, false, hidden);
  add_bias_rows(hidden, enc.biases);
  apply_activation(hidden, Activation::Sigmoid);

  Matrix recon(f, m);
  gemm(dec.weights, false, hidden, false, recon);
  add_bias_rows(recon, dec.biases);

  double mse = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double d = recon.data()[i] - batch.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(m);

  double weight_sq = 0.0;
  for (std::size_t i = 0; i < enc.weights.size(); ++i)
    weight_sq += enc.weights.data()[i] * enc.weights.data()[i];
  for (std::size_t i = 0; i < dec.weights.size(); ++i)
    weight_sq += dec.weights.data()[i] * dec.weights.data()[i];

  std::vector<double> rho_hat(h, 0.0);
  for (std::size_t u = 0; u < h; ++u) {
    double acc = 0.0;
    for (double v : hidden.row(u)) acc += v;
    rho_hat[u] = acc / static_cast<double>(m);
  }

  const double loss = mse + cfg.l2_weight * weight_sq +
                      cfg.sparsity_weight *
                          kl_sparsity(rho_hat, cfg.sparsity_target);
  if (grad == nullptr) return loss;

  // d(loss)/d(reconstruction)
  Matrix delta_out(f, m);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < recon.size(); ++i)
    delta_out.data()[i] = 2.0 * inv_m * (recon.data()[i] - batch.data()[i]);

  DenseLayer dec_grad = zero_like(dec);
  gemm(delta_out, false, hidden, true, dec_grad.weights);
  for (std::size_t i = 0; i < dec.weights.size(); ++i)
    dec_grad.weights.data()[i] += 2.0 * cfg.l2_weight * dec.weights.data()[i];
  for (std::size_t r = 0; r < f; ++r) {
    double acc = 0.0;
    for (double v : delta_out.row(r)) acc += v;
    dec_grad.biases[r] = acc;
  }

  Matrix delta_hidden(h, m);
  gemm(dec.weights, true, delta_out, false, delta_hidden);
  const double rho = cfg.sparsity_target;
  for (std::size_t u = 0; u < h; ++u) {
    // Clamped means the penalty is locally constant in rho_hat.
    double kl_term = 0.0;
    if (rho_hat[u] > kRhoClampLo && rho_hat[u] < kRhoClampHi)
      kl_term = cfg.sparsity_weight *
                (-(rho / rho_hat[u]) + (1.0 - rho) / (1.0 - rho_hat[u])) *
                inv_m;
    auto dh = delta_hidden.row(u);
    const auto a = hidden.row(u);
    for (std::size_t j = 0; j < m; ++j)
      dh[j] = (dh[j] + kl_term) * a[j] * (1.0 - a[j]);
  }

  DenseLayer enc_grad = zero_like(enc);
  gemm(delta_hidden, false, batch, true, enc_grad.weights);
  for (std::size_t i = 0; i < enc.weights.size(); ++i)
    enc_grad.weights.data()[i] += 2.0 * cfg.l2_weight * enc.weights.data()[i];
  for (std::size_t u = 0; u < h; ++u) {
    double acc = 0.0;
    for (double v : delta_hidden.row(u)) acc += v;
    enc_grad.biases[u] = acc;
  }

  grad->encoder = std::move(enc_grad);
  grad->decoder = std::move(dec_grad);
  return loss;
}

double stack_cross_entropy(const std::vector<DenseLayer>& layers,
                           const Matrix& inputs, const Matrix& targets,
                           std::vector<DenseLayer>* grad) {
  if (layers.empty())
    throw Error(ErrorCode::EmptyInput, kModule, "empty layer stack");
  if (layers.back().activation != Activation::Softmax)
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "cross-entropy requires a softmax output layer");
  std::size_t expect = inputs.rows();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].input_size() != expect)
      throw Error(ErrorCode::DimensionMismatch, kModule,
                  "layer " + std::to_string(l) + " expects " +
                      std::to_string(layers[l].input_size()) +
                      " inputs, previous stage provides " +
                      std::to_string(expect));
    expect = layers[l].output_size();
  }
  if (targets.rows() != expect || targets.cols() != inputs.cols())
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "targets are " + std::to_string(targets.rows()) + "x" +
                    std::to_string(targets.cols()) + ", stack produces " +
                    std::to_string(expect) + "x" +
                    std::to_string(inputs.cols()));

  const std::size_t m = inputs.cols();
  if (m == 0) throw Error(ErrorCode::EmptyInput, kModule, "empty batch");

  std::vector<Matrix> post(layers.size());
  const Matrix* prev = &inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    post[l] = layer_forward(layers[l], *prev);
    prev = &post[l];
  }

  const Matrix& probs = post.back();
  const double inv_m = 1.0 / static_cast<double>(m);
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double t = targets.data()[i];
    if (t != 0.0) loss -= t * std::log(std::max(probs.data()[i], 1e-300));
  }
  loss *= inv_m;
  if (grad == nullptr) return loss;

  grad->clear();
  grad->resize(layers.size());
  Matrix delta(probs.rows(), m);
  for (std::size_t i = 0; i < probs.size(); ++i)
    delta.data()[i] = inv_m * (probs.data()[i] - targets.data()[i]);

  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& below = (l == 0) ? inputs : post[l - 1];
    DenseLayer g = zero_like(layers[l]);
    gemm(delta, false, below, true, g.weights);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      double acc = 0.0;
      for (double v : delta.row(r)) acc += v;
      g.biases[r] = acc;
    }
    (*grad)[l] = std::move(g);
    if (l == 0) break;

    Matrix next(layers[l].input_size(), m);
    gemm(layers[l].weights, true, delta, false, next);
    if (layers[l - 1].activation == Activation::Sigmoid) {
      for (std::size_t i = 0; i < next.size(); ++i) {
        const double a = post[l - 1].data()[i];
        next.data()[i] *= a * (1.0 - a);
      }
    }
    delta = std::move(next);
  }
  return loss;
}

AutoencoderResult train_autoencoder(const Matrix& inputs,
                                    const AutoencoderConfig& cfg) {
  const std::size_t columns = inputs.cols();
  if (columns < cfg.batch_size)
    throw Error(ErrorCode::EmptyInput, kModule,
                std::to_string(columns) + " training columns, need at least " +
                    std::to_string(cfg.batch_size));

  Rng rng(cfg.seed);
  AutoencoderParams p;
  p.encoder = init_layer(inputs.rows(), cfg.hidden_size, Activation::Sigmoid, rng);
  p.decoder = init_layer(cfg.hidden_size, inputs.rows(), Activation::Linear, rng);

  Adam enc_w(p.encoder.weights.size(), cfg.learning_rate);
  Adam enc_b(p.encoder.biases.size(), cfg.learning_rate);
  Adam dec_w(p.decoder.weights.size(), cfg.learning_rate);
  Adam dec_b(p.decoder.biases.size(), cfg.learning_rate);

  std::vector<std::size_t> order(columns);
  std::iota(order.begin(), order.end(), std::size_t{0});

  AutoencoderResult result;
  result.loss_history.reserve(cfg.epochs);
  AutoencoderParams g;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < columns; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, columns - start);
      const Matrix batch = gather_columns(
          inputs, std::span<const std::size_t>(order).subspan(start, count));
      const double loss = autoencoder_loss(p, batch, cfg, &g);
      guard_finite(loss, epoch, start);
      enc_w.step(p.encoder.weights.data(), g.encoder.weights.data());
      enc_b.step(p.encoder.biases.data(), g.encoder.biases.data());
      dec_w.step(p.decoder.weights.data(), g.decoder.weights.data());
      dec_b.step(p.decoder.biases.data(), g.decoder.biases.data());
      epoch_loss += loss * static_cast<double>(count);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(columns));
  }

  result.encoded = layer_forward(p.encoder, inputs);
  result.encoder = std::move(p.encoder);
  result.decoder = std::move(p.decoder);
  return result;
}

namespace {

// Shared mini-batch cross-entropy loop for the head pretraining and for the
// full-stack fine-tuning; `layers` is updated in place.
std::vector<double> run_supervised(std::vector<DenseLayer>& layers,
                                   const Matrix& inputs, const Matrix& targets,
                                   const SupervisedConfig& cfg) {
  const std::size_t columns = inputs.cols();
  if (columns < cfg.batch_size)
    throw Error(ErrorCode::EmptyInput, kModule,
                std::to_string(columns) + " training columns, need at least " +
                    std::to_string(cfg.batch_size));
  if (targets.cols() != columns)
    throw Error(ErrorCode::DimensionMismatch, kModule,
                std::to_string(targets.cols()) + " target columns vs " +
                    std::to_string(columns) + " feature columns");

  std::vector<Adam> weight_opts;
  std::vector<Adam> bias_opts;
  weight_opts.reserve(layers.size());
  bias_opts.reserve(layers.size());
  for (const DenseLayer& layer : layers) {
    weight_opts.emplace_back(layer.weights.size(), cfg.learning_rate);
    bias_opts.emplace_back(layer.biases.size(), cfg.learning_rate);
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(columns);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> history;
  history.reserve(cfg.epochs);
  std::vector<DenseLayer> g;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < columns; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, columns - start);
      const auto idx =
          std::span<const std::size_t>(order).subspan(start, count);
      const Matrix x = gather_columns(inputs, idx);
      const Matrix t = gather_columns(targets, idx);
      const double loss = stack_cross_entropy(layers, x, t, &g);
      guard_finite(loss, epoch, start);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        weight_opts[l].step(layers[l].weights.data(), g[l].weights.data());
        bias_opts[l].step(layers[l].biases.data(), g[l].biases.data());
      }
      epoch_loss += loss * static_cast<double>(count);
    }
    history.push_back(epoch_loss / static_cast<double>(columns));
  }
  return history;
}

}  // namespace

SoftmaxResult train_softmax(const Matrix& inputs, const Matrix& targets,
                            const SupervisedConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<DenseLayer> stack;
  stack.push_back(
      init_layer(inputs.rows(), targets.rows(), Activation::Softmax, rng));

  SupervisedConfig loop_cfg = cfg;
  loop_cfg.seed = rng.next_u64();
  SoftmaxResult result;
  result.loss_history = run_supervised(stack, inputs, targets, loop_cfg);
  result.head = std::move(stack.front());
  return result;
}

FinetuneResult stack_and_finetune(const Scaler& scaler, DenseLayer encoder1,
                                  DenseLayer encoder2, DenseLayer head,
                                  const Matrix& inputs, const Matrix& targets,
                                  const SupervisedConfig& cfg) {
  if (encoder2.input_size() != encoder1.output_size() ||
      head.input_size() != encoder2.output_size())
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "stack chain broken: " + std::to_string(encoder1.output_size()) +
                    " -> " + std::to_string(encoder2.input_size()) + ", " +
                    std::to_string(encoder2.output_size()) + " -> " +
                    std::to_string(head.input_size()));
  if (encoder1.input_size() != inputs.rows())
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "stack expects " + std::to_string(encoder1.input_size()) +
                    "-row input, got " + std::to_string(inputs.rows()));

  std::vector<DenseLayer> layers;
  layers.push_back(std::move(encoder1));
  layers.push_back(std::move(encoder2));
  layers.push_back(std::move(head));

  FinetuneResult result;
  result.loss_history = run_supervised(layers, inputs, targets, cfg);
  result.model.scaler = scaler;
  result.model.layers = std::move(layers);
  return result;
}

DeepModel train_model(const GlobalTrainingSet& global, const TrainConfig& cfg) {
  const Scaler scaler = fit_scaler(global.features);
  const Matrix scaled = apply_scaler(scaler, global.features);

  Rng seeder(cfg.seed);
  const std::uint64_t seed_ae1 = seeder.next_u64();
  const std::uint64_t seed_ae2 = seeder.next_u64();
  const std::uint64_t seed_head = seeder.next_u64();
  const std::uint64_t seed_tune = seeder.next_u64();

  AutoencoderConfig ae_cfg;
  ae_cfg.hidden_size = cfg.hidden1;
  ae_cfg.l2_weight = cfg.l2_weight;
  ae_cfg.sparsity_weight = cfg.sparsity_weight;
  ae_cfg.sparsity_target = cfg.sparsity_target;
  ae_cfg.epochs = cfg.pretrain_epochs;
  ae_cfg.learning_rate = cfg.learning_rate;
  ae_cfg.batch_size = cfg.batch_size;
  ae_cfg.seed = seed_ae1;

  log_message("training stage 1/4: autoencoder " +
              std::to_string(scaled.rows()) + "->" +
              std::to_string(cfg.hidden1) + " on " +
              std::to_string(scaled.cols()) + " columns");
  AutoencoderResult stage1 = train_autoencoder(scaled, ae_cfg);

  ae_cfg.hidden_size = cfg.hidden2;
  ae_cfg.seed = seed_ae2;
  log_message("training stage 2/4: autoencoder " +
              std::to_string(stage1.encoded.rows()) + "->" +
              std::to_string(cfg.hidden2));
  AutoencoderResult stage2 = train_autoencoder(stage1.encoded, ae_cfg);

  SupervisedConfig head_cfg;
  head_cfg.epochs = cfg.pretrain_epochs;
  head_cfg.learning_rate = cfg.learning_rate;
  head_cfg.batch_size = cfg.batch_size;
  head_cfg.seed = seed_head;
  log_message("training stage 3/4: softmax head");
  SoftmaxResult head = train_softmax(stage2.encoded, global.targets, head_cfg);

  SupervisedConfig tune_cfg;
  tune_cfg.epochs = cfg.finetune_epochs;
  tune_cfg.learning_rate = cfg.learning_rate;
  tune_cfg.batch_size = cfg.batch_size;
  tune_cfg.seed = seed_tune;
  log_message("training stage 4/4: fine-tuning the stack");
  FinetuneResult tuned =
      stack_and_finetune(scaler, std::move(stage1.encoder),
                         std::move(stage2.encoder), std::move(head.head),
                         scaled, global.targets, tune_cfg);
  tuned.model.config = cfg;
  return tuned.model;
}

Matrix forward(const DeepModel& model, const Matrix& raw_features) {
  if (raw_features.rows() != model.scaler.row_min.size())
    throw Error(ErrorCode::RowCountMismatch, kModule,
                std::to_string(raw_features.rows()) + " feature rows, model expects " +
                    std::to_string(model.scaler.row_min.size()));
  Matrix x = apply_scaler(model.scaler, raw_features);
  for (const DenseLayer& layer : model.layers) x = layer_forward(layer, x);
  return x;
}

double gradient_check_autoencoder(std::uint64_t seed) {
  Rng rng(seed);
  constexpr std::size_t kInput = 8;
  constexpr std::size_t kHidden = 7;
  constexpr std::size_t kBatch = 12;
  AutoencoderConfig cfg;
  cfg.hidden_size = kHidden;

  AutoencoderParams p;
  p.encoder = init_layer(kInput, kHidden, Activation::Sigmoid, rng);
  p.decoder = init_layer(kHidden, kInput, Activation::Linear, rng);
  for (double& b : p.encoder.biases) b = rng.uniform(-0.2, 0.2);
  for (double& b : p.decoder.biases) b = rng.uniform(-0.2, 0.2);

  Matrix batch(kInput, kBatch);
  for (std::size_t i = 0; i < batch.size(); ++i) batch.data()[i] = rng.uniform();

  AutoencoderParams g;
  autoencoder_loss(p, batch, cfg, &g);

  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double* param, const double* analytic, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const double orig = param[i];
      param[i] = orig + h;
      const double up = autoencoder_loss(p, batch, cfg);
      param[i] = orig - h;
      const double down = autoencoder_loss(p, batch, cfg);
      param[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, fd_relative_error(analytic[i], fd));
    }
  };
  probe(p.encoder.weights.data(), g.encoder.weights.data(),
        p.encoder.weights.size());
  probe(p.encoder.biases.data(), g.encoder.biases.data(),
        p.encoder.biases.size());
  probe(p.decoder.weights.data(), g.decoder.weights.data(),
        p.decoder.weights.size());
  probe(p.decoder.biases.data(), g.decoder.biases.data(),
        p.decoder.biases.size());
  return worst;
}

double gradient_check_cross_entropy(std::uint64_t seed) {
  Rng rng(seed);
  constexpr std::size_t kBatch = 11;
  std::vector<DenseLayer> layers;
  layers.push_back(init_layer(9, 7, Activation::Sigmoid, rng));
  layers.push_back(init_layer(7, 5, Activation::Sigmoid, rng));
  layers.push_back(init_layer(5, 4, Activation::Softmax, rng));
  for (DenseLayer& layer : layers)
    for (double& b : layer.biases) b = rng.uniform(-0.2, 0.2);

  Matrix x(9, kBatch);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  Matrix t(4, kBatch);
  for (std::size_t j = 0; j < kBatch; ++j)
    t(static_cast<std::size_t>(rng.below(4)), j) = 1.0;

  std::vector<DenseLayer> g;
  stack_cross_entropy(layers, x, t, &g);

  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double* param, const double* analytic, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const double orig = param[i];
      param[i] = orig + h;
      const double up = stack_cross_entropy(layers, x, t);
      param[i] = orig - h;
      const double down = stack_cross_entropy(layers, x, t);
      param[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, fd_relative_error(analytic[i], fd));
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    probe(layers[l].weights.data(), g[l].weights.data(),
          layers[l].weights.size());
    probe(layers[l].biases.data(), g[l].biases.data(),
          layers[l].biases.size());
  }
  return worst;
}

void save_model(const DeepModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["format"] = "avq-model";
  doc["version"] = DeepModel::kFormatVersion;

  nlohmann::ordered_json cfg;
  cfg["hidden1"] = model.config.hidden1;
  cfg["hidden2"] = model.config.hidden2;
  cfg["l2_weight"] = model.config.l2_weight;
  cfg["sparsity_weight"] = model.config.sparsity_weight;
  cfg["sparsity_target"] = model.config.sparsity_target;
  cfg["pretrain_epochs"] = model.config.pretrain_epochs;
  cfg["finetune_epochs"] = model.config.finetune_epochs;
  cfg["learning_rate"] = model.config.learning_rate;
  cfg["batch_size"] = model.config.batch_size;
  cfg["seed"] = model.config.seed;
  doc["config"] = std::move(cfg);

  doc["scaler"]["row_min"] = model.scaler.row_min;
  doc["scaler"]["row_max"] = model.scaler.row_max;

  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const DenseLayer& layer : model.layers) {
    nlohmann::ordered_json lj;
    lj["activation"] = activation_name(layer.activation);
    lj["rows"] = layer.weights.rows();
    lj["cols"] = layer.weights.cols();
    lj["weights"] = std::vector<double>(
        layer.weights.data(), layer.weights.data() + layer.weights.size());
    lj["biases"] = layer.biases;
    layers.push_back(std::move(lj));
  }
  doc["layers"] = std::move(layers);

  write_text_file(path, doc.dump() + "\n");
}

DeepModel load_model(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    const std::vector<std::uint8_t> raw = read_file(path);
    doc = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, kModule,
                "model file is not valid JSON: " + std::string(e.what()));
  }

  try {
    if (doc.value("format", "") != "avq-model")
      throw Error(ErrorCode::MalformedHeader, kModule,
                  "missing 'avq-model' format tag");
    const int version = doc.value("version", -1);
    if (version != DeepModel::kFormatVersion)
      throw Error(ErrorCode::UnsupportedVersion, kModule,
                  "model format version " + std::to_string(version) +
                      ", this build reads version " +
                      std::to_string(DeepModel::kFormatVersion));

    DeepModel model;
    const auto& cj = doc.at("config");
    model.config.hidden1 = cj.at("hidden1").get<std::size_t>();
    model.config.hidden2 = cj.at("hidden2").get<std::size_t>();
    model.config.l2_weight = cj.at("l2_weight").get<double>();
    model.config.sparsity_weight = cj.at("sparsity_weight").get<double>();
    model.config.sparsity_target = cj.at("sparsity_target").get<double>();
    model.config.pretrain_epochs = cj.at("pretrain_epochs").get<std::size_t>();
    model.config.finetune_epochs = cj.at("finetune_epochs").get<std::size_t>();
    model.config.learning_rate = cj.at("learning_rate").get<double>();
    model.config.batch_size = cj.at("batch_size").get<std::size_t>();
    model.config.seed = cj.at("seed").get<std::uint64_t>();

    model.scaler.row_min =
        doc.at("scaler").at("row_min").get<std::vector<double>>();
    model.scaler.row_max =
        doc.at("scaler").at("row_max").get<std::vector<double>>();
    if (model.scaler.row_min.size() != model.scaler.row_max.size())
      throw Error(ErrorCode::MalformedHeader, kModule,
                  "scaler min/max lengths differ");

    for (const auto& lj : doc.at("layers")) {
      DenseLayer layer;
      layer.activation =
          activation_from_name(lj.at("activation").get<std::string>());
      const auto rows = lj.at("rows").get<std::size_t>();
      const auto cols = lj.at("cols").get<std::size_t>();
      const auto weights = lj.at("weights").get<std::vector<double>>();
      if (weights.size() != rows * cols)
        throw Error(ErrorCode::MalformedHeader, kModule,
                    "layer weight count " + std::to_string(weights.size()) +
                        " does not match " + std::to_string(rows) + "x" +
                        std::to_string(cols));
      layer.weights = Matrix(rows, cols);
      std::copy(weights.begin(), weights.end(), layer.weights.data());
      layer.biases = lj.at("biases").get<std::vector<double>>();
      if (layer.biases.size() != rows)
        throw Error(ErrorCode::MalformedHeader, kModule,
                    "layer bias count does not match layer rows");
      model.layers.push_back(std::move(layer));
    }
    if (model.layers.empty())
      throw Error(ErrorCode::MalformedHeader, kModule, "model has no layers");
    if (model.layers.front().input_size() != model.scaler.row_min.size())
      throw Error(ErrorCode::MalformedHeader, kModule,
                  "scaler length does not match first layer input size");
    std::size_t expect = model.layers.front().input_size();
    for (const DenseLayer& layer : model.layers) {
      if (layer.input_size() != expect)
        throw Error(ErrorCode::MalformedHeader, kModule,
                    "layer dimension chain broken");
      expect = layer.output_size();
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, kModule,
                "model file structure: " + std::string(e.what()));
  }
}

}  // namespace avq
