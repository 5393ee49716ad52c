#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "avq/fusion.hpp"
#include "avq/matrix.hpp"

namespace avq {

// Deep network layout: input 115 -> encoder1 (sigmoid) -> encoder2 (sigmoid)
// -> softmax head over the 4 quality groups.

enum class Activation { Sigmoid, Linear, Softmax };

std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view name);

struct DenseLayer {
  Matrix weights;               // out x in
  std::vector<double> biases;   // out
  Activation activation = Activation::Sigmoid;

  std::size_t input_size() const { return weights.cols(); }
  std::size_t output_size() const { return weights.rows(); }
};

// Hyperparameters for one autoencoder pretraining stage.
struct AutoencoderConfig {
  std::size_t hidden_size = 60;
  double l2_weight = 0.001;
  double sparsity_weight = 4.0;
  double sparsity_target = 0.05;
  std::size_t epochs = 400;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
};

// Hyperparameters for the supervised stages (softmax pretraining, fine-tuning).
struct SupervisedConfig {
  std::size_t epochs = 400;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
};

// Everything the training pipeline needs; the CLI maps flags onto this.
struct TrainConfig {
  std::size_t hidden1 = 60;
  std::size_t hidden2 = 25;
  double l2_weight = 0.001;
  double sparsity_weight = 4.0;
  double sparsity_target = 0.05;
  std::size_t pretrain_epochs = 400;
  std::size_t finetune_epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
};

struct DeepModel {
  static constexpr int kFormatVersion = 1;

  Scaler scaler;
  std::vector<DenseLayer> layers;  // encoder1, encoder2, head
  TrainConfig config;
};

// Sum over units of rho*ln(rho/rho_hat) + (1-rho)*ln((1-rho)/(1-rho_hat));
// rho_hat values are clamped to [1e-6, 1-1e-6] first.
double kl_sparsity(std::span<const double> rho_hat, double rho);

Matrix layer_forward(const DenseLayer& layer, const Matrix& input);

// Encoder (sigmoid) + decoder (linear) pair sharing one loss.
struct AutoencoderParams {
  DenseLayer encoder;
  DenseLayer decoder;
};

// Loss = mean-over-columns reconstruction MSE + l2_weight * sum(w^2) over both
// weight matrices (biases excluded) + sparsity_weight * kl_sparsity(rho_hat)
// with rho_hat the per-unit mean hidden activation of this batch.  When `grad`
// is non-null it receives d(loss)/d(params) with the same shapes.
double autoencoder_loss(const AutoencoderParams& params, const Matrix& batch,
                        const AutoencoderConfig& cfg,
                        AutoencoderParams* grad = nullptr);

// Mean categorical cross-entropy of the stacked network on (inputs, targets).
// The last layer must be softmax.  When `grad` is non-null it receives
// per-layer gradients with the same shapes.
double stack_cross_entropy(const std::vector<DenseLayer>& layers,
                           const Matrix& inputs, const Matrix& targets,
                           std::vector<DenseLayer>* grad = nullptr);

struct AutoencoderResult {
  DenseLayer encoder;
  DenseLayer decoder;
  Matrix encoded;                    // hidden x M on the full training input
  std::vector<double> loss_history;  // one mean loss per epoch
};

AutoencoderResult train_autoencoder(const Matrix& inputs,
                                    const AutoencoderConfig& cfg);

struct SoftmaxResult {
  DenseLayer head;
  std::vector<double> loss_history;
};

SoftmaxResult train_softmax(const Matrix& inputs, const Matrix& targets,
                            const SupervisedConfig& cfg);

struct FinetuneResult {
  DeepModel model;
  std::vector<double> loss_history;
};

// Stacks the two encoders and the head, fine-tunes all parameters with pure
// cross-entropy, and returns the finished model carrying `scaler`.
FinetuneResult stack_and_finetune(const Scaler& scaler, DenseLayer encoder1,
                                  DenseLayer encoder2, DenseLayer head,
                                  const Matrix& inputs, const Matrix& targets,
                                  const SupervisedConfig& cfg);

// Full pipeline: fit scaler, pretrain both autoencoders, pretrain the head,
// fine-tune the stack.  Deterministic for a fixed config and input.
DeepModel train_model(const GlobalTrainingSet& global, const TrainConfig& cfg);

// Scale (with clamping to [0,1]) then run the stack; output columns are
// softmax probabilities over the 4 quality groups.
Matrix forward(const DeepModel& model, const Matrix& raw_features);

// Max relative error between analytic gradients and central finite
// differences (step 1e-5) on a seeded small network.
double gradient_check_autoencoder(std::uint64_t seed);
double gradient_check_cross_entropy(std::uint64_t seed);

void save_model(const DeepModel& model, const std::filesystem::path& path);
DeepModel load_model(const std::filesystem::path& path);

}  // namespace avq
