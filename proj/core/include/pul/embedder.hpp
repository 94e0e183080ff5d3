#pragma once

#include <span>
#include <vector>

#include "pul/rng.hpp"
#include "pul/types.hpp"

namespace pul {

// Per-parameter tensors matching the EmbedModel layout.
struct ParamTensors {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
  Matrix wc;
  std::vector<double> bc;
};

struct GradientSet {
  ParamTensors g;
  double batch_loss = 0;  // mean cross-entropy over the batch
};

using Velocity = ParamTensors;

EmbedModel make_model(EmbedArch arch, int input_dim, int hidden_dim, int embed_dim,
                      int num_classes);

// Fan-in scaled symmetric uniform weights, zero biases.
void random_init(EmbedModel& model, Rng& rng);

// Fresh classifier head with `num_classes` outputs; embedder untouched.
void reinit_classifier(EmbedModel& model, int num_classes, Rng& rng);

Velocity zero_velocity(const EmbedModel& model);

// Rectified embedding of one raw vector: dim E, entries >= 0.
std::vector<double> forward(const EmbedModel& model, std::span<const float> x);

// forward() over every row; N x E.
Matrix embed_all(const EmbedModel& model, const FloatMatrix& xs);

// Softmax class probabilities; sums to 1.
std::vector<double> classify(const EmbedModel& model, std::span<const float> x);

// Mean cross-entropy and analytic gradients over a batch.
GradientSet loss_and_grad(const EmbedModel& model, const FloatMatrix& xs,
                          std::span<const int> labels);

// velocity <- momentum * velocity + grads; params <- params - lr * velocity.
void sgd_update(EmbedModel& model, const GradientSet& grads, double learning_rate,
                double momentum, Velocity& velocity);

struct FineTuneResult {
  EmbedModel model;
  std::vector<double> epoch_loss;  // mean per-sample loss per epoch
};

// Classification training of `init` on the rows with mask[i] == 1. The
// classifier head is freshly random-initialized; rows with mask[i] == 0 are
// never read.
FineTuneResult fine_tune(const EmbedModel& init, const FloatMatrix& xs,
                         std::span<const int> labels, std::span<const std::uint8_t> mask,
                         int num_classes, const SgdConfig& sgd, Rng& rng);

}  // namespace pul
