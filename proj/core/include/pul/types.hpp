#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pul/matrix.hpp"

namespace pul {

// A set of feature vectors. Labels and camera ids are optional: source and
// evaluation data carry identity labels, query/gallery data also carry
// camera ids, adaptation data carries neither.
struct Dataset {
  FloatMatrix samples;                         // N x D
  std::optional<std::vector<int>> labels;      // identity per sample
  std::optional<std::vector<int>> camera_ids;  // camera per sample

  int n() const { return static_cast<int>(samples.rows); }
  int dim() const { return static_cast<int>(samples.cols); }
};

enum class EmbedArch : std::uint8_t { linear = 0, one_hidden = 1 };

// Trainable embedder plus detachable softmax classifier head. The embedding
// output is rectified, so entries are >= 0 and cosine similarities between
// embeddings live in [0, 1].
struct EmbedModel {
  EmbedArch arch = EmbedArch::one_hidden;
  int input_dim = 0;
  int hidden_dim = 0;  // meaningful only for one_hidden
  int embed_dim = 0;
  int num_classes = 0;

  Matrix w1;               // first layer, rows = output dim
  std::vector<double> b1;
  Matrix w2;               // second layer, empty for linear
  std::vector<double> b2;
  Matrix wc;               // classifier head, C x E
  std::vector<double> bc;
};

// Output of one clustering pass. Cluster indices are 0-based in storage.
// center_features / center_indices are filled by the selection stage.
struct ClusterState {
  int k = 0;
  std::vector<int> assignments;    // per-sample cluster index in [0, k)
  Matrix centroids;                // k x E, means in un-normalized space
  Matrix center_features;          // k x E, unit rows
  std::vector<int> center_indices; // sample backing each center feature
};

struct SelectionMask {
  std::vector<std::uint8_t> v;  // 0/1 per sample
  int selected_count = 0;
  double lambda = 0.0;
};

struct SgdConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  int epochs_per_iter = 20;
  int batch_size = 16;
  int init_epochs = 40;  // supervised training of the original model
};

struct ConvergenceConfig {
  int patience = 3;
  double rel_tol = 0.005;  // on selected_count change, relative to N
};

struct EmbedConfig {
  int hidden_dim = 32;
  int embed_dim = 16;
  bool linear = false;
};

struct PulConfig {
  int k = 0;  // cluster count, required
  double lambda = 0.85;
  int max_pul_iters = 25;
  int kmeans_max_iters = 300;
  SgdConfig sgd;
  ConvergenceConfig convergence;
  EmbedConfig embed;
  std::uint64_t seed = 1;
  bool fine_tune_from_original = true;
  bool selection_enabled = true;  // false reproduces the no-selection ablation
};

struct EvalMetrics {
  double rank1 = 0, rank5 = 0, rank10 = 0, rank20 = 0, map = 0;
  int num_queries = 0;
  int num_skipped = 0;
};

struct IterationRecord {
  int iter = 0;  // 1-based
  int selected_count = 0;
  double selected_fraction = 0;
  double kmeans_objective = 0;
  double train_loss = 0;
  std::optional<EvalMetrics> metrics;
};

// Mutable state of one adaptation run. `original` never changes after
// initialization; `current` is the model being refined.
struct PulRunState {
  int iteration = 0;
  EmbedModel original;
  EmbedModel current;
  std::vector<IterationRecord> history;
  bool converged = false;
};

// Invariant checks, throwing InvalidInput with a description on violation.
void validate(const Dataset& dataset);
void validate(const EmbedModel& model);
void validate(const PulConfig& config);
void validate(const ClusterState& state, const Matrix& features);
void validate(const SelectionMask& mask, const ClusterState& state);

}  // namespace pul
