#include "pul/types.hpp"

#include <cmath>
#include <string>

#include "pul/errors.hpp"

namespace pul {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

}  // namespace

void validate(const Dataset& dataset) {
  require(dataset.samples.rows >= 1, "dataset must contain at least one sample");
  require(dataset.samples.cols >= 1, "feature dimension must be >= 1");
  require(dataset.samples.data.size() == dataset.samples.rows * dataset.samples.cols,
          "feature storage does not match n x dim");
  if (dataset.labels)
    require(dataset.labels->size() == dataset.samples.rows, "labels length must equal n");
  if (dataset.camera_ids)
    require(dataset.camera_ids->size() == dataset.samples.rows, "camera_ids length must equal n");
}

void validate(const EmbedModel& model) {
  require(model.input_dim >= 1 && model.embed_dim >= 1 && model.num_classes >= 1,
          "model dimensions must be >= 1");
  const auto d = static_cast<std::size_t>(model.input_dim);
  const auto e = static_cast<std::size_t>(model.embed_dim);
  const auto c = static_cast<std::size_t>(model.num_classes);
  if (model.arch == EmbedArch::linear) {
    require(model.w1.rows == e && model.w1.cols == d && model.b1.size() == e,
            "linear layer shape mismatch");
    require(model.w2.data.empty() && model.b2.empty(), "linear model must have no second layer");
  } else {
    const auto h = static_cast<std::size_t>(model.hidden_dim);
    require(model.hidden_dim >= 1, "hidden_dim must be >= 1");
    require(model.w1.rows == h && model.w1.cols == d && model.b1.size() == h,
            "hidden layer shape mismatch");
    require(model.w2.rows == e && model.w2.cols == h && model.b2.size() == e,
            "output layer shape mismatch");
  }
  require(model.wc.rows == c && model.wc.cols == e && model.bc.size() == c,
          "classifier shape mismatch");
}

void validate(const PulConfig& config) {
  require(config.k >= 1, "k must be >= 1");
  require(config.lambda >= 0.0 && config.lambda <= 1.0, "lambda must be in [0, 1]");
  require(config.max_pul_iters >= 1, "max_pul_iters must be >= 1");
  require(config.kmeans_max_iters >= 1, "kmeans_max_iters must be >= 1");
  require(config.sgd.learning_rate > 0.0, "learning_rate must be > 0");
  require(config.sgd.momentum >= 0.0 && config.sgd.momentum < 1.0, "momentum must be in [0, 1)");
  require(config.sgd.epochs_per_iter >= 1, "epochs_per_iter must be >= 1");
  require(config.sgd.batch_size >= 1, "batch_size must be >= 1");
  require(config.sgd.init_epochs >= 0, "init_epochs must be >= 0");
  require(config.convergence.patience >= 1, "patience must be >= 1");
  require(config.convergence.rel_tol >= 0.0, "rel_tol must be >= 0");
  require(config.embed.embed_dim >= 1, "embed_dim must be >= 1");
  require(config.embed.linear || config.embed.hidden_dim >= 1, "hidden_dim must be >= 1");
}

void validate(const ClusterState& state, const Matrix& features) {
  const std::size_t n = features.rows;
  const std::size_t e = features.cols;
  require(state.k >= 1, "cluster count must be >= 1");
  require(state.assignments.size() == n, "assignments length must equal n");
  require(state.centroids.rows == static_cast<std::size_t>(state.k) && state.centroids.cols == e,
          "centroid shape mismatch");
  for (int a : state.assignments)
    require(a >= 0 && a < state.k, "assignment outside [0, k)");

  // Non-empty clusters: centroid is the member mean within 1e-9.
  std::vector<std::vector<std::size_t>> members(state.k);
  for (std::size_t i = 0; i < n; ++i) members[state.assignments[i]].push_back(i);
  for (int k = 0; k < state.k; ++k) {
    if (members[k].empty()) continue;
    for (std::size_t j = 0; j < e; ++j) {
      double mean = 0.0;
      for (std::size_t i : members[k]) mean += features.at(i, j);
      mean /= static_cast<double>(members[k].size());
      require(std::fabs(mean - state.centroids.at(k, j)) <= 1e-9,
              "centroid is not the mean of its members");
    }
  }

  if (!state.center_indices.empty()) {
    require(state.center_indices.size() == static_cast<std::size_t>(state.k) &&
                state.center_features.rows == static_cast<std::size_t>(state.k) &&
                state.center_features.cols == e,
            "center feature shape mismatch");
    for (int k = 0; k < state.k; ++k) {
      const int idx = state.center_indices[k];
      require(idx >= 0 && idx < static_cast<int>(n), "center index out of range");
      require(state.assignments[idx] == k, "center sample not assigned to its cluster");
      require(std::fabs(norm(state.center_features.row(k)) - 1.0) <= 1e-9,
              "center feature is not unit norm");
      // f_k must be the normalized feature of the backing sample.
      const auto raw = features.row(idx);
      const double raw_norm = norm(raw);
      require(raw_norm > 0.0, "center sample has zero-norm feature");
      for (std::size_t j = 0; j < e; ++j)
        require(std::fabs(raw[j] / raw_norm - state.center_features.at(k, j)) <= 1e-9,
                "center feature does not match its sample");
    }
  }
}

void validate(const SelectionMask& mask, const ClusterState& state) {
  int count = 0;
  for (auto bit : mask.v) {
    require(bit == 0 || bit == 1, "mask entries must be 0 or 1");
    count += bit;
  }
  require(count == mask.selected_count, "selected_count does not match the mask");
  require(mask.lambda >= 0.0 && mask.lambda <= 1.0, "lambda must be in [0, 1]");
  require(mask.v.size() == state.assignments.size(), "mask length must equal n");

  std::vector<int> selected_per_cluster(state.k, 0);
  std::vector<int> size_per_cluster(state.k, 0);
  for (std::size_t i = 0; i < mask.v.size(); ++i) {
    size_per_cluster[state.assignments[i]] += 1;
    selected_per_cluster[state.assignments[i]] += mask.v[i];
  }
  for (int k = 0; k < state.k; ++k)
    if (size_per_cluster[k] > 0)
      require(selected_per_cluster[k] >= 1, "non-empty cluster lost all selected samples");
}

}  // namespace pul
