#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pul/types.hpp"

namespace pul {

struct EvalProtocol {
  // Exclude gallery entries sharing both identity and camera with the query.
  // Applies only when both sets carry camera ids.
  bool camera_filter = true;
};

// Embeddings of every sample, rows l2-normalized.
Matrix extract_features(const EmbedModel& model, const Dataset& dataset);

// Gallery indices by descending cosine similarity; ties by ascending index.
std::vector<int> rank_gallery(std::span<const double> query_feature, const Matrix& gallery);

// Mean over relevant positions r of (relevant in top r) / r. nullopt when the
// list has no relevant entry (the query is skipped, not scored 0).
std::optional<double> average_precision(std::span<const std::uint8_t> ranked_relevance);

// Single-query retrieval metrics. Queries whose identity is absent from the
// (filtered) gallery are skipped and counted in num_skipped.
EvalMetrics evaluate(const Dataset& query, const Dataset& gallery, const EmbedModel& model,
                     const EvalProtocol& protocol = {});

}  // namespace pul
