#pragma once

#include <vector>

#include "pul/types.hpp"

namespace pul {

// Row-wise l2 normalization. All-zero rows stay zero; their indices are
// reported through `zero_rows` when given.
Matrix l2_normalize(const Matrix& rows, std::vector<int>* zero_rows = nullptr);

// For each cluster, the normalized feature of the member nearest to the
// centroid (Euclidean, ties to the lowest sample index). Fills
// state.center_features and state.center_indices.
void select_center_features(const Matrix& features, ClusterState& state);

// Reliable-sample mask: v_i = 1 iff unit_features[i] . f_{y_i} > lambda.
// Each cluster's center sample is always selected, so every cluster keeps at
// least one member for any lambda in [0, 1].
SelectionMask select_reliable(const Matrix& unit_features, const ClusterState& state,
                              double lambda);

double selected_fraction(const SelectionMask& mask, int n);

}  // namespace pul
