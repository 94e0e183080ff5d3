#pragma once

#include <cstdint>
#include <optional>

#include "pul/types.hpp"

namespace pul {

struct DomainParams {
  int num_ids = 0;
  int samples_per_id = 0;
  int dim = 0;                 // raw feature dimension D
  double sigma_within = 0.0;   // spread of samples around their id prototype
  double sigma_between = 0.0;  // spread of id prototypes
};

// Affine map applied to every target-domain sample: random rotation,
// translation, extra noise.
struct DomainShift {
  bool rotate = true;
  std::uint64_t rotation_seed = 7;
  double translation_scale = 0.5;
  double sigma_extra = 0.8;
};

struct SyntheticSpec {
  DomainParams source{20, 30, 24, 0.3, 1.0};
  DomainParams target{15, 30, 24, 0.3, 1.0};
  DomainShift shift{};
  int cameras_per_id = 4;
  int query_per_id = 4;
  int gallery_per_id = 8;
  int semi_label_ids = 0;  // > 0 also emits a labeled target subset
  bool share_source_prototypes = false;  // target reuses source prototypes
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Dataset source;          // labeled
  Dataset target_train;    // unlabeled
  Dataset target_query;    // labeled + cameras
  Dataset target_gallery;  // labeled + cameras
  std::optional<Dataset> target_semi;  // labeled, only when semi_label_ids > 0
};

void validate(const SyntheticSpec& spec);

// Pure function of the spec (seed included). Query, gallery and semi samples
// are disjoint draws of the shared target identities.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace pul
