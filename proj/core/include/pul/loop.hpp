#pragma once

#include <functional>
#include <span>

#include "pul/rng.hpp"
#include "pul/types.hpp"

namespace pul {

struct RunHooks {
  // Optional per-iteration evaluation; the result lands in the history record.
  std::function<std::optional<EvalMetrics>(const EmbedModel& model, int iter)> eval;
  // Called after each iteration with the appended record.
  std::function<void(const IterationRecord& record)> on_iteration;
};

// Supervised training on a labeled source set; the result is the starting
// point every adaptation run fine-tunes from. Runs sgd.init_epochs epochs.
EmbedModel init_original_model(const Dataset& source, const PulConfig& config, Rng& rng);

PulRunState make_run_state(const EmbedModel& original);

// One pass: embed, cluster, pick centers, select reliable samples, fine-tune.
// `labeled` (may be null) is unioned into the training set with dedicated
// class slots and excluded from clustering and selection.
void run_iteration(PulRunState& state, const Dataset& target, const Dataset* labeled,
                   const PulConfig& config, Rng& rng, const RunHooks& hooks = {});

enum class Convergence { not_converged, saturated, iteration_cap };

// Saturation: |delta selected_count| / n < rel_tol for `patience` consecutive
// iteration transitions. iteration_cap when max_pul_iters is reached first.
Convergence check_convergence(std::span<const IterationRecord> history, int n,
                              const PulConfig& config);

PulRunState run_pul(const Dataset& target, const EmbedModel& original, const PulConfig& config,
                    Rng& rng, const RunHooks& hooks = {});

// Same loop with a labeled subset joined into every iteration's training set.
// With an empty labeled set this is exactly run_pul.
PulRunState run_semi_supervised(const Dataset& target, const Dataset& labeled,
                                const EmbedModel& original, const PulConfig& config, Rng& rng,
                                const RunHooks& hooks = {});

}  // namespace pul
