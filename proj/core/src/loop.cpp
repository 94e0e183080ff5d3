#include "pul/loop.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "pul/clustering.hpp"
#include "pul/embedder.hpp"
#include "pul/errors.hpp"
#include "pul/selection.hpp"

namespace pul {

namespace {

// Distinct labels in ascending order -> contiguous class ids starting at base.
std::vector<int> remap_labels(const std::vector<int>& labels, int base) {
  std::map<int, int> classes;
  for (int l : labels) classes.emplace(l, 0);
  int next = base;
  for (auto& [label, cls] : classes) cls = next++;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = classes[labels[i]];
  return out;
}

int count_distinct(const std::vector<int>& labels) {
  std::map<int, int> seen;
  for (int l : labels) seen.emplace(l, 0);
  return static_cast<int>(seen.size());
}

bool deltas_saturated(std::span<const IterationRecord> history, int n,
                      const ConvergenceConfig& c) {
  if (history.size() < static_cast<std::size_t>(c.patience) + 1) return false;
  for (std::size_t j = history.size() - static_cast<std::size_t>(c.patience);
       j < history.size(); ++j) {
    const double delta =
        std::fabs(static_cast<double>(history[j].selected_count - history[j - 1].selected_count));
    const bool small = n == 0 ? delta == 0.0 : delta < c.rel_tol * static_cast<double>(n);
    if (!small) return false;
  }
  return true;
}

}  // namespace

EmbedModel init_original_model(const Dataset& source, const PulConfig& config, Rng& rng) {
  validate(config);
  if (!source.labels) throw InvalidInput("source dataset must carry identity labels");
  validate(source);
  const int num_classes = count_distinct(*source.labels);
  if (num_classes < 2) throw InvalidInput("source dataset must have at least 2 identities");

  const EmbedArch arch = config.embed.linear ? EmbedArch::linear : EmbedArch::one_hidden;
  EmbedModel model =
      make_model(arch, source.dim(), config.embed.hidden_dim, config.embed.embed_dim, num_classes);
  random_init(model, rng);

  const std::vector<int> classes = remap_labels(*source.labels, 0);
  const std::vector<std::uint8_t> all(static_cast<std::size_t>(source.n()), 1);
  SgdConfig sgd = config.sgd;
  sgd.epochs_per_iter = config.sgd.init_epochs;
  return fine_tune(model, source.samples, classes, all, num_classes, sgd, rng).model;
}

PulRunState make_run_state(const EmbedModel& original) {
  PulRunState state;
  state.original = original;
  state.current = original;
  return state;
}

void run_iteration(PulRunState& state, const Dataset& target, const Dataset* labeled,
                   const PulConfig& config, Rng& rng, const RunHooks& hooks) {
  const int n = target.n();
  const bool has_labeled = labeled != nullptr && labeled->n() > 0;
  if (has_labeled && !labeled->labels)
    throw InvalidInput("labeled subset must carry identity labels");
  if (has_labeled && n > 0 && labeled->dim() != target.dim())
    throw InvalidInput("labeled subset dimension does not match the target dataset");
  if (n == 0 && !has_labeled) throw EmptyTrainingSet("no target or labeled samples");

  IterationRecord rec;
  rec.iter = state.iteration + 1;

  SelectionMask mask;
  ClusterState cluster;
  Matrix embeddings;
  if (n > 0) {
    embeddings = embed_all(state.current, target.samples);
    cluster = kmeans(embeddings, config.k, config.kmeans_max_iters, rng);
    select_center_features(embeddings, cluster);
    if (config.selection_enabled) {
      const Matrix unit = l2_normalize(embeddings);
      mask = select_reliable(unit, cluster, config.lambda);
    } else {
      mask.lambda = config.lambda;
      mask.v.assign(static_cast<std::size_t>(n), 1);
      mask.selected_count = n;
    }
    rec.kmeans_objective = kmeans_objective(embeddings, cluster);
    rec.selected_count = mask.selected_count;
    rec.selected_fraction = selected_fraction(mask, n);
  }

  const EmbedModel& base = config.fine_tune_from_original ? state.original : state.current;
  FineTuneResult ft;
  if (has_labeled) {
    // Union of selected pseudo-labeled samples and every labeled sample;
    // labeled identities get dedicated class slots above the k pseudo classes.
    const std::vector<int> labeled_classes = remap_labels(*labeled->labels, config.k);
    const int num_classes = config.k + count_distinct(*labeled->labels);
    const std::size_t total = static_cast<std::size_t>(n) + labeled->samples.rows;
    FloatMatrix xs(total, target.n() > 0 ? target.samples.cols : labeled->samples.cols);
    std::vector<int> ys(total);
    std::vector<std::uint8_t> vs(total, 1);
    for (int i = 0; i < n; ++i) {
      const auto src = target.samples.row(static_cast<std::size_t>(i));
      std::copy(src.begin(), src.end(), xs.row(static_cast<std::size_t>(i)).begin());
      ys[static_cast<std::size_t>(i)] = cluster.assignments[static_cast<std::size_t>(i)];
      vs[static_cast<std::size_t>(i)] = mask.v[static_cast<std::size_t>(i)];
    }
    for (std::size_t i = 0; i < labeled->samples.rows; ++i) {
      const auto src = labeled->samples.row(i);
      std::copy(src.begin(), src.end(), xs.row(static_cast<std::size_t>(n) + i).begin());
      ys[static_cast<std::size_t>(n) + i] = labeled_classes[i];
    }
    ft = fine_tune(base, xs, ys, vs, num_classes, config.sgd, rng);
  } else {
    ft = fine_tune(base, target.samples, cluster.assignments, mask.v, config.k, config.sgd, rng);
  }
  state.current = ft.model;
  state.iteration = rec.iter;
  rec.train_loss = ft.epoch_loss.empty() ? 0.0 : ft.epoch_loss.back();
  if (hooks.eval) rec.metrics = hooks.eval(state.current, rec.iter);
  state.history.push_back(rec);
  if (hooks.on_iteration) hooks.on_iteration(state.history.back());
}

Convergence check_convergence(std::span<const IterationRecord> history, int n,
                              const PulConfig& config) {
  if (deltas_saturated(history, n, config.convergence)) return Convergence::saturated;
  if (history.size() >= static_cast<std::size_t>(config.max_pul_iters))
    return Convergence::iteration_cap;
  return Convergence::not_converged;
}

namespace {

PulRunState run_loop(const Dataset& target, const Dataset* labeled, const EmbedModel& original,
                     const PulConfig& config, Rng& rng, const RunHooks& hooks) {
  validate(config);
  if (target.n() > 0) {
    validate(target);
    if (target.n() < config.k)
      throw InvalidInput("target dataset has fewer samples than clusters");
  }
  PulRunState state = make_run_state(original);
  while (true) {
    run_iteration(state, target, labeled, config, rng, hooks);
    const Convergence c = check_convergence(state.history, target.n(), config);
    if (c == Convergence::saturated) {
      state.converged = true;
      break;
    }
    if (c == Convergence::iteration_cap) break;
  }
  return state;
}

}  // namespace

PulRunState run_pul(const Dataset& target, const EmbedModel& original, const PulConfig& config,
                    Rng& rng, const RunHooks& hooks) {
  return run_loop(target, nullptr, original, config, rng, hooks);
}

PulRunState run_semi_supervised(const Dataset& target, const Dataset& labeled,
                                const EmbedModel& original, const PulConfig& config, Rng& rng,
                                const RunHooks& hooks) {
  if (labeled.n() == 0) return run_loop(target, nullptr, original, config, rng, hooks);
  return run_loop(target, &labeled, original, config, rng, hooks);
}

}  // namespace pul
