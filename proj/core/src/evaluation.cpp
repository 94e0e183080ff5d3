#include "pul/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "pul/embedder.hpp"
#include "pul/errors.hpp"
#include "pul/selection.hpp"

namespace pul {

Matrix extract_features(const EmbedModel& model, const Dataset& dataset) {
  return l2_normalize(embed_all(model, dataset.samples));
}

std::vector<int> rank_gallery(std::span<const double> query_feature, const Matrix& gallery) {
  std::vector<double> sims(gallery.rows);
  for (std::size_t j = 0; j < gallery.rows; ++j) sims[j] = dot(query_feature, gallery.row(j));
  std::vector<int> order(gallery.rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sims[a] > sims[b]; });
  return order;
}

std::optional<double> average_precision(std::span<const std::uint8_t> ranked_relevance) {
  int total_relevant = 0;
  for (auto r : ranked_relevance) total_relevant += r ? 1 : 0;
  if (total_relevant == 0) return std::nullopt;

  double sum = 0.0;
  int hits = 0;
  for (std::size_t pos = 0; pos < ranked_relevance.size(); ++pos) {
    if (!ranked_relevance[pos]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
  }
  return sum / static_cast<double>(total_relevant);
}

EvalMetrics evaluate(const Dataset& query, const Dataset& gallery, const EmbedModel& model,
                     const EvalProtocol& protocol) {
  if (!query.labels || !gallery.labels)
    throw InvalidInput("evaluation requires identity labels on query and gallery");
  const bool use_cameras = protocol.camera_filter && query.camera_ids && gallery.camera_ids;

  const Matrix qf = extract_features(model, query);
  const Matrix gf = extract_features(model, gallery);

  EvalMetrics m;
  int hit1 = 0, hit5 = 0, hit10 = 0, hit20 = 0;
  double ap_sum = 0.0;

  std::vector<std::uint8_t> relevance;
  for (std::size_t q = 0; q < qf.rows; ++q) {
    const int qid = (*query.labels)[q];
    const std::vector<int> order = rank_gallery(qf.row(q), gf);

    // Drop same-id same-camera entries, then score the remaining ranking.
    relevance.clear();
    for (int j : order) {
      const bool same_id = (*gallery.labels)[static_cast<std::size_t>(j)] == qid;
      if (use_cameras && same_id &&
          (*gallery.camera_ids)[static_cast<std::size_t>(j)] == (*query.camera_ids)[q])
        continue;
      relevance.push_back(same_id ? 1 : 0);
    }

    const auto ap = average_precision(relevance);
    if (!ap) {
      m.num_skipped += 1;
      continue;
    }
    m.num_queries += 1;
    ap_sum += *ap;

    const auto first = std::find(relevance.begin(), relevance.end(), std::uint8_t{1});
    const auto rank = static_cast<std::size_t>(first - relevance.begin());  // 0-based
    hit1 += rank < 1;
    hit5 += rank < 5;
    hit10 += rank < 10;
    hit20 += rank < 20;
  }

  if (m.num_queries > 0) {
    const double n = static_cast<double>(m.num_queries);
    m.rank1 = hit1 / n;
    m.rank5 = hit5 / n;
    m.rank10 = hit10 / n;
    m.rank20 = hit20 / n;
    m.map = ap_sum / n;
  }
  return m;
}

}  // namespace pul
