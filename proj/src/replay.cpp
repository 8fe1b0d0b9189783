#include "scstory/replay.hpp"

#include <algorithm>
#include <numeric>

#include "scstory/numkernel.hpp"

namespace scstory::replay {

std::vector<int> importance_ranking(std::span<const double> importance, int valid_count) {
  if (static_cast<int>(importance.size()) < valid_count)
    throw Error(Errc::ShapeMismatch, "importance vector shorter than the article");
  std::vector<int> order(static_cast<std::size_t>(valid_count));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return importance[a] > importance[b]; });
  return order;
}

AugmentedArticle p_aug(const SentenceMatrix& di, std::span<const double> importance_i,
                       const SentenceMatrix& dj, std::span<const double> importance_j) {
  if (di.dim() != dj.dim()) throw Error(Errc::ShapeMismatch, "p_aug: embedding dims differ");
  const int ni = di.valid_count();
  const int nj = dj.valid_count();
  const std::vector<int> rank_i = importance_ranking(importance_i, ni);
  const std::vector<int> rank_j = importance_ranking(importance_j, nj);
  const int top = (ni + 1) / 2;
  const int bottom = nj / 2;

  Matrix rows(top + bottom, di.dim());
  for (int k = 0; k < top; ++k) rows.row(k) = di.rows().row(rank_i[k]);
  for (int k = 0; k < bottom; ++k) rows.row(top + k) = dj.rows().row(rank_j[nj - bottom + k]);

  AugmentedArticle out;
  out.top_source_id = di.article_id();
  out.bottom_source_id = dj.article_id();
  out.sentences = SentenceMatrix("aug:" + di.article_id() + "+" + dj.article_id(), rows, di.max_sentences());
  return out;
}

std::vector<TrainSample> sample_replay(const WindowState& window, int count, Rng& rng) {
  if (window.empty() || window.stories().empty())
    throw Error(Errc::EmptyWindow, "replay needs at least one article and one story");
  const auto centroids = window.centroids();
  const auto& articles = window.articles();
  const std::size_t S = centroids.size();

  std::vector<double> weights;
  weights.reserve(articles.size() * S);
  double total = 0.0;
  for (const WindowArticle& a : articles) {
    const RowVector& r = a.encoded.article_repr;
    const double rn = r.norm();
    for (const auto& c : centroids) {
      const double cn = c.repr.norm();
      const double conf = (rn == 0.0 || cn == 0.0) ? 0.0 : r.dot(c.repr) / (rn * cn);
      weights.push_back(std::max(conf, 0.0));
      total += weights.back();
    }
  }

  std::vector<TrainSample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  if (total > 0.0) {
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    for (int k = 0; k < count; ++k) {
      const std::size_t idx = pick(rng);
      const WindowArticle& a = articles[idx / S];
      out.push_back({SampleSource::Replay, a.sentences, centroids[idx % S].story_id, a.article.id, {}});
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, articles.size() - 1);
    for (int k = 0; k < count; ++k) {
      const WindowArticle& a = articles[pick(rng)];
      out.push_back({SampleSource::Replay, a.sentences, a.story_id, a.article.id, {}});
    }
  }
  return out;
}

std::vector<TrainSample> sample_augmented(const WindowState& window, int count, Rng& rng) {
  std::vector<const ActiveStory*> eligible;
  for (const auto& [id, story] : window.stories())
    if (story.in_window.size() >= 2) eligible.push_back(&story);
  std::vector<TrainSample> out;
  if (eligible.empty()) return out;

  std::uniform_int_distribution<std::size_t> pick_story(0, eligible.size() - 1);
  for (int k = 0; k < count; ++k) {
    const ActiveStory& story = *eligible[pick_story(rng)];
    const std::size_t m = story.in_window.size();
    std::uniform_int_distribution<std::size_t> first(0, m - 1);
    std::uniform_int_distribution<std::size_t> second(0, m - 2);
    const std::size_t i = first(rng);
    std::size_t j = second(rng);
    if (j >= i) ++j;
    const WindowArticle* di = window.find(story.in_window[i]);
    const WindowArticle* dj = window.find(story.in_window[j]);
    AugmentedArticle aug = p_aug(*di->sentences, di->encoded.attention_importance, *dj->sentences,
                                 dj->encoded.attention_importance);
    out.push_back({SampleSource::Augmented, std::make_shared<const SentenceMatrix>(std::move(aug.sentences)),
                   story.story.id, aug.top_source_id, aug.bottom_source_id});
  }
  return out;
}

std::vector<TrainSample> build_batch(const WindowState& window, const EngineConfig& config, Rng& rng) {
  if (window.empty()) throw Error(Errc::EmptyWindow, "cannot build a batch from an empty window");
  const int half = config.batch_size / 2;
  std::vector<TrainSample> batch = sample_replay(window, half, rng);
  std::vector<TrainSample> augmented = sample_augmented(window, half, rng);
  if (augmented.empty()) augmented = sample_replay(window, half, rng);
  batch.insert(batch.end(), std::make_move_iterator(augmented.begin()),
               std::make_move_iterator(augmented.end()));
  return batch;
}

}  // namespace scstory::replay
