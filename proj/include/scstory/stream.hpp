#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "scstory/domain.hpp"
#include "scstory/encoder.hpp"
#include "scstory/metrics.hpp"
#include "scstory/providers.hpp"
#include "scstory/replay.hpp"
#include "scstory/trainer.hpp"
#include "scstory/window.hpp"

namespace scstory::stream {

struct SlideResult {
  std::size_t window_index = 0;
  DayIndex start_day = 0;
  DayIndex end_day = 0;
  std::vector<Assignment> assignments;  // new articles, input order
  std::vector<StoryId> expired;
  trainer::EpochResult training;
};

/// Hooks fired while a slide is processed, in stream order.
class EngineObserver {
 public:
  virtual ~EngineObserver() = default;
  virtual void on_assigned(std::size_t /*window_index*/, const Assignment&) {}
  virtual void on_trained(std::size_t /*window_index*/, const trainer::EpochResult&) {}
};

/// Cold-start seed choice over baseline vectors: k-means++ D^2 weighting with
/// D = 1 - max cosine to the chosen seeds. Without `k`, seeds are added until
/// every article has cosine > delta to some seed, and only uncovered
/// articles are candidates. Returns seed indices in selection order.
std::vector<std::size_t> select_seeds(std::span<const RowVector> vectors, double delta, std::optional<int> k,
                                      replay::Rng& rng);

class StoryEngine {
 public:
  /// Initial parameters are drawn from config.rng_seed; embed_dim defaults to
  /// the provider's dimension.
  StoryEngine(EngineConfig config, const providers::EmbeddingProvider& provider);
  StoryEngine(EngineConfig config, const providers::EmbeddingProvider& provider, encoder::EncoderParams params);

  /// First window [d0, d0 + window_days - 1], d0 = day of the first article.
  SlideResult cold_start(std::span<const Article> first_window);
  /// Advances the window by slide_days and ingests articles whose day falls
  /// in the newly covered range.
  SlideResult process_slide(std::span<const Article> new_articles);
  /// Removes stories with no in-window member; returns their ids.
  std::vector<StoryId> expire();

  bool started() const noexcept { return started_; }
  std::size_t window_index() const noexcept { return window_index_; }
  StoryId next_story_id() const noexcept { return next_story_id_; }
  const EngineConfig& config() const noexcept { return config_; }
  const WindowState& window() const noexcept { return window_; }
  const encoder::EncoderParams& params() const noexcept { return params_; }
  const trainer::OptimizerState& optimizer() const noexcept { return opt_; }

  void set_observer(EngineObserver* observer) noexcept { observer_ = observer; }

 private:
  void admit(const Article& a, DayIndex first_day, DayIndex last_day);
  WindowArticle fetch(const Article& a) const;
  trainer::EpochResult train();

  EngineConfig config_;
  const providers::EmbeddingProvider* provider_;
  encoder::EncoderParams params_;
  trainer::OptimizerState opt_;
  WindowState window_;
  replay::Rng rng_;
  EngineObserver* observer_ = nullptr;
  bool started_ = false;
  std::size_t window_index_ = 0;
  StoryId next_story_id_ = 0;
  Timestamp last_time_ = 0;
  std::unordered_set<std::string> seen_;
};

/// Clustering metrics over the current window, or nullopt when some
/// in-window article has no true label.
std::optional<metrics::WindowScore> score_window(const WindowState& window, std::size_t window_index,
                                                 bool embedding_diagnostics);

struct RunOptions {
  bool score = true;
  bool embedding_diagnostics = true;
};

struct RunResult {
  std::vector<SlideResult> slides;
  std::vector<metrics::WindowScore> scores;
  std::optional<metrics::Summary> summary;
};

/// Splits a chronological stream into the cold-start window and subsequent
/// slides by day index and feeds them through `engine`.
RunResult run_stream(StoryEngine& engine, const std::vector<Article>& articles, const RunOptions& options = {});

/// Encodes every labelled article with `params` and returns corpus-wide
/// (alignment, uniformity).
std::pair<double, double> corpus_diagnostics(const encoder::EncoderParams& params, std::span<const Article> articles,
                                             const providers::EmbeddingProvider& provider, int max_sentences);

}  // namespace scstory::stream
