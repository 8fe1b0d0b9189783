#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "scstory/domain.hpp"
#include "scstory/window.hpp"

namespace scstory::replay {

using Rng = std::mt19937_64;

enum class SampleSource { Replay, Augmented };

/// One (article, pseudo-story) training pair. For replayed samples
/// `article_id` names the window article; augmented samples carry both sources.
struct TrainSample {
  SampleSource source = SampleSource::Replay;
  std::shared_ptr<const SentenceMatrix> sentences;
  StoryId pseudo_story_id = 0;
  std::string article_id;
  std::string second_source_id;
};

struct AugmentedArticle {
  SentenceMatrix sentences;
  std::string top_source_id;
  std::string bottom_source_id;
};

/// Sentence positions sorted by descending importance, ties by position.
std::vector<int> importance_ranking(std::span<const double> importance, int valid_count);

/// Concatenates the ceil(|d_i|/2) most important sentences of d_i with the
/// floor(|d_j|/2) least important sentences of d_j, each half ordered by
/// descending importance; the result is truncated to L rows.
AugmentedArticle p_aug(const SentenceMatrix& di, std::span<const double> importance_i,
                       const SentenceMatrix& dj, std::span<const double> importance_j);

/// Replay pairs drawn with replacement from window articles x active stories,
/// with probability proportional to max(cos, 0). When every pair clamps to
/// zero, falls back to each article with its own story, uniformly.
std::vector<TrainSample> sample_replay(const WindowState& window, int count, Rng& rng);

/// Augmentation pairs: a story with >= 2 in-window members is chosen
/// uniformly, then an ordered pair of distinct members.
std::vector<TrainSample> sample_augmented(const WindowState& window, int count, Rng& rng);

/// batch_size / 2 replayed + batch_size / 2 augmented samples; when no story
/// has two members the second half is replayed as well.
std::vector<TrainSample> build_batch(const WindowState& window, const EngineConfig& config, Rng& rng);

}  // namespace scstory::replay
