#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scstory/error.hpp"
#include "scstory/linalg.hpp"

namespace scstory {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;
/// Whole-day index, floor(ts / 86400).
using DayIndex = std::int64_t;
using StoryId = std::int64_t;

inline constexpr Timestamp kSecondsPerDay = 86400;

constexpr DayIndex day_of(Timestamp ts) noexcept {
  // floor division, also for pre-epoch timestamps
  return ts >= 0 ? ts / kSecondsPerDay : -((-ts + kSecondsPerDay - 1) / kSecondsPerDay);
}

struct Article {
  std::string id;
  Timestamp published_at = 0;
  int sentence_count = 1;
  std::optional<std::string> true_story_label;  // evaluation only

  DayIndex day() const noexcept { return day_of(published_at); }
};

/// An article's initial sentence embeddings, truncated or padded to L rows.
/// Real sentences always occupy a prefix of the rows; padded rows are zero.
class SentenceMatrix {
 public:
  SentenceMatrix() = default;

  /// Truncates (keeping the first L) or zero-pads `sentences` (n x h_e) to L rows.
  SentenceMatrix(std::string article_id, const Matrix& sentences, int L);

  /// Adopts a full L x h_e matrix with an explicit mask; the mask must be a
  /// true-prefix and padded rows must be zero.
  static SentenceMatrix from_padded(std::string article_id, Matrix rows,
                                    const std::vector<bool>& mask);

  const std::string& article_id() const noexcept { return article_id_; }
  const Matrix& rows() const noexcept { return rows_; }
  int max_sentences() const noexcept { return static_cast<int>(rows_.rows()); }
  int dim() const noexcept { return static_cast<int>(rows_.cols()); }
  int valid_count() const noexcept { return valid_; }
  std::vector<bool> mask() const;

  /// The unmasked prefix, valid_count() x h_e.
  auto valid_rows() const { return rows_.topRows(valid_); }

 private:
  std::string article_id_;
  Matrix rows_;
  int valid_ = 0;
};

struct Story {
  StoryId id = 0;
  std::vector<std::string> member_ids;
  Timestamp created_at = 0;
  Timestamp last_updated_at = 0;
};

struct Assignment {
  std::string article_id;
  StoryId story_id = 0;
  double confidence = -1.0;
  bool is_new_story = false;
};

struct EngineConfig {
  int window_days = 7;
  int slide_days = 1;
  int max_sentences = 50;  // L
  int embed_dim = 0;       // h_e, taken from the provider when 0
  int hidden_dim = 0;      // h_c, defaults to h_e when 0
  int n_heads = 4;
  double delta = 0.5;
  double tau = 0.2;
  int epochs = 1;
  int batch_size = 256;
  double learning_rate = 1e-5;
  std::uint64_t rng_seed = 0;
  std::optional<int> cold_start_k;  // fixed seed count instead of delta coverage
  bool train = true;                // false = ablation, encoder stays at init

  int resolved_hidden_dim() const noexcept { return hidden_dim > 0 ? hidden_dim : embed_dim; }

  /// Throws Error(BadConfig) on the first violated invariant.
  void validate() const;
};

struct StreamViolation {
  Errc code;
  std::string article_id;
};

/// First violation in stream order (duplicate id, time going backwards, no
/// sentences), or nullopt when the stream is well formed.
std::optional<StreamViolation> validate_stream(const std::vector<Article>& articles);

/// Throwing wrapper over validate_stream.
void require_valid_stream(const std::vector<Article>& articles);

}  // namespace scstory
