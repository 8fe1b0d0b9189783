#pragma once

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "scstory/assigner.hpp"
#include "scstory/domain.hpp"
#include "scstory/encoder.hpp"

namespace scstory {

struct WindowArticle {
  Article article;
  std::shared_ptr<const SentenceMatrix> sentences;
  encoder::EncodeOutput encoded;  // under the current parameters
  StoryId story_id = 0;
  std::size_t assigned_in_window = 0;
};

struct ActiveStory {
  Story story;                         // full history, including evicted members
  std::vector<std::string> in_window;  // member ids still inside the window, arrival order
  assigner::StoryCentroid centroid;
};

/// Articles and stories inside the current sliding window, plus cached
/// representations. Articles are kept in arrival (publication) order.
class WindowState {
 public:
  WindowState() = default;
  WindowState(int window_days, int slide_days) : window_days_(window_days), slide_days_(slide_days) {}

  int window_days() const noexcept { return window_days_; }
  int slide_days() const noexcept { return slide_days_; }
  DayIndex start_day() const noexcept { return start_day_; }
  DayIndex end_day() const noexcept { return end_day_; }
  void set_range(DayIndex start, DayIndex end) noexcept {
    start_day_ = start;
    end_day_ = end;
  }

  bool empty() const noexcept { return articles_.empty(); }
  std::size_t size() const noexcept { return articles_.size(); }
  const std::deque<WindowArticle>& articles() const noexcept { return articles_; }
  const std::map<StoryId, ActiveStory>& stories() const noexcept { return stories_; }

  const WindowArticle* find(const std::string& article_id) const;

  /// Centroids of all active stories, ascending story id.
  std::vector<assigner::StoryCentroid> centroids() const;

  /// Appends an already-assigned article and updates its story's centroid.
  void add(WindowArticle article);
  /// Opens a new story whose first member is added next.
  void open_story(StoryId id, Timestamp created_at);

  /// Drops articles published before start_day(); returns ids of stories left
  /// with no in-window member, which are removed from the active set.
  std::vector<StoryId> evict();

  /// Re-encodes every article under `params` and recomputes all centroids.
  void refresh(const encoder::EncoderParams& params);
  void recompute_centroids();

 private:
  void recompute_centroid(ActiveStory& story);

  int window_days_ = 7;
  int slide_days_ = 1;
  DayIndex start_day_ = 0;
  DayIndex end_day_ = -1;
  std::deque<WindowArticle> articles_;
  std::unordered_map<std::string, std::size_t> position_;  // id -> absolute arrival index
  std::size_t evicted_ = 0;                                // arrivals already popped
  std::map<StoryId, ActiveStory> stories_;
};

}  // namespace scstory
