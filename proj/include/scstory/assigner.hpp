#pragma once

#include <span>
#include <string>
#include <vector>

#include "scstory/domain.hpp"

namespace scstory::assigner {

struct StoryCentroid {
  StoryId story_id = 0;
  RowVector repr;
  int member_count_in_window = 0;
};

/// Mean of the current-window member representations.
RowVector story_representation(std::span<const RowVector> members);

/// Cosine of `article_repr` against every centroid, in centroid order. A zero
/// centroid (members cancelling exactly) scores 0.
std::vector<double> confidences(const RowVector& article_repr, std::span<const StoryCentroid> centroids);

/// Picks the most confident story if its confidence exceeds `delta` (ties go
/// to the lowest story id), otherwise opens story `fresh_id`. With no
/// centroids the confidence is the -1 sentinel.
Assignment assign(const RowVector& article_repr, std::span<const StoryCentroid> centroids, double delta,
                  StoryId fresh_id, std::string article_id = {});

}  // namespace scstory::assigner
