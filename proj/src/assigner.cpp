#include "scstory/assigner.hpp"

#include "scstory/numkernel.hpp"

namespace scstory::assigner {

RowVector story_representation(std::span<const RowVector> members) {
  if (members.empty()) throw Error(Errc::EmptyStory, "story has no in-window members");
  RowVector sum = RowVector::Zero(members.front().size());
  for (const RowVector& m : members) sum += m;
  return sum / static_cast<double>(members.size());
}

std::vector<double> confidences(const RowVector& article_repr, std::span<const StoryCentroid> centroids) {
  if (article_repr.norm() == 0.0) throw Error(Errc::ZeroVector, "article representation is zero");
  std::vector<double> out;
  out.reserve(centroids.size());
  for (const StoryCentroid& c : centroids)
    out.push_back(c.repr.norm() == 0.0 ? 0.0 : num::cosine(article_repr, c.repr));
  return out;
}

Assignment assign(const RowVector& article_repr, std::span<const StoryCentroid> centroids, double delta,
                  StoryId fresh_id, std::string article_id) {
  const std::vector<double> conf = confidences(article_repr, centroids);
  Assignment a;
  a.article_id = std::move(article_id);
  a.confidence = -1.0;
  std::ptrdiff_t best = -1;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const bool better = best < 0 || conf[i] > conf[best] ||
                        (conf[i] == conf[best] && centroids[i].story_id < centroids[best].story_id);
    if (better) best = static_cast<std::ptrdiff_t>(i);
  }
  if (best >= 0) a.confidence = conf[best];
  if (best >= 0 && conf[best] > delta) {
    a.story_id = centroids[best].story_id;
    a.is_new_story = false;
  } else {
    a.story_id = fresh_id;
    a.is_new_story = true;
  }
  return a;
}

}  // namespace scstory::assigner
