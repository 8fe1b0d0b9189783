#include <doctest.h>

#include <cmath>
#include <vector>

#include "scstory/assigner.hpp"

using namespace scstory;
using namespace scstory::assigner;

namespace {

RowVector vec(std::initializer_list<double> v) {
  RowVector r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

StoryCentroid centroid(StoryId id, RowVector repr) { return {id, std::move(repr), 1}; }

}  // namespace

TEST_CASE("story representation is the member mean") {
  const std::vector<RowVector> members{vec({1, 0, 2}), vec({3, 4, 0})};
  CHECK(story_representation(members) == vec({2, 2, 1}));
  const std::vector<RowVector> one{vec({0.5, -1})};
  CHECK(story_representation(one) == vec({0.5, -1}));
  CHECK_THROWS_AS(story_representation(std::vector<RowVector>{}), Error);
  try {
    story_representation(std::vector<RowVector>{});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyStory);
  }
}

TEST_CASE("confidences are cosines in centroid order") {
  const std::vector<StoryCentroid> cs{centroid(4, vec({1, 0})), centroid(2, vec({0, 3})), centroid(9, vec({-1, -1})),
                                      centroid(5, vec({0, 0}))};
  const auto conf = confidences(vec({2, 2}), cs);
  REQUIRE(conf.size() == 4);
  CHECK(conf[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(conf[1] == doctest::Approx(std::sqrt(0.5)));
  CHECK(conf[2] == doctest::Approx(-1.0));
  CHECK(conf[3] == 0.0);

  try {
    confidences(vec({0, 0}), cs);
    FAIL("expected ZeroVector");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroVector);
  }
}

TEST_CASE("assignment threshold and new stories") {
  const double delta = 0.5;
  const std::vector<StoryCentroid> cs{centroid(1, vec({1, 0})), centroid(2, vec({0, 1}))};

  const Assignment joined = assign(vec({0.9, 0.1}), cs, delta, 7, "a");
  CHECK(joined.article_id == "a");
  CHECK(joined.story_id == 1);
  CHECK_FALSE(joined.is_new_story);
  CHECK(joined.confidence == doctest::Approx(0.9 / std::sqrt(0.82)));

  // cos = 0.6 exactly against delta = 0.6 is not enough: the threshold is strict
  const Assignment boundary = assign(vec({3, 4}), {cs.data(), 1}, 0.6, 7);
  CHECK(boundary.confidence == 0.6);
  CHECK(boundary.is_new_story);
  CHECK(boundary.story_id == 7);

  const Assignment far = assign(vec({-1, -1}), cs, delta, 8);
  CHECK(far.is_new_story);
  CHECK(far.story_id == 8);
  CHECK(far.confidence == doctest::Approx(-std::sqrt(0.5)));

  const Assignment first = assign(vec({1, 1}), {}, delta, 0);
  CHECK(first.is_new_story);
  CHECK(first.story_id == 0);
  CHECK(first.confidence == -1.0);
}

TEST_CASE("ties go to the lowest story id") {
  const std::vector<StoryCentroid> cs{centroid(6, vec({1, 0})), centroid(3, vec({2, 0})), centroid(4, vec({0, 1}))};
  const Assignment a = assign(vec({5, 0}), cs, 0.5, 10);
  CHECK(a.story_id == 3);
  CHECK(a.confidence == doctest::Approx(1.0));
}

TEST_CASE("negative delta accepts anything but the sentinel") {
  const std::vector<StoryCentroid> cs{centroid(1, vec({1, 0}))};
  const Assignment a = assign(vec({-1, 0.01}), cs, -1.0, 2);
  CHECK(a.story_id == 1);
  CHECK_FALSE(a.is_new_story);
}
