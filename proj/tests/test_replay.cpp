#include <doctest.h>

#include <map>

#include "oracles.hpp"
#include "scstory/replay.hpp"

using namespace scstory;
using namespace scstory::replay;

namespace {

constexpr int kL = 8;

RowVector vec(double x, double y) {
  RowVector r(2);
  r << x, y;
  return r;
}

Matrix sentences(int n, double base) {
  Matrix m(n, 3);
  for (int i = 0; i < n; ++i) m.row(i) << base + i, base - i, 1.0;
  return m;
}

void put(WindowState& w, const std::string& id, StoryId story, RowVector repr, int n = 3) {
  if (!w.stories().count(story)) w.open_story(story, 0);
  w.add(oracle::fixed_article(id, 3600, story, repr, sentences(n, static_cast<double>(w.size())), kL));
}

// Pearson statistic against expected probabilities.
double chi_square(const std::map<StoryId, int>& observed, const std::map<StoryId, double>& p, int n) {
  double chi = 0;
  for (const auto& [id, prob] : p) {
    const double e = prob * n;
    const auto it = observed.find(id);
    const double o = it == observed.end() ? 0.0 : it->second;
    chi += (o - e) * (o - e) / e;
  }
  return chi;
}

}  // namespace

TEST_CASE("importance ranking is descending with ties by position") {
  const std::vector<double> imp{0.1, 0.4, 0.1, 0.4, 0.0};
  CHECK(importance_ranking(imp, 5) == std::vector<int>{1, 3, 0, 2, 4});
  CHECK(importance_ranking(imp, 3) == std::vector<int>{1, 0, 2});
  CHECK_THROWS_AS(importance_ranking(imp, 6), Error);
}

TEST_CASE("p_aug takes the top half of one article and the bottom half of the other") {
  const Matrix a = sentences(3, 10), b = sentences(4, 100);
  const SentenceMatrix di("i", a, kL), dj("j", b, kL);
  const std::vector<double> imp_i{0.2, 0.5, 0.3, 0, 0, 0, 0, 0};
  const std::vector<double> imp_j{0.4, 0.1, 0.3, 0.2, 0, 0, 0, 0};
  const AugmentedArticle aug = p_aug(di, imp_i, dj, imp_j);
  CHECK(aug.top_source_id == "i");
  CHECK(aug.bottom_source_id == "j");
  const SentenceMatrix& s = aug.sentences;
  REQUIRE(s.valid_count() == 2 + 2);
  CHECK(s.max_sentences() == kL);
  // ceil(3/2) = 2 most important of i: rows 1, 2
  CHECK(s.rows().row(0) == a.row(1));
  CHECK(s.rows().row(1) == a.row(2));
  // floor(4/2) = 2 least important of j, still in descending order: rows 3, 1
  CHECK(s.rows().row(2) == b.row(3));
  CHECK(s.rows().row(3) == b.row(1));
  CHECK(s.rows().bottomRows(kL - 4).isZero(0));
}

TEST_CASE("p_aug edge cases") {
  const std::vector<double> imp(kL, 0.125);
  const SentenceMatrix one("o", sentences(1, 0), kL), two("t", sentences(2, 5), kL);
  // a single-sentence second source contributes nothing
  CHECK(p_aug(two, imp, one, imp).sentences.valid_count() == 1);
  CHECK(p_aug(one, imp, two, imp).sentences.valid_count() == 2);

  const SentenceMatrix big_i("bi", sentences(8, 0), kL), big_j("bj", sentences(8, 50), kL);
  const AugmentedArticle full = p_aug(big_i, imp, big_j, imp);
  CHECK(full.sentences.valid_count() == kL);

  // L smaller than the concatenation: truncated, most important first
  const SentenceMatrix s5("a", sentences(5, 0), 4), s6("b", sentences(6, 9), 4);
  const std::vector<double> imp4{0.1, 0.2, 0.3, 0.4};
  const AugmentedArticle cut = p_aug(s5, imp4, s6, imp4);
  CHECK(cut.sentences.valid_count() == 4);
  CHECK(cut.sentences.rows().row(0) == s5.rows().row(3));

  const SentenceMatrix other_dim("x", Matrix::Ones(2, 5), kL);
  CHECK_THROWS_AS(p_aug(two, imp, other_dim, imp), Error);
}

TEST_CASE("replay samples pairs in proportion to clamped confidence") {
  WindowState w(7, 1);
  w.set_range(0, 6);
  for (int i = 0; i < 4; ++i) put(w, "a" + std::to_string(i), 1, vec(1, 0));
  put(w, "b", 2, vec(0, 1));
  // weights: four (a_i, story 1) pairs at 1, (b, story 2) at 1, the rest 0
  Rng rng(5);
  const int n = 4000;
  const auto samples = sample_replay(w, n, rng);
  REQUIRE(samples.size() == static_cast<std::size_t>(n));
  std::map<StoryId, int> counts;
  for (const TrainSample& s : samples) {
    CHECK(s.source == SampleSource::Replay);
    ++counts[s.pseudo_story_id];
    // orthogonal pairs have zero weight and never appear
    CHECK((s.article_id == "b") == (s.pseudo_story_id == 2));
  }
  CHECK(chi_square(counts, {{1, 0.8}, {2, 0.2}}, n) < 6.635);
}

TEST_CASE("replay can pair an article with another story") {
  WindowState w(7, 1);
  w.set_range(0, 6);
  put(w, "a", 1, vec(1, 0));
  put(w, "b", 2, vec(1, 1));
  Rng rng(6);
  std::map<std::pair<std::string, StoryId>, int> seen;
  for (const TrainSample& s : sample_replay(w, 2000, rng)) ++seen[{s.article_id, s.pseudo_story_id}];
  CHECK(seen.size() == 4);
  // weights 1, 1/sqrt2, 1/sqrt2, 1 for (a,1) (a,2) (b,1) (b,2)
  const double total = 2 + std::sqrt(2.0);
  std::map<StoryId, double> p{{1, 1 / total}, {2, std::sqrt(0.5) / total}};
  std::map<StoryId, int> a_counts{{1, seen[{"a", 1}]}, {2, seen[{"a", 2}]}};
  const double share = (a_counts[1] + a_counts[2]) / 2000.0;
  CHECK(share == doctest::Approx(0.5).epsilon(0.1));
  CHECK(double(a_counts[1]) / a_counts[2] == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
}

TEST_CASE("replay falls back to own stories when every weight clamps to zero") {
  WindowState w(7, 1);
  w.set_range(0, 6);
  put(w, "a", 1, vec(1, 0));
  put(w, "b", 1, vec(-1, 0));  // centroid is exactly zero
  Rng rng(7);
  const auto samples = sample_replay(w, 50, rng);
  REQUIRE(samples.size() == 50);
  for (const TrainSample& s : samples) CHECK(s.pseudo_story_id == 1);
}

TEST_CASE("replay on an empty window throws") {
  WindowState w(7, 1);
  Rng rng(1);
  try {
    sample_replay(w, 4, rng);
    FAIL("expected EmptyWindow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyWindow);
  }
}

TEST_CASE("augmentation picks eligible stories uniformly") {
  WindowState w(7, 1);
  w.set_range(0, 6);
  put(w, "s1a", 1, vec(1, 0));
  put(w, "s1b", 1, vec(1, 0.1));
  for (int i = 0; i < 8; ++i) put(w, "s2_" + std::to_string(i), 2, vec(0, 1));
  put(w, "lonely", 3, vec(1, 1));
  Rng rng(8);
  const int n = 2000;
  const auto samples = sample_augmented(w, n, rng);
  REQUIRE(samples.size() == static_cast<std::size_t>(n));
  std::map<StoryId, int> counts;
  for (const TrainSample& s : samples) {
    CHECK(s.source == SampleSource::Augmented);
    CHECK(s.article_id != s.second_source_id);
    CHECK(w.find(s.article_id)->story_id == s.pseudo_story_id);
    CHECK(w.find(s.second_source_id)->story_id == s.pseudo_story_id);
    ++counts[s.pseudo_story_id];
  }
  CHECK(counts.count(3) == 0);
  CHECK(chi_square(counts, {{1, 0.5}, {2, 0.5}}, n) < 6.635);

  WindowState singles(7, 1);
  singles.set_range(0, 6);
  put(singles, "x", 1, vec(1, 0));
  put(singles, "y", 2, vec(0, 1));
  CHECK(sample_augmented(singles, 10, rng).empty());
}

TEST_CASE("batch composition") {
  EngineConfig cfg;
  WindowState w(7, 1);
  w.set_range(0, 6);
  put(w, "a", 1, vec(1, 0));
  put(w, "b", 1, vec(1, 0.2));
  Rng rng(9);
  const auto batch = build_batch(w, cfg, rng);
  REQUIRE(batch.size() == 256);
  for (std::size_t i = 0; i < 128; ++i) CHECK(batch[i].source == SampleSource::Replay);
  for (std::size_t i = 128; i < 256; ++i) CHECK(batch[i].source == SampleSource::Augmented);

  WindowState singles(7, 1);
  singles.set_range(0, 6);
  put(singles, "x", 1, vec(1, 0));
  const auto replay_only = build_batch(singles, cfg, rng);
  REQUIRE(replay_only.size() == 256);
  for (const TrainSample& s : replay_only) CHECK(s.source == SampleSource::Replay);

  Rng r1(42), r2(42);
  const auto b1 = build_batch(w, cfg, r1), b2 = build_batch(w, cfg, r2);
  for (std::size_t i = 0; i < b1.size(); ++i) {
    CHECK(b1[i].article_id == b2[i].article_id);
    CHECK(b1[i].pseudo_story_id == b2[i].pseudo_story_id);
  }

  WindowState empty(7, 1);
  CHECK_THROWS_AS(build_batch(empty, cfg, rng), Error);
}
