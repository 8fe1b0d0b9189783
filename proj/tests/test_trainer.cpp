#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "scstory/trainer.hpp"

using namespace scstory;
using namespace scstory::trainer;

namespace {

constexpr int kDim = 8;
constexpr int kL = 6;

// Two stories of three articles each, encoded under `params`. Story s has
// sentences scattered around its own direction.
WindowState make_window(const encoder::EncoderParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WindowState w(7, 1);
  w.set_range(0, 6);
  for (StoryId s = 0; s < 2; ++s) {
    w.open_story(s, 0);
    RowVector dir = RowVector::Zero(kDim);
    dir(static_cast<int>(s)) = 2.0;
    for (int k = 0; k < 3; ++k) {
      const int n = 2 + k;
      Matrix m = oracle::random_matrix(rng, n, kDim, 0.5);
      m.rowwise() += dir;
      WindowArticle a;
      a.article.id = "s" + std::to_string(s) + "_" + std::to_string(k);
      a.article.published_at = 100 * (3 * s + k);
      a.article.sentence_count = n;
      a.sentences = std::make_shared<const SentenceMatrix>(a.article.id, m, kL);
      a.encoded = encoder::encode_article(*a.sentences, params);
      a.story_id = s;
      w.add(std::move(a));
    }
  }
  return w;
}

bool same_params(const encoder::EncoderParams& a, const encoder::EncoderParams& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (*ta[i] != *tb[i]) return false;
  return true;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("contrastive loss closed form") {
  Matrix r(1, 2), c(2, 2);
  r << 1, 0;
  c << 1, 0, 0, 1;
  const std::vector<int> t{0};
  // log(e^5 + e^0) - 5
  CHECK(contrastive_loss_value(r, t, c, 0.2) == doctest::Approx(std::log1p(std::exp(-5.0))).epsilon(1e-12));
  CHECK(contrastive_loss_value(r, t, c, 0.2) == doctest::Approx(0.00672).epsilon(1e-3));
  const std::vector<int> wrong{1};
  CHECK(contrastive_loss_value(r, wrong, c, 0.2) == doctest::Approx(std::log1p(std::exp(5.0))).epsilon(1e-12));
}

TEST_CASE("contrastive loss properties") {
  std::mt19937_64 rng(2);
  const Matrix r = oracle::random_matrix(rng, 5, 4), c = oracle::random_matrix(rng, 3, 4);
  const std::vector<int> t{0, 1, 2, 1, 0};

  SUBCASE("single story gives zero") {
    const std::vector<int> zeros(5, 0);
    CHECK(contrastive_loss_value(r, zeros, c.topRows(1), 0.2) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("invariant to positive rescaling") {
    const double base = contrastive_loss_value(r, t, c, 0.2);
    CHECK(contrastive_loss_value(3.0 * r, t, 0.5 * c, 0.2) == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("per-sample envelope") {
    for (double tau : {0.05, 0.2, 1.0}) {
      const double per = contrastive_loss_value(r, t, c, tau) / 5;
      CHECK(per >= 0.0);
      CHECK(per <= std::log(3.0) + 2.0 / tau);
    }
  }
  SUBCASE("matches a direct evaluation") {
    double expect = 0;
    for (int b = 0; b < 5; ++b) {
      double z = 0;
      for (int s = 0; s < 3; ++s) z += std::exp(num::cosine(r.row(b), c.row(s)) / 0.2);
      expect += std::log(z) - num::cosine(r.row(b), c.row(t[b])) / 0.2;
    }
    CHECK(contrastive_loss_value(r, t, c, 0.2) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(contrastive_loss_value(Matrix(0, 4), {}, c, 0.2), Error);
    CHECK_THROWS_AS(contrastive_loss_value(r, t, Matrix(0, 4), 0.2), Error);
    CHECK_THROWS_AS(contrastive_loss_value(r, t, c, 0.0), Error);
  }
}

TEST_CASE("full objective gradient matches finite differences") {
  encoder::EncoderParams params = encoder::init_params(3, kDim, 6, 2);
  std::mt19937_64 noise(4);
  params.context_bias = oracle::random_matrix(noise, 1, 6, 0.1);
  params.pool_bias = oracle::random_matrix(noise, 1, 6, 0.1);
  const WindowState w = make_window(params, 5);
  EngineConfig cfg;
  cfg.batch_size = 8;
  replay::Rng rng(6);
  const auto batch = replay::build_batch(w, cfg, rng);
  const auto stories = story_members(w);

  double loss = 0;
  const std::vector<Matrix> grads = loss_gradient(params, batch, stories, 0.2, &loss);
  CHECK(loss == doctest::Approx(evaluate_loss(params, batch, stories, 0.2)).epsilon(1e-12));

  const double h = 1e-6;
  const auto tensors = params.tensors();
  REQUIRE(grads.size() == tensors.size());
  std::mt19937_64 pick(7);
  double worst = 0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Matrix& m = *tensors[t];
    for (int trial = 0; trial < 4; ++trial) {
      const Eigen::Index i = static_cast<Eigen::Index>(pick() % static_cast<std::uint64_t>(m.size()));
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = evaluate_loss(params, batch, stories, 0.2);
      m.data()[i] = saved - h;
      const double down = evaluate_loss(params, batch, stories, 0.2);
      m.data()[i] = saved;
      const double fd = (up - down) / (2 * h);
      const double an = grads[t].data()[i];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-3, std::abs(fd) + std::abs(an)));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  encoder::EncoderParams params = encoder::init_params(8, kDim, kDim, 4);
  const encoder::EncoderParams before = params;
  WindowState w = make_window(params, 9);
  OptimizerState opt = OptimizerState::for_params(params, 0.0);
  replay::Rng rng(1);
  EngineConfig cfg;
  cfg.batch_size = 16;
  const auto batch = replay::build_batch(w, cfg, rng);
  const auto stories = story_members(w);
  train_step(batch, params, opt, stories, 0.2);
  CHECK(same_params(params, before));
  CHECK(opt.step == 1);
}

TEST_CASE("first Adam step moves each weight by at most the learning rate") {
  encoder::EncoderParams params = encoder::init_params(10, kDim, kDim, 4);
  const encoder::EncoderParams before = params;
  WindowState w = make_window(params, 11);
  OptimizerState opt = OptimizerState::for_params(params, 1e-3);
  replay::Rng rng(2);
  EngineConfig cfg;
  cfg.batch_size = 16;
  train_step(replay::build_batch(w, cfg, rng), params, opt, story_members(w), 0.2);
  const auto a = params.tensors();
  const auto b = before.tensors();
  double moved = 0;
  for (std::size_t i = 0; i < a.size(); ++i) moved = std::max(moved, (*a[i] - *b[i]).cwiseAbs().maxCoeff());
  CHECK(moved <= 1e-3 * (1 + 1e-9));
  CHECK(moved > 0.9e-3);
}

TEST_CASE("repeated steps on a fixed batch reduce the loss") {
  encoder::EncoderParams params = encoder::init_params(12, kDim, kDim, 4);
  WindowState w = make_window(params, 13);
  OptimizerState opt = OptimizerState::for_params(params, 1e-3);
  replay::Rng rng(3);
  EngineConfig cfg;
  cfg.batch_size = 32;
  const auto batch = replay::build_batch(w, cfg, rng);
  const auto stories = story_members(w);
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) losses.push_back(train_step(batch, params, opt, stories, 0.2));
  const double after = evaluate_loss(params, batch, stories, 0.2);
  CHECK(after < losses.front());
  const std::vector<double> head(losses.begin(), losses.begin() + 10), tail(losses.end() - 10, losses.end());
  CHECK(median(tail) < median(head));
}

TEST_CASE("update_epoch") {
  EngineConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 2;
  cfg.learning_rate = 1e-3;
  encoder::EncoderParams params = encoder::init_params(14, kDim, kDim, 4);
  WindowState w = make_window(params, 15);
  OptimizerState opt = OptimizerState::for_params(params, cfg.learning_rate);
  replay::Rng rng(4);

  const EpochResult r = update_epoch(w, params, opt, cfg, rng);
  CHECK_FALSE(r.skipped);
  REQUIRE(r.steps.size() == 2);
  CHECK(r.steps[0].step == 1);
  CHECK(r.steps[1].step == 2);
  CHECK(r.steps[0].n_stories == 2);
  CHECK(r.steps[0].n_articles == 6);
  CHECK(r.used_article_ids.size() == 6);
  for (const std::string& id : r.used_article_ids) CHECK(w.find(id) != nullptr);

  // the window is refreshed under the updated parameters, bit for bit
  for (const WindowArticle& a : w.articles()) {
    const encoder::EncodeOutput fresh = encoder::encode_article(*a.sentences, params);
    CHECK(a.encoded.article_repr == fresh.article_repr);
    CHECK(a.encoded.attention_importance == fresh.attention_importance);
  }
  for (const auto& [id, story] : w.stories()) {
    std::vector<RowVector> members;
    for (const std::string& m : story.in_window) members.push_back(w.find(m)->encoded.article_repr);
    CHECK(story.centroid.repr == assigner::story_representation(members));
  }

  WindowState empty(7, 1);
  CHECK(update_epoch(empty, params, opt, cfg, rng).skipped);
  cfg.epochs = 0;
  CHECK(update_epoch(w, params, opt, cfg, rng).skipped);
}

TEST_CASE("training is deterministic in the seeds") {
  EngineConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-3;
  auto run = [&] {
    encoder::EncoderParams params = encoder::init_params(16, kDim, kDim, 4);
    WindowState w = make_window(params, 17);
    OptimizerState opt = OptimizerState::for_params(params, cfg.learning_rate);
    replay::Rng rng(5);
    std::vector<double> losses;
    for (int i = 0; i < 3; ++i) losses.push_back(update_epoch(w, params, opt, cfg, rng).steps.at(0).loss);
    return std::make_pair(params, losses);
  };
  const auto a = run(), b = run();
  CHECK(same_params(a.first, b.first));
  CHECK(a.second == b.second);
}

TEST_CASE("objective errors") {
  const encoder::EncoderParams params = encoder::init_params(1, kDim, kDim, 4);
  const WindowState w = make_window(params, 2);
  const auto stories = story_members(w);
  CHECK_THROWS_AS(evaluate_loss(params, {}, stories, 0.2), Error);
  EngineConfig cfg;
  cfg.batch_size = 4;
  replay::Rng rng(1);
  const auto batch = replay::build_batch(w, cfg, rng);
  CHECK_THROWS_AS(evaluate_loss(params, batch, {}, 0.2), Error);
  std::vector<replay::TrainSample> stray = batch;
  stray[0].pseudo_story_id = 99;
  try {
    evaluate_loss(params, stray, stories, 0.2);
    FAIL("expected NoStories");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoStories);
  }
}
