#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scstory/metrics.hpp"

using namespace scstory;
using namespace scstory::metrics;
using oracle::Labels;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return Errc::BadConfig;
}

Labels random_labels(std::mt19937_64& rng, int n, int k) {
  std::uniform_int_distribution<int> pick(0, k - 1);
  Labels l(static_cast<std::size_t>(n));
  for (auto& x : l) x = pick(rng);
  return l;
}

}  // namespace

TEST_CASE("B-cubed worked example") {
  // predicted {0,1,2}{3,4}, truth {0,1}{2,3,4}
  const Labels pred{0, 0, 0, 1, 1}, truth{0, 0, 1, 1, 1};
  const BCubed b = b_cubed(pred, truth);
  CHECK(b.precision == doctest::Approx((2.0 / 3 + 2.0 / 3 + 1.0 / 3 + 1 + 1) / 5));
  CHECK(b.recall == doctest::Approx((1 + 1 + 1.0 / 3 + 2.0 / 3 + 2.0 / 3) / 5));
  CHECK(b.f1 == doctest::Approx(2 * b.precision * b.recall / (b.precision + b.recall)));

  const BCubed perfect = b_cubed(Labels{4, 4, 9}, Labels{1, 1, 2});
  CHECK(perfect.f1 == 1.0);
  const BCubed lumped = b_cubed(Labels{0, 0, 0, 0}, Labels{0, 1, 2, 3});
  CHECK(lumped.precision == doctest::Approx(0.25));
  CHECK(lumped.recall == 1.0);
}

TEST_CASE("metrics agree with brute-force oracles") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 12;
    const Labels pred = random_labels(rng, n, 1 + trial % 4), truth = random_labels(rng, n, 1 + trial % 5);
    double p, r, f;
    oracle::bf_b3(pred, truth, p, r, f);
    const BCubed b = b_cubed(pred, truth);
    CHECK(b.precision == doctest::Approx(p).epsilon(1e-12));
    CHECK(b.recall == doctest::Approx(r).epsilon(1e-12));
    CHECK(b.f1 == doctest::Approx(f).epsilon(1e-12));
    CHECK(ari(pred, truth) == doctest::Approx(oracle::bf_ari(pred, truth)).epsilon(1e-10));
    CHECK(ami(pred, truth) == doctest::Approx(oracle::bf_ami(pred, truth)).epsilon(1e-8));
  }
}

TEST_CASE("frozen reference values") {
  struct Case {
    Labels pred, truth;
    double ari, ami;
  };
  const std::vector<Case> cases{
      {{0, 0, 1, 1, 2, 2}, {0, 0, 0, 1, 1, 1}, 0.24242424242424243, 0.2987924581708901},
      {{0, 1, 2, 0, 1, 2, 0, 1}, {0, 0, 0, 1, 1, 1, 2, 2}, -0.3333333333333333, -0.42118593138269605},
      {{5, 5, 5, 7, 7, 9, 9, 9, 9, 1}, {1, 1, 2, 2, 3, 3, 3, 3, 1, 2}, 0.16, 0.15561179566819353},
  };
  for (const Case& c : cases) {
    CHECK(ari(c.pred, c.truth) == doctest::Approx(c.ari).epsilon(1e-12));
    CHECK(ami(c.pred, c.truth) == doctest::Approx(c.ami).epsilon(1e-10));
    CHECK(ari(c.truth, c.pred) == doctest::Approx(c.ari).epsilon(1e-12));
    CHECK(ami(c.truth, c.pred) == doctest::Approx(c.ami).epsilon(1e-10));
  }
}

TEST_CASE("information quantities") {
  const Labels a{0, 0, 1, 1}, b{0, 1, 0, 1};
  CHECK(entropy(a) == doctest::Approx(std::log(2.0)));
  CHECK(entropy(Labels{3, 3, 3}) == 0.0);
  CHECK(mutual_information(a, a) == doctest::Approx(std::log(2.0)));
  CHECK(mutual_information(a, b) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(expected_mutual_information(a, b) >= 0.0);
}

TEST_CASE("adjusted scores on identical and independent partitions") {
  const Labels x{0, 0, 1, 1, 2};
  const Labels renamed{7, 7, 3, 3, 9};
  CHECK(ari(x, renamed) == doctest::Approx(1.0));
  CHECK(ami(x, renamed) == doctest::Approx(1.0));
  CHECK(ari(Labels{0, 0, 0}, Labels{1, 1, 1}) == 1.0);
  CHECK(ari(Labels{0, 1, 2}, Labels{5, 6, 7}) == 1.0);
  CHECK(ami(Labels{0, 1, 2}, Labels{5, 6, 7}) == 1.0);

  std::mt19937_64 rng(2);
  const Labels p = random_labels(rng, 200, 5), t = random_labels(rng, 200, 5);
  CHECK(std::abs(ami(p, t)) < 0.1);
  CHECK(std::abs(ari(p, t)) < 0.1);
}

TEST_CASE("label errors") {
  CHECK(code_of([] { ari(Labels{0, 1}, Labels{0}); }) == Errc::LengthMismatch);
  CHECK(code_of([] { ami(Labels{0, 1}, Labels{0}); }) == Errc::LengthMismatch);
  CHECK(code_of([] { b_cubed(Labels{0}, Labels{}); }) == Errc::LengthMismatch);
  CHECK(code_of([] { ari(Labels{0}, Labels{0}); }) == Errc::TooFew);
}

TEST_CASE("alignment and uniformity") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = oracle::random_matrix(rng, 6 + trial % 5, 4);
    const Labels labels = random_labels(rng, static_cast<int>(x.rows()), 2);
    CHECK(uniformity(x) == doctest::Approx(oracle::bf_uniformity(x)).epsilon(1e-12));
    if (labels[0] == labels[1] || labels[0] == labels[2] || labels[1] == labels[2])
      CHECK(alignment(x, labels) == doctest::Approx(oracle::bf_alignment(x, labels)).epsilon(1e-12));
  }

  // antipodal pair: squared distance 4
  Matrix pair(2, 2);
  pair << 1, 0, -3, 0;
  CHECK(alignment(pair, Labels{1, 1}) == doctest::Approx(4.0));
  CHECK(uniformity(pair) == doctest::Approx(-8.0));
  Matrix same(3, 2);
  same << 1, 1, 2, 2, 5, 5;
  CHECK(alignment(same, Labels{0, 0, 0}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(uniformity(same) == doctest::Approx(0.0).epsilon(1e-15));

  CHECK(code_of([&] { alignment(pair, Labels{1, 2}); }) == Errc::NoPositivePairs);
  CHECK(code_of([&] { uniformity(pair.topRows(1)); }) == Errc::TooFew);
  Matrix zero = Matrix::Zero(2, 2);
  CHECK(code_of([&] { uniformity(zero); }) == Errc::ZeroVector);
}

TEST_CASE("window scores and the prequential average") {
  const Labels pred{0, 0, 1}, truth{0, 0, 1};
  Matrix reprs(3, 2);
  reprs << 1, 0, 1, 0.1, 0, 1;
  const WindowScore w = score_window(4, pred, truth, reprs);
  CHECK(w.window_index == 4);
  CHECK(w.b3_f1 == 1.0);
  CHECK(w.ari == doctest::Approx(1.0));
  CHECK(w.n_articles == 3);
  CHECK(w.n_pred_stories == 2);
  CHECK(w.n_true_stories == 2);
  REQUIRE(w.alignment);
  REQUIRE(w.uniformity);

  const WindowScore no_pairs = score_window(5, Labels{0, 1}, Labels{0, 1}, reprs.topRows(2));
  CHECK_FALSE(no_pairs.alignment);
  CHECK(no_pairs.uniformity);
  const WindowScore single = score_window(6, Labels{3}, Labels{8}, Matrix());
  CHECK(single.ari == 1.0);
  CHECK(single.ami == 1.0);
  CHECK_FALSE(single.uniformity);

  const std::vector<WindowScore> all{w, no_pairs, single};
  const Summary s = prequential_average(all);
  CHECK(s.n_windows == 3);
  CHECK(s.b3_f1 == doctest::Approx((w.b3_f1 + no_pairs.b3_f1 + single.b3_f1) / 3));
  CHECK(s.ari == doctest::Approx((w.ari + no_pairs.ari + single.ari) / 3));
  REQUIRE(s.alignment);
  CHECK(*s.alignment == doctest::Approx(*w.alignment));
  REQUIRE(s.uniformity);
  CHECK(*s.uniformity == doctest::Approx((*w.uniformity + *no_pairs.uniformity) / 2));
}
