#include <doctest.h>

#include "scstory/domain.hpp"

using namespace scstory;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an scstory::Error");
  return Errc::BadConfig;
}

Article article(std::string id, Timestamp ts, int n = 3) {
  Article a;
  a.id = std::move(id);
  a.published_at = ts;
  a.sentence_count = n;
  return a;
}

}  // namespace

TEST_CASE("day index floors toward negative infinity") {
  CHECK(day_of(0) == 0);
  CHECK(day_of(86399) == 0);
  CHECK(day_of(86400) == 1);
  CHECK(day_of(-1) == -1);
  CHECK(day_of(-86400) == -1);
  CHECK(day_of(-86401) == -2);
  CHECK(article("x", 1704067200).day() == 19723);
}

TEST_CASE("sentence matrix pads and truncates keeping the first rows") {
  Matrix s(3, 2);
  s << 1, 2, 3, 4, 5, 6;
  SentenceMatrix m("a", s, 5);
  CHECK(m.valid_count() == 3);
  CHECK(m.max_sentences() == 5);
  CHECK(m.dim() == 2);
  CHECK(m.mask() == std::vector<bool>{true, true, true, false, false});
  CHECK(m.rows().topRows(3) == s);
  CHECK(m.rows().bottomRows(2).isZero(0));

  Matrix long_article(60, 2);
  for (int i = 0; i < 60; ++i) long_article.row(i) << i, -i;
  SentenceMatrix t("b", long_article, 50);
  CHECK(t.valid_count() == 50);
  CHECK(t.rows() == long_article.topRows(50));

  CHECK(code_of([] { SentenceMatrix("e", Matrix(0, 4), 5); }) == Errc::EmptyArticle);
  CHECK(code_of([&] { SentenceMatrix("e", s, 0); }) == Errc::BadDims);
}

TEST_CASE("from_padded enforces the prefix mask and zeroes padding") {
  Matrix rows = Matrix::Constant(4, 2, 7.0);
  SentenceMatrix m = SentenceMatrix::from_padded("p", rows, {true, true, false, false});
  CHECK(m.valid_count() == 2);
  CHECK(m.rows().bottomRows(2).isZero(0));
  CHECK(m.valid_rows().rows() == 2);

  CHECK(code_of([&] { SentenceMatrix::from_padded("p", rows, {true, false, true, false}); }) == Errc::ShapeMismatch);
  CHECK(code_of([&] { SentenceMatrix::from_padded("p", rows, {false, false, false, false}); }) == Errc::AllMasked);
  CHECK(code_of([&] { SentenceMatrix::from_padded("p", rows, {true, true}); }) == Errc::ShapeMismatch);
}

TEST_CASE("validate_stream reports the first violation") {
  CHECK_FALSE(validate_stream({article("a", 10), article("b", 11)}).has_value());
  CHECK_FALSE(validate_stream({article("a", 10), article("b", 10)}).has_value());

  auto dup = validate_stream({article("a", 10), article("a", 11)});
  REQUIRE(dup);
  CHECK(dup->code == Errc::DuplicateId);
  CHECK(dup->article_id == "a");

  auto back = validate_stream({article("a", 10), article("b", 9)});
  REQUIRE(back);
  CHECK(back->code == Errc::NonChronological);
  CHECK(back->article_id == "b");

  auto empty = validate_stream({article("a", 10), article("b", 12, 0)});
  REQUIRE(empty);
  CHECK(empty->code == Errc::EmptyArticle);

  CHECK(code_of([] { require_valid_stream({article("a", 10), article("a", 11)}); }) == Errc::DuplicateId);
}

TEST_CASE("engine config defaults and validation") {
  EngineConfig c;
  CHECK(c.window_days == 7);
  CHECK(c.slide_days == 1);
  CHECK(c.max_sentences == 50);
  CHECK(c.n_heads == 4);
  CHECK(c.delta == 0.5);
  CHECK(c.tau == 0.2);
  CHECK(c.epochs == 1);
  CHECK(c.batch_size == 256);
  CHECK(c.learning_rate == 1e-5);
  CHECK_NOTHROW(c.validate());

  c.embed_dim = 32;
  CHECK(c.resolved_hidden_dim() == 32);
  c.hidden_dim = 16;
  CHECK(c.resolved_hidden_dim() == 16);

  auto bad = [](auto mutate) {
    EngineConfig x;
    mutate(x);
    return code_of([&] { x.validate(); });
  };
  CHECK(bad([](EngineConfig& x) { x.delta = 1.0; }) == Errc::BadConfig);
  CHECK(bad([](EngineConfig& x) { x.delta = 0.0; }) == Errc::BadConfig);
  CHECK(bad([](EngineConfig& x) { x.tau = 0.0; }) == Errc::BadConfig);
  CHECK(bad([](EngineConfig& x) { x.embed_dim = 10; }) == Errc::BadConfig);
  CHECK(bad([](EngineConfig& x) { x.batch_size = 255; }) == Errc::BadConfig);
  CHECK(bad([](EngineConfig& x) { x.slide_days = 8; }) == Errc::BadConfig);
  CHECK(bad([](EngineConfig& x) { x.cold_start_k = 0; }) == Errc::BadConfig);
}

TEST_CASE("error messages carry the code name") {
  const Error e(Errc::ProviderMiss, "article a1");
  CHECK(std::string(e.what()) == "ProviderMiss: article a1");
  CHECK(errc_name(Errc::NonChronological) == "NonChronological");
}
