#include "scstory/domain.hpp"

#include <algorithm>
#include <unordered_set>

namespace scstory {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::NonChronological: return "NonChronological";
    case Errc::EmptyArticle: return "EmptyArticle";
    case Errc::AllMasked: return "AllMasked";
    case Errc::DoubleBackward: return "DoubleBackward";
    case Errc::DetachedNode: return "DetachedNode";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::BadDims: return "BadDims";
    case Errc::EmptyStory: return "EmptyStory";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::NoStories: return "NoStories";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DuplicateArticle: return "DuplicateArticle";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::ProviderMiss: return "ProviderMiss";
    case Errc::BadFile: return "BadFile";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NoPositivePairs: return "NoPositivePairs";
    case Errc::TooFew: return "TooFew";
    case Errc::MalformedLog: return "MalformedLog";
    case Errc::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

SentenceMatrix::SentenceMatrix(std::string article_id, const Matrix& sentences, int L)
    : article_id_(std::move(article_id)) {
  if (L < 1) throw Error(Errc::BadDims, "L must be >= 1");
  if (sentences.rows() < 1) throw Error(Errc::EmptyArticle, article_id_);
  valid_ = static_cast<int>(std::min<Eigen::Index>(sentences.rows(), L));
  rows_ = Matrix::Zero(L, sentences.cols());
  rows_.topRows(valid_) = sentences.topRows(valid_);
}

SentenceMatrix SentenceMatrix::from_padded(std::string article_id, Matrix rows,
                                           const std::vector<bool>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != rows.rows())
    throw Error(Errc::ShapeMismatch, "mask length differs from row count");
  const auto valid = static_cast<int>(std::count(mask.begin(), mask.end(), true));
  if (valid == 0) throw Error(Errc::AllMasked, article_id);
  for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
    if (mask[i] != (i < valid)) throw Error(Errc::ShapeMismatch, "mask is not a true-prefix");
  }
  SentenceMatrix out;
  out.article_id_ = std::move(article_id);
  out.rows_ = std::move(rows);
  out.valid_ = valid;
  out.rows_.bottomRows(out.rows_.rows() - valid).setZero();
  return out;
}

std::vector<bool> SentenceMatrix::mask() const {
  std::vector<bool> m(static_cast<std::size_t>(rows_.rows()), false);
  std::fill(m.begin(), m.begin() + valid_, true);
  return m;
}

void EngineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::BadConfig, msg); };
  if (window_days < 1) fail("window_days must be >= 1");
  if (slide_days < 1 || slide_days > window_days) fail("slide_days must be in [1, window_days]");
  if (max_sentences < 1) fail("L must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must be in (0, 1)");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (n_heads < 1) fail("n_heads must be >= 1");
  if (embed_dim > 0 && embed_dim % n_heads != 0) fail("h_e must be divisible by n_heads");
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 2 || batch_size % 2 != 0) fail("batch_size must be even and >= 2");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (cold_start_k && *cold_start_k < 1) fail("cold_start_k must be >= 1");
}

std::optional<StreamViolation> validate_stream(const std::vector<Article>& articles) {
  std::unordered_set<std::string> seen;
  seen.reserve(articles.size());
  for (std::size_t i = 0; i < articles.size(); ++i) {
    const Article& a = articles[i];
    if (!seen.insert(a.id).second) return StreamViolation{Errc::DuplicateId, a.id};
    if (i > 0 && a.published_at < articles[i - 1].published_at)
      return StreamViolation{Errc::NonChronological, a.id};
    if (a.sentence_count < 1) return StreamViolation{Errc::EmptyArticle, a.id};
  }
  return std::nullopt;
}

void require_valid_stream(const std::vector<Article>& articles) {
  if (auto v = validate_stream(articles)) throw Error(v->code, "article " + v->article_id);
}

}  // namespace scstory
