#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "scstory/domain.hpp"

namespace scstory::providers {

/// Source of initial sentence embeddings for an article.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  virtual bool contains(const std::string& article_id) const = 0;
  /// First min(n, L) sentence rows, zero-padded to L. Throws ProviderMiss.
  virtual SentenceMatrix get(const std::string& article_id, int L) const = 0;
};

/// Provider backed by an in-memory table; also the result of loading an
/// embedding file. Records keep insertion order for writing.
class InMemoryProvider final : public EmbeddingProvider {
 public:
  InMemoryProvider() = default;
  explicit InMemoryProvider(int dim) : dim_(dim) {}

  /// Adds an n x dim record; rejects duplicates, empty records and
  /// non-finite values.
  void add(std::string article_id, Matrix sentences);

  int dim() const override { return dim_; }
  bool contains(const std::string& article_id) const override { return index_.count(article_id) > 0; }
  SentenceMatrix get(const std::string& article_id, int L) const override;

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Matrix& sentences(const std::string& article_id) const;

 private:
  int dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<Matrix> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Embedding file: magic "SCEM", u32 version, u32 dim, u64 count, then per
// record: u32 byte length + UTF-8 article id, u32 n_sentences, and
// n_sentences x dim little-endian float32 values, row-major.
inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

void write_embeddings(std::ostream& out, const InMemoryProvider& provider);
void save(const std::filesystem::path& path, const InMemoryProvider& provider);
InMemoryProvider read_embeddings(std::istream& in);
InMemoryProvider load(const std::filesystem::path& path);

/// Parameters of a synthetic labelled stream: unit topic anchors with a
/// common pairwise angle, sentences = anchor + isotropic Gaussian noise.
struct SyntheticSpec {
  int n_topics = 5;
  double topic_separation_deg = 90.0;
  double noise_sigma = 0.05;
  int min_sentences = 3;
  int max_sentences = 8;
  std::uint64_t seed = 0;
  int dim = 32;
  int articles_per_day = 40;
  int n_days = 30;
  Timestamp start_time = 1704067200;  // 2024-01-01T00:00:00Z
  int topic_lifespan_days = 0;        // 0: every topic spans the whole stream

  void validate() const;
};

struct SyntheticStream {
  std::vector<Article> articles;
  InMemoryProvider provider;
  Matrix anchors;  // n_topics x dim
};

/// Deterministic in spec.seed. Values are rounded to float32 so that writing
/// the provider to disk and reading it back is lossless.
SyntheticStream synthesize(const SyntheticSpec& spec);

/// n x dim unit rows with pairwise cosine cos(angle); needs cos >= -1/(n-1).
Matrix topic_anchors(int n_topics, int dim, double separation_deg, std::uint64_t seed);

}  // namespace scstory::providers
