#include "scstory/providers.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"

namespace scstory::providers {

void InMemoryProvider::add(std::string article_id, Matrix sentences) {
  if (dim_ == 0) dim_ = static_cast<int>(sentences.cols());
  if (sentences.cols() != dim_)
    throw Error(Errc::BadDims, "article " + article_id + " has dim " + std::to_string(sentences.cols()));
  if (sentences.rows() == 0) throw Error(Errc::EmptyArticle, "article " + article_id);
  if (!sentences.allFinite()) throw Error(Errc::NonFiniteValue, "article " + article_id);
  if (index_.count(article_id)) throw Error(Errc::DuplicateArticle, "article " + article_id);
  index_.emplace(article_id, ids_.size());
  ids_.push_back(std::move(article_id));
  rows_.push_back(std::move(sentences));
}

const Matrix& InMemoryProvider::sentences(const std::string& article_id) const {
  auto it = index_.find(article_id);
  if (it == index_.end()) throw Error(Errc::ProviderMiss, "article " + article_id);
  return rows_[it->second];
}

SentenceMatrix InMemoryProvider::get(const std::string& article_id, int L) const {
  return SentenceMatrix(article_id, sentences(article_id), L);
}

void write_embeddings(std::ostream& out, const InMemoryProvider& provider) {
  out.write("SCEM", 4);
  io::write_le<std::uint32_t>(out, kEmbeddingFileVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(provider.dim()));
  io::write_le<std::uint64_t>(out, provider.size());
  for (const std::string& id : provider.ids()) {
    const Matrix& m = provider.sentences(id);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.size(); ++i) io::write_f32(out, m.data()[i]);
  }
}

void save(const std::filesystem::path& path, const InMemoryProvider& provider) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::BadFile, "cannot open " + path.string() + " for writing");
  write_embeddings(out, provider);
  if (!out) throw Error(Errc::BadFile, "write failed: " + path.string());
}

InMemoryProvider read_embeddings(std::istream& in) {
  io::expect_magic(in, "SCEM");
  const auto version = io::read_le<std::uint32_t>(in, "version");
  if (version != kEmbeddingFileVersion)
    throw Error(Errc::UnsupportedVersion, "embedding file version " + std::to_string(version));
  const auto dim = io::read_le<std::uint32_t>(in, "dim");
  const auto count = io::read_le<std::uint64_t>(in, "count");
  if (dim == 0 || dim > (1u << 20)) throw Error(Errc::BadDims, "implausible dim " + std::to_string(dim));

  InMemoryProvider provider(static_cast<int>(dim));
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::string where = "record " + std::to_string(r);
    const auto id_len = io::read_le<std::uint32_t>(in, "article id length");
    if (id_len > (1u << 16)) throw Error(Errc::BadFile, where + ": implausible id length");
    std::string id(id_len, '\0');
    io::read_exact(in, id.data(), id_len, "article id");
    const auto n = io::read_le<std::uint32_t>(in, "sentence count");
    if (n == 0) throw Error(Errc::EmptyArticle, where + " (" + id + ")");
    if (n > (1u << 20)) throw Error(Errc::BadFile, where + ": implausible sentence count");
    Matrix m(n, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const float v = io::read_f32(in, "sentence values");
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, where + " (" + id + ")");
      m.data()[i] = v;
    }
    if (provider.contains(id)) throw Error(Errc::DuplicateArticle, where + " (" + id + ")");
    provider.add(std::move(id), std::move(m));
  }
  return provider;
}

InMemoryProvider load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::BadFile, "cannot open " + path.string());
  return read_embeddings(in);
}

}  // namespace scstory::providers
