#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scstory {

enum class Errc {
  // stream validation
  DuplicateId,
  NonChronological,
  EmptyArticle,
  // numerical kernel
  AllMasked,
  DoubleBackward,
  DetachedNode,
  ShapeMismatch,
  ZeroVector,
  // encoder
  BadDims,
  // assigner / replay / trainer
  EmptyStory,
  EmptyWindow,
  EmptyBatch,
  NoStories,
  // providers / files
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  DuplicateArticle,
  NonFiniteValue,
  ProviderMiss,
  BadFile,
  // metrics
  LengthMismatch,
  NoPositivePairs,
  TooFew,
  // cli
  MalformedLog,
  BadConfig,
};

std::string_view errc_name(Errc code) noexcept;

/// Exception type for every recoverable failure in the engine. The code is
/// stable and tested; the message names the offending record when there is one.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace scstory
