#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scstory/domain.hpp"
#include "scstory/metrics.hpp"
#include "scstory/providers.hpp"

namespace scstory::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kNumericError = 3 };

enum class LogLevel { Error, Warn, Info, Debug };

/// Accepts error|warn|info|debug; throws BadConfig otherwise.
LogLevel parse_log_level(std::string_view name);

class Logger {
 public:
  Logger(std::ostream& out, LogLevel level) : out_(&out), level_(level) {}
  void error(const std::string& msg) const { write(LogLevel::Error, "error", msg); }
  void warn(const std::string& msg) const { write(LogLevel::Warn, "warn", msg); }
  void info(const std::string& msg) const { write(LogLevel::Info, "info", msg); }
  void debug(const std::string& msg) const { write(LogLevel::Debug, "debug", msg); }

 private:
  void write(LogLevel at, const char* tag, const std::string& msg) const;
  std::ostream* out_;
  LogLevel level_;
};

struct RunConfig {
  EngineConfig engine;
  std::optional<std::filesystem::path> articles;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> synthetic_spec;
  std::filesystem::path output_dir = "scstory-out";
  bool eval = true;
  bool embedding_diagnostics = true;
  bool corpus_diagnostics = false;  // alignment/uniformity over all articles with the final encoder
  bool csv = false;
};

/// "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS[.frac]]" with optional "Z" or
/// "+HH:MM"/"-HH:MM". Throws BadFile.
Timestamp parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp ts);

/// JSON-lines {id, published_at, title, sentences, story_label?}. Errors
/// name `source` and the line number.
std::vector<Article> read_articles(std::istream& in, const std::string& source = "articles");
std::vector<Article> load_articles(const std::filesystem::path& path);
/// Writes articles with placeholder sentence text (for synthetic streams).
void write_articles(std::ostream& out, const std::vector<Article>& articles);

/// Loads a synthetic spec from a key = value file (keys as `synth` flags).
providers::SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

struct LoggedAssignment {
  std::string article_id;
  StoryId story_id = 0;
  double confidence = 0.0;
  bool is_new_story = false;
  std::size_t window_index = 0;
};

std::vector<LoggedAssignment> read_assignment_log(std::istream& in);

/// Rebuilds every window from the assignment log and the articles' days and
/// scores it. Throws MalformedLog for ids missing from `truth` or unlabelled.
std::vector<metrics::WindowScore> evaluate_log(const std::vector<LoggedAssignment>& log,
                                               const std::vector<Article>& truth, int window_days, int slide_days);

int run(const RunConfig& config, const Logger& log);
int run_cli(int argc, const char* const* argv);

}  // namespace scstory::cli
