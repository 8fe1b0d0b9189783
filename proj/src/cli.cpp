#include "scstory/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "scstory/encoder.hpp"
#include "scstory/stream.hpp"

namespace scstory::cli {
namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;  // output records keep field order

// ---- logging ----

LogLevel parse_log_level(std::string_view name) {
  if (name == "error") return LogLevel::Error;
  if (name == "warn") return LogLevel::Warn;
  if (name == "info") return LogLevel::Info;
  if (name == "debug") return LogLevel::Debug;
  throw Error(Errc::BadConfig, "unknown log level '" + std::string(name) + "'");
}

void Logger::write(LogLevel at, const char* tag, const std::string& msg) const {
  if (static_cast<int>(at) <= static_cast<int>(level_)) *out_ << "[" << tag << "] " << msg << '\n';
}

// ---- timestamps ----

namespace {

int digits(std::string_view s, std::size_t& pos, int n, std::string_view text) {
  int v = 0;
  for (int i = 0; i < n; ++i, ++pos) {
    if (pos >= s.size() || s[pos] < '0' || s[pos] > '9')
      throw Error(Errc::BadFile, "malformed timestamp '" + std::string(text) + "'");
    v = v * 10 + (s[pos] - '0');
  }
  return v;
}

void expect_char(std::string_view s, std::size_t& pos, char c, std::string_view text) {
  if (pos >= s.size() || s[pos] != c)
    throw Error(Errc::BadFile, "malformed timestamp '" + std::string(text) + "'");
  ++pos;
}

}  // namespace

Timestamp parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  std::size_t pos = 0;
  const int y = digits(text, pos, 4, text);
  expect_char(text, pos, '-', text);
  const int mo = digits(text, pos, 2, text);
  expect_char(text, pos, '-', text);
  const int d = digits(text, pos, 2, text);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(Errc::BadFile, "invalid date '" + std::string(text) + "'");
  Timestamp secs = sys_days{ymd}.time_since_epoch().count() * kSecondsPerDay;
  if (pos == text.size()) return secs;

  if (text[pos] != 'T' && text[pos] != ' ') throw Error(Errc::BadFile, "malformed timestamp '" + std::string(text) + "'");
  ++pos;
  const int hh = digits(text, pos, 2, text);
  expect_char(text, pos, ':', text);
  const int mm = digits(text, pos, 2, text);
  int ss = 0;
  if (pos < text.size() && text[pos] == ':') {
    ++pos;
    ss = digits(text, pos, 2, text);
    if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
      ++pos;
      const std::size_t start = pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
      if (pos == start) throw Error(Errc::BadFile, "malformed timestamp '" + std::string(text) + "'");
    }
  }
  if (hh > 23 || mm > 59 || ss > 60) throw Error(Errc::BadFile, "invalid time '" + std::string(text) + "'");
  secs += hh * 3600 + mm * 60 + ss;
  if (pos == text.size()) return secs;
  if (text[pos] == 'Z' && pos + 1 == text.size()) return secs;
  if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '+' ? 1 : -1;
    ++pos;
    const int oh = digits(text, pos, 2, text);
    if (pos < text.size() && text[pos] == ':') ++pos;
    const int om = digits(text, pos, 2, text);
    if (pos == text.size()) return secs - sign * (oh * 3600 + om * 60);
  }
  throw Error(Errc::BadFile, "malformed timestamp '" + std::string(text) + "'");
}

std::string format_iso8601(Timestamp ts) {
  using namespace std::chrono;
  const DayIndex days = day_of(ts);
  const Timestamp rem = ts - days * kSecondsPerDay;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
  return buf;
}

// ---- articles ----

std::vector<Article> read_articles(std::istream& in, const std::string& source) {
  std::vector<Article> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      Article a;
      a.id = j.at("id").get<std::string>();
      const json& t = j.at("published_at");
      a.published_at = t.is_number_integer() ? t.get<Timestamp>() : parse_iso8601(t.get<std::string>());
      const json& s = j.at("sentences");
      if (!s.is_array()) throw Error(Errc::BadFile, "sentences must be an array");
      a.sentence_count = static_cast<int>(s.size());
      if (a.sentence_count == 0) throw Error(Errc::EmptyArticle, "article " + a.id + " has no sentences");
      if (auto it = j.find("story_label"); it != j.end() && !it->is_null())
        a.true_story_label = it->is_string() ? it->get<std::string>() : it->dump();
      out.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw Error(Errc::BadFile, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return out;
}

std::vector<Article> load_articles(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::BadFile, "cannot open " + path.string());
  return read_articles(in, path.string());
}

void write_articles(std::ostream& out, const std::vector<Article>& articles) {
  for (const Article& a : articles) {
    ojson j;
    j["id"] = a.id;
    j["published_at"] = format_iso8601(a.published_at);
    j["title"] = "";
    ojson sentences = ojson::array();
    for (int s = 0; s < a.sentence_count; ++s) sentences.push_back("sentence " + std::to_string(s + 1));
    j["sentences"] = std::move(sentences);
    if (a.true_story_label) j["story_label"] = *a.true_story_label;
    out << j.dump() << '\n';
  }
}

// ---- option groups shared by several commands ----

namespace {

void add_spec_options(CLI::App& app, providers::SyntheticSpec& spec) {
  app.add_option("--topics", spec.n_topics, "Number of topics")->capture_default_str();
  app.add_option("--separation-deg", spec.topic_separation_deg, "Pairwise angle between topic anchors")
      ->capture_default_str();
  app.add_option("--noise-sigma", spec.noise_sigma, "Per-coordinate Gaussian noise")->capture_default_str();
  app.add_option("--min-sentences", spec.min_sentences)->capture_default_str();
  app.add_option("--max-sentences", spec.max_sentences)->capture_default_str();
  app.add_option("--dim", spec.dim, "Sentence embedding dimension")->capture_default_str();
  app.add_option("--articles-per-day", spec.articles_per_day)->capture_default_str();
  app.add_option("--days", spec.n_days)->capture_default_str();
  app.add_option("--seed", spec.seed)->capture_default_str();
  app.add_option("--start-time", spec.start_time, "Unix seconds of day 0")->capture_default_str();
  app.add_option("--topic-lifespan-days", spec.topic_lifespan_days, "0 keeps every topic alive throughout")
      ->capture_default_str();
}

void add_engine_options(CLI::App& app, EngineConfig& c, int& cold_start_k, bool& no_train) {
  app.add_option("--window-days", c.window_days)->capture_default_str();
  app.add_option("--slide-days", c.slide_days)->capture_default_str();
  app.add_option("--max-sentences", c.max_sentences, "Sentences kept per article (L)")->capture_default_str();
  app.add_option("--embed-dim", c.embed_dim, "0 = take from the embeddings")->capture_default_str();
  app.add_option("--hidden-dim", c.hidden_dim, "0 = same as embed-dim")->capture_default_str();
  app.add_option("--n-heads", c.n_heads)->capture_default_str();
  app.add_option("--delta", c.delta, "New-story confidence threshold")->capture_default_str();
  app.add_option("--tau", c.tau, "Contrastive temperature")->capture_default_str();
  app.add_option("--epochs", c.epochs)->capture_default_str();
  app.add_option("--batch-size", c.batch_size)->capture_default_str();
  app.add_option("--learning-rate", c.learning_rate)->capture_default_str();
  app.add_option("--seed", c.rng_seed)->capture_default_str();
  app.add_option("--cold-start-k", cold_start_k, "Fixed cold-start seed count (0 = adaptive)")->capture_default_str();
  app.add_flag("--no-train", no_train, "Keep the encoder at its initial weights");
}

std::string config_echo(const EngineConfig& c) {
  std::ostringstream os;
  os << "window_days=" << c.window_days << " slide_days=" << c.slide_days << " max_sentences=" << c.max_sentences
     << " embed_dim=" << c.embed_dim << " hidden_dim=" << c.resolved_hidden_dim() << " n_heads=" << c.n_heads
     << " delta=" << c.delta << " tau=" << c.tau << " epochs=" << c.epochs << " batch_size=" << c.batch_size
     << " learning_rate=" << c.learning_rate << " seed=" << c.rng_seed
     << " cold_start_k=" << (c.cold_start_k ? std::to_string(*c.cold_start_k) : "adaptive")
     << " train=" << (c.train ? "true" : "false");
  return os.str();
}

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson score_json(const metrics::WindowScore& s) {
  return ojson{{"window_index", s.window_index},   {"n_articles", s.n_articles},
              {"n_pred_stories", s.n_pred_stories}, {"n_true_stories", s.n_true_stories},
              {"b3_precision", s.b3_precision},   {"b3_recall", s.b3_recall},
              {"b3_f1", s.b3_f1},                 {"ari", s.ari},
              {"ami", s.ami},                     {"alignment", optional_json(s.alignment)},
              {"uniformity", optional_json(s.uniformity)}};
}

ojson summary_json(const metrics::Summary& s) {
  return ojson{{"summary", true},
              {"n_windows", s.n_windows},
              {"b3_precision", s.b3_precision},
              {"b3_recall", s.b3_recall},
              {"b3_f1", s.b3_f1},
              {"ari", s.ari},
              {"ami", s.ami},
              {"alignment", optional_json(s.alignment)},
              {"uniformity", optional_json(s.uniformity)}};
}

void write_metrics(std::ostream& out, const std::vector<metrics::WindowScore>& scores,
                   const std::optional<metrics::Summary>& summary, const ojson& extra = ojson::object()) {
  for (const metrics::WindowScore& s : scores) out << score_json(s).dump() << '\n';
  if (summary) {
    ojson j = summary_json(*summary);
    for (const auto& [k, v] : extra.items()) j[k] = v;
    out << j.dump() << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<metrics::WindowScore>& scores) {
  out << "window_index,n_articles,n_pred_stories,n_true_stories,b3_precision,b3_recall,b3_f1,ari,ami,alignment,"
         "uniformity\n";
  out << std::setprecision(17);
  for (const metrics::WindowScore& s : scores) {
    out << s.window_index << ',' << s.n_articles << ',' << s.n_pred_stories << ',' << s.n_true_stories << ','
        << s.b3_precision << ',' << s.b3_recall << ',' << s.b3_f1 << ',' << s.ari << ',' << s.ami << ',';
    if (s.alignment) out << *s.alignment;
    out << ',';
    if (s.uniformity) out << *s.uniformity;
    out << '\n';
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::BadFile, "cannot open " + path.string() + " for writing");
  return out;
}

/// Streams assignment and training records as they happen.
class LogWriter final : public stream::EngineObserver {
 public:
  LogWriter(std::ostream& assignments, std::ostream& training, const Logger& log)
      : assignments_(assignments), training_(training), log_(log) {}

  void on_assigned(std::size_t window_index, const Assignment& a) override {
    assignments_ << ojson{{"article_id", a.article_id},
                         {"story_id", a.story_id},
                         {"confidence", a.confidence},
                         {"is_new_story", a.is_new_story},
                         {"window_index", window_index}}
                        .dump()
                 << '\n';
  }
  void on_trained(std::size_t window_index, const trainer::EpochResult& r) override {
    for (const trainer::StepRecord& s : r.steps) {
      training_ << ojson{{"window_index", window_index},
                        {"step", s.step},
                        {"loss", s.loss},
                        {"n_stories", s.n_stories},
                        {"n_articles", s.n_articles}}
                       .dump()
                << '\n';
      log_.debug("window " + std::to_string(window_index) + " step " + std::to_string(s.step) +
                 " loss " + std::to_string(s.loss));
    }
  }

 private:
  std::ostream& assignments_;
  std::ostream& training_;
  const Logger& log_;
};

bool numerical(Errc c) { return c == Errc::NonFiniteValue || c == Errc::ZeroVector; }

std::vector<std::string> tensor_names(const encoder::EncoderParams& p) {
  std::vector<std::string> names;
  for (int h = 0; h < p.n_heads; ++h)
    for (const char* t : {"query", "key", "value"}) names.push_back(std::string(t) + "[" + std::to_string(h) + "]");
  for (const char* t : {"out", "context", "context_bias", "pool", "pool_bias", "pool_vector"}) names.emplace_back(t);
  return names;
}

}  // namespace

providers::SyntheticSpec load_synthetic_spec(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::BadFile, "cannot open " + path.string());
  providers::SyntheticSpec spec;
  CLI::App app;
  add_spec_options(app, spec);
  app.set_config("--spec", path.string(), "", true);
  try {
    app.parse(std::vector<std::string>{});
  } catch (const CLI::ParseError& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

// ---- assignment log + offline evaluation ----

std::vector<LoggedAssignment> read_assignment_log(std::istream& in) {
  std::vector<LoggedAssignment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      LoggedAssignment a;
      a.article_id = j.at("article_id").get<std::string>();
      a.story_id = j.at("story_id").get<StoryId>();
      a.confidence = j.at("confidence").get<double>();
      a.is_new_story = j.at("is_new_story").get<bool>();
      a.window_index = j.at("window_index").get<std::size_t>();
      out.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedLog, "assignment log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<metrics::WindowScore> evaluate_log(const std::vector<LoggedAssignment>& log,
                                               const std::vector<Article>& truth, int window_days, int slide_days) {
  if (window_days < 1 || slide_days < 1) throw Error(Errc::BadConfig, "window and slide must be >= 1 day");
  std::unordered_map<std::string, const Article*> by_id;
  for (const Article& a : truth) by_id.emplace(a.id, &a);

  struct Row {
    DayIndex day;
    StoryId story;
    metrics::Label label;
  };
  std::vector<Row> rows;
  metrics::LabelEncoder labels;
  std::size_t n_windows = 0;
  std::set<std::string> seen;
  for (const LoggedAssignment& a : log) {
    auto it = by_id.find(a.article_id);
    if (it == by_id.end()) throw Error(Errc::MalformedLog, "article " + a.article_id + " is not in the truth file");
    if (!it->second->true_story_label)
      throw Error(Errc::MalformedLog, "article " + a.article_id + " has no story_label");
    if (!seen.insert(a.article_id).second) throw Error(Errc::MalformedLog, "article " + a.article_id + " logged twice");
    rows.push_back({it->second->day(), a.story_id, labels(*it->second->true_story_label)});
    n_windows = std::max(n_windows, a.window_index + 1);
  }
  if (rows.empty()) return {};

  DayIndex d0 = rows.front().day;
  for (const Row& r : rows) d0 = std::min(d0, r.day);
  std::vector<metrics::WindowScore> scores;
  for (std::size_t w = 0; w < n_windows; ++w) {
    const DayIndex start = d0 + static_cast<DayIndex>(w) * slide_days;
    const DayIndex end = start + window_days - 1;
    std::vector<metrics::Label> pred, gold;
    for (const Row& r : rows)
      if (r.day >= start && r.day <= end) {
        pred.push_back(r.story);
        gold.push_back(r.label);
      }
    if (pred.empty()) continue;
    scores.push_back(metrics::score_window(w, pred, gold, Matrix()));
  }
  return scores;
}

// ---- commands ----

int run(const RunConfig& cfg, const Logger& log) {
  if (cfg.embeddings.has_value() == cfg.synthetic_spec.has_value()) {
    log.error("exactly one of --embeddings / --synthetic is required");
    return kConfigError;
  }
  if (cfg.embeddings && !cfg.articles) {
    log.error("--articles is required with --embeddings");
    return kConfigError;
  }
  if (cfg.synthetic_spec && cfg.articles) {
    log.error("--articles cannot be combined with --synthetic");
    return kConfigError;
  }

  std::vector<Article> articles;
  providers::InMemoryProvider provider;
  EngineConfig engine_cfg = cfg.engine;
  try {
    engine_cfg.validate();
    if (cfg.synthetic_spec) {
      const providers::SyntheticSpec spec = load_synthetic_spec(*cfg.synthetic_spec);
      providers::SyntheticStream s = providers::synthesize(spec);
      articles = std::move(s.articles);
      provider = std::move(s.provider);
    } else {
      articles = load_articles(*cfg.articles);
      provider = providers::load(*cfg.embeddings);
    }
    if (engine_cfg.embed_dim == 0) engine_cfg.embed_dim = provider.dim();
    if (engine_cfg.embed_dim != provider.dim())
      throw Error(Errc::BadConfig, "embed_dim " + std::to_string(engine_cfg.embed_dim) + " but embeddings have dim " +
                                       std::to_string(provider.dim()));
    engine_cfg.validate();
    require_valid_stream(articles);
    for (const Article& a : articles)
      if (!provider.contains(a.id)) throw Error(Errc::ProviderMiss, "no embeddings for article " + a.id);
  } catch (const Error& e) {
    log.error(e.what());
    return e.code() == Errc::BadConfig ? kConfigError : kDataError;
  }

  log.info("config " + config_echo(engine_cfg));
  log.info("articles=" + std::to_string(articles.size()) + " output=" + cfg.output_dir.string());

  try {
    fs::create_directories(cfg.output_dir);
    std::ofstream assignments = open_out(cfg.output_dir / "assignments.jsonl");
    std::ofstream training = open_out(cfg.output_dir / "training.jsonl");
    if (cfg.synthetic_spec) {
      std::ofstream art = open_out(cfg.output_dir / "articles.jsonl");
      write_articles(art, articles);
    }

    stream::StoryEngine engine(engine_cfg, provider);
    LogWriter writer(assignments, training, log);
    engine.set_observer(&writer);
    stream::RunOptions options;
    options.score = cfg.eval;
    options.embedding_diagnostics = cfg.embedding_diagnostics;
    const stream::RunResult result = stream::run_stream(engine, articles, options);

    ojson extra = ojson::object();
    if (cfg.corpus_diagnostics) {
      const auto [align, uniform] =
          stream::corpus_diagnostics(engine.params(), articles, provider, engine_cfg.max_sentences);
      extra["corpus_alignment"] = align;
      extra["corpus_uniformity"] = uniform;
    }
    std::ofstream metrics_out = open_out(cfg.output_dir / "metrics.jsonl");
    write_metrics(metrics_out, result.scores, result.summary, extra);
    if (cfg.csv) {
      std::ofstream csv = open_out(cfg.output_dir / "metrics.csv");
      write_metrics_csv(csv, result.scores);
    }
    encoder::save_checkpoint(cfg.output_dir / "encoder.ckpt", engine.params());

    log.info("windows=" + std::to_string(result.slides.size()) + " stories=" + std::to_string(engine.next_story_id()));
    if (result.summary) {
      std::ostringstream os;
      os << "prequential b3_f1=" << result.summary->b3_f1 << " ari=" << result.summary->ari
         << " ami=" << result.summary->ami;
      log.info(os.str());
    } else if (cfg.eval) {
      log.warn("no labelled windows; metrics skipped");
    }
    if (!assignments || !training || !metrics_out) throw Error(Errc::BadFile, "write failed in " + cfg.output_dir.string());
  } catch (const Error& e) {
    log.error(e.what());
    return numerical(e.code()) ? kNumericError : kDataError;
  } catch (const fs::filesystem_error& e) {
    log.error(e.what());
    return kDataError;
  }
  return kOk;
}

namespace {

struct EvalArgs {
  fs::path assignments, truth;
  std::optional<fs::path> out;
  int window_days = 7;
  int slide_days = 1;
  bool csv = false;
};

int eval_command(const EvalArgs& args, const Logger& log) {
  try {
    std::ifstream in(args.assignments);
    if (!in) throw Error(Errc::BadFile, "cannot open " + args.assignments.string());
    const std::vector<LoggedAssignment> entries = read_assignment_log(in);
    const std::vector<Article> truth = load_articles(args.truth);
    const std::vector<metrics::WindowScore> scores = evaluate_log(entries, truth, args.window_days, args.slide_days);
    std::optional<metrics::Summary> summary;
    if (!scores.empty()) summary = metrics::prequential_average(scores);
    std::ostringstream report;
    if (args.csv)
      write_metrics_csv(report, scores);
    else
      write_metrics(report, scores, summary);
    if (args.out) {
      std::ofstream out = open_out(*args.out);
      out << report.str();
    } else {
      std::cout << report.str();
    }
    if (summary) {
      std::ostringstream os;
      os << "windows=" << summary->n_windows << " b3_f1=" << summary->b3_f1 << " ari=" << summary->ari
         << " ami=" << summary->ami;
      log.info(os.str());
    }
  } catch (const Error& e) {
    log.error(e.what());
    return e.code() == Errc::BadConfig ? kConfigError : kDataError;
  }
  return kOk;
}

struct InspectArgs {
  fs::path checkpoint;
  std::optional<fs::path> embeddings, articles, assignments;
  std::string article;
  int max_sentences = 50;
  bool csv = false;
};

int inspect_command(const InspectArgs& args, const Logger& log) {
  std::ostream& out = std::cout;
  out << std::setprecision(10);
  try {
    const encoder::EncoderParams params = encoder::load_checkpoint(args.checkpoint);
    const auto names = tensor_names(params);
    const auto tensors = params.tensors();
    if (args.csv) {
      out << "tensor,rows,cols,frobenius_norm\n";
      for (std::size_t i = 0; i < tensors.size(); ++i)
        out << names[i] << ',' << tensors[i]->rows() << ',' << tensors[i]->cols() << ',' << tensors[i]->norm() << '\n';
    } else {
      out << "encoder h_e=" << params.embed_dim << " h_c=" << params.hidden_dim << " heads=" << params.n_heads
          << " parameters=" << params.parameter_count() << '\n';
      for (std::size_t i = 0; i < tensors.size(); ++i)
        out << "  " << std::left << std::setw(14) << names[i] << std::right << std::setw(5) << tensors[i]->rows()
            << " x " << std::setw(4) << tensors[i]->cols() << "  norm " << tensors[i]->norm() << '\n';
    }

    if (!args.article.empty()) {
      if (!args.embeddings) throw Error(Errc::BadConfig, "--article needs --embeddings");
      const providers::InMemoryProvider provider = providers::load(*args.embeddings);
      const SentenceMatrix E = provider.get(args.article, args.max_sentences);
      const encoder::EncodeOutput enc = encoder::encode_article(E, params);
      std::vector<std::string> text;
      if (args.articles) {
        std::ifstream in(*args.articles);
        std::string line;
        while (std::getline(in, line)) {
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          const json j = json::parse(line, nullptr, false);
          if (!j.is_discarded() && j.value("id", "") == args.article) {
            for (const json& s : j.at("sentences")) text.push_back(s.get<std::string>());
            break;
          }
        }
      }
      if (args.csv) {
        out << "sentence,pooling_weight,importance,text\n";
      } else {
        out << "article " << args.article << " sentences=" << E.valid_count() << '\n';
      }
      for (int s = 0; s < E.valid_count(); ++s) {
        const std::string t = s < static_cast<int>(text.size()) ? text[s] : "";
        if (args.csv)
          out << s << ',' << enc.pooling_weights[s] << ',' << enc.attention_importance[s] << ','
              << json(t).dump() << '\n';
        else
          out << "  [" << s << "] pool " << std::fixed << std::setprecision(6) << enc.pooling_weights[s]
              << "  importance " << enc.attention_importance[s] << std::defaultfloat << std::setprecision(10)
              << (t.empty() ? "" : "  " + t) << '\n';
      }
    }

    if (args.assignments) {
      std::ifstream in(*args.assignments);
      if (!in) throw Error(Errc::BadFile, "cannot open " + args.assignments->string());
      struct Row {
        std::size_t size = 0, first = 0, last = 0;
        std::string first_article;
      };
      std::map<StoryId, Row> stories;
      for (const LoggedAssignment& a : read_assignment_log(in)) {
        auto [it, fresh] = stories.try_emplace(a.story_id);
        if (fresh) it->second.first = a.window_index, it->second.first_article = a.article_id;
        ++it->second.size;
        it->second.last = a.window_index;
      }
      if (args.csv) out << "story_id,size,first_window,last_window,first_article\n";
      else out << "stories " << stories.size() << '\n';
      for (const auto& [id, r] : stories) {
        if (args.csv)
          out << id << ',' << r.size << ',' << r.first << ',' << r.last << ',' << r.first_article << '\n';
        else
          out << "  story " << id << "  size " << r.size << "  windows " << r.first << ".." << r.last << "  first "
              << r.first_article << '\n';
      }
    }
  } catch (const Error& e) {
    log.error(e.what());
    return e.code() == Errc::BadConfig ? kConfigError : kDataError;
  } catch (const json::exception& e) {
    log.error(std::string("articles file: ") + e.what());
    return kDataError;
  }
  return kOk;
}

int synth_command(const providers::SyntheticSpec& spec, const fs::path& out_dir, const Logger& log) {
  try {
    const providers::SyntheticStream s = providers::synthesize(spec);
    fs::create_directories(out_dir);
    std::ofstream art = open_out(out_dir / "articles.jsonl");
    write_articles(art, s.articles);
    providers::save(out_dir / "embeddings.scem", s.provider);
    log.info("wrote " + std::to_string(s.articles.size()) + " articles to " + out_dir.string());
  } catch (const Error& e) {
    log.error(e.what());
    return e.code() == Errc::BadConfig ? kConfigError : kDataError;
  } catch (const fs::filesystem_error& e) {
    log.error(e.what());
    return kDataError;
  }
  return kOk;
}

struct RunArgs {
  RunConfig cfg;
  int cold_start_k = 0;
  bool no_train = false, no_eval = false, no_embedding_diag = false;
  std::string articles, embeddings, synthetic, config;
};

void add_run_options(CLI::App& app, RunArgs& r) {
  app.add_option("--articles", r.articles, "Articles JSON-lines");
  app.add_option("--embeddings", r.embeddings, "Sentence embedding file");
  app.add_option("--synthetic", r.synthetic, "Synthetic stream spec (key = value)");
  app.add_option("--out", r.cfg.output_dir, "Output directory")->capture_default_str();
  add_engine_options(app, r.cfg.engine, r.cold_start_k, r.no_train);
  app.add_flag("--no-eval", r.no_eval, "Skip per-window metrics");
  app.add_flag("--no-embedding-diagnostics", r.no_embedding_diag, "Skip per-window alignment/uniformity");
  app.add_flag("--corpus-diagnostics", r.cfg.corpus_diagnostics,
               "Alignment/uniformity over the whole corpus with the final encoder");
  app.add_flag("--csv", r.cfg.csv, "Also write metrics.csv");
}

RunConfig resolve(const RunArgs& r) {
  RunConfig cfg = r.cfg;
  if (r.cold_start_k > 0) cfg.engine.cold_start_k = r.cold_start_k;
  cfg.engine.train = !r.no_train;
  cfg.eval = !r.no_eval;
  cfg.embedding_diagnostics = !r.no_embedding_diag;
  if (!r.articles.empty()) cfg.articles = r.articles;
  if (!r.embeddings.empty()) cfg.embeddings = r.embeddings;
  if (!r.synthetic.empty()) cfg.synthetic_spec = r.synthetic;
  return cfg;
}

/// Values from a `run --config` file; the command line is applied on top.
RunArgs run_args_from_file(const std::string& path) {
  if (!fs::exists(path)) throw Error(Errc::BadConfig, "cannot open config " + path);
  RunArgs r;
  CLI::App file_app;
  add_run_options(file_app, r);
  file_app.set_config("--config", path, "", true);
  file_app.allow_config_extras(CLI::config_extras_mode::error);
  try {
    file_app.parse(std::vector<std::string>{});
  } catch (const CLI::ParseError& e) {
    throw Error(Errc::BadConfig, path + ": " + e.what());
  }
  return r;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Streaming story discovery with a self-supervised article encoder"};
  app.require_subcommand(1);
  std::string level_name;
  if (const char* env = std::getenv("SCSTORY_LOG")) level_name = env;
  app.add_option("--log-level", level_name, "error|warn|info|debug (default from SCSTORY_LOG, else info)");

  RunArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "Stream articles through the engine");
  run_cmd->add_option("--config", run_args.config, "key = value file with run options; flags override it");
  add_run_options(*run_cmd, run_args);

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Recompute metrics from an assignment log");
  eval_cmd->add_option("--assignments", eval_args.assignments)->required();
  eval_cmd->add_option("--truth", eval_args.truth, "Articles JSON-lines with story_label")->required();
  eval_cmd->add_option("--window-days", eval_args.window_days)->capture_default_str();
  eval_cmd->add_option("--slide-days", eval_args.slide_days)->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out, "Report file (default stdout)");
  eval_cmd->add_flag("--csv", eval_args.csv);

  InspectArgs inspect_args;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Dump a checkpoint, an article's weights or a story table");
  inspect_cmd->add_option("--checkpoint", inspect_args.checkpoint)->required();
  inspect_cmd->add_option("--embeddings", inspect_args.embeddings);
  inspect_cmd->add_option("--article", inspect_args.article, "Article id for the per-sentence view");
  inspect_cmd->add_option("--articles", inspect_args.articles, "Articles JSON-lines for sentence text");
  inspect_cmd->add_option("--assignments", inspect_args.assignments, "Assignment log for the story table");
  inspect_cmd->add_option("--max-sentences", inspect_args.max_sentences)->capture_default_str();
  inspect_cmd->add_flag("--csv", inspect_args.csv);

  providers::SyntheticSpec spec;
  fs::path synth_out = "synthetic";
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic labelled stream");
  synth_cmd->set_config("--spec", "", "key = value file with the options below");
  add_spec_options(*synth_cmd, spec);
  synth_cmd->add_option("--out", synth_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  LogLevel level = LogLevel::Info;
  try {
    if (!level_name.empty()) level = parse_log_level(level_name);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  }
  const Logger log(std::cerr, level);

  if (*run_cmd) {
    if (!run_args.config.empty()) {
      try {
        RunArgs merged = run_args_from_file(run_args.config);
        CLI::App again;
        again.allow_extras();
        again.add_option("--log-level", level_name);
        CLI::App* sub = again.add_subcommand("run");
        sub->add_option("--config", merged.config);
        add_run_options(*sub, merged);
        again.parse(argc, argv);
        run_args = std::move(merged);
      } catch (const Error& e) {
        log.error(e.what());
        return kConfigError;
      }
    }
    return run(resolve(run_args), log);
  }
  if (*eval_cmd) return eval_command(eval_args, log);
  if (*inspect_cmd) return inspect_command(inspect_args, log);
  if (*synth_cmd) {
    try {
      spec.validate();
    } catch (const Error& e) {
      log.error(e.what());
      return kConfigError;
    }
    return synth_command(spec, synth_out, log);
  }
  return kConfigError;
}

}  // namespace scstory::cli
