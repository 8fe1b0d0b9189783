#include "scstory/stream.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "scstory/assigner.hpp"

namespace scstory {

// ---- WindowState ----

const WindowArticle* WindowState::find(const std::string& article_id) const {
  auto it = position_.find(article_id);
  if (it == position_.end()) return nullptr;
  return &articles_[it->second - evicted_];
}

std::vector<assigner::StoryCentroid> WindowState::centroids() const {
  std::vector<assigner::StoryCentroid> out;
  out.reserve(stories_.size());
  for (const auto& [id, story] : stories_) out.push_back(story.centroid);
  return out;
}

void WindowState::open_story(StoryId id, Timestamp created_at) {
  ActiveStory s;
  s.story.id = id;
  s.story.created_at = created_at;
  s.story.last_updated_at = created_at;
  s.centroid.story_id = id;
  stories_.emplace(id, std::move(s));
}

void WindowState::add(WindowArticle article) {
  auto it = stories_.find(article.story_id);
  if (it == stories_.end())
    throw Error(Errc::EmptyStory, "story " + std::to_string(article.story_id) + " is not open");
  ActiveStory& story = it->second;
  story.in_window.push_back(article.article.id);
  story.story.member_ids.push_back(article.article.id);
  story.story.last_updated_at = std::max(story.story.last_updated_at, article.article.published_at);
  position_.emplace(article.article.id, evicted_ + articles_.size());
  articles_.push_back(std::move(article));
  recompute_centroid(story);
}

std::vector<StoryId> WindowState::evict() {
  std::set<StoryId> touched;
  while (!articles_.empty() && articles_.front().article.day() < start_day_) {
    const WindowArticle& a = articles_.front();
    ActiveStory& story = stories_.at(a.story_id);
    // members leave in arrival order, so the oldest is always in front
    story.in_window.erase(story.in_window.begin());
    touched.insert(a.story_id);
    position_.erase(a.article.id);
    articles_.pop_front();
    ++evicted_;
  }
  std::vector<StoryId> emptied;
  for (StoryId id : touched) {
    ActiveStory& story = stories_.at(id);
    if (story.in_window.empty()) {
      stories_.erase(id);
      emptied.push_back(id);
    } else {
      recompute_centroid(story);
    }
  }
  return emptied;
}

void WindowState::refresh(const encoder::EncoderParams& params) {
  for (WindowArticle& a : articles_) a.encoded = encoder::encode_article(*a.sentences, params);
  recompute_centroids();
}

void WindowState::recompute_centroids() {
  for (auto& [id, story] : stories_) recompute_centroid(story);
}

void WindowState::recompute_centroid(ActiveStory& story) {
  std::vector<RowVector> reprs;
  reprs.reserve(story.in_window.size());
  for (const std::string& id : story.in_window) reprs.push_back(find(id)->encoded.article_repr);
  story.centroid.story_id = story.story.id;
  story.centroid.repr = assigner::story_representation(reprs);
  story.centroid.member_count_in_window = static_cast<int>(reprs.size());
}

}  // namespace scstory

namespace scstory::stream {
namespace {

double safe_cosine(const RowVector& a, const RowVector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace

std::vector<std::size_t> select_seeds(std::span<const RowVector> vectors, double delta, std::optional<int> k,
                                      replay::Rng& rng) {
  const std::size_t n = vectors.size();
  if (n == 0) throw Error(Errc::EmptyWindow, "no articles to seed from");
  const std::size_t target = k ? std::min<std::size_t>(static_cast<std::size_t>(*k), n) : n;

  std::vector<std::size_t> seeds;
  std::vector<bool> is_seed(n, false);
  std::vector<double> best(n, -2.0);  // max cosine to any seed so far
  auto add_seed = [&](std::size_t s) {
    seeds.push_back(s);
    is_seed[s] = true;
    for (std::size_t i = 0; i < n; ++i) best[i] = std::max(best[i], safe_cosine(vectors[i], vectors[s]));
  };
  add_seed(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));

  while (seeds.size() < target) {
    std::vector<double> weight(n, 0.0);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_seed[i]) continue;
      if (!k && best[i] > delta) continue;
      const double d = 1.0 - best[i];
      weight[i] = d * d;
      candidates.push_back(i);
    }
    if (candidates.empty()) break;
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    std::size_t next;
    if (total > 0.0) {
      next = std::discrete_distribution<std::size_t>(weight.begin(), weight.end())(rng);
    } else {
      next = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    }
    add_seed(next);
  }
  return seeds;
}

StoryEngine::StoryEngine(EngineConfig config, const providers::EmbeddingProvider& provider)
    : config_(std::move(config)), provider_(&provider) {
  if (config_.embed_dim == 0) config_.embed_dim = provider.dim();
  config_.validate();
  params_ = encoder::init_params(config_.rng_seed, config_.embed_dim, config_.resolved_hidden_dim(), config_.n_heads);
  opt_ = trainer::OptimizerState::for_params(params_, config_.learning_rate);
  window_ = WindowState(config_.window_days, config_.slide_days);
  rng_.seed(config_.rng_seed);
}

StoryEngine::StoryEngine(EngineConfig config, const providers::EmbeddingProvider& provider,
                         encoder::EncoderParams params)
    : config_(std::move(config)), provider_(&provider), params_(std::move(params)) {
  config_.embed_dim = params_.embed_dim;
  config_.hidden_dim = params_.hidden_dim;
  config_.n_heads = params_.n_heads;
  config_.validate();
  if (provider.dim() != params_.embed_dim)
    throw Error(Errc::BadDims, "provider dim " + std::to_string(provider.dim()) + " vs encoder h_e " +
                                   std::to_string(params_.embed_dim));
  opt_ = trainer::OptimizerState::for_params(params_, config_.learning_rate);
  window_ = WindowState(config_.window_days, config_.slide_days);
  rng_.seed(config_.rng_seed);
}

void StoryEngine::admit(const Article& a, DayIndex first_day, DayIndex last_day) {
  const bool first = seen_.empty();
  if (!seen_.insert(a.id).second) throw Error(Errc::DuplicateId, "article " + a.id);
  if (!first && a.published_at < last_time_)
    throw Error(Errc::NonChronological, "article " + a.id + " is older than its predecessor");
  if (a.day() < first_day || a.day() > last_day)
    throw Error(Errc::NonChronological, "article " + a.id + " is outside days [" + std::to_string(first_day) +
                                            ", " + std::to_string(last_day) + "]");
  last_time_ = a.published_at;
}

WindowArticle StoryEngine::fetch(const Article& a) const {
  WindowArticle w;
  w.article = a;
  w.sentences = std::make_shared<const SentenceMatrix>(provider_->get(a.id, config_.max_sentences));
  w.encoded = encoder::encode_article(*w.sentences, params_);
  w.assigned_in_window = window_index_;
  return w;
}

trainer::EpochResult StoryEngine::train() {
  trainer::EpochResult result;
  if (!config_.train) {
    result.skipped = true;
    return result;
  }
  result = trainer::update_epoch(window_, params_, opt_, config_, rng_);
  if (observer_) observer_->on_trained(window_index_, result);
  return result;
}

SlideResult StoryEngine::cold_start(std::span<const Article> first_window) {
  if (started_) throw Error(Errc::BadConfig, "cold start on a running engine");
  if (first_window.empty()) throw Error(Errc::EmptyWindow, "cold start needs at least one article");
  const DayIndex d0 = first_window.front().day();
  window_.set_range(d0, d0 + config_.window_days - 1);
  window_index_ = 0;

  std::vector<WindowArticle> items;
  std::vector<RowVector> baseline;
  items.reserve(first_window.size());
  for (const Article& a : first_window) {
    admit(a, window_.start_day(), window_.end_day());
    items.push_back(fetch(a));
    baseline.push_back(encoder::mean_pool_baseline(*items.back().sentences));
  }
  started_ = true;

  std::vector<std::size_t> seeds = select_seeds(baseline, config_.delta, config_.cold_start_k, rng_);
  // Seed confidence: best cosine to the seeds picked before it (-1 for the first).
  std::vector<double> seed_conf(items.size(), -1.0);
  for (std::size_t s = 1; s < seeds.size(); ++s)
    for (std::size_t t = 0; t < s; ++t)
      seed_conf[seeds[s]] = std::max(seed_conf[seeds[s]], safe_cosine(baseline[seeds[s]], baseline[seeds[t]]));
  std::sort(seeds.begin(), seeds.end());

  SlideResult result;
  result.window_index = 0;
  result.start_day = window_.start_day();
  result.end_day = window_.end_day();
  std::vector<StoryId> seed_story(items.size(), -1);
  for (std::size_t s : seeds) {
    seed_story[s] = next_story_id_++;
    window_.open_story(seed_story[s], items[s].article.published_at);
  }

  for (std::size_t i = 0; i < items.size(); ++i) {
    Assignment asg;
    asg.article_id = items[i].article.id;
    if (seed_story[i] >= 0) {
      asg.story_id = seed_story[i];
      asg.confidence = seed_conf[i];
      asg.is_new_story = true;
    } else {
      double best = -2.0;
      StoryId best_story = -1;
      for (std::size_t s : seeds) {
        const double c = safe_cosine(baseline[i], baseline[s]);
        if (c > best) best = c, best_story = seed_story[s];
      }
      asg.confidence = best;
      if (best > config_.delta) {
        asg.story_id = best_story;
      } else {  // only reachable with a fixed seed count
        asg.story_id = next_story_id_++;
        asg.is_new_story = true;
        window_.open_story(asg.story_id, items[i].article.published_at);
      }
    }
    items[i].story_id = asg.story_id;
    window_.add(std::move(items[i]));
    if (observer_) observer_->on_assigned(window_index_, asg);
    result.assignments.push_back(std::move(asg));
  }

  result.training = train();
  return result;
}

std::vector<StoryId> StoryEngine::expire() { return window_.evict(); }

SlideResult StoryEngine::process_slide(std::span<const Article> new_articles) {
  if (!started_) throw Error(Errc::EmptyWindow, "process_slide before cold_start");
  const DayIndex new_end = window_.end_day() + config_.slide_days;
  const DayIndex first_new = window_.end_day() + 1;
  window_.set_range(new_end - config_.window_days + 1, new_end);
  ++window_index_;

  SlideResult result;
  result.window_index = window_index_;
  result.start_day = window_.start_day();
  result.end_day = new_end;
  result.expired = expire();

  for (const Article& a : new_articles) {
    admit(a, first_new, new_end);
    WindowArticle w = fetch(a);
    const std::vector<assigner::StoryCentroid> centroids = window_.centroids();
    Assignment asg = assigner::assign(w.encoded.article_repr, centroids, config_.delta, next_story_id_, a.id);
    if (asg.is_new_story) window_.open_story(next_story_id_++, a.published_at);
    w.story_id = asg.story_id;
    window_.add(std::move(w));
    if (observer_) observer_->on_assigned(window_index_, asg);
    result.assignments.push_back(std::move(asg));
  }

  result.training = train();
  return result;
}

std::optional<metrics::WindowScore> score_window(const WindowState& window, std::size_t window_index,
                                                 bool embedding_diagnostics) {
  if (window.empty()) return std::nullopt;
  std::vector<metrics::Label> pred, truth;
  metrics::LabelEncoder labels;
  Matrix reprs;
  if (embedding_diagnostics)
    reprs.resize(static_cast<Eigen::Index>(window.size()), window.articles().front().encoded.article_repr.size());
  Eigen::Index row = 0;
  for (const WindowArticle& a : window.articles()) {
    if (!a.article.true_story_label) return std::nullopt;
    pred.push_back(a.story_id);
    truth.push_back(labels(*a.article.true_story_label));
    if (embedding_diagnostics) reprs.row(row++) = a.encoded.article_repr;
  }
  return metrics::score_window(window_index, pred, truth, reprs);
}

RunResult run_stream(StoryEngine& engine, const std::vector<Article>& articles, const RunOptions& options) {
  RunResult out;
  if (articles.empty()) return out;
  require_valid_stream(articles);
  const EngineConfig& cfg = engine.config();

  auto record = [&](SlideResult slide) {
    if (options.score)
      if (auto s = score_window(engine.window(), slide.window_index, options.embedding_diagnostics))
        out.scores.push_back(*s);
    out.slides.push_back(std::move(slide));
  };

  const DayIndex d0 = articles.front().day();
  std::size_t i = 0;
  DayIndex end = d0 + cfg.window_days - 1;
  while (i < articles.size() && articles[i].day() <= end) ++i;
  record(engine.cold_start(std::span(articles).first(i)));

  while (i < articles.size()) {
    end += cfg.slide_days;
    const std::size_t from = i;
    while (i < articles.size() && articles[i].day() <= end) ++i;
    record(engine.process_slide(std::span(articles).subspan(from, i - from)));
  }
  if (!out.scores.empty()) out.summary = metrics::prequential_average(out.scores);
  return out;
}

std::pair<double, double> corpus_diagnostics(const encoder::EncoderParams& params, std::span<const Article> articles,
                                             const providers::EmbeddingProvider& provider, int max_sentences) {
  std::vector<RowVector> reprs;
  std::vector<metrics::Label> labels;
  metrics::LabelEncoder encode;
  for (const Article& a : articles) {
    if (!a.true_story_label) continue;
    reprs.push_back(encoder::encode_article(provider.get(a.id, max_sentences), params).article_repr);
    labels.push_back(encode(*a.true_story_label));
  }
  if (reprs.size() < 2) throw Error(Errc::TooFew, "corpus diagnostics need two labelled articles");
  Matrix m(static_cast<Eigen::Index>(reprs.size()), reprs.front().size());
  for (std::size_t r = 0; r < reprs.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = reprs[r];
  return {metrics::alignment(m, labels), metrics::uniformity(m)};
}

}  // namespace scstory::stream
