#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "scstory/providers.hpp"

namespace scstory::providers {

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::BadConfig, "synthetic: " + msg); };
  if (n_topics < 1) fail("n_topics must be >= 1");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (min_sentences < 1 || max_sentences < min_sentences) fail("sentence range");
  if (dim < n_topics) fail("dim must be >= n_topics");
  if (articles_per_day < 0 || n_days < 1) fail("articles_per_day / n_days");
  if (topic_lifespan_days < 0) fail("topic_lifespan_days must be >= 0");
  const double c = std::cos(topic_separation_deg * std::numbers::pi / 180.0);
  if (n_topics > 1 && c < -1.0 / (n_topics - 1) - 1e-12)
    fail("separation too wide for this many topics");
}

Matrix topic_anchors(int n_topics, int dim, double separation_deg, std::uint64_t seed) {
  const double c = std::cos(separation_deg * std::numbers::pi / 180.0);
  // Gram matrix with unit diagonal and constant off-diagonal c; its PSD square
  // root gives coordinates in R^n, then a random orthonormal map lifts to R^dim.
  Matrix gram = Matrix::Constant(n_topics, n_topics, c);
  gram.diagonal().setOnes();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix coords = eig.eigenvectors() * root.asDiagonal();  // rows: anchors in R^n

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(dim, dim);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = gauss(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  return coords * q.leftCols(n_topics).transpose();
}

SyntheticStream synthesize(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticStream out;
  out.provider = InMemoryProvider(spec.dim);
  out.anchors = topic_anchors(spec.n_topics, spec.dim, spec.topic_separation_deg, spec.seed);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> sentence_count(spec.min_sentences, spec.max_sentences);
  std::uniform_int_distribution<Timestamp> offset(0, kSecondsPerDay - 1);

  const int life = spec.topic_lifespan_days > 0 ? std::min(spec.topic_lifespan_days, spec.n_days) : spec.n_days;
  std::vector<int> topic_start(static_cast<std::size_t>(spec.n_topics), 0);
  if (spec.n_topics > 1)
    for (int t = 0; t < spec.n_topics; ++t)
      topic_start[t] = static_cast<int>(std::lround(double(t) * (spec.n_days - life) / (spec.n_topics - 1)));

  std::size_t serial = 0;
  for (int day = 0; day < spec.n_days; ++day) {
    std::vector<int> active;
    for (int t = 0; t < spec.n_topics; ++t)
      if (day >= topic_start[t] && day < topic_start[t] + life) active.push_back(t);
    if (active.empty()) active.push_back(0);
    std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);

    std::vector<Timestamp> times(static_cast<std::size_t>(spec.articles_per_day));
    for (Timestamp& t : times) t = spec.start_time + day * kSecondsPerDay + offset(rng);
    std::sort(times.begin(), times.end());

    for (Timestamp ts : times) {
      const int topic = active[pick(rng)];
      const int n = sentence_count(rng);
      Matrix rows(n, spec.dim);
      for (int s = 0; s < n; ++s)
        for (int d = 0; d < spec.dim; ++d)
          rows(s, d) = static_cast<float>(out.anchors(topic, d) + spec.noise_sigma * noise(rng));

      char id[32];
      std::snprintf(id, sizeof id, "a%06zu", serial++);
      Article a;
      a.id = id;
      a.published_at = ts;
      a.sentence_count = n;
      a.true_story_label = "topic-" + std::to_string(topic);
      out.provider.add(a.id, std::move(rows));
      out.articles.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace scstory::providers
