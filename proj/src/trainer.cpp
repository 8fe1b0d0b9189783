#include "scstory/trainer.hpp"

#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

namespace scstory::trainer {

OptimizerState OptimizerState::for_params(const encoder::EncoderParams& params, double learning_rate) {
  OptimizerState s;
  s.learning_rate = learning_rate;
  for (const Matrix* m : params.tensors()) {
    s.first_moment.push_back(Matrix::Zero(m->rows(), m->cols()));
    s.second_moment.push_back(Matrix::Zero(m->rows(), m->cols()));
  }
  return s;
}

std::vector<StoryMembers> story_members(const WindowState& window) {
  std::vector<StoryMembers> out;
  for (const auto& [id, story] : window.stories()) {
    StoryMembers sm;
    sm.id = id;
    for (const std::string& member : story.in_window) sm.members.push_back({member, window.find(member)->sentences});
    out.push_back(std::move(sm));
  }
  return out;
}

num::Var contrastive_loss(num::Tape& tape, num::Var sample_reprs, std::span<const int> targets,
                          num::Var centroids, double tau) {
  if (tape.value(sample_reprs).rows() == 0) throw Error(Errc::EmptyBatch, "no training samples");
  if (tape.value(centroids).rows() == 0) throw Error(Errc::NoStories, "no active stories");
  if (!(tau > 0.0)) throw Error(Errc::BadConfig, "tau must be positive");
  num::Var logits = tape.scale(tape.cosine_rows(sample_reprs, centroids), 1.0 / tau);
  num::Var positive = tape.gather_cols(logits, std::vector<int>(targets.begin(), targets.end()));
  return tape.sum(tape.sub(tape.row_logsumexp(logits), positive));
}

double contrastive_loss_value(const Matrix& sample_reprs, std::span<const int> targets, const Matrix& centroids,
                              double tau) {
  num::Tape tape;
  num::Var loss = contrastive_loss(tape, tape.leaf_ref(sample_reprs), targets, tape.leaf_ref(centroids), tau);
  return tape.scalar(loss);
}

LossGraph build_loss(num::Tape& tape, const encoder::EncoderParams& params,
                     std::span<const replay::TrainSample> batch, std::span<const StoryMembers> stories,
                     double tau, bool requires_grad) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "no training samples");
  if (stories.empty()) throw Error(Errc::NoStories, "no active stories");

  LossGraph g;
  g.bound = encoder::bind(tape, params, requires_grad);

  std::unordered_map<std::string, num::Var> member_repr;
  std::map<StoryId, int> column;
  std::vector<num::Var> centroid_rows;
  for (const StoryMembers& s : stories) {
    if (s.members.empty()) throw Error(Errc::EmptyStory, "story " + std::to_string(s.id));
    std::vector<num::Var> reprs;
    for (const MemberRef& m : s.members) {
      num::Var r = encoder::encode_on_tape(tape, g.bound, *m.sentences).repr;
      member_repr.emplace(m.article_id, r);
      reprs.push_back(r);
    }
    column[s.id] = static_cast<int>(centroid_rows.size());
    centroid_rows.push_back(tape.mean_rows(tape.stack_rows(reprs)));
  }

  std::vector<num::Var> sample_rows;
  std::vector<int> targets;
  for (const replay::TrainSample& sample : batch) {
    auto col = column.find(sample.pseudo_story_id);
    if (col == column.end())
      throw Error(Errc::NoStories, "pseudo story " + std::to_string(sample.pseudo_story_id) + " is not active");
    auto cached = sample.source == replay::SampleSource::Replay ? member_repr.find(sample.article_id)
                                                                : member_repr.end();
    if (cached != member_repr.end()) {
      sample_rows.push_back(cached->second);
    } else {
      num::Var r = encoder::encode_on_tape(tape, g.bound, *sample.sentences).repr;
      if (sample.source == replay::SampleSource::Replay) member_repr.emplace(sample.article_id, r);
      sample_rows.push_back(r);
    }
    targets.push_back(col->second);
  }

  g.loss = contrastive_loss(tape, tape.stack_rows(sample_rows), targets, tape.stack_rows(centroid_rows), tau);
  return g;
}

double evaluate_loss(const encoder::EncoderParams& params, std::span<const replay::TrainSample> batch,
                     std::span<const StoryMembers> stories, double tau) {
  num::Tape tape;
  return tape.scalar(build_loss(tape, params, batch, stories, tau, false).loss);
}

std::vector<Matrix> loss_gradient(const encoder::EncoderParams& params,
                                  std::span<const replay::TrainSample> batch,
                                  std::span<const StoryMembers> stories, double tau, double* loss) {
  num::Tape tape;
  const LossGraph g = build_loss(tape, params, batch, stories, tau, true);
  if (loss) *loss = tape.scalar(g.loss);
  tape.backward(g.loss);
  std::vector<Matrix> grads;
  for (num::Var v : g.bound.all()) grads.push_back(tape.grad(v));
  return grads;
}

void adam_update(encoder::EncoderParams& params, OptimizerState& opt, const std::vector<Matrix>& grads) {
  const std::vector<Matrix*> tensors = params.tensors();
  if (grads.size() != tensors.size() || opt.first_moment.size() != tensors.size())
    throw Error(Errc::ShapeMismatch, "optimizer state does not match parameters");
  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Matrix& m = opt.first_moment[i];
    Matrix& v = opt.second_moment[i];
    m = opt.beta1 * m + (1.0 - opt.beta1) * grads[i];
    v = opt.beta2 * v + (1.0 - opt.beta2) * grads[i].cwiseAbs2();
    const auto m_hat = m.array() / c1;
    const auto v_hat = v.array() / c2;
    tensors[i]->array() -= opt.learning_rate * m_hat / (v_hat.sqrt() + opt.eps);
  }
}

double train_step(std::span<const replay::TrainSample> batch, encoder::EncoderParams& params,
                  OptimizerState& opt, std::span<const StoryMembers> stories, double tau) {
  double loss = 0.0;
  const std::vector<Matrix> grads = loss_gradient(params, batch, stories, tau, &loss);
  if (!std::isfinite(loss)) throw Error(Errc::NonFiniteValue, "contrastive loss is not finite");
  adam_update(params, opt, grads);
  return loss;
}

EpochResult update_epoch(WindowState& window, encoder::EncoderParams& params, OptimizerState& opt,
                         const EngineConfig& config, replay::Rng& rng) {
  EpochResult result;
  if (window.empty() || window.stories().empty() || config.epochs == 0) {
    result.skipped = true;
    return result;
  }
  const std::vector<replay::TrainSample> batch = replay::build_batch(window, config, rng);
  const std::vector<StoryMembers> stories = story_members(window);

  std::set<std::string> used;
  for (const StoryMembers& s : stories)
    for (const MemberRef& m : s.members) used.insert(m.article_id);
  for (const replay::TrainSample& sample : batch) {
    used.insert(sample.article_id);
    if (!sample.second_source_id.empty()) used.insert(sample.second_source_id);
  }
  result.used_article_ids.assign(used.begin(), used.end());

  for (int e = 0; e < config.epochs; ++e) {
    const double loss = train_step(batch, params, opt, stories, config.tau);
    result.steps.push_back({opt.step, loss, stories.size(), window.size()});
  }
  window.refresh(params);
  return result;
}

}  // namespace scstory::trainer
