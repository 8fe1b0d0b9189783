#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scstory/encoder.hpp"
#include "scstory/replay.hpp"
#include "scstory/window.hpp"

namespace scstory::trainer {

/// Adam state; moments mirror EncoderParams::tensors() one-to-one.
struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double learning_rate = 1e-5;

  static OptimizerState for_params(const encoder::EncoderParams& params, double learning_rate);
};

struct MemberRef {
  std::string article_id;
  std::shared_ptr<const SentenceMatrix> sentences;
};

/// In-window members of one active story.
struct StoryMembers {
  StoryId id = 0;
  std::vector<MemberRef> members;
};

std::vector<StoryMembers> story_members(const WindowState& window);

/// Sum over rows b of  logsumexp_s(cos(r_b, c_s) / tau) - cos(r_b, c_{t_b}) / tau,
/// where r = sample_reprs (B x h), c = centroids (S x h), t = targets.
num::Var contrastive_loss(num::Tape& tape, num::Var sample_reprs, std::span<const int> targets,
                          num::Var centroids, double tau);

/// Same objective on plain matrices.
double contrastive_loss_value(const Matrix& sample_reprs, std::span<const int> targets, const Matrix& centroids,
                              double tau);

struct LossGraph {
  num::Var loss;
  encoder::BoundParams bound;
};

/// Records the full objective: every batch sample and every story member is
/// encoded on `tape` (window articles once, shared between both roles) and
/// centroids are member means on the tape, so gradients reach the parameters
/// through both the article and the story side.
LossGraph build_loss(num::Tape& tape, const encoder::EncoderParams& params,
                     std::span<const replay::TrainSample> batch, std::span<const StoryMembers> stories,
                     double tau, bool requires_grad = true);

/// Forward value of build_loss.
double evaluate_loss(const encoder::EncoderParams& params, std::span<const replay::TrainSample> batch,
                     std::span<const StoryMembers> stories, double tau);

/// Gradients for every tensor in EncoderParams::tensors() order.
std::vector<Matrix> loss_gradient(const encoder::EncoderParams& params,
                                  std::span<const replay::TrainSample> batch,
                                  std::span<const StoryMembers> stories, double tau, double* loss = nullptr);

void adam_update(encoder::EncoderParams& params, OptimizerState& opt, const std::vector<Matrix>& grads);

/// One forward, one backward, one Adam update. Returns the pre-update loss.
double train_step(std::span<const replay::TrainSample> batch, encoder::EncoderParams& params,
                  OptimizerState& opt, std::span<const StoryMembers> stories, double tau);

struct StepRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  std::size_t n_stories = 0;
  std::size_t n_articles = 0;
};

struct EpochResult {
  std::vector<StepRecord> steps;
  std::vector<std::string> used_article_ids;  // window articles the update read
  bool skipped = false;
};

/// Builds one batch and runs `config.epochs` train steps on it, then
/// refreshes the window's cached representations and centroids. A window
/// without articles or stories is skipped.
EpochResult update_epoch(WindowState& window, encoder::EncoderParams& params, OptimizerState& opt,
                         const EngineConfig& config, replay::Rng& rng);

}  // namespace scstory::trainer
