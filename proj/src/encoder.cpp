#include "scstory/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

namespace scstory::encoder {
namespace {

Matrix glorot(std::mt19937_64& rng, int fan_in, int fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

std::vector<bool> all_true(std::size_t n) { return std::vector<bool>(n, true); }

// Attentive pooling over the rows of `sentences` where `mask` is true.
std::pair<num::Var, num::Var> pool_on_tape(num::Tape& tape, const BoundParams& bound,
                                           num::Var sentences, std::vector<bool> mask) {
  num::Var hidden = tape.tanh(tape.add_row(tape.matmul(sentences, bound.pool), bound.pool_bias));
  num::Var scores = tape.transpose(tape.matmul(hidden, bound.pool_vector));  // 1 x rows
  num::Var alpha = tape.masked_row_softmax(scores, std::move(mask), {true});
  return {tape.matmul(alpha, sentences), alpha};
}

}  // namespace

std::vector<Matrix*> EncoderParams::tensors() {
  std::vector<Matrix*> out;
  for (int h = 0; h < n_heads; ++h) {
    out.push_back(&query[h]);
    out.push_back(&key[h]);
    out.push_back(&value[h]);
  }
  for (Matrix* m : {&this->out, &context, &context_bias, &pool, &pool_bias, &pool_vector})
    out.push_back(m);
  return out;
}

std::vector<const Matrix*> EncoderParams::tensors() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<EncoderParams*>(this)->tensors()) out.push_back(m);
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

EncoderParams init_params(std::uint64_t seed, int embed_dim, int hidden_dim, int n_heads) {
  if (embed_dim < 1 || hidden_dim < 1 || n_heads < 1 || embed_dim % n_heads != 0)
    throw Error(Errc::BadDims, "h_e=" + std::to_string(embed_dim) + " h_c=" +
                                   std::to_string(hidden_dim) + " n=" + std::to_string(n_heads));
  std::mt19937_64 rng(seed);
  EncoderParams p;
  p.embed_dim = embed_dim;
  p.hidden_dim = hidden_dim;
  p.n_heads = n_heads;
  const int hd = embed_dim / n_heads;
  for (int h = 0; h < n_heads; ++h) {
    p.query.push_back(glorot(rng, embed_dim, hd));
    p.key.push_back(glorot(rng, embed_dim, hd));
    p.value.push_back(glorot(rng, embed_dim, hd));
  }
  p.out = glorot(rng, embed_dim, embed_dim);
  p.context = glorot(rng, embed_dim, hidden_dim);
  p.context_bias = Matrix::Zero(1, hidden_dim);
  p.pool = glorot(rng, hidden_dim, hidden_dim);
  p.pool_bias = Matrix::Zero(1, hidden_dim);
  p.pool_vector = glorot(rng, hidden_dim, 1);
  return p;
}

std::vector<num::Var> BoundParams::all() const {
  std::vector<num::Var> out;
  for (std::size_t h = 0; h < query.size(); ++h) {
    out.push_back(query[h]);
    out.push_back(key[h]);
    out.push_back(value[h]);
  }
  for (num::Var v : {this->out, context, context_bias, pool, pool_bias, pool_vector})
    out.push_back(v);
  return out;
}

BoundParams bind(num::Tape& tape, const EncoderParams& params, bool requires_grad) {
  BoundParams b;
  for (int h = 0; h < params.n_heads; ++h) {
    b.query.push_back(tape.leaf_ref(params.query[h], requires_grad));
    b.key.push_back(tape.leaf_ref(params.key[h], requires_grad));
    b.value.push_back(tape.leaf_ref(params.value[h], requires_grad));
  }
  b.out = tape.leaf_ref(params.out, requires_grad);
  b.context = tape.leaf_ref(params.context, requires_grad);
  b.context_bias = tape.leaf_ref(params.context_bias, requires_grad);
  b.pool = tape.leaf_ref(params.pool, requires_grad);
  b.pool_bias = tape.leaf_ref(params.pool_bias, requires_grad);
  b.pool_vector = tape.leaf_ref(params.pool_vector, requires_grad);
  return b;
}

EncodedNodes encode_on_tape(num::Tape& tape, const BoundParams& bound, const SentenceMatrix& E) {
  const int n = E.valid_count();
  if (n < 1) throw Error(Errc::AllMasked, E.article_id());
  const auto& w0 = tape.value(bound.query.front());
  if (E.dim() != w0.rows())
    throw Error(Errc::BadDims, "article " + E.article_id() + " has dim " + std::to_string(E.dim()) +
                                   ", encoder expects " + std::to_string(w0.rows()));

  // Padded rows never interact with real ones, so only the real prefix is recorded.
  num::Var input = tape.leaf(E.valid_rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(w0.cols()));
  const std::vector<bool> mask = all_true(static_cast<std::size_t>(n));

  EncodedNodes out;
  std::vector<num::Var> heads;
  for (std::size_t h = 0; h < bound.query.size(); ++h) {
    num::Var q = tape.matmul(input, bound.query[h]);
    num::Var k = tape.matmul(input, bound.key[h]);
    num::Var v = tape.matmul(input, bound.value[h]);
    num::Var attn = tape.masked_row_softmax(tape.scale(tape.matmul_nt(q, k), scale), mask, mask);
    out.head_attention.push_back(attn);
    heads.push_back(tape.matmul(attn, v));
  }
  out.attention_context = tape.matmul(tape.concat_cols(heads), bound.out);
  num::Var normed = tape.layer_norm(tape.add(out.attention_context, input));
  out.sentences =
      tape.tanh(tape.add_row(tape.matmul(normed, bound.context), bound.context_bias));
  auto [repr, alpha] = pool_on_tape(tape, bound, out.sentences, mask);
  out.repr = repr;
  out.pooling = alpha;
  return out;
}

std::vector<double> attention_importance(const std::vector<Matrix>& head_attention, int valid_count) {
  if (head_attention.empty()) return {};
  const Eigen::Index L = head_attention.front().cols();
  std::vector<double> importance(static_cast<std::size_t>(L), 0.0);
  const double norm = static_cast<double>(head_attention.size()) * valid_count;
  for (const Matrix& A : head_attention) {
    const RowVector received = A.topRows(valid_count).colwise().sum();
    for (Eigen::Index k = 0; k < valid_count; ++k) importance[k] += received(k) / norm;
  }
  return importance;
}

MhsOutput mhs(const SentenceMatrix& E, const EncoderParams& params) {
  num::Tape tape;
  const BoundParams bound = bind(tape, params, false);
  const EncodedNodes nodes = encode_on_tape(tape, bound, E);
  const int n = E.valid_count();
  const int L = E.max_sentences();

  MhsOutput out;
  for (num::Var a : nodes.head_attention) {
    Matrix full = Matrix::Zero(L, L);
    full.topLeftCorner(n, n) = tape.value(a);
    out.head_attention.push_back(std::move(full));
  }
  out.context = Matrix::Zero(L, params.embed_dim);
  out.context.topRows(n) = tape.value(nodes.attention_context);
  return out;
}

Matrix sentence_context(const SentenceMatrix& E, const EncoderParams& params) {
  num::Tape tape;
  const EncodedNodes nodes = encode_on_tape(tape, bind(tape, params, false), E);
  Matrix out = Matrix::Zero(E.max_sentences(), params.hidden_dim);
  out.topRows(E.valid_count()) = tape.value(nodes.sentences);
  return out;
}

PoolOutput attentive_pool(const Matrix& C, const std::vector<bool>& mask, const EncoderParams& params) {
  if (static_cast<Eigen::Index>(mask.size()) != C.rows())
    throw Error(Errc::ShapeMismatch, "attentive_pool: mask length");
  num::Tape tape;
  const BoundParams bound = bind(tape, params, false);
  auto [repr, alpha] = pool_on_tape(tape, bound, tape.leaf_ref(C), mask);
  PoolOutput out;
  out.repr = tape.value(repr);
  const Matrix& a = tape.value(alpha);
  out.weights.assign(a.data(), a.data() + a.size());
  return out;
}

EncodeOutput encode_article(const SentenceMatrix& E, const EncoderParams& params) {
  num::Tape tape;
  const EncodedNodes nodes = encode_on_tape(tape, bind(tape, params, false), E);
  const int n = E.valid_count();
  const int L = E.max_sentences();

  EncodeOutput out;
  out.article_repr = tape.value(nodes.repr);
  out.sentence_reprs = Matrix::Zero(L, params.hidden_dim);
  out.sentence_reprs.topRows(n) = tape.value(nodes.sentences);
  out.pooling_weights.assign(static_cast<std::size_t>(L), 0.0);
  const Matrix& alpha = tape.value(nodes.pooling);
  for (int k = 0; k < n; ++k) out.pooling_weights[k] = alpha(0, k);

  std::vector<Matrix> heads;
  for (num::Var a : nodes.head_attention) {
    Matrix full = Matrix::Zero(L, L);
    full.topLeftCorner(n, n) = tape.value(a);
    heads.push_back(std::move(full));
  }
  out.attention_importance = attention_importance(heads, n);
  return out;
}

RowVector mean_pool_baseline(const SentenceMatrix& E) {
  if (E.valid_count() < 1) throw Error(Errc::AllMasked, E.article_id());
  return E.valid_rows().colwise().mean();
}

}  // namespace scstory::encoder
