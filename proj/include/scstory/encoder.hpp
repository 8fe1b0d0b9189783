#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "scstory/domain.hpp"
#include "scstory/numkernel.hpp"

namespace scstory::encoder {

/// Learnable weights of the story-indicative article encoder.
///
/// Attention block: per-head query/key/value projections (h_e x h_e/n) and
/// the output projection (h_e x h_e). Context block: linear layer
/// (h_e x h_c, bias 1 x h_c). Pooling block: scoring layer (h_c x h_c, bias
/// 1 x h_c) and scoring vector (h_c x 1).
struct EncoderParams {
  int embed_dim = 0;
  int hidden_dim = 0;
  int n_heads = 0;

  std::vector<Matrix> query;
  std::vector<Matrix> key;
  std::vector<Matrix> value;
  Matrix out;
  Matrix context;
  Matrix context_bias;
  Matrix pool;
  Matrix pool_bias;
  Matrix pool_vector;

  int head_dim() const noexcept { return embed_dim / n_heads; }

  /// Every tensor in declaration order: for each head (query, key, value),
  /// then out, context, context_bias, pool, pool_bias, pool_vector.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  std::size_t parameter_count() const;
};

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
EncoderParams init_params(std::uint64_t seed, int embed_dim, int hidden_dim, int n_heads);

/// Parameter leaves recorded on a tape (referencing, not copying, the weights).
struct BoundParams {
  std::vector<num::Var> query;
  std::vector<num::Var> key;
  std::vector<num::Var> value;
  num::Var out;
  num::Var context;
  num::Var context_bias;
  num::Var pool;
  num::Var pool_bias;
  num::Var pool_vector;

  std::vector<num::Var> all() const;  // same order as EncoderParams::tensors()
};

BoundParams bind(num::Tape& tape, const EncoderParams& params, bool requires_grad);

/// Nodes produced by one article's forward pass. All cover only the article's
/// real sentences (n = valid_count rows).
struct EncodedNodes {
  num::Var repr;                        // 1 x h_c
  num::Var attention_context;           // n x h_e, multi-head output
  num::Var sentences;                   // n x h_c
  num::Var pooling;                     // 1 x n
  std::vector<num::Var> head_attention;  // n x n per head
};

EncodedNodes encode_on_tape(num::Tape& tape, const BoundParams& bound, const SentenceMatrix& E);

struct MhsOutput {
  Matrix context;                     // L x h_e, padded rows zero
  std::vector<Matrix> head_attention;  // L x L per head, padded rows/cols zero
};

struct PoolOutput {
  RowVector repr;
  std::vector<double> weights;  // L entries, zero where masked
};

struct EncodeOutput {
  RowVector article_repr;                   // h_c
  Matrix sentence_reprs;                    // L x h_c, padded rows zero
  std::vector<double> pooling_weights;      // L, sums to 1 over the mask
  std::vector<double> attention_importance;  // L, sums to 1 over the mask
};

MhsOutput mhs(const SentenceMatrix& E, const EncoderParams& params);
Matrix sentence_context(const SentenceMatrix& E, const EncoderParams& params);
PoolOutput attentive_pool(const Matrix& C, const std::vector<bool>& mask, const EncoderParams& params);
EncodeOutput encode_article(const SentenceMatrix& E, const EncoderParams& params);
RowVector mean_pool_baseline(const SentenceMatrix& E);

/// Attention received by each sentence, averaged over heads and query rows.
std::vector<double> attention_importance(const std::vector<Matrix>& head_attention, int valid_count);

// Checkpoint file: magic "SCSE", u32 version, u32 h_e, u32 h_c, u32 n_heads,
// then every tensor row-major as little-endian float32 in tensors() order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const EncoderParams& params);
void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params);
EncoderParams read_checkpoint(std::istream& in);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace scstory::encoder
