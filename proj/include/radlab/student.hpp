#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "radlab/corpus.hpp"
#include "radlab/mat.hpp"

namespace radlab {

// ---------------------------------------------------------------------------
// vocabulary + tokenization

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kCls = 1;
  static constexpr int kUnk = 2;

  std::vector<std::string> id_to_token;  // dense ids; reserved first
  std::unordered_map<std::string, int> token_to_id;

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id_of(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
  }
  bool operator==(const Vocab& o) const { return id_to_token == o.id_to_token; }
};

// Tokens with count >= min_count, ordered by (count desc, token asc).
Vocab build_vocab(const ReportSet& reports, int min_count);

struct TokenSeq {
  std::vector<int> ids;  // padded to max_len
  int length = 0;        // [CLS] + real tokens, before padding
};

// [CLS] first, out-of-vocab -> [UNK], truncated to max_len, padded with [PAD].
TokenSeq tokenize(std::string_view text, const Vocab& vocab, int max_len);

// ---------------------------------------------------------------------------
// model

struct ModelConfig {
  int d_model = 32;
  int n_layers = 2;
  int n_heads = 2;
  int d_ff = 64;
  int max_len = 64;
  int max_rel_dist = 8;  // relative distances clamp to [-k, k-1]
  int vocab_size = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TensorSpec {
  std::string name;
  std::vector<int> dims;
  size_t offset = 0;
  size_t size = 0;
};

// Fixed naming/ordering of every parameter tensor within one flat buffer.
struct ParamLayout {
  std::vector<TensorSpec> tensors;
  size_t total_size = 0;

  static ParamLayout build(const ModelConfig& cfg);
  const TensorSpec& find(std::string_view name) const;
};

// Byte offsets of the tensors the kernels touch, resolved once.
struct LayerOffsets {
  size_t wq, bq, wk, bk, wv, bv, wqr, wkr, wo, bo;
  size_t ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
};

struct ModelOffsets {
  size_t tok_embed = 0;
  size_t rel_embed = 0;
  size_t emb_ln_g = 0;
  size_t emb_ln_b = 0;
  std::vector<LayerOffsets> layers;
  std::array<size_t, kNumFindings> head_w{};
  std::array<size_t, kNumFindings> head_b{};
};

class StudentModel {
 public:
  ModelConfig config;
  Vocab vocab;
  ParamLayout layout;
  ModelOffsets offsets;
  std::vector<double> params;

  // Weight matrices from N(0, 0.02^2), biases zero, layer-norm gain 1.
  static StudentModel init(const ModelConfig& cfg, Vocab vocab, uint64_t seed);

  double* ptr(size_t offset) { return params.data() + offset; }
  const double* ptr(size_t offset) const { return params.data() + offset; }
};

// ---------------------------------------------------------------------------
// forward pass

using ScoreRow = std::array<double, 3>;                  // Present, Absent, Uncertain
using ScoreMatrix = std::array<ScoreRow, kNumFindings>;  // 13 x 3 raw scores

// p_k = exp(s_k/T) / sum_m exp(s_m/T), computed with max subtraction.
std::array<double, 3> temperature_softmax(const ScoreRow& scores, double temperature);

struct LayerNormTrace {
  Mat xhat;                     // normalized input
  std::vector<double> inv_std;  // per row
};

struct LayerTrace {
  Mat x_in;                // layer input
  Mat qc, kc, vc;          // content projections
  Mat kr, qr;              // projected relative embeddings (2k x d)
  std::vector<Mat> probs;  // per head attention weights (len x len)
  Mat ctx;                 // concatenated head contexts (pre-output-proj)
  Mat attn_out;
  LayerNormTrace ln1;
  Mat x1;      // after first residual + layer norm
  Mat ff_pre;  // x1*W1 + b1
  Mat ff_act;  // gelu(ff_pre)
  Mat ff_out;
  LayerNormTrace ln2;
  Mat x_out;
};

struct ForwardTrace {
  int len = 0;
  std::vector<int> ids;  // first `len` entries used
  Mat x0;                // raw embeddings
  LayerNormTrace emb_ln;
  Mat x0n;  // normalized embeddings, the encoder input
  std::vector<LayerTrace> layers;
  ScoreMatrix scores{};
};

// One encoder block: disentangled attention (c2c + c2p + p2c, scaled by
// 1/sqrt(3*d_head)), output projection, residual + layer norm, GELU
// feed-forward, residual + layer norm. mask[j] == 0 removes position j as an
// attention target. H may have fewer rows than config.max_len.
Mat disentangled_attention_layer(const StudentModel& model, int layer, const Mat& h,
                                 const std::vector<uint8_t>& mask,
                                 std::vector<Mat>* probs_out = nullptr);

// Full forward over the true (unpadded) length: embedding lookup, embedding
// layer norm, encoder stack; h_CLS = row 0 of the last layer output feeds
// the 13 affine heads.
void forward_trace(const StudentModel& model, const TokenSeq& seq, ForwardTrace& trace);
ScoreMatrix forward_one(const StudentModel& model, const TokenSeq& seq);
std::vector<ScoreMatrix> forward(const StudentModel& model, const std::vector<TokenSeq>& batch);

// Argmax at T=1; ties break by status index (Present < Absent < Uncertain).
LabelSet predict(const StudentModel& model, const Report& report);
CertaintyStatus argmax_status(const ScoreRow& scores);

// ---------------------------------------------------------------------------
// checkpoints: little-endian, magic "DRAD", version 1, JSON config record,
// then (name, dtype, rank, dims, row-major values) per tensor.

void save_checkpoint(const StudentModel& model, const std::filesystem::path& path,
                     bool f32 = false);
StudentModel load_checkpoint(const std::filesystem::path& path);

}  // namespace radlab
