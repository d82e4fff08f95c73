#include "radlab/student.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "radlab/rng.hpp"
#include "radlab/text.hpp"

namespace radlab {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

// ---------------------------------------------------------------------------
// vocab + tokenize

Vocab build_vocab(const ReportSet& reports, int min_count) {
  if (reports.empty()) throw ValidationError("build_vocab: empty corpus");
  std::map<std::string, long long> counts;
  for (const auto& r : reports) {
    for (auto& tok : word_tokens(r.text)) counts[tok]++;
  }
  std::vector<std::pair<std::string, long long>> kept;
  for (auto& [tok, count] : counts) {
    if (count >= min_count) kept.emplace_back(tok, count);
  }
  if (kept.empty()) throw ValidationError("build_vocab: no token meets min_count");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab vocab;
  vocab.id_to_token = {"[PAD]", "[CLS]", "[UNK]"};
  for (auto& [tok, count] : kept) vocab.id_to_token.push_back(tok);
  for (int i = 0; i < vocab.size(); ++i) vocab.token_to_id[vocab.id_to_token[i]] = i;
  return vocab;
}

TokenSeq tokenize(std::string_view text, const Vocab& vocab, int max_len) {
  if (max_len < 2) throw ValidationError("tokenize: max_len must be >= 2");
  TokenSeq seq;
  seq.ids.assign(static_cast<size_t>(max_len), Vocab::kPad);
  seq.ids[0] = Vocab::kCls;
  int pos = 1;
  for (const auto& tok : word_tokens(text)) {
    if (pos >= max_len) break;
    seq.ids[pos++] = vocab.id_of(tok);
  }
  seq.length = pos;
  return seq;
}

// ---------------------------------------------------------------------------
// config + layout

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0) {
    throw ValidationError("model config: dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw ValidationError("model config: d_model % n_heads != 0");
  if (max_len < 2) throw ValidationError("model config: max_len must be >= 2");
  if (max_rel_dist < 1) throw ValidationError("model config: max_rel_dist must be >= 1");
  if (vocab_size < 3) throw ValidationError("model config: vocab_size must be >= 3");
}

ParamLayout ParamLayout::build(const ModelConfig& cfg) {
  ParamLayout layout;
  size_t offset = 0;
  auto add = [&](std::string name, std::vector<int> dims) {
    size_t size = 1;
    for (int d : dims) size *= static_cast<size_t>(d);
    layout.tensors.push_back({std::move(name), std::move(dims), offset, size});
    offset += size;
  };
  const int d = cfg.d_model;
  add("embed.tok", {cfg.vocab_size, d});
  add("embed.rel", {2 * cfg.max_rel_dist, d});
  add("embed.ln.gamma", {d});
  add("embed.ln.beta", {d});
  char buf[64];
  for (int l = 0; l < cfg.n_layers; ++l) {
    auto layer_tensor = [&](const char* suffix, std::vector<int> dims) {
      std::snprintf(buf, sizeof(buf), "enc.%d.%s", l, suffix);
      add(buf, std::move(dims));
    };
    layer_tensor("attn.wq", {d, d});
    layer_tensor("attn.bq", {d});
    layer_tensor("attn.wk", {d, d});
    layer_tensor("attn.bk", {d});
    layer_tensor("attn.wv", {d, d});
    layer_tensor("attn.bv", {d});
    layer_tensor("attn.wqr", {d, d});
    layer_tensor("attn.wkr", {d, d});
    layer_tensor("attn.wo", {d, d});
    layer_tensor("attn.bo", {d});
    layer_tensor("ln1.gamma", {d});
    layer_tensor("ln1.beta", {d});
    layer_tensor("ff.w1", {d, cfg.d_ff});
    layer_tensor("ff.b1", {cfg.d_ff});
    layer_tensor("ff.w2", {cfg.d_ff, d});
    layer_tensor("ff.b2", {d});
    layer_tensor("ln2.gamma", {d});
    layer_tensor("ln2.beta", {d});
  }
  for (int i = 0; i < kNumFindings; ++i) {
    std::snprintf(buf, sizeof(buf), "head.%02d.w", i);
    add(buf, {3, d});
    std::snprintf(buf, sizeof(buf), "head.%02d.b", i);
    add(buf, {3});
  }
  layout.total_size = offset;
  return layout;
}

const TensorSpec& ParamLayout::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw ValidationError("unknown parameter tensor: " + std::string(name));
}

namespace {

ModelOffsets build_offsets(const ParamLayout& layout, const ModelConfig& cfg) {
  ModelOffsets off;
  off.tok_embed = layout.find("embed.tok").offset;
  off.rel_embed = layout.find("embed.rel").offset;
  off.emb_ln_g = layout.find("embed.ln.gamma").offset;
  off.emb_ln_b = layout.find("embed.ln.beta").offset;
  char buf[64];
  for (int l = 0; l < cfg.n_layers; ++l) {
    auto at = [&](const char* suffix) {
      std::snprintf(buf, sizeof(buf), "enc.%d.%s", l, suffix);
      return layout.find(buf).offset;
    };
    LayerOffsets lo{};
    lo.wq = at("attn.wq");
    lo.bq = at("attn.bq");
    lo.wk = at("attn.wk");
    lo.bk = at("attn.bk");
    lo.wv = at("attn.wv");
    lo.bv = at("attn.bv");
    lo.wqr = at("attn.wqr");
    lo.wkr = at("attn.wkr");
    lo.wo = at("attn.wo");
    lo.bo = at("attn.bo");
    lo.ln1_g = at("ln1.gamma");
    lo.ln1_b = at("ln1.beta");
    lo.w1 = at("ff.w1");
    lo.b1 = at("ff.b1");
    lo.w2 = at("ff.w2");
    lo.b2 = at("ff.b2");
    lo.ln2_g = at("ln2.gamma");
    lo.ln2_b = at("ln2.beta");
    off.layers.push_back(lo);
  }
  for (int i = 0; i < kNumFindings; ++i) {
    std::snprintf(buf, sizeof(buf), "head.%02d.w", i);
    off.head_w[i] = layout.find(buf).offset;
    std::snprintf(buf, sizeof(buf), "head.%02d.b", i);
    off.head_b[i] = layout.find(buf).offset;
  }
  return off;
}

constexpr double kInitStd = 0.02;
// Query/key projections (content and position) start wider: at 0.02 the
// attention logits are ~1e-2 after scaling, the softmax stays effectively
// uniform, and its parameters sit on a gradient plateau they never leave.
constexpr double kAttnQkInitStd = 0.2;

bool is_qk_projection(const std::string& name) {
  return name.find("attn.wq") != std::string::npos ||
         name.find("attn.wk") != std::string::npos;
}

}  // namespace

StudentModel StudentModel::init(const ModelConfig& cfg, Vocab vocab, uint64_t seed) {
  ModelConfig config = cfg;
  if (config.vocab_size == 0) config.vocab_size = vocab.size();
  config.validate();
  if (config.vocab_size != vocab.size()) {
    throw ValidationError("model config vocab_size does not match vocabulary");
  }
  StudentModel model;
  model.config = config;
  model.vocab = std::move(vocab);
  model.layout = ParamLayout::build(config);
  model.offsets = build_offsets(model.layout, config);
  model.params.assign(model.layout.total_size, 0.0);
  Rng rng(seed);
  for (const auto& t : model.layout.tensors) {
    const bool is_matrix = t.dims.size() == 2;
    const bool is_gain = t.name.find("gamma") != std::string::npos;
    double* p = model.params.data() + t.offset;
    if (is_matrix) {
      const double std = is_qk_projection(t.name) ? kAttnQkInitStd : kInitStd;
      for (size_t i = 0; i < t.size; ++i) p[i] = rng.normal(0.0, std);
    } else if (is_gain) {
      for (size_t i = 0; i < t.size; ++i) p[i] = 1.0;
    }
    // biases and layer-norm shifts stay zero
  }
  return model;
}

// ---------------------------------------------------------------------------
// kernels

std::array<double, 3> temperature_softmax(const ScoreRow& scores, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("temperature_softmax: T must be > 0");
  std::array<double, 3> out{};
  const double m = std::max({scores[0], scores[1], scores[2]});
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    out[k] = std::exp((scores[k] - m) / temperature);
    sum += out[k];
  }
  for (int k = 0; k < 3; ++k) out[k] /= sum;
  return out;
}

namespace {

inline int rel_bucket(int delta, int k) { return std::clamp(delta, -k, k - 1) + k; }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

void layer_norm(const Mat& x, const double* gamma, const double* beta, Mat& out,
                LayerNormTrace& trace) {
  constexpr double kLnEps = 1e-5;
  const int d = x.cols;
  out.resize(x.rows, d);
  trace.xhat.resize(x.rows, d);
  trace.inv_std.assign(static_cast<size_t>(x.rows), 0.0);
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xi[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= d;
    const double inv_std = 1.0 / std::sqrt(var + kLnEps);
    trace.inv_std[i] = inv_std;
    double* xh = trace.xhat.row(i);
    double* oi = out.row(i);
    for (int j = 0; j < d; ++j) {
      xh[j] = (xi[j] - mean) * inv_std;
      oi[j] = gamma[j] * xh[j] + beta[j];
    }
  }
}

void check_finite(const Mat& m, int layer, const char* what) {
  for (double v : m.v) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value in encoder layer " + std::to_string(layer) + " (" +
                         what + ")");
    }
  }
}

// Attention + feed-forward block over the first h.rows positions.
void attention_block(const StudentModel& model, int layer, const Mat& h,
                     const std::vector<uint8_t>& mask, LayerTrace& t) {
  const ModelConfig& cfg = model.config;
  const int len = h.rows;
  const int d = cfg.d_model;
  const int dh = d / cfg.n_heads;
  const int k = cfg.max_rel_dist;
  const int n_buckets = 2 * k;
  const LayerOffsets& lo = model.offsets.layers[layer];
  const double scale = 1.0 / std::sqrt(3.0 * dh);

  t.x_in = h;
  matmul_bias(h, model.ptr(lo.wq), model.ptr(lo.bq), d, d, t.qc);
  matmul_bias(h, model.ptr(lo.wk), model.ptr(lo.bk), d, d, t.kc);
  matmul_bias(h, model.ptr(lo.wv), model.ptr(lo.bv), d, d, t.vc);

  Mat rel(n_buckets, d);
  std::memcpy(rel.v.data(), model.ptr(model.offsets.rel_embed),
              sizeof(double) * rel.v.size());
  matmul_bias(rel, model.ptr(lo.wkr), nullptr, d, d, t.kr);
  matmul_bias(rel, model.ptr(lo.wqr), nullptr, d, d, t.qr);

  t.probs.assign(static_cast<size_t>(cfg.n_heads), Mat(len, len));
  t.ctx.resize(len, d);
  std::vector<double> logits(static_cast<size_t>(len));
  for (int head = 0; head < cfg.n_heads; ++head) {
    const int c0 = head * dh;
    Mat& probs = t.probs[head];
    // c2p and p2c lookup tables: position-indexed dot products
    Mat cp(len, n_buckets);
    Mat pc(len, n_buckets);
    for (int i = 0; i < len; ++i) {
      const double* q = t.qc.row(i) + c0;
      const double* kc_i = t.kc.row(i) + c0;
      for (int b = 0; b < n_buckets; ++b) {
        const double* krb = t.kr.row(b) + c0;
        const double* qrb = t.qr.row(b) + c0;
        double s1 = 0.0, s2 = 0.0;
        for (int c = 0; c < dh; ++c) {
          s1 += q[c] * krb[c];
          s2 += kc_i[c] * qrb[c];
        }
        cp.at(i, b) = s1;
        pc.at(i, b) = s2;
      }
    }
    for (int i = 0; i < len; ++i) {
      const double* qi = t.qc.row(i) + c0;
      double max_logit = -1e300;
      for (int j = 0; j < len; ++j) {
        if (!mask[j]) continue;
        const double* kj = t.kc.row(j) + c0;
        double c2c = 0.0;
        for (int c = 0; c < dh; ++c) c2c += qi[c] * kj[c];
        const double c2p = cp.at(i, rel_bucket(i - j, k));
        const double p2c = pc.at(j, rel_bucket(j - i, k));
        logits[j] = scale * (c2c + c2p + p2c);
        max_logit = std::max(max_logit, logits[j]);
      }
      double* pi = probs.row(i);
      double sum = 0.0;
      for (int j = 0; j < len; ++j) {
        if (!mask[j]) {
          pi[j] = 0.0;
          continue;
        }
        pi[j] = std::exp(logits[j] - max_logit);
        sum += pi[j];
      }
      if (sum > 0.0) {
        for (int j = 0; j < len; ++j) pi[j] /= sum;
      }
      double* ctx_i = t.ctx.row(i) + c0;
      for (int c = 0; c < dh; ++c) ctx_i[c] = 0.0;
      for (int j = 0; j < len; ++j) {
        const double w = pi[j];
        if (w == 0.0) continue;
        const double* vj = t.vc.row(j) + c0;
        for (int c = 0; c < dh; ++c) ctx_i[c] += w * vj[c];
      }
    }
  }

  matmul_bias(t.ctx, model.ptr(lo.wo), model.ptr(lo.bo), d, d, t.attn_out);
  Mat sum1(len, d);
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j < d; ++j) sum1.at(i, j) = t.x_in.at(i, j) + t.attn_out.at(i, j);
  }
  layer_norm(sum1, model.ptr(lo.ln1_g), model.ptr(lo.ln1_b), t.x1, t.ln1);

  matmul_bias(t.x1, model.ptr(lo.w1), model.ptr(lo.b1), d, cfg.d_ff, t.ff_pre);
  t.ff_act.resize(len, cfg.d_ff);
  for (size_t i = 0; i < t.ff_pre.v.size(); ++i) t.ff_act.v[i] = gelu(t.ff_pre.v[i]);
  matmul_bias(t.ff_act, model.ptr(lo.w2), model.ptr(lo.b2), cfg.d_ff, d, t.ff_out);

  Mat sum2(len, d);
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j < d; ++j) sum2.at(i, j) = t.x1.at(i, j) + t.ff_out.at(i, j);
  }
  layer_norm(sum2, model.ptr(lo.ln2_g), model.ptr(lo.ln2_b), t.x_out, t.ln2);
  check_finite(t.x_out, layer, "block output");
}

}  // namespace

Mat disentangled_attention_layer(const StudentModel& model, int layer, const Mat& h,
                                 const std::vector<uint8_t>& mask, std::vector<Mat>* probs_out) {
  if (layer < 0 || layer >= model.config.n_layers) {
    throw ValidationError("disentangled_attention_layer: bad layer index");
  }
  if (h.cols != model.config.d_model || mask.size() != static_cast<size_t>(h.rows)) {
    throw ValidationError("disentangled_attention_layer: shape mismatch");
  }
  LayerTrace trace;
  attention_block(model, layer, h, mask, trace);
  if (probs_out) *probs_out = trace.probs;
  return trace.x_out;
}

void forward_trace(const StudentModel& model, const TokenSeq& seq, ForwardTrace& trace) {
  const ModelConfig& cfg = model.config;
  if (static_cast<int>(seq.ids.size()) != cfg.max_len || seq.length < 1 ||
      seq.length > cfg.max_len) {
    throw ValidationError("forward: token sequence does not match model max_len");
  }
  const int len = seq.length;
  trace.len = len;
  trace.ids.assign(seq.ids.begin(), seq.ids.begin() + len);
  for (int id : trace.ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw ValidationError("forward: token id outside model vocabulary");
    }
  }

  trace.x0.resize(len, cfg.d_model);
  const double* tok = model.ptr(model.offsets.tok_embed);
  for (int i = 0; i < len; ++i) {
    std::memcpy(trace.x0.row(i), tok + static_cast<size_t>(trace.ids[i]) * cfg.d_model,
                sizeof(double) * cfg.d_model);
  }
  layer_norm(trace.x0, model.ptr(model.offsets.emb_ln_g), model.ptr(model.offsets.emb_ln_b),
             trace.x0n, trace.emb_ln);

  const std::vector<uint8_t> mask(static_cast<size_t>(len), 1);
  trace.layers.resize(static_cast<size_t>(cfg.n_layers));
  const Mat* x = &trace.x0n;
  for (int l = 0; l < cfg.n_layers; ++l) {
    attention_block(model, l, *x, mask, trace.layers[l]);
    x = &trace.layers[l].x_out;
  }

  const double* h_cls = x->row(0);
  for (int i = 0; i < kNumFindings; ++i) {
    const double* w = model.ptr(model.offsets.head_w[i]);
    const double* b = model.ptr(model.offsets.head_b[i]);
    for (int kk = 0; kk < 3; ++kk) {
      double s = b[kk];
      const double* wk = w + static_cast<size_t>(kk) * cfg.d_model;
      for (int c = 0; c < cfg.d_model; ++c) s += wk[c] * h_cls[c];
      trace.scores[i][kk] = s;
    }
  }
}

ScoreMatrix forward_one(const StudentModel& model, const TokenSeq& seq) {
  ForwardTrace trace;
  forward_trace(model, seq, trace);
  return trace.scores;
}

std::vector<ScoreMatrix> forward(const StudentModel& model, const std::vector<TokenSeq>& batch) {
  std::vector<ScoreMatrix> out;
  out.reserve(batch.size());
  ForwardTrace trace;
  for (const auto& seq : batch) {
    forward_trace(model, seq, trace);
    out.push_back(trace.scores);
  }
  return out;
}

CertaintyStatus argmax_status(const ScoreRow& scores) {
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return static_cast<CertaintyStatus>(best);
}

LabelSet predict(const StudentModel& model, const Report& report) {
  const TokenSeq seq = tokenize(report.text, model.vocab, model.config.max_len);
  const ScoreMatrix scores = forward_one(model, seq);
  LabelSet labels;
  for (Finding f : all_findings()) {
    labels.set(f, argmax_status(scores[static_cast<int>(f)]));
  }
  return labels;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[4] = {'D', 'R', 'A', 'D'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF64 = 0;
constexpr uint8_t kDtypeF32 = 1;

void write_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& in, const char* what) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

json config_to_json(const ModelConfig& cfg) {
  return json{{"d_model", cfg.d_model},       {"n_layers", cfg.n_layers},
              {"n_heads", cfg.n_heads},       {"d_ff", cfg.d_ff},
              {"max_len", cfg.max_len},       {"max_rel_dist", cfg.max_rel_dist},
              {"vocab_size", cfg.vocab_size}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.d_ff = j.at("d_ff").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.max_rel_dist = j.at("max_rel_dist").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  return cfg;
}

}  // namespace

void save_checkpoint(const StudentModel& model, const std::filesystem::path& path, bool f32) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  json record;
  record["model"] = config_to_json(model.config);
  record["vocab"] = model.vocab.id_to_token;
  const std::string config_str = record.dump();
  write_u32(out, static_cast<uint32_t>(config_str.size()));
  out.write(config_str.data(), static_cast<std::streamsize>(config_str.size()));
  write_u32(out, static_cast<uint32_t>(model.layout.tensors.size()));
  for (const auto& t : model.layout.tensors) {
    write_u32(out, static_cast<uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    const uint8_t dtype = f32 ? kDtypeF32 : kDtypeF64;
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    const uint8_t rank = static_cast<uint8_t>(t.dims.size());
    out.write(reinterpret_cast<const char*>(&rank), 1);
    for (int dim : t.dims) write_u32(out, static_cast<uint32_t>(dim));
    const double* p = model.params.data() + t.offset;
    if (f32) {
      std::vector<float> vals(p, p + t.size);
      out.write(reinterpret_cast<const char*>(vals.data()),
                static_cast<std::streamsize>(vals.size() * sizeof(float)));
    } else {
      out.write(reinterpret_cast<const char*>(p),
                static_cast<std::streamsize>(t.size * sizeof(double)));
    }
  }
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

StudentModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("bad checkpoint magic in " + path.string());
  }
  const uint32_t version = read_u32(in, "version");
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kVersion) + ")");
  }
  const uint32_t config_len = read_u32(in, "config length");
  std::string config_str(config_len, '\0');
  if (!in.read(config_str.data(), config_len)) {
    throw CheckpointError("checkpoint truncated while reading config record");
  }
  json record;
  try {
    record = json::parse(config_str);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("bad checkpoint config record: ") + e.what());
  }

  StudentModel model;
  model.config = config_from_json(record.at("model"));
  model.config.validate();
  model.vocab.id_to_token = record.at("vocab").get<std::vector<std::string>>();
  for (int i = 0; i < model.vocab.size(); ++i) {
    model.vocab.token_to_id[model.vocab.id_to_token[i]] = i;
  }
  if (model.vocab.size() != model.config.vocab_size) {
    throw CheckpointError("checkpoint vocab does not match config vocab_size");
  }
  model.layout = ParamLayout::build(model.config);
  model.offsets = build_offsets(model.layout, model.config);
  model.params.assign(model.layout.total_size, 0.0);

  const uint32_t tensor_count = read_u32(in, "tensor count");
  if (tensor_count != model.layout.tensors.size()) {
    throw CheckpointError("checkpoint tensor table has " + std::to_string(tensor_count) +
                          " entries, expected " + std::to_string(model.layout.tensors.size()));
  }
  for (const auto& expected : model.layout.tensors) {
    const uint32_t name_len = read_u32(in, "tensor name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw CheckpointError("checkpoint truncated while reading tensor name");
    }
    if (name != expected.name) {
      throw CheckpointError("checkpoint tensor '" + name + "' does not match expected '" +
                            expected.name + "'");
    }
    uint8_t dtype = 0, rank = 0;
    if (!in.read(reinterpret_cast<char*>(&dtype), 1) ||
        !in.read(reinterpret_cast<char*>(&rank), 1)) {
      throw CheckpointError("checkpoint truncated while reading tensor header");
    }
    if (dtype != kDtypeF64 && dtype != kDtypeF32) {
      throw CheckpointError("unknown dtype code for tensor '" + name + "'");
    }
    if (rank != expected.dims.size()) {
      throw CheckpointError("rank mismatch for tensor '" + name + "'");
    }
    for (int dim : expected.dims) {
      const uint32_t got = read_u32(in, "tensor dim");
      if (got != static_cast<uint32_t>(dim)) {
        throw CheckpointError("shape mismatch for tensor '" + name + "'");
      }
    }
    double* p = model.params.data() + expected.offset;
    if (dtype == kDtypeF64) {
      if (!in.read(reinterpret_cast<char*>(p),
                   static_cast<std::streamsize>(expected.size * sizeof(double)))) {
        throw CheckpointError("checkpoint truncated while reading tensor '" + name + "'");
      }
    } else {
      std::vector<float> vals(expected.size);
      if (!in.read(reinterpret_cast<char*>(vals.data()),
                   static_cast<std::streamsize>(vals.size() * sizeof(float)))) {
        throw CheckpointError("checkpoint truncated while reading tensor '" + name + "'");
      }
      for (size_t i = 0; i < expected.size; ++i) p[i] = static_cast<double>(vals[i]);
    }
  }
  return model;
}

}  // namespace radlab
