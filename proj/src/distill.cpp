#include "radlab/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "radlab/rng.hpp"

namespace radlab {

using nlohmann::json;

TrainTarget TrainTarget::from_labels(const LabelSet& labels) {
  TrainTarget t;
  for (Finding f : all_findings()) {
    const CertaintyStatus s = labels.get(f);
    t.y[static_cast<int>(f)] =
        s == CertaintyStatus::NotMentioned ? kMasked : static_cast<int8_t>(s);
  }
  return t;
}

void TrainConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("train config: alpha must lie in [0,1]");
  if (!(t_distill > 0.0)) throw DomainError("train config: t_distill must be > 0");
  if (!(lr_max > 0.0)) throw DomainError("train config: lr_max must be > 0");
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (total_steps > 0 && warmup_steps > total_steps) {
    throw ValidationError("train config: warmup_steps must not exceed total_steps");
  }
  if (weight_decay < 0.0) throw ValidationError("train config: weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("train config: betas must lie in [0,1)");
  }
  if (!(eps_adam > 0.0)) throw ValidationError("train config: eps_adam must be > 0");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ValidationError("train config: val_fraction must lie in [0,1)");
  }
}

// ---------------------------------------------------------------------------
// losses

namespace {

// -log softmax(s/T)_y via the log-sum-exp form; max subtraction keeps the
// exponentials bounded for any finite scores.
double neg_log_softmax(const ScoreRow& s, int y, double temperature) {
  const double m = std::max({s[0], s[1], s[2]});
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) sum += std::exp((s[k] - m) / temperature);
  return std::log(sum) - (s[y] - m) / temperature;
}

}  // namespace

double loss_hard(const ScoreMatrix& scores, const TrainTarget& target) {
  double loss = 0.0;
  for (int i = 0; i < kNumFindings; ++i) {
    if (target.y[i] == TrainTarget::kMasked) continue;
    loss += neg_log_softmax(scores[i], target.y[i], 1.0);
  }
  return loss;
}

double loss_distill(const ScoreMatrix& scores, const TrainTarget& target, double t_distill) {
  if (!(t_distill > 0.0)) throw DomainError("loss_distill: t_distill must be > 0");
  double loss = 0.0;
  for (int i = 0; i < kNumFindings; ++i) {
    if (target.y[i] == TrainTarget::kMasked) continue;
    loss += neg_log_softmax(scores[i], target.y[i], t_distill);
  }
  return loss;
}

LossBreakdown loss_total(const ScoreMatrix& scores, const TrainTarget& target, double alpha,
                         double t_distill) {
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("loss_total: alpha must lie in [0,1]");
  LossBreakdown out;
  out.hard = loss_hard(scores, target);
  out.distill = loss_distill(scores, target, t_distill);
  out.total = alpha * out.distill + (1.0 - alpha) * out.hard;
  out.batch_mean = out.total;
  return out;
}

ScoreRow loss_grad_scores(const ScoreRow& scores, int y, double temperature) {
  const auto p = temperature_softmax(scores, temperature);
  ScoreRow g{};
  for (int k = 0; k < 3; ++k) {
    g[k] = (p[k] - (k == y ? 1.0 : 0.0)) / temperature;
  }
  return g;
}

LossBreakdown batch_loss(const StudentModel& model, const std::vector<TokenSeq>& batch,
                         const std::vector<TrainTarget>& targets, double alpha,
                         double t_distill) {
  if (batch.size() != targets.size() || batch.empty()) {
    throw ValidationError("batch_loss: batch/target size mismatch or empty batch");
  }
  LossBreakdown acc;
  ForwardTrace trace;
  for (size_t j = 0; j < batch.size(); ++j) {
    forward_trace(model, batch[j], trace);
    const LossBreakdown one = loss_total(trace.scores, targets[j], alpha, t_distill);
    acc.hard += one.hard;
    acc.distill += one.distill;
    acc.total += one.total;
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  acc.hard *= inv_b;
  acc.distill *= inv_b;
  acc.total *= inv_b;
  acc.batch_mean = acc.total;
  return acc;
}

// ---------------------------------------------------------------------------
// backward pass

namespace {

double gelu_grad(double x) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

// dx for y = gamma*xhat + beta given dy; accumulates dgamma/dbeta.
void layer_norm_backward(const Mat& dy, const LayerNormTrace& trace, const double* gamma,
                         double* dgamma, double* dbeta, Mat& dx) {
  const int d = dy.cols;
  dx.resize(dy.rows, d);
  for (int i = 0; i < dy.rows; ++i) {
    const double* dyi = dy.row(i);
    const double* xh = trace.xhat.row(i);
    double m1 = 0.0, m2 = 0.0;
    for (int j = 0; j < d; ++j) {
      dgamma[j] += dyi[j] * xh[j];
      dbeta[j] += dyi[j];
      const double dxhat = dyi[j] * gamma[j];
      m1 += dxhat;
      m2 += dxhat * xh[j];
    }
    m1 /= d;
    m2 /= d;
    double* dxi = dx.row(i);
    const double inv_std = trace.inv_std[i];
    for (int j = 0; j < d; ++j) {
      const double dxhat = dyi[j] * gamma[j];
      dxi[j] = inv_std * (dxhat - m1 - xh[j] * m2);
    }
  }
}

inline int rel_bucket(int delta, int k) { return std::clamp(delta, -k, k - 1) + k; }

// Backward through one encoder block. d_out is the gradient at the block
// output; returns gradient at the block input and accumulates parameter
// gradients into g (flat, same layout as model.params).
void attention_block_backward(const StudentModel& model, int layer, const LayerTrace& t,
                              const Mat& d_out, std::vector<double>& g, Mat& d_in) {
  const ModelConfig& cfg = model.config;
  const int len = t.x_in.rows;
  const int d = cfg.d_model;
  const int dh = d / cfg.n_heads;
  const int k = cfg.max_rel_dist;
  const int n_buckets = 2 * k;
  const LayerOffsets& lo = model.offsets.layers[layer];
  const double scale = 1.0 / std::sqrt(3.0 * dh);
  auto gp = [&](size_t off) { return g.data() + off; };

  // second residual + layer norm
  Mat d_sum2;
  layer_norm_backward(d_out, t.ln2, model.ptr(lo.ln2_g), gp(lo.ln2_g), gp(lo.ln2_b), d_sum2);

  // feed-forward
  Mat d_ff_act(len, cfg.d_ff);
  accum_dy_wt(d_sum2, model.ptr(lo.w2), cfg.d_ff, d, d_ff_act);
  accum_xt_dy(t.ff_act, d_sum2, gp(lo.w2), gp(lo.b2));
  Mat d_ff_pre(len, cfg.d_ff);
  for (size_t i = 0; i < d_ff_pre.v.size(); ++i) {
    d_ff_pre.v[i] = d_ff_act.v[i] * gelu_grad(t.ff_pre.v[i]);
  }
  Mat d_x1 = d_sum2;  // residual branch
  accum_dy_wt(d_ff_pre, model.ptr(lo.w1), d, cfg.d_ff, d_x1);
  accum_xt_dy(t.x1, d_ff_pre, gp(lo.w1), gp(lo.b1));

  // first residual + layer norm
  Mat d_sum1;
  layer_norm_backward(d_x1, t.ln1, model.ptr(lo.ln1_g), gp(lo.ln1_g), gp(lo.ln1_b), d_sum1);
  d_in = d_sum1;  // residual branch into the block input
  const Mat& d_attn_out = d_sum1;

  // output projection
  Mat d_ctx(len, d);
  accum_dy_wt(d_attn_out, model.ptr(lo.wo), d, d, d_ctx);
  accum_xt_dy(t.ctx, d_attn_out, gp(lo.wo), gp(lo.bo));

  Mat d_qc(len, d), d_kc(len, d), d_vc(len, d);
  Mat d_kr(n_buckets, d), d_qr(n_buckets, d);

  std::vector<double> d_probs(static_cast<size_t>(len));
  std::vector<double> d_raw(static_cast<size_t>(len));
  Mat d_cp(len, n_buckets), d_pc(len, n_buckets);
  for (int head = 0; head < cfg.n_heads; ++head) {
    const int c0 = head * dh;
    const Mat& probs = t.probs[head];
    std::fill(d_cp.v.begin(), d_cp.v.end(), 0.0);
    std::fill(d_pc.v.begin(), d_pc.v.end(), 0.0);
    for (int i = 0; i < len; ++i) {
      const double* pi = probs.row(i);
      const double* d_ctx_i = d_ctx.row(i) + c0;
      // context = probs * V
      double dot = 0.0;
      for (int j = 0; j < len; ++j) {
        const double* vj = t.vc.row(j) + c0;
        double s = 0.0;
        for (int c = 0; c < dh; ++c) s += d_ctx_i[c] * vj[c];
        d_probs[j] = s;
        dot += s * pi[j];
        double* dvj = d_vc.row(j) + c0;
        const double w = pi[j];
        if (w != 0.0) {
          for (int c = 0; c < dh; ++c) dvj[c] += w * d_ctx_i[c];
        }
      }
      // softmax backward; rows of probs are zero at masked columns, which
      // zeroes their logit gradients as well
      for (int j = 0; j < len; ++j) {
        d_raw[j] = pi[j] * (d_probs[j] - dot) * scale;
      }
      const double* qi = t.qc.row(i) + c0;
      double* d_qi = d_qc.row(i) + c0;
      for (int j = 0; j < len; ++j) {
        const double dr = d_raw[j];
        if (dr == 0.0) continue;
        const double* kj = t.kc.row(j) + c0;
        double* d_kj = d_kc.row(j) + c0;
        // c2c
        for (int c = 0; c < dh; ++c) {
          d_qi[c] += dr * kj[c];
          d_kj[c] += dr * qi[c];
        }
        d_cp.at(i, rel_bucket(i - j, k)) += dr;
        d_pc.at(j, rel_bucket(j - i, k)) += dr;
      }
    }
    // c2p: cp[i][b] = qc[i] . kr[b]; p2c: pc[j][b] = kc[j] . qr[b]
    for (int i = 0; i < len; ++i) {
      double* d_qi = d_qc.row(i) + c0;
      double* d_ki = d_kc.row(i) + c0;
      const double* qi = t.qc.row(i) + c0;
      const double* kc_i = t.kc.row(i) + c0;
      for (int b = 0; b < n_buckets; ++b) {
        const double dcp = d_cp.at(i, b);
        const double dpc = d_pc.at(i, b);
        if (dcp != 0.0) {
          const double* krb = t.kr.row(b) + c0;
          double* d_krb = d_kr.row(b) + c0;
          for (int c = 0; c < dh; ++c) {
            d_qi[c] += dcp * krb[c];
            d_krb[c] += dcp * qi[c];
          }
        }
        if (dpc != 0.0) {
          const double* qrb = t.qr.row(b) + c0;
          double* d_qrb = d_qr.row(b) + c0;
          for (int c = 0; c < dh; ++c) {
            d_ki[c] += dpc * qrb[c];
            d_qrb[c] += dpc * kc_i[c];
          }
        }
      }
    }
  }

  // content projections
  accum_dy_wt(d_qc, model.ptr(lo.wq), d, d, d_in);
  accum_xt_dy(t.x_in, d_qc, gp(lo.wq), gp(lo.bq));
  accum_dy_wt(d_kc, model.ptr(lo.wk), d, d, d_in);
  accum_xt_dy(t.x_in, d_kc, gp(lo.wk), gp(lo.bk));
  accum_dy_wt(d_vc, model.ptr(lo.wv), d, d, d_in);
  accum_xt_dy(t.x_in, d_vc, gp(lo.wv), gp(lo.bv));

  // relative projections: kr = R*wkr, qr = R*wqr; R is shared across layers
  Mat rel(n_buckets, d);
  std::memcpy(rel.v.data(), model.ptr(model.offsets.rel_embed), sizeof(double) * rel.v.size());
  accum_xt_dy(rel, d_kr, gp(lo.wkr), nullptr);
  accum_xt_dy(rel, d_qr, gp(lo.wqr), nullptr);
  Mat d_rel(n_buckets, d);
  accum_dy_wt(d_kr, model.ptr(lo.wkr), d, d, d_rel);
  accum_dy_wt(d_qr, model.ptr(lo.wqr), d, d, d_rel);
  double* g_rel = g.data() + model.offsets.rel_embed;
  for (size_t i = 0; i < d_rel.v.size(); ++i) g_rel[i] += d_rel.v[i];
}

}  // namespace

BatchGradients batch_gradients(const StudentModel& model, const std::vector<TokenSeq>& batch,
                               const std::vector<TrainTarget>& targets, double alpha,
                               double t_distill) {
  if (batch.size() != targets.size() || batch.empty()) {
    throw ValidationError("batch_gradients: batch/target size mismatch or empty batch");
  }
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("batch_gradients: alpha must lie in [0,1]");
  if (!(t_distill > 0.0)) throw DomainError("batch_gradients: t_distill must be > 0");

  BatchGradients out;
  out.grads.assign(model.params.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const int d = model.config.d_model;

  ForwardTrace trace;
  for (size_t j = 0; j < batch.size(); ++j) {
    forward_trace(model, batch[j], trace);
    const LossBreakdown one = loss_total(trace.scores, targets[j], alpha, t_distill);
    out.loss.hard += one.hard;
    out.loss.distill += one.distill;
    out.loss.total += one.total;

    // d L_batch / d scores
    const int len = trace.len;
    Mat d_x(len, d);
    const Mat& x_last = trace.layers.back().x_out;
    const double* h_cls = x_last.row(0);
    double* d_cls = d_x.row(0);
    for (int i = 0; i < kNumFindings; ++i) {
      if (targets[j].y[i] == TrainTarget::kMasked) continue;
      const int y = targets[j].y[i];
      const ScoreRow hard_g = loss_grad_scores(trace.scores[i], y, 1.0);
      const ScoreRow dist_g = loss_grad_scores(trace.scores[i], y, t_distill);
      const double* w = model.ptr(model.offsets.head_w[i]);
      double* gw = out.grads.data() + model.offsets.head_w[i];
      double* gb = out.grads.data() + model.offsets.head_b[i];
      for (int kk = 0; kk < 3; ++kk) {
        const double ds = inv_b * ((1.0 - alpha) * hard_g[kk] + alpha * dist_g[kk]);
        gb[kk] += ds;
        const double* wk = w + static_cast<size_t>(kk) * d;
        double* gwk = gw + static_cast<size_t>(kk) * d;
        for (int c = 0; c < d; ++c) {
          gwk[c] += ds * h_cls[c];
          d_cls[c] += ds * wk[c];
        }
      }
    }

    // back through the encoder stack
    Mat d_in;
    for (int l = model.config.n_layers - 1; l >= 0; --l) {
      attention_block_backward(model, l, trace.layers[l], d_x, out.grads, d_in);
      d_x = std::move(d_in);
    }

    // embedding layer norm
    Mat d_x0;
    layer_norm_backward(d_x, trace.emb_ln, model.ptr(model.offsets.emb_ln_g),
                        out.grads.data() + model.offsets.emb_ln_g,
                        out.grads.data() + model.offsets.emb_ln_b, d_x0);
    d_x = std::move(d_x0);

    // embeddings
    double* g_tok = out.grads.data() + model.offsets.tok_embed;
    for (int p = 0; p < len; ++p) {
      double* row = g_tok + static_cast<size_t>(trace.ids[p]) * d;
      const double* dxp = d_x.row(p);
      for (int c = 0; c < d; ++c) row[c] += dxp[c];
    }
  }
  out.loss.hard *= inv_b;
  out.loss.distill *= inv_b;
  out.loss.total *= inv_b;
  out.loss.batch_mean = out.loss.total;

  for (const auto& t : model.layout.tensors) {
    for (size_t i = t.offset; i < t.offset + t.size; ++i) {
      if (!std::isfinite(out.grads[i])) {
        throw NumericError("non-finite gradient in tensor '" + t.name + "'");
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// optimizer + schedule

double cosine_warmup_lr(int step, double lr_max, int warmup_steps, int total_steps) {
  if (step < 0 || step > total_steps) {
    throw DomainError("cosine_warmup_lr: step outside [0, total_steps]");
  }
  if (warmup_steps < 0 || warmup_steps > total_steps) {
    throw DomainError("cosine_warmup_lr: warmup_steps outside [0, total_steps]");
  }
  if (step < warmup_steps) {
    return lr_max * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  const int span = total_steps - warmup_steps;
  if (span == 0) return lr_max;
  const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
  return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(std::vector<double>& params, const std::vector<double>& grads,
                OptimizerState& state, double lr, const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ValidationError("adamw_step: shape mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    const double gi = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gi;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.eps_adam) + cfg.weight_decay * params[i]);
  }
}

// ---------------------------------------------------------------------------
// training loop

double status_macro_f1(const std::vector<ScoreMatrix>& scores,
                       const std::vector<TrainTarget>& targets) {
  // one-vs-rest counts pooled over findings, three statuses
  long long tp[3] = {0, 0, 0}, fp[3] = {0, 0, 0}, fn[3] = {0, 0, 0};
  for (size_t j = 0; j < scores.size(); ++j) {
    for (int i = 0; i < kNumFindings; ++i) {
      const int y = targets[j].y[i];
      if (y == TrainTarget::kMasked) continue;
      const int p = static_cast<int>(argmax_status(scores[j][i]));
      for (int k = 0; k < 3; ++k) {
        if (p == k && y == k) tp[k]++;
        else if (p == k) fp[k]++;
        else if (y == k) fn[k]++;
      }
    }
  }
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double denom_p = static_cast<double>(tp[k] + fp[k]);
    const double denom_r = static_cast<double>(tp[k] + fn[k]);
    const double prec = denom_p > 0 ? tp[k] / denom_p : 0.0;
    const double rec = denom_r > 0 ? tp[k] / denom_r : 0.0;
    sum += (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  return sum / 3.0;
}

TrainHistory train(StudentModel& model, const ReportSet& reports, const AnnotationSet& pseudo,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (pseudo.empty()) throw ValidationError("train: empty training set");
  for (const auto& [id, ls] : pseudo) {
    if (!reports.find(id)) {
      throw ValidationError("train: annotated report '" + id + "' not found in report set");
    }
  }

  // deterministic split of the annotated ids into train/validation
  std::vector<size_t> order(pseudo.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(cfg.seed ^ 0x5eedULL);
  split_rng.shuffle(order);
  size_t n_val = static_cast<size_t>(std::floor(cfg.val_fraction * pseudo.size()));
  if (cfg.val_fraction > 0.0 && n_val == 0 && pseudo.size() > 1) n_val = 1;
  const size_t n_train = pseudo.size() - n_val;
  if (n_train == 0) throw ValidationError("train: empty training split");

  auto encode = [&](size_t pseudo_idx, TokenSeq& seq, TrainTarget& target) {
    const auto& [id, labels] = pseudo[pseudo_idx];
    seq = tokenize(reports.find(id)->text, model.vocab, model.config.max_len);
    target = TrainTarget::from_labels(labels);
  };
  std::vector<TokenSeq> train_seqs(n_train), val_seqs(n_val);
  std::vector<TrainTarget> train_targets(n_train), val_targets(n_val);
  for (size_t i = 0; i < n_train; ++i) encode(order[i], train_seqs[i], train_targets[i]);
  for (size_t i = 0; i < n_val; ++i) encode(order[n_train + i], val_seqs[i], val_targets[i]);

  const int steps_per_epoch =
      static_cast<int>((n_train + cfg.batch_size - 1) / static_cast<size_t>(cfg.batch_size));
  const int total_steps =
      cfg.total_steps > 0 ? cfg.total_steps : cfg.epochs * steps_per_epoch;
  int warmup_steps = cfg.warmup_steps;
  if (warmup_steps < 0) warmup_steps = total_steps / 10;
  if (warmup_steps > total_steps) {
    throw ValidationError("train: warmup_steps must not exceed total_steps");
  }

  OptimizerState opt(model.params.size());
  TrainHistory history;
  Rng shuffle_rng(cfg.seed ^ 0xba7c4ULL);
  std::vector<size_t> perm(n_train);
  for (size_t i = 0; i < n_train; ++i) perm[i] = i;

  std::vector<double> best_params;
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(perm);
    for (size_t start = 0; start < n_train; start += cfg.batch_size) {
      const size_t stop = std::min(n_train, start + cfg.batch_size);
      std::vector<TokenSeq> batch;
      std::vector<TrainTarget> targets;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) {
        batch.push_back(train_seqs[perm[i]]);
        targets.push_back(train_targets[perm[i]]);
      }
      const double lr =
          cosine_warmup_lr(std::min(step, total_steps), cfg.lr_max, warmup_steps, total_steps);
      BatchGradients bg = batch_gradients(model, batch, targets, cfg.alpha, cfg.t_distill);
      adamw_step(model.params, bg.grads, opt, lr, cfg);
      history.steps.push_back({step, lr, bg.loss.hard, bg.loss.distill, bg.loss.batch_mean});
      ++step;
    }

    double val_f1 = 0.0;
    if (n_val > 0) {
      val_f1 = status_macro_f1(forward(model, val_seqs), val_targets);
    } else {
      // no validation split: fall back to the training objective's data
      val_f1 = status_macro_f1(forward(model, train_seqs), train_targets);
    }
    history.epochs.push_back({epoch, val_f1});
    if (history.best_epoch < 0 || val_f1 > history.best_val_macro_f1) {
      history.best_epoch = epoch;
      history.best_val_macro_f1 = val_f1;
      best_params = model.params;
    }
  }
  if (!best_params.empty()) model.params = std::move(best_params);
  return history;
}

void save_history(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write history: " + path.string());
  size_t next_epoch = 0;
  // epoch records interleave after the last step of each epoch
  const size_t steps_per_epoch =
      history.epochs.empty() ? history.steps.size()
                             : (history.steps.size() + history.epochs.size() - 1) /
                                   history.epochs.size();
  for (size_t i = 0; i < history.steps.size(); ++i) {
    const auto& s = history.steps[i];
    out << json{{"step", s.step},
                {"lr", s.lr},
                {"loss_hard", s.loss_hard},
                {"loss_distill", s.loss_distill},
                {"loss_total", s.loss_total}}
               .dump()
        << '\n';
    if ((i + 1) % steps_per_epoch == 0 && next_epoch < history.epochs.size()) {
      const auto& e = history.epochs[next_epoch++];
      out << json{{"epoch", e.epoch}, {"val_macro_f1", e.val_macro_f1}}.dump() << '\n';
    }
  }
  while (next_epoch < history.epochs.size()) {
    const auto& e = history.epochs[next_epoch++];
    out << json{{"epoch", e.epoch}, {"val_macro_f1", e.val_macro_f1}}.dump() << '\n';
  }
  if (!out) throw IoError("history write failed: " + path.string());
}

}  // namespace radlab
