#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "radlab/corpus.hpp"
#include "radlab/student.hpp"

namespace radlab {

// Per-report training target: status index in {0,1,2} per finding, or
// kMasked where the teacher said NotMentioned. Masked findings contribute
// nothing to any loss or gradient.
struct TrainTarget {
  static constexpr int8_t kMasked = -1;
  std::array<int8_t, kNumFindings> y{};

  TrainTarget() { y.fill(kMasked); }
  static TrainTarget from_labels(const LabelSet& labels);
};

struct LossBreakdown {
  double hard = 0.0;
  double distill = 0.0;
  double total = 0.0;       // alpha*distill + (1-alpha)*hard
  double batch_mean = 0.0;  // mean of per-report totals
};

struct TrainConfig {
  double alpha = 0.5;
  double t_distill = 2.0;
  double lr_max = 3e-3;
  int warmup_steps = -1;  // -1: 10% of total_steps
  int total_steps = 0;    // 0: epochs * ceil(n_train / batch_size)
  int batch_size = 32;
  int epochs = 3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  uint64_t seed = 1;
  double val_fraction = 0.1;

  void validate() const;
};

// -sum over unmasked findings of log P_student(y | s_i, T=1).
double loss_hard(const ScoreMatrix& scores, const TrainTarget& target);
// Same at temperature t_distill.
double loss_distill(const ScoreMatrix& scores, const TrainTarget& target, double t_distill);
LossBreakdown loss_total(const ScoreMatrix& scores, const TrainTarget& target, double alpha,
                         double t_distill);

// d(-log softmax(s/T)_y)/ds = (1/T) * (p^(T) - onehot(y)).
ScoreRow loss_grad_scores(const ScoreRow& scores, int y, double temperature);

// Loss of the batch objective without gradients.
LossBreakdown batch_loss(const StudentModel& model, const std::vector<TokenSeq>& batch,
                         const std::vector<TrainTarget>& targets, double alpha, double t_distill);

struct BatchGradients {
  LossBreakdown loss;
  std::vector<double> grads;  // flat, mirrors model.params
};

// Exact gradients of the batch-mean total loss for every parameter.
BatchGradients batch_gradients(const StudentModel& model, const std::vector<TokenSeq>& batch,
                               const std::vector<TrainTarget>& targets, double alpha,
                               double t_distill);

// Linear warmup to lr_max, then cosine decay to 0 at total_steps.
double cosine_warmup_lr(int step, double lr_max, int warmup_steps, int total_steps);

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  long long t = 0;

  explicit OptimizerState(size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Decoupled AdamW update with bias correction.
void adamw_step(std::vector<double>& params, const std::vector<double>& grads,
                OptimizerState& state, double lr, const TrainConfig& cfg);

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  double loss_hard = 0.0;
  double loss_distill = 0.0;
  double loss_total = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double val_macro_f1 = 0.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_macro_f1 = 0.0;
};

// Trains in place; on return the model holds the best-validation parameters.
// Deterministic given cfg.seed: init, split, shuffling and batch order are
// all seeded.
TrainHistory train(StudentModel& model, const ReportSet& reports, const AnnotationSet& pseudo,
                   const TrainConfig& cfg);

void save_history(const TrainHistory& history, const std::filesystem::path& path);

// Validation metric: macro F1 over the three statuses, pooled across
// findings, on pairs unmasked in the reference labels.
double status_macro_f1(const std::vector<ScoreMatrix>& scores,
                       const std::vector<TrainTarget>& targets);

}  // namespace radlab
