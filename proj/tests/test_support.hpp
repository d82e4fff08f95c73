#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here stays deliberately naive: straight loops, no reuse of library
// internals beyond public entry points being checked against.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "radlab/corpus.hpp"
#include "radlab/distill.hpp"
#include "radlab/rng.hpp"
#include "radlab/student.hpp"

namespace testsup {

using namespace radlab;

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("radlab_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Tiny deterministic corpus for vocab/model fixtures.
inline ReportSet tiny_reports() {
  ReportSet set;
  set.add({"r1", "there is cardiomegaly. no pleural effusion."});
  set.add({"r2", "possible infiltrate in the right lung. heart size normal."});
  set.add({"r3", "no evidence of pneumothorax. stable edema."});
  set.add({"r4", "clear lungs. no acute findings seen today."});
  return set;
}

// Random model with a tiny vocabulary; every tensor participates in the loss.
inline StudentModel random_model(const ModelConfig& cfg, uint64_t seed) {
  ReportSet reports = tiny_reports();
  Vocab vocab = build_vocab(reports, 1);
  ModelConfig c = cfg;
  c.vocab_size = vocab.size();
  return StudentModel::init(c, std::move(vocab), seed);
}

// Moves the parameters to a generic, well-conditioned point: attention and
// feed-forward weights large enough that every tensor carries measurable
// gradient signal (at the 0.02-std init the first layer's attention logits
// are ~1e-5 and their true gradients sit below finite-difference noise).
inline void randomize_params(StudentModel& model, uint64_t seed) {
  Rng rng(seed);
  for (const auto& t : model.layout.tensors) {
    double* p = model.params.data() + t.offset;
    const bool is_matrix = t.dims.size() == 2;
    const bool is_gain = t.name.find("gamma") != std::string::npos;
    for (size_t i = 0; i < t.size; ++i) {
      if (is_matrix) p[i] = rng.normal(0.0, 0.2);
      else if (is_gain) p[i] = rng.normal(1.0, 0.1);
      else p[i] = rng.normal(0.0, 0.05);
    }
  }
}

struct GradCheckCase {
  std::vector<TokenSeq> batch;
  std::vector<TrainTarget> targets;
};

// Batch whose texts cover the vocabulary and whose targets leave every head
// with at least one unmasked finding.
inline GradCheckCase grad_check_case(const StudentModel& model, uint64_t seed, int n_reports,
                                     int tokens_per_report) {
  Rng rng(seed);
  GradCheckCase out;
  const int vocab_size = model.vocab.size();
  for (int r = 0; r < n_reports; ++r) {
    TokenSeq seq;
    seq.ids.assign(static_cast<size_t>(model.config.max_len), Vocab::kPad);
    seq.ids[0] = Vocab::kCls;
    for (int p = 1; p <= tokens_per_report; ++p) {
      seq.ids[p] = 3 + static_cast<int>(rng.below(static_cast<size_t>(vocab_size - 3)));
    }
    seq.length = tokens_per_report + 1;
    out.batch.push_back(std::move(seq));

    TrainTarget t;
    for (int i = 0; i < kNumFindings; ++i) {
      const size_t draw = rng.below(4);
      t.y[i] = draw == 3 ? TrainTarget::kMasked : static_cast<int8_t>(draw);
    }
    out.targets.push_back(t);
  }
  // every finding must appear unmasked somewhere in the batch
  for (int i = 0; i < kNumFindings; ++i) {
    bool any = false;
    for (const auto& t : out.targets) any = any || t.y[i] != TrainTarget::kMasked;
    if (!any) out.targets[0].y[i] = static_cast<int8_t>(i % 3);
  }
  return out;
}

// Central finite differences of the batch-mean loss for every parameter.
inline std::vector<double> fd_gradients(const StudentModel& model,
                                        const std::vector<TokenSeq>& batch,
                                        const std::vector<TrainTarget>& targets, double alpha,
                                        double t_distill, double h = 1e-4) {
  StudentModel probe = model;
  std::vector<double> grad(model.params.size(), 0.0);
  for (size_t i = 0; i < model.params.size(); ++i) {
    const double orig = probe.params[i];
    probe.params[i] = orig + h;
    const double up = batch_loss(probe, batch, targets, alpha, t_distill).batch_mean;
    probe.params[i] = orig - h;
    const double down = batch_loss(probe, batch, targets, alpha, t_distill).batch_mean;
    probe.params[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Largest per-tensor relative L2 error between analytic and FD gradients.
inline double max_tensor_rel_error(const StudentModel& model, const std::vector<double>& analytic,
                                   const std::vector<double>& fd, std::string* worst_name = nullptr) {
  double worst = 0.0;
  for (const auto& t : model.layout.tensors) {
    double diff2 = 0.0, fd2 = 0.0, an2 = 0.0;
    for (size_t i = t.offset; i < t.offset + t.size; ++i) {
      const double d = analytic[i] - fd[i];
      diff2 += d * d;
      fd2 += fd[i] * fd[i];
      an2 += analytic[i] * analytic[i];
    }
    const double denom = std::max({std::sqrt(fd2), std::sqrt(an2), 1e-10});
    const double rel = std::sqrt(diff2) / denom;
    if (rel > worst) {
      worst = rel;
      if (worst_name) *worst_name = t.name;
    }
  }
  return worst;
}

}  // namespace testsup
