#include <doctest.h>

#include <cmath>

#include "radlab/distill.hpp"
#include "radlab/rng.hpp"
#include "test_support.hpp"

using namespace radlab;

namespace {

ScoreMatrix uniform_scores() {
  ScoreMatrix s{};
  return s;
}

TrainTarget all_present() {
  TrainTarget t;
  t.y.fill(0);
  return t;
}

ScoreMatrix random_scores(Rng& rng, double scale = 3.0) {
  ScoreMatrix s;
  for (auto& row : s) {
    for (auto& v : row) v = scale * (rng.uniform() * 2.0 - 1.0);
  }
  return s;
}

TrainTarget random_target(Rng& rng, bool allow_mask = true) {
  TrainTarget t;
  for (auto& y : t.y) {
    const size_t draw = rng.below(allow_mask ? 4 : 3);
    y = draw == 3 ? TrainTarget::kMasked : static_cast<int8_t>(draw);
  }
  return t;
}

}  // namespace

TEST_CASE("loss_hard on uniform scores is 13*ln3") {
  CHECK(loss_hard(uniform_scores(), all_present()) ==
        doctest::Approx(13.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("loss_hard skips masked findings entirely") {
  TrainTarget t;  // all masked
  CHECK(loss_hard(uniform_scores(), t) == 0.0);
}

TEST_CASE("loss_hard single unmasked row [ln2,0,0] target Present") {
  ScoreMatrix s{};
  s[4][0] = std::log(2.0);
  TrainTarget t;
  t.y[4] = 0;
  CHECK(loss_hard(s, t) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("loss_distill equals loss_hard at T=1") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const ScoreMatrix s = random_scores(rng);
    const TrainTarget t = random_target(rng);
    CHECK(loss_distill(s, t, 1.0) == doctest::Approx(loss_hard(s, t)).epsilon(1e-15));
  }
}

TEST_CASE("loss_distill row [2,0,0] target Present T=2") {
  ScoreMatrix s{};
  s[0][0] = 2.0;
  TrainTarget t;
  t.y[0] = 0;
  const double e = std::exp(1.0);
  CHECK(loss_distill(s, t, 2.0) == doctest::Approx(-std::log(e / (e + 2.0))).epsilon(1e-12));
}

TEST_CASE("loss_distill on uniform rows is ln3 per row at any T") {
  TrainTarget t = all_present();
  for (double temp : {0.5, 1.0, 2.0, 10.0}) {
    CHECK(loss_distill(uniform_scores(), t, temp) ==
          doctest::Approx(13.0 * std::log(3.0)).epsilon(1e-12));
  }
}

TEST_CASE("loss_distill rejects nonpositive temperature") {
  CHECK_THROWS_AS(loss_distill(uniform_scores(), all_present(), 0.0), DomainError);
  CHECK_THROWS_AS(loss_distill(uniform_scores(), all_present(), -1.0), DomainError);
}

TEST_CASE("loss_total weight collapse and T=1 identity") {
  Rng rng(12);
  const ScoreMatrix s = random_scores(rng);
  const TrainTarget t = random_target(rng);
  CHECK(loss_total(s, t, 0.0, 2.0).total == doctest::Approx(loss_hard(s, t)).epsilon(1e-15));
  CHECK(loss_total(s, t, 1.0, 2.0).total ==
        doctest::Approx(loss_distill(s, t, 2.0)).epsilon(1e-15));
  for (double alpha : {0.0, 0.3, 0.7, 1.0}) {
    const LossBreakdown lb = loss_total(s, t, alpha, 1.0);
    CHECK(std::abs(lb.total - lb.hard) <= 1e-12);
  }
  CHECK_THROWS_AS(loss_total(s, t, 1.5, 1.0), DomainError);
}

TEST_CASE("loss_total identity at T=1 over 1000 random draws") {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const ScoreMatrix s = random_scores(rng, 5.0);
    const TrainTarget t = random_target(rng);
    const double alpha = rng.uniform();
    const LossBreakdown lb = loss_total(s, t, alpha, 1.0);
    REQUIRE(std::abs(lb.total - lb.hard) <= 1e-12);
    REQUIRE(lb.total ==
            doctest::Approx(alpha * lb.distill + (1 - alpha) * lb.hard).epsilon(1e-12));
  }
}

TEST_CASE("per-row loss is convex in the raw scores") {
  Rng rng(7);
  TrainTarget t;
  t.y[0] = 1;
  for (int i = 0; i < 200; ++i) {
    ScoreMatrix a{}, b{}, mid{};
    for (int k = 0; k < 3; ++k) {
      a[0][k] = 4.0 * (rng.uniform() - 0.5);
      b[0][k] = 4.0 * (rng.uniform() - 0.5);
      mid[0][k] = 0.5 * (a[0][k] + b[0][k]);
    }
    const double temp = 0.5 + 2.0 * rng.uniform();
    CHECK(loss_distill(mid, t, temp) <=
          0.5 * (loss_distill(a, t, temp) + loss_distill(b, t, temp)) + 1e-9);
  }
}

TEST_CASE("head-score gradient at uniformity") {
  const ScoreRow row{0.0, 0.0, 0.0};
  const ScoreRow g1 = loss_grad_scores(row, 0, 1.0);
  CHECK(g1[0] == doctest::Approx(1.0 / 3 - 1.0).epsilon(1e-12));
  CHECK(g1[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(g1[2] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  const ScoreRow g2 = loss_grad_scores(row, 0, 2.0);
  for (int k = 0; k < 3; ++k) CHECK(g2[k] == doctest::Approx(0.5 * g1[k]).epsilon(1e-12));
}

TEST_CASE("mask neutrality: masked rows change nothing") {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 24;
  cfg.max_len = 12;
  cfg.max_rel_dist = 4;
  StudentModel model = testsup::random_model(cfg, 21);
  auto gc = testsup::grad_check_case(model, 77, 2, 6);
  gc.targets[0].y[5] = TrainTarget::kMasked;
  gc.targets[1].y[5] = TrainTarget::kMasked;

  const BatchGradients base = batch_gradients(model, gc.batch, gc.targets, 0.5, 2.0);
  const TensorSpec& w5 = model.layout.find("head.05.w");
  const TensorSpec& b5 = model.layout.find("head.05.b");
  for (size_t i = w5.offset; i < w5.offset + w5.size; ++i) CHECK(base.grads[i] == 0.0);
  for (size_t i = b5.offset; i < b5.offset + b5.size; ++i) CHECK(base.grads[i] == 0.0);

  StudentModel poked = model;
  for (size_t i = w5.offset; i < w5.offset + w5.size; ++i) poked.params[i] += 0.37;
  const BatchGradients poked_grads = batch_gradients(poked, gc.batch, gc.targets, 0.5, 2.0);
  CHECK(poked_grads.loss.batch_mean == doctest::Approx(base.loss.batch_mean).epsilon(1e-15));
  const TensorSpec& w6 = model.layout.find("head.06.w");
  for (size_t i = w6.offset; i < w6.offset + w6.size; ++i) {
    CHECK(poked_grads.grads[i] == doctest::Approx(base.grads[i]).epsilon(1e-15));
  }
}

TEST_CASE("gradients match central finite differences on a small config") {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 24;
  cfg.max_len = 16;
  cfg.max_rel_dist = 3;
  StudentModel model = testsup::random_model(cfg, 31);
  testsup::randomize_params(model, 32);
  auto gc = testsup::grad_check_case(model, 313, 2, 7);
  const BatchGradients analytic = batch_gradients(model, gc.batch, gc.targets, 0.4, 2.0);
  const std::vector<double> fd = testsup::fd_gradients(model, gc.batch, gc.targets, 0.4, 2.0);
  std::string worst;
  const double err = testsup::max_tensor_rel_error(model, analytic.grads, fd, &worst);
  INFO("worst tensor: " << worst << " rel err " << err);
  CHECK(err <= 1e-4);
}

TEST_CASE("cosine warmup schedule endpoints and continuity") {
  const double lr_max = 0.01;
  const int warmup = 10, total = 110;
  CHECK(cosine_warmup_lr(0, lr_max, warmup, total) == 0.0);
  CHECK(cosine_warmup_lr(warmup, lr_max, warmup, total) == doctest::Approx(lr_max));
  CHECK(cosine_warmup_lr(total, lr_max, warmup, total) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_warmup_lr(total + 1, lr_max, warmup, total), DomainError);

  const double bound = lr_max * std::max(1.0 / warmup, 3.14159265358979 / (total - warmup));
  for (int s = 0; s < total; ++s) {
    const double delta = std::abs(cosine_warmup_lr(s + 1, lr_max, warmup, total) -
                                  cosine_warmup_lr(s, lr_max, warmup, total));
    CHECK(delta <= bound + 1e-15);
  }
}

TEST_CASE("adamw single-step hand checks") {
  TrainConfig cfg;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.eps_adam = 1e-8;
  cfg.weight_decay = 0.0;

  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> p{1.0, -2.0};
    OptimizerState st(2);
    adamw_step(p, {0.0, 0.0}, st, 0.1, cfg);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
  }
  SUBCASE("unit gradient with bias correction") {
    std::vector<double> p{1.0};
    OptimizerState st(1);
    adamw_step(p, {1.0}, st, 0.1, cfg);
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 * (1.0 / (1.0 + 1e-8))).epsilon(1e-9));
  }
  SUBCASE("decoupled decay shrinks by exactly lr*lambda*theta") {
    cfg.weight_decay = 0.5;
    std::vector<double> p{2.0};
    OptimizerState st(1);
    adamw_step(p, {0.0}, st, 0.1, cfg);
    CHECK(p[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0).epsilon(1e-12));
  }
}

TEST_CASE("train: step counting, determinism, error paths") {
  ReportSet reports = testsup::tiny_reports();
  AnnotationSet pseudo(AnnotationSource::Pseudo);
  Rng rng(4);
  for (const auto& r : reports) {
    LabelSet ls;
    for (Finding f : all_findings()) {
      ls.set(f, static_cast<CertaintyStatus>(rng.below(4)));
    }
    pseudo.add(r.id, ls);
  }
  ModelConfig mcfg;
  mcfg.d_model = 16;
  mcfg.n_layers = 1;
  mcfg.n_heads = 2;
  mcfg.d_ff = 16;
  mcfg.max_len = 16;
  mcfg.max_rel_dist = 4;
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.batch_size = 16;  // >= n, so exactly one step
  tcfg.val_fraction = 0.25;
  tcfg.seed = 5;

  Vocab vocab = build_vocab(reports, 1);
  mcfg.vocab_size = vocab.size();

  StudentModel m1 = StudentModel::init(mcfg, vocab, tcfg.seed);
  const TrainHistory h1 = train(m1, reports, pseudo, tcfg);
  CHECK(h1.steps.size() == 1);
  CHECK(h1.epochs.size() == 1);

  StudentModel m2 = StudentModel::init(mcfg, vocab, tcfg.seed);
  const TrainHistory h2 = train(m2, reports, pseudo, tcfg);
  CHECK(m1.params == m2.params);  // bitwise identical runs
  CHECK(h1.steps.size() == h2.steps.size());

  AnnotationSet empty(AnnotationSource::Pseudo);
  StudentModel m3 = StudentModel::init(mcfg, vocab, tcfg.seed);
  CHECK_THROWS_AS(train(m3, reports, empty, tcfg), ValidationError);

  AnnotationSet unknown(AnnotationSource::Pseudo);
  unknown.add("missing-id", LabelSet{});
  CHECK_THROWS_AS(train(m3, reports, unknown, tcfg), ValidationError);
}
