// radlab: synthesize or ingest chest x-ray report corpora, produce teacher
// pseudo-labels (remote or simulated), train the compact student labeler,
// and evaluate/compare label sets.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "radlab/corpus.hpp"
#include "radlab/distill.hpp"
#include "radlab/manifest.hpp"
#include "radlab/metrics.hpp"
#include "radlab/rulelab.hpp"
#include "radlab/student.hpp"
#include "radlab/synth.hpp"
#include "radlab/teacher.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radlab;

namespace {

struct ManifestScope {
  RunManifest manifest;

  ManifestScope(std::string command, uint64_t seed) {
    manifest.command = std::move(command);
    manifest.seed = seed;
    manifest.started = iso8601_utc_now();
  }
  void finish(const fs::path& next_to) {
    manifest.finished = iso8601_utc_now();
    write_manifest(manifest, next_to.string() + ".manifest.json");
  }
};

Lexicon lexicon_from_flag(const std::string& lexicon_path) {
  if (lexicon_path.empty()) return default_lexicon();
  return load_lexicon(lexicon_path);
}

void write_text_or_json(const json& j, const std::string& text, const std::string& format,
                        const std::string& out_path) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw IoError("cannot write: " + out_path);
    os = &file;
  }
  if (format == "json") {
    *os << j.dump(2) << '\n';
  } else {
    *os << text;
  }
}

// --------------------------------------------------------------------------

int cmd_synth(const std::string& out_reports, const std::string& out_labels,
              const SynthConfig& cfg) {
  ManifestScope scope("synth", cfg.seed);
  SynthCorpus corpus = generate_synthetic_corpus(cfg);
  save_reports(corpus.reports, out_reports);
  save_annotations(corpus.gold, out_labels);
  scope.manifest.config = {{"n_reports", cfg.n_reports},
                           {"mention_prob", cfg.mention_prob},
                           {"status_prior", cfg.status_prior},
                           {"distractor_sentence_rate", cfg.distractor_sentence_rate}};
  scope.manifest.outputs = {out_reports, out_labels};
  scope.finish(out_reports);
  std::cout << "wrote " << corpus.reports.size() << " reports to " << out_reports
            << " and gold labels to " << out_labels << "\n";
  return 0;
}

int cmd_label_rules(const std::string& reports_path, const std::string& out_path,
                    const std::string& lexicon_path) {
  ManifestScope scope("label-rules", 0);
  const ReportSet reports = load_reports(reports_path);
  const Lexicon lexicon = lexicon_from_flag(lexicon_path);
  AnnotationSet pred(AnnotationSource::Predicted);
  for (const auto& r : reports) pred.add(r.id, label_report(r, lexicon));
  save_annotations(pred, out_path);
  scope.manifest.config = {{"lexicon", lexicon_path.empty() ? "<default>" : lexicon_path}};
  scope.manifest.inputs = {reports_path};
  scope.manifest.outputs = {out_path};
  scope.finish(out_path);
  std::cout << "labeled " << reports.size() << " reports -> " << out_path << "\n";
  return 0;
}

json quality_block_json(const AnnotationSet& pseudo, const AnnotationSet& gold) {
  const EvalReport report = evaluate("teacher", pseudo, gold);
  return json{{"macro_f1", report.macro_f1},
              {"agreement_percent", report.agreement.percent},
              {"kappa", report.agreement.kappa},
              {"pairs", report.agreement.pairs}};
}

int cmd_teacher(const std::string& reports_path, const std::string& gold_path,
                const std::string& out_path, std::optional<double> simulate_eps,
                const std::string& url, const std::string& model, const std::string& cache,
                const std::string& api_key_env, int max_in_flight, int max_retries,
                uint64_t seed, const std::string& quality_out) {
  ManifestScope scope("teacher", seed);
  AnnotationSet pseudo(AnnotationSource::Pseudo);
  if (simulate_eps) {
    if (gold_path.empty()) {
      throw ConfigError("--simulate requires --gold (labels to perturb)");
    }
    NoiseConfig noise;
    noise.flip_prob = *simulate_eps;
    noise.seed = seed;
    pseudo = simulate_teacher(load_annotations(gold_path, AnnotationSource::Gold), noise);
    scope.manifest.config = {{"mode", "simulate"}, {"epsilon", *simulate_eps}};
    scope.manifest.inputs = {gold_path};
  } else {
    if (url.empty() || model.empty()) {
      throw ConfigError("remote mode needs --teacher-url and --teacher-model "
                        "(or use --simulate <epsilon>)");
    }
    TeacherClientConfig cfg;
    cfg.base_url = url;
    cfg.model_name = model;
    cfg.cache_path = cache;
    cfg.api_key_env = api_key_env;
    cfg.max_in_flight = max_in_flight;
    cfg.max_retries = max_retries;
    const ReportSet reports = load_reports(reports_path);
    RemoteAnnotateResult result = annotate_remote(reports, PromptTemplate::default_template(), cfg);
    std::cout << "annotated " << result.labels.size() << "/" << reports.size() << " reports ("
              << result.cache_hits << " cache hits, " << result.retries << " retries, "
              << result.defaulted_findings << " findings defaulted to not_mentioned)\n";
    for (const auto& f : result.failures) {
      std::cerr << "failed: " << f.report_id << ": " << f.message << " (" << f.attempts
                << " attempts)\n";
    }
    pseudo = std::move(result.labels);
    scope.manifest.config = {{"mode", "remote"}, {"url", url}, {"model", model}};
    scope.manifest.inputs = {reports_path};
  }
  save_annotations(pseudo, out_path);
  scope.manifest.outputs = {out_path};

  if (!gold_path.empty()) {
    const AnnotationSet gold = load_annotations(gold_path, AnnotationSource::Gold);
    const json quality = quality_block_json(pseudo, gold);
    std::cout << "== Teacher quality vs gold ==\n"
              << "Macro F1:           " << quality["macro_f1"].get<double>() << "\n"
              << "Overall agreement:  " << quality["agreement_percent"].get<double>() << "%\n"
              << "Cohen's kappa:      " << quality["kappa"].get<double>() << "\n";
    if (!quality_out.empty()) {
      std::ofstream out(quality_out);
      if (!out) throw IoError("cannot write: " + quality_out);
      out << quality.dump(2) << '\n';
      scope.manifest.outputs.push_back(quality_out);
    }
  }
  scope.finish(out_path);
  return 0;
}

int cmd_train(const std::string& reports_path, const std::string& pseudo_path,
              const std::string& checkpoint_path, const std::string& history_path,
              const ModelConfig& mcfg_in, const TrainConfig& tcfg, int min_count) {
  ManifestScope scope("train", tcfg.seed);
  const ReportSet reports = load_reports(reports_path);
  const AnnotationSet pseudo = load_annotations(pseudo_path, AnnotationSource::Pseudo);

  const Vocab vocab = build_vocab(reports, min_count);
  ModelConfig mcfg = mcfg_in;
  mcfg.vocab_size = vocab.size();
  StudentModel model = StudentModel::init(mcfg, vocab, tcfg.seed);

  std::cout << "training on " << pseudo.size() << " pseudo-labeled reports (vocab "
            << vocab.size() << ", " << model.params.size() << " parameters)\n";
  const TrainHistory history = train(model, reports, pseudo, tcfg);
  save_checkpoint(model, checkpoint_path);
  if (!history_path.empty()) save_history(history, history_path);

  std::cout << "best validation status-macro-F1 " << history.best_val_macro_f1 << " at epoch "
            << history.best_epoch << "; checkpoint -> " << checkpoint_path << "\n";
  scope.manifest.config = {{"alpha", tcfg.alpha},
                           {"t_distill", tcfg.t_distill},
                           {"lr_max", tcfg.lr_max},
                           {"batch_size", tcfg.batch_size},
                           {"epochs", tcfg.epochs},
                           {"weight_decay", tcfg.weight_decay},
                           {"val_fraction", tcfg.val_fraction},
                           {"min_count", min_count},
                           {"d_model", mcfg.d_model},
                           {"n_layers", mcfg.n_layers},
                           {"n_heads", mcfg.n_heads},
                           {"d_ff", mcfg.d_ff},
                           {"max_len", mcfg.max_len},
                           {"max_rel_dist", mcfg.max_rel_dist}};
  scope.manifest.inputs = {reports_path, pseudo_path};
  scope.manifest.outputs = {checkpoint_path};
  if (!history_path.empty()) scope.manifest.outputs.push_back(history_path);
  scope.finish(checkpoint_path);
  return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& reports_path,
                const std::string& out_path) {
  ManifestScope scope("predict", 0);
  const StudentModel model = load_checkpoint(checkpoint_path);
  const ReportSet reports = load_reports(reports_path);
  AnnotationSet pred(AnnotationSource::Predicted);
  for (const auto& r : reports) pred.add(r.id, predict(model, r));
  save_annotations(pred, out_path);
  scope.manifest.inputs = {checkpoint_path, reports_path};
  scope.manifest.outputs = {out_path};
  scope.finish(out_path);
  std::cout << "predicted " << reports.size() << " reports -> " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path,
             const std::string& model_name, const std::string& format,
             const std::string& out_path) {
  const AnnotationSet pred = load_annotations(pred_path, AnnotationSource::Predicted);
  const AnnotationSet gold = load_annotations(gold_path, AnnotationSource::Gold);
  const EvalReport report = evaluate(model_name, pred, gold);
  write_text_or_json(eval_report_to_json(report), eval_report_to_text(report), format, out_path);
  if (!out_path.empty()) {
    ManifestScope scope("eval", 0);
    scope.manifest.inputs = {pred_path, gold_path};
    scope.manifest.outputs = {out_path};
    scope.manifest.config = {{"format", format}};
    scope.finish(out_path);
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& pred_paths, const std::string& gold_path,
                const std::string& format, const std::string& out_path) {
  if (pred_paths.size() < 2) {
    throw ValidationError("compare needs at least two --pred files");
  }
  const AnnotationSet gold = load_annotations(gold_path, AnnotationSource::Gold);
  std::vector<AnnotationSet> preds;
  preds.reserve(pred_paths.size());
  for (const auto& p : pred_paths) {
    preds.push_back(load_annotations(p, AnnotationSource::Predicted));
  }
  std::vector<ModelComparison> comparisons;
  for (size_t i = 1; i < preds.size(); ++i) {
    comparisons.push_back(compare_models(fs::path(pred_paths[0]).stem().string(), preds[0],
                                         fs::path(pred_paths[i]).stem().string(), preds[i],
                                         gold));
  }
  write_text_or_json(comparisons_to_json(comparisons), comparisons_to_text(comparisons), format,
                     out_path);
  if (!out_path.empty()) {
    ManifestScope scope("compare", 0);
    scope.manifest.inputs = pred_paths;
    scope.manifest.inputs.push_back(gold_path);
    scope.manifest.outputs = {out_path};
    scope.manifest.config = {{"format", format}};
    scope.finish(out_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"report labeling and distillation toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  SynthConfig synth_cfg;
  std::string synth_reports = "reports.jsonl";
  std::string synth_labels = "gold.jsonl";
  std::vector<double> prior = {0.5, 0.3, 0.2};
  synth->add_option("--n", synth_cfg.n_reports, "number of reports");
  synth->add_option("--mention-prob", synth_cfg.mention_prob, "per-finding mention probability");
  synth->add_option("--distractor-rate", synth_cfg.distractor_sentence_rate,
                    "distractor sentence rate");
  synth->add_option("--prior", prior, "status prior: present absent uncertain")->expected(3);
  synth->add_option("--seed", synth_cfg.seed, "random seed");
  synth->add_option("--out-reports", synth_reports, "output reports path");
  synth->add_option("--out-labels", synth_labels, "output gold labels path");

  // label-rules
  auto* rules = app.add_subcommand("label-rules", "run the rule-based labeler");
  std::string rules_reports, rules_out = "rule_predictions.jsonl", rules_lexicon;
  rules->add_option("--reports", rules_reports, "reports.jsonl")->required();
  rules->add_option("--out", rules_out, "output predictions path");
  rules->add_option("--lexicon", rules_lexicon, "lexicon JSON overriding the built-in one");

  // teacher
  auto* teacher = app.add_subcommand("teacher", "produce pseudo-labels (remote or simulated)");
  std::string t_reports, t_gold, t_out = "pseudo.jsonl", t_url, t_model, t_cache;
  std::string t_key_env = "TEACHER_API_KEY", t_quality_out;
  std::optional<double> t_eps;
  int t_in_flight = 4, t_retries = 3;
  uint64_t t_seed = 1;
  teacher->add_option("--reports", t_reports, "reports.jsonl (remote mode)");
  teacher->add_option("--gold", t_gold, "gold labels (simulate source / quality report)");
  teacher->add_option("--out", t_out, "output pseudo-label path");
  teacher->add_option("--simulate,--noise", t_eps, "simulate a noisy teacher with flip prob");
  teacher->add_option("--teacher-url", t_url, "chat-completions base URL");
  teacher->add_option("--teacher-model", t_model, "model name");
  teacher->add_option("--teacher-cache", t_cache, "response cache path");
  teacher->add_option("--api-key-env", t_key_env, "env var holding the API key");
  teacher->add_option("--max-in-flight", t_in_flight, "max concurrent requests");
  teacher->add_option("--max-retries", t_retries, "retries per report");
  teacher->add_option("--seed", t_seed, "random seed (simulate mode)");
  teacher->add_option("--quality-out", t_quality_out, "write the quality block as JSON");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the student on pseudo-labels");
  std::string tr_reports, tr_pseudo, tr_ckpt = "student.ckpt", tr_history = "history.jsonl";
  TrainConfig tr_cfg;
  ModelConfig tr_mcfg;
  int tr_min_count = 1;
  train_cmd->add_option("--reports", tr_reports, "reports.jsonl")->required();
  train_cmd->add_option("--pseudo", tr_pseudo, "pseudo labels jsonl")->required();
  train_cmd->add_option("--out-checkpoint", tr_ckpt, "checkpoint path");
  train_cmd->add_option("--history", tr_history, "history jsonl path");
  train_cmd->add_option("--alpha", tr_cfg.alpha, "distillation weight in [0,1]");
  train_cmd->add_option("--temperature", tr_cfg.t_distill, "distillation temperature");
  train_cmd->add_option("--lr", tr_cfg.lr_max, "peak learning rate");
  train_cmd->add_option("--batch-size", tr_cfg.batch_size, "batch size");
  train_cmd->add_option("--epochs", tr_cfg.epochs, "epochs");
  train_cmd->add_option("--warmup-steps", tr_cfg.warmup_steps,
                        "warmup steps (-1: 10% of total)");
  train_cmd->add_option("--total-steps", tr_cfg.total_steps,
                        "scheduler horizon (0: epochs*steps)");
  train_cmd->add_option("--weight-decay", tr_cfg.weight_decay, "decoupled weight decay");
  train_cmd->add_option("--val-fraction", tr_cfg.val_fraction, "validation fraction");
  train_cmd->add_option("--seed", tr_cfg.seed, "random seed");
  train_cmd->add_option("--min-count", tr_min_count, "vocab min token count");
  train_cmd->add_option("--d-model", tr_mcfg.d_model, "model width");
  train_cmd->add_option("--n-layers", tr_mcfg.n_layers, "encoder layers");
  train_cmd->add_option("--n-heads", tr_mcfg.n_heads, "attention heads");
  train_cmd->add_option("--d-ff", tr_mcfg.d_ff, "feed-forward width");
  train_cmd->add_option("--max-len", tr_mcfg.max_len, "max sequence length");
  train_cmd->add_option("--max-rel-dist", tr_mcfg.max_rel_dist, "relative distance clamp");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "label reports with a trained student");
  std::string p_ckpt, p_reports, p_out = "predictions.jsonl";
  predict_cmd->add_option("--checkpoint", p_ckpt, "student checkpoint")->required();
  predict_cmd->add_option("--reports", p_reports, "reports.jsonl")->required();
  predict_cmd->add_option("--out", p_out, "output predictions path");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold labels");
  std::string e_pred, e_gold, e_name = "model", e_format = "text", e_out;
  eval_cmd->add_option("--pred", e_pred, "predictions jsonl")->required();
  eval_cmd->add_option("--gold", e_gold, "gold labels jsonl")->required();
  eval_cmd->add_option("--model-name", e_name, "name shown in the report");
  eval_cmd->add_option("--format", e_format, "json|text")->check(CLI::IsMember({"json", "text"}));
  eval_cmd->add_option("--out", e_out, "write the report here instead of stdout");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "paired significance tests between models");
  std::vector<std::string> c_preds;
  std::string c_gold, c_format = "text", c_out;
  compare_cmd->add_option("--pred", c_preds, "prediction files (first vs each other)")
      ->required()
      ->expected(-2);
  compare_cmd->add_option("--gold", c_gold, "gold labels jsonl")->required();
  compare_cmd->add_option("--format", c_format, "json|text")
      ->check(CLI::IsMember({"json", "text"}));
  compare_cmd->add_option("--out", c_out, "write the report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      std::copy(prior.begin(), prior.end(), synth_cfg.status_prior.begin());
      return cmd_synth(synth_reports, synth_labels, synth_cfg);
    }
    if (rules->parsed()) return cmd_label_rules(rules_reports, rules_out, rules_lexicon);
    if (teacher->parsed()) {
      return cmd_teacher(t_reports, t_gold, t_out, t_eps, t_url, t_model, t_cache, t_key_env,
                         t_in_flight, t_retries, t_seed, t_quality_out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(tr_reports, tr_pseudo, tr_ckpt, tr_history, tr_mcfg, tr_cfg, tr_min_count);
    }
    if (predict_cmd->parsed()) return cmd_predict(p_ckpt, p_reports, p_out);
    if (eval_cmd->parsed()) return cmd_eval(e_pred, e_gold, e_name, e_format, e_out);
    if (compare_cmd->parsed()) return cmd_compare(c_preds, c_gold, c_format, c_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.error_class() == ErrorClass::Input ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
