#include "peerval/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "peerval/aggregation.hpp"
#include "peerval/config.hpp"
#include "peerval/exams.hpp"
#include "peerval/plant.hpp"
#include "peerval/report.hpp"
#include "peerval/simharness.hpp"

namespace peerval {
namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::string out;
  int workers = 0;
};

// Runtime objects shared by the config-driven subcommands.
struct Session {
  RunConfig config;
  TemplateSet templates;
  std::unique_ptr<Gateway> gateway;

  explicit Session(RunConfig c) : config(std::move(c)), templates(TemplateSet::builtin()) {
    if (config.templates) templates = TemplateSet::load(*config.templates);
  }

  void connect() {
    if (config.roster.empty()) throw ConfigError("config field 'roster' is required");
    std::shared_ptr<const SyntheticTruth> truth;
    if (config.truth) truth = std::make_shared<const SyntheticTruth>(load_truth(*config.truth));
    gateway = std::make_unique<Gateway>();
    for (const auto& spec : load_roster(config.roster)) gateway->add_backend(make_backend(spec, truth));
    for (const auto& c : config.candidates)
      if (!gateway->has_backend(c.backend_id))
        throw ConfigError("config field 'candidates': '" + c.id + "' references unknown backend '" + c.backend_id + "'");
  }

  JudgeContext context() { return JudgeContext{*gateway, templates, config.workers}; }
};

RunConfig load_with_overrides(const CommonFlags& f) {
  if (f.config.empty()) throw ConfigError("--config is required");
  RunConfig c = load_run_config(f.config);
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.workers > 0) c.workers = f.workers;
  return c;
}

Corpus load_corpus(const CorpusPaths& p) {
  auto questions = load_questions(p.questions);
  auto answers = load_answers(p.answers, &questions);
  return Corpus(std::move(questions), std::move(answers));
}

// Annotations are validated against the whole corpus, then narrowed to the
// questions `scope` holds.
PreferenceMap load_annotation_map(const RunConfig& c, const Corpus& scope) {
  if (c.corpus.annotations.empty()) throw ConfigError("config field 'corpus.annotations' is required for accuracy metrics");
  const Corpus all = load_corpus(c.corpus);
  auto prefs = annotation_preferences(load_annotations(c.corpus.annotations, &all.questions(), &all.answers()));
  std::erase_if(prefs, [&](const auto& kv) { return !scope.has_question(std::get<0>(kv.first)); });
  return prefs;
}

Corpus exam_corpus(const RunConfig& c) {
  if (c.exam_corpus) return load_corpus(*c.exam_corpus);
  return split_corpus(load_corpus(c.corpus), c).exam;
}

Corpus evaluation_corpus(const RunConfig& c) {
  const Corpus all = load_corpus(c.corpus);
  if (c.exam_corpus) return all;
  return split_corpus(all, c).evaluation;
}

void write_ledger(const Gateway& g, const fs::path& dir) {
  write_text_file(dir / "ledger.csv", ledger_csv(ledger_report(g.ledger())));
}

fs::path default_exam_report(const RunConfig& c, const std::string& flag) {
  return flag.empty() ? c.output_dir / "exam_report.jsonl" : fs::path(flag);
}

void write_exam_outputs(const std::vector<ExamReport>& reports, const fs::path& dir) {
  std::vector<json> rows, audit;
  for (const auto& r : reports) {
    rows.push_back(r.to_json());
    auto add_records = [&](const char* exam, const std::vector<JudgeRecord>& records) {
      for (const auto& rec : records) {
        json row = journal_entry(rec);
        row["exam"] = exam;
        audit.push_back(std::move(row));
      }
    };
    if (r.consistency) add_records("consistency", r.consistency->records);
    if (r.confidence)
      for (const auto& row : r.confidence->audit) audit.push_back(row);
    if (r.pertinence) add_records("pertinence", r.pertinence->records);
  }
  write_jsonl(dir / "exam_report.jsonl", rows);
  write_jsonl(dir / "exam_audit.jsonl", audit);
}

void print_exam_summary(std::ostream& out, const std::vector<ExamReport>& reports) {
  for (const auto& r : reports) {
    out << r.candidate_id << ": " << (r.overall_pass ? "pass" : "fail");
    if (r.consistency) out << "  consistency=" << r.consistency->rate.to_fixed(4) << (r.consistency->passed ? "" : "(fail)");
    if (r.confidence)
      out << "  confidence=" << r.confidence->mean_easy << "/" << r.confidence->mean_hard
          << (r.confidence->reversed ? "(reversed)" : "");
    if (r.pertinence) out << "  pertinence=" << r.pertinence->accuracy.to_fixed(4) << (r.pertinence->passed ? "" : "(fail)");
    out << "  weight=" << r.fusion_weight << '\n';
    for (const auto& n : r.notes) out << "  note: " << n << '\n';
  }
}

int cmd_exam(const CommonFlags& flags, const std::string& exams, const std::string& placement,
             const std::string& confidence_method, const std::string& variant_method, int questions, std::ostream& out) {
  Session s(load_with_overrides(flags));
  if (!exams.empty()) {
    s.config.exam.enabled.clear();
    std::stringstream ss(exams);
    for (std::string e; std::getline(ss, e, ',');) s.config.exam.enabled.insert(exam_kind_from_string(e));
  }
  if (!placement.empty()) s.config.placement = placement_from_string(placement);
  if (!confidence_method.empty()) s.config.exam.confidence_method = confidence_method_from_string(confidence_method);
  if (!variant_method.empty()) s.config.exam.pertinence.variant_method = variant_method_from_string(variant_method);
  if (questions > 0) s.config.exam.question_count = static_cast<std::size_t>(questions);
  if (s.config.candidates.empty()) throw ConfigError("config field 'candidates' is empty");
  s.connect();
  const Corpus corpus = exam_corpus(s.config);
  auto ctx = s.context();
  const auto reports = run_exams(ctx, effective_candidates(s.config), corpus, s.config.exam);
  write_exam_outputs(reports, s.config.output_dir);
  write_ledger(*s.gateway, s.config.output_dir);
  print_exam_summary(out, reports);
  out << "wrote " << (s.config.output_dir / "exam_report.jsonl").string() << '\n';
  return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& format, const std::string& placement,
                 std::optional<bool> filtered, const std::string& exam_report, std::ostream& out) {
  Session s(load_with_overrides(flags));
  if (!format.empty()) s.config.format = eval_format_from_string(format);
  if (!placement.empty()) s.config.placement = placement_from_string(placement);
  if (filtered) s.config.filtered = *filtered;
  s.connect();

  auto evaluators = effective_candidates(s.config);
  if (s.config.filtered) {
    const auto path = default_exam_report(s.config, exam_report);
    if (!fs::exists(path))
      throw ConfigError("filtered evaluation needs " + path.string() + "; run `exam` first or pass --unfiltered");
    const auto reports = load_exam_reports(path);
    std::set<std::string> passed;
    for (const auto& r : reports)
      if (r.overall_pass) passed.insert(r.candidate_id);
    std::erase_if(evaluators, [&](const Evaluator& e) { return !passed.count(e.id); });
    if (evaluators.empty()) out << "warning: no candidate passed qualification; the matrix is empty\n";
  }

  const Corpus corpus = evaluation_corpus(s.config);
  auto ctx = s.context();
  RunOptions options;
  options.journal = s.config.output_dir / "journal.jsonl";
  const auto matrix = run_evaluation(ctx, evaluators, corpus, s.config.format, options);
  write_text_file(s.config.output_dir / "matrix.jsonl", matrix_to_jsonl(matrix));
  write_ledger(*s.gateway, s.config.output_dir);
  out << "evaluated " << evaluators.size() << " evaluator(s) over " << corpus.questions().size()
      << " question(s); abstentions: " << matrix.abstention_count() << '\n';
  out << "wrote " << (s.config.output_dir / "matrix.jsonl").string() << '\n';
  return 0;
}

WeightMap matrix_weights(const EvaluationMatrix& m, bool filtered, const fs::path& exam_report) {
  WeightMap w;
  if (!filtered) {
    for (const auto& e : m.evaluators()) w[e] = 1.0;
    return w;
  }
  if (!fs::exists(exam_report)) throw ConfigError("weighted aggregation needs " + exam_report.string());
  return fusion_weights(load_exam_reports(exam_report));
}

int cmd_aggregate(const CommonFlags& flags, const std::string& matrix_path, const std::string& exam_report,
                  bool unfiltered, std::ostream& out) {
  const RunConfig c = load_with_overrides(flags);
  const auto matrix = load_matrix(matrix_path.empty() ? c.output_dir / "matrix.jsonl" : fs::path(matrix_path));
  const bool filtered = c.filtered && !unfiltered;
  const auto weights = matrix_weights(matrix, filtered, default_exam_report(c, exam_report));
  std::vector<AggregatedPreference> prefs;
  if (matrix.format == EvalFormat::pairwise) {
    prefs = fuse_pairwise(matrix, weights);
  } else {
    auto fused = scores_to_preferences(matrix, weights);
    for (const auto& [q, m] : fused.excluded) out << "excluded (all evaluators abstained): " << q << " / " << m << '\n';
    prefs = std::move(fused.preferences);
  }
  write_preferences(c.output_dir / "preferences.jsonl", prefs);
  out << "wrote " << prefs.size() << " preference(s) to " << (c.output_dir / "preferences.jsonl").string() << '\n';
  return 0;
}

int cmd_report(const CommonFlags& flags, const std::string& matrix_path, const std::string& exam_report,
               std::ostream& out) {
  const RunConfig c = load_with_overrides(flags);
  const Corpus corpus = evaluation_corpus(c);
  const auto annotations = load_annotation_map(c, corpus);
  const auto mpath = matrix_path.empty() ? c.output_dir / "matrix.jsonl" : fs::path(matrix_path);
  if (!fs::exists(mpath)) throw ConfigError("matrix not found at " + mpath.string() + "; run `evaluate` first");
  const auto matrix = load_matrix(mpath);

  const auto rpath = default_exam_report(c, exam_report);
  std::optional<std::vector<ExamReport>> reports;
  if (fs::exists(rpath)) reports = load_exam_reports(rpath);
  const auto variants = c.variants.empty() ? default_variants(effective_candidates(c), reports.has_value()) : c.variants;
  const std::string dataset = c.dataset.empty() ? (corpus.questions().empty() ? std::string("corpus")
                                                                              : to_string(corpus.questions().front().task))
                                                : c.dataset;

  std::vector<MetricRow> metric_rows;
  std::vector<BiasRow> bias;
  const auto models = corpus.models();
  for (const auto& v : variants) {
    const auto weights = variant_weights(v, effective_candidates(c), reports ? &*reports : nullptr);
    const auto sub = restrict_matrix(matrix, weights);
    const auto predicted = to_preference_map(aggregate(sub, weights));
    metric_rows.push_back(metric_row(v.name, dataset, predicted, annotations, matrix.format, sub.evaluators().size()));
    auto rows = bias_rows(v.name, dataset, predicted, annotations, models);
    bias.insert(bias.end(), rows.begin(), rows.end());
  }
  const auto footer = provenance_footer(c);
  write_text_file(c.output_dir / "metrics.csv", metrics_csv(metric_rows) + footer);
  write_text_file(c.output_dir / "bias.csv", bias_csv(bias) + footer);
  out << metrics_csv(metric_rows);
  out << "wrote " << (c.output_dir / "metrics.csv").string() << " and bias.csv\n";
  return 0;
}

std::vector<PoolMember> load_pool(const fs::path& path) {
  std::vector<PoolMember> members;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    PoolMember m;
    try {
      m.profile = ScriptedProfile::from_json(obj);
      m.defect = obj.value("defect", "");
      m.supports_logprobs = obj.value("supports_logprobs", true);
      m.placement = placement_from_string(obj.value("placement", "p1"));
    } catch (const json::exception& e) {
      throw ParseError(std::string("pool entry: ") + e.what(), line);
    }
    if (m.profile.evaluator_id.empty()) throw ParseError("pool entry needs an evaluator_id", line);
    m.profile = apply_defect(m.profile, m.defect);
    members.push_back(std::move(m));
  });
  if (members.empty()) throw ConfigError("pool file " + path.string() + " lists no evaluators");
  return members;
}

void apply_defect_flag(std::vector<PoolMember>& members, const std::string& spec) {
  std::stringstream ss(spec);
  for (std::string entry; std::getline(ss, entry, ',');) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw ConfigError("--defects entries look like <defect>:<evaluator>, got '" + entry + "'");
    const auto defect = entry.substr(0, colon);
    const auto id = entry.substr(colon + 1);
    auto it = std::find_if(members.begin(), members.end(), [&](const auto& m) { return m.profile.evaluator_id == id; });
    if (it == members.end()) throw ConfigError("--defects names unknown evaluator '" + id + "'");
    it->profile = apply_defect(it->profile, defect);
    it->defect = defect;
  }
}

int cmd_simulate(std::uint64_t seed, const std::string& pool_path, const std::string& defects, const std::string& out_dir,
                 int questions, int eval_questions, int workers, std::ostream& out) {
  // Explicit --defects replace the default plantings.
  PoolSpec pool = default_pool(seed, defects.empty());
  if (!pool_path.empty()) pool.members = load_pool(pool_path);
  if (!defects.empty()) apply_defect_flag(pool.members, defects);
  if (questions > 0) pool.world.n_questions = static_cast<std::size_t>(questions);
  const fs::path dir = out_dir.empty() ? fs::path("sim-out") : fs::path(out_dir);

  ExamConfig exam = default_exam_config(pool);
  const auto verification = plant_and_verify(pool, exam, workers);
  write_text_file(dir / "verification.json", verification.to_json().dump(2) + "\n");
  write_exam_outputs(verification.reports, dir);

  // A second, disjoint world for the evaluation stage.
  WorldSpec eval_spec = pool.world;
  eval_spec.seed = seed + 1;
  eval_spec.id_prefix = "e";
  eval_spec.n_questions = static_cast<std::size_t>(eval_questions > 0 ? eval_questions : 20);
  const World exam_world = generate_world(pool.world);
  const World eval_world = generate_world(eval_spec);
  write_world(exam_world, dir / "exam_world");
  write_world(eval_world, dir / "world");
  SyntheticTruth merged = exam_world.truth;
  merged.quality.insert(eval_world.truth.quality.begin(), eval_world.truth.quality.end());
  auto truth = std::make_shared<const SyntheticTruth>(merged);

  std::vector<json> roster_rows, cand_rows;
  Gateway gateway;
  std::vector<Evaluator> evaluators;
  for (const auto& m : pool.members) {
    BackendSpec spec;
    spec.id = m.profile.evaluator_id;
    spec.supports_logprobs = m.supports_logprobs;
    spec.max_in_flight = 4;
    spec.profile = m.profile.to_json();
    roster_rows.push_back(to_json(spec));
    gateway.add_backend(std::make_shared<ScriptedBackend>(spec, m.profile, truth));
    evaluators.push_back({spec.id, spec.id, m.placement});
    cand_rows.push_back({{"id", spec.id}, {"backend", spec.id}, {"placement", to_string(m.placement)}});
  }
  write_jsonl(dir / "roster.jsonl", roster_rows);
  std::vector<json> truth_rows;
  for (const auto& [key, q] : merged.quality)
    truth_rows.push_back({{"question_id", key.first}, {"model_id", key.second}, {"quality", q}});
  write_jsonl(dir / "truth.jsonl", truth_rows);

  json config = {{"name", "simulated"},
                 {"roster", "roster.jsonl"},
                 {"truth", "truth.jsonl"},
                 {"candidates", cand_rows},
                 {"corpus",
                  {{"questions", "world/questions.jsonl"},
                   {"answers", "world/answers.jsonl"},
                   {"annotations", "world/annotations.jsonl"}}},
                 {"exam_corpus", {{"questions", "exam_world/questions.jsonl"}, {"answers", "exam_world/answers.jsonl"}}},
                 {"difficulty", {{"strong", exam.roster.strong}, {"weak", exam.roster.weak}, {"close", exam.roster.close}}},
                 {"exam_questions", exam.question_count},
                 {"format", "pairwise"},
                 {"seed", seed},
                 {"output_dir", "."}};
  const std::string config_text = config.dump(2) + "\n";
  write_text_file(dir / "config.json", config_text);

  const Corpus eval_corpus(eval_world.questions, eval_world.answers);
  JudgeContext ctx{gateway, TemplateSet::builtin(), workers};
  RunOptions options;
  options.journal = dir / "journal.jsonl";
  fs::remove(*options.journal);
  const auto matrix = run_evaluation(ctx, evaluators, eval_corpus, EvalFormat::pairwise, options);
  write_text_file(dir / "matrix.jsonl", matrix_to_jsonl(matrix));
  write_preferences(dir / "preferences.jsonl", fuse_pairwise(matrix, fusion_weights(verification.reports)));
  write_ledger(gateway, dir);

  RunConfig rc = parse_run_config(config, dir);
  rc.source_text = config_text;
  const auto annotations = annotation_preferences(eval_world.annotations);
  std::vector<MetricRow> metric_rows;
  std::vector<BiasRow> bias;
  for (const auto& v : default_variants(evaluators, true)) {
    const auto weights = variant_weights(v, evaluators, &verification.reports);
    const auto sub = restrict_matrix(matrix, weights);
    const auto predicted = to_preference_map(aggregate(sub, weights));
    metric_rows.push_back(metric_row(v.name, "simulated", predicted, annotations, matrix.format, sub.evaluators().size()));
    auto rows = bias_rows(v.name, "simulated", predicted, annotations, eval_corpus.models());
    bias.insert(bias.end(), rows.begin(), rows.end());
  }
  const auto footer = provenance_footer(rc);
  write_text_file(dir / "metrics.csv", metrics_csv(metric_rows) + footer);
  write_text_file(dir / "bias.csv", bias_csv(bias) + footer);

  print_exam_summary(out, verification.reports);
  for (const auto& [kind, ids] : verification.failed) {
    out << to_string(kind) << " failed: [";
    for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? ", " : "") << ids[i];
    out << "]\n";
  }
  out << "planted defects recovered: " << (verification.all_match ? "yes" : "no") << '\n';
  out << "wrote " << (dir / "verification.json").string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Peer-review evaluation engine: qualify judge models, run them, fuse their verdicts."};
  app.set_version_flag("--version", std::string("peerval ") + kVersion);
  app.require_subcommand(1);

  CommonFlags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", flags.config, "Run configuration (JSON)")->required();
    sub->add_option("-o,--out", flags.out, "Output directory (overrides output_dir)");
    sub->add_option("-j,--workers", flags.workers, "Concurrent requests");
  };

  std::string exams, placement, confidence_method, variant_method, format, exam_report, matrix, pool, defects, out_dir;
  int questions = 0, eval_questions = 0, sim_workers = 4;
  bool filtered_flag = false, unfiltered_flag = false;
  std::uint64_t seed = 7;

  auto* exam = app.add_subcommand("exam", "Run the qualification exams and write exam_report.jsonl");
  add_common(exam);
  exam->add_option("--exams", exams, "Comma-separated subset of consistency,self-confidence,pertinence");
  exam->add_option("--placement", placement, "p1 (restriction first) or p2 (restriction last)");
  exam->add_option("--confidence-method", confidence_method, "auto, probability or label");
  exam->add_option("--variant-method", variant_method, "llm-rewrite or dataset-search");
  exam->add_option("--exam-questions", questions, "Questions per exam set");

  auto* evaluate = app.add_subcommand("evaluate", "Judge the corpus and write matrix.jsonl");
  add_common(evaluate);
  evaluate->add_option("--format", format, "5level, 100level or pairwise");
  evaluate->add_option("--placement", placement, "p1 or p2");
  auto* f_on = evaluate->add_flag("--filtered", filtered_flag, "Only evaluators that passed qualification");
  auto* f_off = evaluate->add_flag("--unfiltered", unfiltered_flag, "Every candidate evaluates");
  f_on->excludes(f_off);
  evaluate->add_option("--exam-report", exam_report, "Exam report (default <out>/exam_report.jsonl)");

  auto* aggregate_cmd = app.add_subcommand("aggregate", "Fuse the matrix into preferences.jsonl");
  add_common(aggregate_cmd);
  aggregate_cmd->add_option("--matrix", matrix, "Matrix file (default <out>/matrix.jsonl)");
  aggregate_cmd->add_option("--exam-report", exam_report, "Exam report (default <out>/exam_report.jsonl)");
  aggregate_cmd->add_flag("--unfiltered", unfiltered_flag, "Weight every evaluator 1");

  auto* report = app.add_subcommand("report", "Write metrics.csv and bias.csv");
  add_common(report);
  report->add_option("--matrix", matrix, "Matrix file (default <out>/matrix.jsonl)");
  report->add_option("--exam-report", exam_report, "Exam report (default <out>/exam_report.jsonl)");

  auto* simulate = app.add_subcommand("simulate", "Plant defects in a scripted pool and verify the exams catch them");
  simulate->add_option("--seed", seed, "World and pool seed")->capture_default_str();
  simulate->add_option("--pool", pool, "Pool file: one scripted profile per line");
  simulate->add_option("--defects", defects, "Comma list of <defect>:<evaluator> plantings");
  simulate->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
  simulate->add_option("--questions", questions, "Exam world size");
  simulate->add_option("--eval-questions", eval_questions, "Evaluation world size");
  simulate->add_option("-j,--workers", sim_workers, "Concurrent requests")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (exam->parsed()) return cmd_exam(flags, exams, placement, confidence_method, variant_method, questions, out);
    if (evaluate->parsed()) {
      std::optional<bool> filtered;
      if (filtered_flag) filtered = true;
      if (unfiltered_flag) filtered = false;
      return cmd_evaluate(flags, format, placement, filtered, exam_report, out);
    }
    if (aggregate_cmd->parsed()) return cmd_aggregate(flags, matrix, exam_report, unfiltered_flag, out);
    if (report->parsed()) return cmd_report(flags, matrix, exam_report, out);
    if (simulate->parsed())
      return cmd_simulate(seed, pool, defects, out_dir, questions, eval_questions, sim_workers, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << '\n';
    return 2;
  } catch (const ContractViolation& e) {
    err << "contract violation: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace peerval
