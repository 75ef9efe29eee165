#include "peerval/evaluation.hpp"

#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "peerval/parallel.hpp"

namespace peerval {
namespace {

PromptTag pair_tag(const PairItem& item) {
  PromptTag tag;
  tag.kind = "pairwise";
  tag.item = item.item_id();
  tag.order = item.order;
  tag.question_id = item.question_id;
  tag.one = AnswerRef{item.question_id, item.model_one};
  tag.two = AnswerRef{item.question_id, item.model_two};
  return tag;
}

template <typename Parse>
void ask(JudgeContext& ctx, const Evaluator& evaluator, const std::string& prompt, JudgeRecord& record, Parse&& parse) {
  try {
    const Completion c = ctx.gateway.complete(evaluator.backend_id, prompt, false);
    record.raw_text = c.text;
    parse(c.text);
  } catch (const UnparseableError& e) {
    record.note = std::string("unparseable: ") + e.what();
  } catch (const RangeError& e) {
    record.note = std::string("out of range: ") + e.what();
  } catch (const RetryableError& e) {
    record.note = std::string("transport: ") + e.what();
  } catch (const TransportError& e) {
    record.note = std::string("transport: ") + e.what();
  }
}

std::string journal_key(const std::string& evaluator, const std::variant<PairItem, PointTarget>& item) {
  if (const auto* p = std::get_if<PairItem>(&item))
    return evaluator + '\x1f' + p->question_id + '\x1f' + p->model_one + '\x1f' + p->model_two;
  const auto& t = std::get<PointTarget>(item);
  return evaluator + '\x1f' + t.question_id + '\x1f' + t.model_id;
}

// Opens the journal for appending after discarding a torn trailing line.
std::vector<json> replay_journal(const std::filesystem::path& path) {
  std::vector<json> entries;
  if (!std::filesystem::exists(path)) return entries;
  std::string content;
  {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    content = buf.str();
  }
  if (!content.empty() && content.back() != '\n') {
    const auto last = content.rfind('\n');
    content.resize(last == std::string::npos ? 0 : last + 1);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
  }
  std::istringstream lines(content);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      entries.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      // corrupted mid-file line: its cell is simply judged again
    }
  }
  return entries;
}

}  // namespace

JudgeRecord judge_pairwise(JudgeContext& ctx, const Evaluator& evaluator, const Corpus& corpus, const PairItem& item) {
  JudgeRecord record;
  record.evaluator_id = evaluator.id;
  record.item = item;
  record.format = EvalFormat::pairwise;
  const auto tag = pair_tag(item);
  const auto prompt = render_pairwise(corpus.question(item.question_id),
                                      corpus.answer(item.question_id, item.model_one).text,
                                      corpus.answer(item.question_id, item.model_two).text, evaluator.placement, &tag,
                                      ctx.templates);
  ask(ctx, evaluator, prompt, record, [&](const std::string& text) { record.verdict = parse_verdict(text); });
  return record;
}

JudgeRecord judge_pointwise(JudgeContext& ctx, const Evaluator& evaluator, const Corpus& corpus,
                            const std::string& question_id, const std::string& model_id, EvalFormat format) {
  JudgeRecord record;
  record.evaluator_id = evaluator.id;
  record.item = PointTarget{question_id, model_id};
  record.format = format;
  PromptTag tag;
  tag.kind = "pointwise";
  tag.item = question_id + ":" + model_id;
  tag.question_id = question_id;
  tag.one = AnswerRef{question_id, model_id};
  const auto prompt =
      render_pointwise(corpus.question(question_id), corpus.answer(question_id, model_id).text, format, &tag, ctx.templates);
  ask(ctx, evaluator, prompt, record, [&](const std::string& text) { record.score = parse_score(text, format); });
  return record;
}

std::string to_string(Resolved r) {
  switch (r) {
    case Resolved::first: return "first";
    case Resolved::second: return "second";
    case Resolved::split: return "split";
    case Resolved::abstention: return "abstention";
  }
  return "abstention";
}

Resolved resolved_from_string(const std::string& s) {
  if (s == "first") return Resolved::first;
  if (s == "second") return Resolved::second;
  if (s == "split") return Resolved::split;
  if (s == "abstention") return Resolved::abstention;
  throw ParseError("unknown resolved outcome '" + s + "'");
}

Resolved fold_swaps(const JudgeRecord& original, const JudgeRecord& swapped) {
  const auto* a = std::get_if<PairItem>(&original.item);
  const auto* b = std::get_if<PairItem>(&swapped.item);
  if (!a || !b || a->question_id != b->question_id || a->model_one != b->model_two || a->model_two != b->model_one)
    throw ContractViolation("fold_swaps needs the two order twins of one item");
  if (original.evaluator_id != swapped.evaluator_id) throw ContractViolation("fold_swaps across different evaluators");

  const std::string& lower = std::min(a->model_one, a->model_two);
  auto winner = [](const JudgeRecord& r, const PairItem& item) -> std::optional<std::string> {
    if (!r.verdict) return std::nullopt;
    return r.verdict->choice == Choice::one ? item.model_one : item.model_two;
  };
  const auto w1 = winner(original, *a);
  const auto w2 = winner(swapped, *b);
  auto side = [&](const std::string& m) { return m == lower ? Resolved::first : Resolved::second; };
  if (!w1 && !w2) return Resolved::abstention;
  if (!w1) return side(*w2);
  if (!w2) return side(*w1);
  return *w1 == *w2 ? side(*w1) : Resolved::split;
}

std::vector<std::string> EvaluationMatrix::evaluators() const {
  std::set<std::string> ids;
  for (const auto& [k, _] : pairwise) ids.insert(std::get<0>(k));
  for (const auto& k : pairwise_abstentions) ids.insert(std::get<0>(k));
  for (const auto& [k, _] : scores) ids.insert(std::get<0>(k));
  for (const auto& k : score_abstentions) ids.insert(std::get<0>(k));
  return {ids.begin(), ids.end()};
}

std::string matrix_to_jsonl(const EvaluationMatrix& m) {
  std::ostringstream out;
  out << json{{"kind", "header"}, {"format", to_string(m.format)}, {"abstentions", m.abstention_count()}}.dump() << '\n';
  if (m.format == EvalFormat::pairwise) {
    std::map<PairCellKey, Resolved> all = m.pairwise;
    for (const auto& k : m.pairwise_abstentions) all.emplace(k, Resolved::abstention);
    for (const auto& [k, r] : all) {
      out << json{{"evaluator", std::get<0>(k)}, {"question_id", std::get<1>(k)}, {"model_one", std::get<2>(k)},
                  {"model_two", std::get<3>(k)}, {"outcome", to_string(r)}}
                 .dump()
          << '\n';
    }
  } else {
    std::map<PointCellKey, std::optional<int>> all(m.scores.begin(), m.scores.end());
    for (const auto& k : m.score_abstentions) all.emplace(k, std::nullopt);
    for (const auto& [k, s] : all) {
      json row = {{"evaluator", std::get<0>(k)}, {"question_id", std::get<1>(k)}, {"model_id", std::get<2>(k)}};
      row["score"] = s ? json(*s) : json(nullptr);
      out << row.dump() << '\n';
    }
  }
  return out.str();
}

EvaluationMatrix load_matrix(const std::filesystem::path& path) {
  EvaluationMatrix m;
  bool header = false;
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    if (row.value("kind", "") == "header") {
      m.format = eval_format_from_string(require_string(row, "format", line));
      header = true;
      return;
    }
    if (!header) throw ParseError("matrix file lacks a header line", line);
    const auto evaluator = require_string(row, "evaluator", line);
    const auto q = require_string(row, "question_id", line);
    if (m.format == EvalFormat::pairwise) {
      PairCellKey key{evaluator, q, require_string(row, "model_one", line), require_string(row, "model_two", line)};
      const auto r = resolved_from_string(require_string(row, "outcome", line));
      if (r == Resolved::abstention) m.pairwise_abstentions.push_back(key);
      else m.pairwise.emplace(key, r);
    } else {
      PointCellKey key{evaluator, q, require_string(row, "model_id", line)};
      const auto& s = row.at("score");
      if (s.is_null()) m.score_abstentions.push_back(key);
      else m.scores.emplace(key, s.get<int>());
    }
  });
  if (!header) throw ParseError("matrix file " + path.string() + " is empty");
  return m;
}

json journal_entry(const JudgeRecord& r) {
  json j = {{"evaluator", r.evaluator_id}, {"format", to_string(r.format)}};
  if (const auto* p = std::get_if<PairItem>(&r.item)) {
    j["question_id"] = p->question_id;
    j["model_one"] = p->model_one;
    j["model_two"] = p->model_two;
    j["order"] = to_string(p->order);
  } else {
    const auto& t = std::get<PointTarget>(r.item);
    j["question_id"] = t.question_id;
    j["model_id"] = t.model_id;
  }
  if (r.verdict) j["outcome"] = r.verdict->choice == Choice::one ? "one" : "two";
  else if (r.score) j["outcome"] = r.score->value;
  else j["outcome"] = "abstain";
  j["raw"] = r.raw_text;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

JudgeRecord record_from_journal(const json& j) {
  JudgeRecord r;
  r.evaluator_id = j.at("evaluator").get<std::string>();
  r.format = eval_format_from_string(j.at("format").get<std::string>());
  r.raw_text = j.value("raw", "");
  r.note = j.value("note", "");
  const auto& outcome = j.at("outcome");
  if (r.format == EvalFormat::pairwise) {
    r.item = PairItem{j.at("question_id").get<std::string>(), j.at("model_one").get<std::string>(),
                      j.at("model_two").get<std::string>(),
                      j.at("order").get<std::string>() == "swapped" ? OrderTag::swapped : OrderTag::original};
    if (outcome == "one") r.verdict = Verdict{Choice::one, r.raw_text};
    else if (outcome == "two") r.verdict = Verdict{Choice::two, r.raw_text};
  } else {
    r.item = PointTarget{j.at("question_id").get<std::string>(), j.at("model_id").get<std::string>()};
    if (outcome.is_number_integer()) r.score = PointScore{r.format, outcome.get<int>()};
  }
  return r;
}

EvaluationMatrix run_evaluation(JudgeContext& ctx, const std::vector<Evaluator>& evaluators, const Corpus& corpus,
                                EvalFormat format, const RunOptions& options, std::vector<JudgeRecord>* records_out) {
  std::set<std::string> ids;
  for (const auto& e : evaluators) {
    if (!ids.insert(e.id).second) throw IntegrityError("duplicate evaluator id '" + e.id + "'");
    if (!ctx.gateway.has_backend(e.backend_id))
      throw IntegrityError("evaluator '" + e.id + "' references unknown backend '" + e.backend_id + "'");
  }

  std::vector<std::variant<PairItem, PointTarget>> items;
  if (format == EvalFormat::pairwise) {
    for (auto& p : build_pairs(corpus.questions(), corpus.answers(), true)) items.emplace_back(std::move(p));
  } else {
    std::vector<PointTarget> targets;
    for (const auto& a : corpus.answers()) targets.push_back({a.question_id, a.model_id});
    std::sort(targets.begin(), targets.end());
    for (auto& t : targets) items.emplace_back(std::move(t));
  }

  // Work units in deterministic order: evaluator-major, then item order.
  struct Unit {
    const Evaluator* evaluator;
    const std::variant<PairItem, PointTarget>* item;
  };
  std::vector<Unit> units;
  units.reserve(evaluators.size() * items.size());
  for (const auto& e : evaluators)
    for (const auto& it : items) units.push_back({&e, &it});

  std::map<std::string, JudgeRecord> done;
  if (options.journal) {
    for (const auto& entry : replay_journal(*options.journal)) {
      try {
        auto r = record_from_journal(entry);
        if (r.format != format || !ids.count(r.evaluator_id)) continue;
        done.insert_or_assign(journal_key(r.evaluator_id, r.item), std::move(r));
      } catch (const std::exception&) {
        // foreign or partial entry
      }
    }
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < units.size(); ++i)
    if (!done.count(journal_key(units[i].evaluator->id, *units[i].item))) pending.push_back(i);

  std::vector<std::optional<JudgeRecord>> fresh(units.size());
  std::ofstream journal;
  if (options.journal) {
    if (options.journal->has_parent_path()) std::filesystem::create_directories(options.journal->parent_path());
    journal.open(*options.journal, std::ios::binary | std::ios::app);
    if (!journal) throw IntegrityError("cannot open journal " + options.journal->string());
  }
  std::mutex journal_mu;
  std::size_t appended = 0;

  parallel_for(pending.size(), ctx.workers, [&](std::size_t k) {
    const Unit& u = units[pending[k]];
    JudgeRecord r = std::holds_alternative<PairItem>(*u.item)
                        ? judge_pairwise(ctx, *u.evaluator, corpus, std::get<PairItem>(*u.item))
                        : judge_pointwise(ctx, *u.evaluator, corpus, std::get<PointTarget>(*u.item).question_id,
                                          std::get<PointTarget>(*u.item).model_id, format);
    {
      std::lock_guard lock(journal_mu);
      if (options.stop_after && appended >= *options.stop_after) throw Interrupted("evaluation interrupted");
      if (journal.is_open()) {
        journal << journal_entry(r).dump() << '\n';
        journal.flush();
      }
      ++appended;
    }
    fresh[pending[k]] = std::move(r);
  });

  std::vector<JudgeRecord> all;
  all.reserve(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (fresh[i]) all.push_back(std::move(*fresh[i]));
    else all.push_back(done.at(journal_key(units[i].evaluator->id, *units[i].item)));
  }

  EvaluationMatrix m;
  m.format = format;
  if (format == EvalFormat::pairwise) {
    std::map<std::string, const JudgeRecord*> by_key;
    for (const auto& r : all) by_key[journal_key(r.evaluator_id, r.item)] = &r;
    for (const auto& r : all) {
      const auto& p = std::get<PairItem>(r.item);
      if (p.model_one > p.model_two) continue;  // visit each pair from its original orientation
      const auto& twin = *by_key.at(journal_key(r.evaluator_id, p.twin()));
      PairCellKey key{r.evaluator_id, p.question_id, p.model_one, p.model_two};
      const Resolved res = fold_swaps(r, twin);
      if (res == Resolved::abstention) m.pairwise_abstentions.push_back(key);
      else m.pairwise.emplace(key, res);
    }
    std::sort(m.pairwise_abstentions.begin(), m.pairwise_abstentions.end());
  } else {
    for (const auto& r : all) {
      const auto& t = std::get<PointTarget>(r.item);
      PointCellKey key{r.evaluator_id, t.question_id, t.model_id};
      if (r.score) m.scores.emplace(key, r.score->value);
      else m.score_abstentions.push_back(key);
    }
    std::sort(m.score_abstentions.begin(), m.score_abstentions.end());
  }
  if (records_out) *records_out = std::move(all);
  return m;
}

}  // namespace peerval
