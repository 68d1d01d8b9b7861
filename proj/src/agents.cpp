#include "aed/agents.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aed/unicode.hpp"

namespace aed::agents {
namespace {

using json = nlohmann::json;

constexpr const char* kAnswerFormat =
    "Reply with exactly two lines:\n"
    "ANSWER: <your answer>\n"
    "CONFIDENCE: <a number in [0,1]>";

std::string trimmed(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double_strict(const std::string& text, double& out) {
  std::string t = trimmed(text);
  if (t.empty()) return false;
  const char* begin = t.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t') ++end;
  if (*end != '\0') return false;
  if (!std::isfinite(v)) return false;
  out = v;
  return true;
}

std::string format_confidence(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string format_similarity(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string read_file_or_empty(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

bool has_cjk(const std::string& text) {
  for (char32_t cp : uni::decode_utf8(text)) {
    if (uni::is_cjk(cp)) return true;
  }
  return false;
}

int chart_index_of(const ChartRef& chart, int fallback) {
  auto ref = ModalityRef::parse_tag(chart.tag);
  if (ref && ref->kind == Modality::Chart) return ref->index;
  return fallback;
}

template <typename T>
T& require_backend(const std::shared_ptr<T>& ptr, const char* role) {
  if (!ptr) {
    throw std::runtime_error(std::string("no backend configured for role: ") + role);
  }
  return *ptr;
}

std::string build_alloc_user(const Document& doc, const std::string& question) {
  std::string out = "Question: " + question + "\n\nWebpage markdown:\n" + doc.markdown;
  if (!doc.tables.empty()) {
    out += "\nTables present: ";
    for (size_t i = 0; i < doc.tables.size(); ++i) {
      if (i > 0) out += ", ";
      out += doc.tables[i].tag;
      if (doc.tables[i].caption) out += " (" + *doc.tables[i].caption + ")";
    }
  }
  if (!doc.charts.empty()) {
    out += "\nCharts present: ";
    for (size_t j = 0; j < doc.charts.size(); ++j) {
      if (j > 0) out += ", ";
      out += doc.charts[j].tag;
    }
  }
  return out;
}

std::string build_decision_user(const std::string& question,
                                const std::vector<ExpertAnswer>& experts) {
  std::string out = "Question: " + question + "\n\nCandidate answers:\n";
  for (const ExpertAnswer& e : experts) {
    out += "- [" + e.source_tag + "] " + e.answer + " (confidence " +
           format_confidence(e.confidence) + ")\n";
  }
  out += "\nPick the single candidate whose modality is correct.";
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// profiles

AgentProfile allocator_profile() {
  return AgentProfile{
      "You are the allocating agent of a multimodal question answering system "
      "for statistical report webpages. Given a question and a document made of "
      "running text, tables, and charts, estimate the likelihood that the "
      "answer is found in each modality.",
      "Reply with one line per modality and nothing else, in exactly this "
      "form:\nP(text)=0.5\nP(table_1)=0.5\nP(img_1)=0.5\nUse one line for the "
      "running text, one per table, one per chart. Probabilities are numbers "
      "in [0,1] and need not sum to 1."};
}

AgentProfile text_expert_profile() {
  return AgentProfile{
      "You are a proficient economic analyst. You answer questions about a "
      "statistical report webpage using its full text.",
      kAnswerFormat};
}

AgentProfile table_expert_profile() {
  return AgentProfile{
      "You are a skilled data analyst. You answer questions from a table that "
      "has been flattened into (row label, column label, value) tuples. Each "
      "tuple states that the cell at the given row and column holds the value; "
      "stacked header levels are joined by \"/\" inside one label.",
      kAnswerFormat};
}

AgentProfile chart_expert_profile() {
  return AgentProfile{
      "You are an adept statistician. You answer questions about the attached "
      "statistical chart image.",
      kAnswerFormat};
}

AgentProfile decision_profile() {
  return AgentProfile{
      "You are a proficient data synthesis analyst. Several modality experts "
      "have proposed answers to the same question; pick the answer whose "
      "modality is correct.",
      "Reply with exactly two lines:\nMODALITY: <tag of the chosen "
      "candidate>\nANSWER: <the chosen answer>"};
}

AgentProfile qa_generator_profile() {
  return AgentProfile{
      "You are a question writer for statistical report webpages. You write "
      "question and answer pairs grounded in the given material, leaning "
      "towards numerical facts and named entities.",
      "Write each pair as two lines:\nQ: <question>\nA: <answer>\nSeparate "
      "pairs with a blank line. Do not write yes/no questions."};
}

AgentProfile qa_judge_profile() {
  return AgentProfile{
      "You are a strict reviewer of question-answer pairs for statistical "
      "report webpages. Judge whether the pair is well-formed, grounded in the "
      "material, and answerable from it.",
      "Reply with exactly one line, either:\nVALID: <short reason>\nor\n"
      "INVALID: <short reason>"};
}

// ---------------------------------------------------------------------------
// parsers

AllocationResult parse_allocation(const std::string& reply, const Document& doc) {
  AllocationResult out;
  out.p_text = 0.0;
  for (size_t i = 1; i <= doc.tables.size(); ++i) {
    out.p_table[static_cast<int>(i)] = 0.0;
  }
  for (size_t j = 1; j <= doc.charts.size(); ++j) {
    out.p_chart[static_cast<int>(j)] = 0.0;
  }

  int parsed = 0;
  std::istringstream lines((reply));
  std::string raw;
  while (std::getline(lines, raw)) {
    std::string line = trimmed(raw);
    if (line.rfind("P(", 0) != 0) continue;
    size_t close = line.find(')', 2);
    if (close == std::string::npos) continue;
    std::string name = trimmed(line.substr(2, close - 2));
    size_t eq = line.find('=', close);
    if (eq == std::string::npos) continue;
    double value = 0;
    if (!parse_double_strict(line.substr(eq + 1), value)) continue;
    if (value < 0.0 || value > 1.0) {
      throw OutOfRange("probability outside [0,1] in line: " + line);
    }

    if (name == "text") {
      out.p_text = value;
      ++parsed;
      continue;
    }
    auto tail_index = [&](std::string_view prefix) -> int {
      if (name.rfind(prefix, 0) != 0) return -1;
      std::string_view rest = std::string_view(name).substr(prefix.size());
      if (!rest.empty() && rest[0] == '_') rest = rest.substr(1);
      if (rest.empty()) return -1;
      int idx = 0;
      for (char c : rest) {
        if (c < '0' || c > '9') return -1;
        idx = idx * 10 + (c - '0');
      }
      return idx;
    };
    if (int idx = tail_index("table"); idx > 0) {
      ++parsed;
      auto it = out.p_table.find(idx);
      if (it != out.p_table.end()) it->second = value;
      continue;
    }
    if (int idx = tail_index("img"); idx > 0) {
      ++parsed;
      auto it = out.p_chart.find(idx);
      if (it != out.p_chart.end()) it->second = value;
      continue;
    }
  }
  if (parsed == 0) {
    throw UnparseableAllocation("no parseable probability line in allocator reply");
  }
  return out;
}

std::pair<std::string, double> parse_expert_reply(const std::string& reply) {
  std::optional<std::string> answer;
  std::optional<double> confidence;
  std::istringstream lines((reply));
  std::string raw;
  while (std::getline(lines, raw)) {
    std::string line = trimmed(raw);
    if (!answer && line.rfind("ANSWER:", 0) == 0) {
      answer = trimmed(line.substr(7));
      continue;
    }
    if (!confidence && line.rfind("CONFIDENCE:", 0) == 0) {
      double v = 0;
      if (!parse_double_strict(line.substr(11), v)) {
        throw UnparseableExpertReply("CONFIDENCE is not a number: " + line);
      }
      confidence = std::clamp(v, 0.0, 1.0);
    }
  }
  if (!answer) throw UnparseableExpertReply("expert reply lacks an ANSWER line");
  if (!confidence) throw UnparseableExpertReply("expert reply lacks a CONFIDENCE line");
  return {*answer, *confidence};
}

std::vector<ModalityRef> activated_experts(const AllocationResult& alloc, double tau) {
  std::vector<ModalityRef> out;
  if (alloc.p_text > tau) out.push_back(ModalityRef::text());
  for (const auto& [index, p] : alloc.p_table) {
    if (p > tau) out.push_back(ModalityRef::table(index));
  }
  for (const auto& [index, p] : alloc.p_chart) {
    if (p > tau) out.push_back(ModalityRef::chart(index));
  }
  return out;
}

// ---------------------------------------------------------------------------
// engine

Engine::Engine(EngineConfig config, backends::BackendSet set)
    : config_(std::move(config)), backends_(std::move(set)) {
  std::vector<std::string> violations = validate_engine_config(config_);
  if (!violations.empty()) {
    std::string what = "invalid engine config:";
    for (const std::string& v : violations) what += " " + v + ";";
    throw std::invalid_argument(what);
  }
}

AllocationResult Engine::allocate(const Document& doc, const std::string& question) const {
  backends::ChatRequest req;
  req.profile = allocator_profile();
  req.messages.push_back({"user", build_alloc_user(doc, question)});
  std::string reply = require_backend(backends_.allocator, "allocator").chat(req);
  return parse_allocation(reply, doc);
}

ExpertAnswer Engine::run_text_style_expert(const AgentProfile& profile,
                                           const std::string& user_content,
                                           ModalityRef modality,
                                           const std::string& source_tag,
                                           backends::ChatBackend& backend,
                                           const AgentMemory* memory) const {
  backends::ChatRequest req;
  req.profile = profile;
  if (memory != nullptr && memory->short_term) {
    req.messages.push_back({"user", memory->short_term->first});
    req.messages.push_back({"assistant", memory->short_term->second});
  }
  req.messages.push_back({"user", user_content});
  std::string reply = backend.chat(req);
  auto [answer, confidence] = parse_expert_reply(reply);
  ExpertAnswer out;
  out.modality = modality;
  out.answer = answer;
  out.confidence = confidence;
  out.source_tag = source_tag;
  return out;
}

ExpertAnswer Engine::text_expert(const std::string& doc_markdown,
                                 const std::string& question,
                                 const AgentMemory* memory) const {
  std::string content = "Webpage markdown:\n" + doc_markdown + "\nQuestion: " + question;
  return run_text_style_expert(text_expert_profile(), content, ModalityRef::text(),
                               "text", require_backend(backends_.text_expert, "text expert"),
                               memory);
}

ExpertAnswer Engine::table_expert(const TableRecord& table,
                                  const std::string& question) const {
  std::string content = "Table " + table.tag;
  if (table.caption) content += " (" + *table.caption + ")";
  content += " as (row label, column label, value) tuples:\n";
  if (table.tuples.empty()) {
    content += "(the table has no data cells)\n";
  } else {
    for (const CellTuple& t : table.tuples) {
      content += "(" + t.row_label + ", " + t.col_label + ", " + t.value + ")\n";
    }
  }
  content += "\nQuestion: " + question;

  auto ref = ModalityRef::parse_tag(table.tag);
  ModalityRef modality =
      (ref && ref->kind == Modality::Table) ? *ref : ModalityRef::table(1);
  return run_text_style_expert(table_expert_profile(), content, modality, table.tag,
                               require_backend(backends_.table_expert, "table expert"),
                               nullptr);
}

ExpertAnswer Engine::chart_direct(const ChartRef& chart, const std::string& question) const {
  backends::ChatRequest req;
  req.profile = chart_expert_profile();
  req.messages.push_back(
      {"user", "The attached image is chart " + chart.tag +
                   " from the report.\n\nQuestion: " + question});
  backends::ImageData image{read_file_or_empty(chart.local_path.string()),
                            chart.local_path.string()};
  std::string reply =
      require_backend(backends_.vision, "vision").vision_chat(req, image);
  auto [answer, confidence] = parse_expert_reply(reply);
  ExpertAnswer out;
  out.modality = ModalityRef::chart(chart_index_of(chart, 1));
  out.answer = answer;
  out.confidence = confidence;
  out.source_tag = chart.tag;
  return out;
}

ExpertAnswer Engine::chart_expert(const std::vector<ChartRef>& charts,
                                  const std::string& question, int top_k) const {
  if (charts.empty()) {
    throw NoChartsActivated("chart expert invoked with no candidate charts");
  }
  auto& ocr = require_backend(backends_.ocr, "ocr");
  auto& embedder = require_backend(backends_.embedder, "embedding");

  struct Candidate {
    const ChartRef* chart;
    int index;
    double sim = -1.0;
    std::string note;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(charts.size());

  backends::EmbeddingVector question_vec;
  bool question_embedded = false;

  for (size_t pos = 0; pos < charts.size(); ++pos) {
    const ChartRef& chart = charts[pos];
    Candidate cand;
    cand.chart = &chart;
    cand.index = chart_index_of(chart, static_cast<int>(pos) + 1);

    backends::ImageData image{read_file_or_empty(chart.local_path.string()),
                              chart.local_path.string()};
    std::vector<backends::OcrToken> tokens;
    bool ocr_ok = true;
    try {
      tokens = ocr.ocr(image);
    } catch (const std::exception& e) {
      cand.note = "ocr failed: " + std::string(e.what());
      ocr_ok = false;
    }
    if (ocr_ok) {
      std::string aggregate;
      for (const backends::OcrToken& t : tokens) {
        if (!has_cjk(t.text)) continue;
        if (!aggregate.empty()) aggregate += ' ';
        aggregate += t.text;
      }
      if (aggregate.empty()) {
        cand.note = "empty CJK aggregate";
      } else {
        if (!question_embedded) {
          question_vec = embedder.embed(question);
          question_embedded = true;
        }
        cand.sim = backends::cosine_similarity(embedder.embed(aggregate), question_vec);
      }
    }
    candidates.push_back(std::move(cand));
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.sim != b.sim) return a.sim > b.sim;
                     return a.index < b.index;
                   });
  if (candidates.front().sim <= -1.0) {
    throw NoUsableChart("every candidate chart produced an empty OCR aggregate");
  }

  std::string rationale = "cosine ranking:";
  for (const Candidate& c : candidates) {
    rationale += " " + c.chart->tag + "=" +
                 (c.sim <= -1.0 ? "unusable" : format_similarity(c.sim));
  }

  int queries = std::max(1, top_k);
  std::optional<ExpertAnswer> best;
  for (int rank = 0; rank < queries && rank < static_cast<int>(candidates.size());
       ++rank) {
    const Candidate& cand = candidates[static_cast<size_t>(rank)];
    if (cand.sim <= -1.0) break;
    ExpertAnswer answer = chart_direct(*cand.chart, question);
    answer.rationale = rationale;
    if (!best || answer.confidence > best->confidence) best = answer;
  }
  return *best;
}

FinalAnswer Engine::decide(const std::string& question,
                           const std::vector<ExpertAnswer>& expert_answers,
                           Trace* trace) const {
  if (expert_answers.empty()) {
    if (trace != nullptr) trace->decision_skipped = true;
    return FinalAnswer{"unanswerable", ModalityRef::unanswerable()};
  }
  if (expert_answers.size() == 1) {
    if (trace != nullptr) trace->decision_skipped = true;
    return FinalAnswer{expert_answers[0].answer, expert_answers[0].modality};
  }

  std::string prompt = build_decision_user(question, expert_answers);
  backends::ChatRequest req;
  req.profile = decision_profile();
  req.messages.push_back({"user", prompt});
  std::string reply = require_backend(backends_.decision, "decision").chat(req);
  if (trace != nullptr) {
    trace->decision_prompt = prompt;
    trace->decision_reply = reply;
  }

  std::optional<std::string> tag;
  std::optional<std::string> answer_line;
  std::istringstream lines((reply));
  std::string raw;
  while (std::getline(lines, raw)) {
    std::string line = trimmed(raw);
    if (!tag && line.rfind("MODALITY:", 0) == 0) tag = trimmed(line.substr(9));
    if (!answer_line && line.rfind("ANSWER:", 0) == 0) {
      answer_line = trimmed(line.substr(7));
    }
  }
  if (!tag || !answer_line) {
    throw UnparseableDecision("decision reply lacks MODALITY/ANSWER lines");
  }
  for (const ExpertAnswer& e : expert_answers) {
    if (e.source_tag == *tag) {
      // constrained to picking: the chosen expert's answer passes through
      return FinalAnswer{e.answer, e.modality};
    }
  }
  throw UnknownModalityChosen("decision chose '" + *tag +
                              "' which is not among the candidates");
}

std::pair<FinalAnswer, Trace> Engine::answer_question(const Document& doc,
                                                      const std::string& question) const {
  Trace trace;
  using clock = std::chrono::steady_clock;
  auto timed = [&trace](const char* stage, auto&& fn) {
    auto start = clock::now();
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
    double ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    trace.timings.push_back(StageTiming{stage, ms});
  };

  timed("allocate", [&] { trace.allocation = allocate(doc, question); });
  trace.activated = activated_experts(trace.allocation, config_.activation_threshold);

  timed("experts", [&] {
    std::vector<int> chart_indexes;
    for (const ModalityRef& m : trace.activated) {
      if (m.kind == Modality::Text) {
        trace.expert_answers.push_back(text_expert(doc.markdown, question));
      } else if (m.kind == Modality::Table) {
        if (m.index < 1 || static_cast<size_t>(m.index) > doc.tables.size()) continue;
        trace.expert_answers.push_back(
            table_expert(doc.tables[static_cast<size_t>(m.index - 1)], question));
      } else if (m.kind == Modality::Chart) {
        chart_indexes.push_back(m.index);
      }
    }
    if (!chart_indexes.empty()) {
      std::vector<ChartRef> candidates;
      if (config_.ocr_all_charts) {
        candidates = doc.charts;
      } else {
        for (int j : chart_indexes) {
          if (j >= 1 && static_cast<size_t>(j) <= doc.charts.size()) {
            candidates.push_back(doc.charts[static_cast<size_t>(j - 1)]);
          }
        }
      }
      if (!candidates.empty()) {
        trace.expert_answers.push_back(
            chart_expert(candidates, question, config_.chart_top_k));
      }
    }
  });

  FinalAnswer final_answer;
  timed("decide", [&] { final_answer = decide(question, trace.expert_answers, &trace); });
  return {final_answer, trace};
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const Trace& trace, bool include_timings) {
  json j;
  j["allocation"] = aed::to_json(trace.allocation);
  j["activated"] = json::array();
  for (const ModalityRef& m : trace.activated) j["activated"].push_back(m.tag());
  j["expert_answers"] = json::array();
  for (const ExpertAnswer& e : trace.expert_answers) {
    j["expert_answers"].push_back(aed::to_json(e));
  }
  j["decision_prompt"] = trace.decision_prompt;
  j["decision_reply"] = trace.decision_reply;
  j["decision_skipped"] = trace.decision_skipped;
  if (include_timings) {
    json timings = json::array();
    for (const StageTiming& t : trace.timings) {
      timings.push_back({{"stage", t.stage}, {"ms", t.ms}});
    }
    j["timings"] = std::move(timings);
  }
  return j;
}

}  // namespace aed::agents
