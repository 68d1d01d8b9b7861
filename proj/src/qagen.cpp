#include "aed/qagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "aed/agents.hpp"
#include "aed/metrics.hpp"
#include "aed/unicode.hpp"

namespace aed::qagen {
namespace {

std::string trimmed(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool looks_yes_no(const std::string& question, const std::string& answer) {
  std::string a = metrics::canonicalize(answer);
  static const std::set<std::string> yes_no_answers = {
      "yes", "no", "yes.", "no.", "是", "否", "是的", "不是", "对", "不对"};
  if (yes_no_answers.count(a) > 0) return true;

  std::string q = metrics::canonicalize(question);
  static const char* kAuxiliaries[] = {"is ",  "are ", "was ", "were ", "does ",
                                       "do ",  "did ", "can ", "could ", "will ",
                                       "has ", "have ", "should "};
  for (const char* aux : kAuxiliaries) {
    if (q.rfind(aux, 0) == 0) return true;
  }
  size_t ma = q.rfind("吗");
  if (ma != std::string::npos && ma + 3 >= q.size() - 3) return true;
  return false;
}

std::string generation_user_prompt(const std::string& material_label,
                                   const std::string& material, int count) {
  std::ostringstream out;
  out << "Write " << count << " question and answer pairs grounded in the "
      << material_label << " below. Prefer questions about numerical values "
      << "and named entities.\n\n" << material;
  return out.str();
}

}  // namespace

std::vector<std::string> validate_qagen_config(const QaGenConfig& cfg) {
  std::vector<std::string> violations;
  if (cfg.pairs_per_text < 0) violations.push_back("pairs_per_text must be >= 0");
  if (cfg.pairs_per_table < 0) violations.push_back("pairs_per_table must be >= 0");
  if (cfg.pairs_per_chart < 0) violations.push_back("pairs_per_chart must be >= 0");
  if (!(cfg.manual_ratio >= 0.0 && cfg.manual_ratio <= 1.0)) {
    violations.push_back("manual_ratio must be in [0,1]");
  }
  return violations;
}

std::vector<std::pair<std::string, std::string>> parse_qa_blocks(const std::string& reply) {
  std::vector<std::pair<std::string, std::string>> blocks;
  std::optional<std::string> pending_q;
  std::istringstream lines((reply));
  std::string raw;
  while (std::getline(lines, raw)) {
    std::string line = trimmed(raw);
    if (line.rfind("Q:", 0) == 0) {
      if (pending_q) {
        throw UnparseableGeneration("Q: block without an A: line: " + *pending_q);
      }
      pending_q = trimmed(line.substr(2));
      continue;
    }
    if (line.rfind("A:", 0) == 0) {
      if (!pending_q) {
        throw UnparseableGeneration("A: line without a preceding Q: line");
      }
      blocks.emplace_back(*pending_q, trimmed(line.substr(2)));
      pending_q.reset();
    }
  }
  if (pending_q) {
    throw UnparseableGeneration("Q: block without an A: line: " + *pending_q);
  }
  if (blocks.empty()) {
    throw UnparseableGeneration("reply contains no Q:/A: blocks");
  }
  return blocks;
}

GenerationResult generate_qa_pairs(const Document& doc, const QaGenConfig& cfg,
                                   backends::ChatBackend& chat,
                                   backends::VisionBackend* vision) {
  std::vector<std::string> violations = validate_qagen_config(cfg);
  if (!violations.empty()) {
    std::string what = "invalid qagen config:";
    for (const std::string& v : violations) what += " " + v + ";";
    throw std::invalid_argument(what);
  }

  GenerationResult out;
  std::set<std::string> seen_answers;  // canonical, per document

  auto accept = [&](const std::string& q, const std::string& a,
                    ModalityRef modality, const std::string& source_tag) {
    if (q.empty() || a.empty()) {
      out.warnings.push_back("EmptyPair: skipped blank Q/A from " + source_tag);
      return;
    }
    if (looks_yes_no(q, a)) {
      out.warnings.push_back("YesNoFiltered: " + q);
      return;
    }
    if (!seen_answers.insert(metrics::canonicalize(a)).second) {
      out.warnings.push_back("DuplicateAnswer: " + a);
      return;
    }
    QAPair pair;
    pair.id = doc.id + ":" + source_tag + ":" +
              std::to_string(out.pairs.size() + 1);
    pair.doc_id = doc.id;
    pair.question = q;
    pair.gold_answer = a;
    pair.modalities = {modality};
    normalize_text_fields(pair);
    out.pairs.push_back(std::move(pair));
  };

  if (cfg.pairs_per_text > 0) {
    if (doc.markdown.empty()) {
      out.warnings.push_back("NoText: document " + doc.id + " has no markdown body");
    } else {
      backends::ChatRequest req;
      req.profile = agents::qa_generator_profile();
      req.messages.push_back(
          {"user", generation_user_prompt("webpage text", "Webpage markdown:\n" + doc.markdown,
                                          cfg.pairs_per_text)});
      for (auto& [q, a] : parse_qa_blocks(chat.chat(req))) {
        accept(q, a, ModalityRef::text(), "text");
      }
    }
  }

  if (cfg.pairs_per_table > 0) {
    for (size_t i = 0; i < doc.tables.size(); ++i) {
      const TableRecord& table = doc.tables[i];
      std::string material = "Table " + table.tag;
      if (table.caption) material += " (" + *table.caption + ")";
      material += " as (row label, column label, value) tuples:\n";
      for (const CellTuple& t : table.tuples) {
        material += "(" + t.row_label + ", " + t.col_label + ", " + t.value + ")\n";
      }
      backends::ChatRequest req;
      req.profile = agents::qa_generator_profile();
      req.messages.push_back(
          {"user", generation_user_prompt("table", material, cfg.pairs_per_table)});
      for (auto& [q, a] : parse_qa_blocks(chat.chat(req))) {
        accept(q, a, ModalityRef::table(static_cast<int>(i) + 1), table.tag);
      }
    }
  }

  if (cfg.pairs_per_chart > 0) {
    if (doc.charts.empty()) {
      out.warnings.push_back("NoCharts: document " + doc.id + " has no charts");
    } else if (vision == nullptr) {
      out.warnings.push_back("NoVisionBackend: skipped chart pairs for " + doc.id);
    } else {
      for (size_t j = 0; j < doc.charts.size(); ++j) {
        const ChartRef& chart = doc.charts[j];
        backends::ChatRequest req;
        req.profile = agents::qa_generator_profile();
        req.messages.push_back(
            {"user", generation_user_prompt(
                         "attached chart image",
                         "The attached image is chart " + chart.tag + " of document " +
                             doc.id + ".",
                         cfg.pairs_per_chart)});
        std::string bytes;
        {
          std::ifstream in(chart.local_path, std::ios::binary);
          std::ostringstream buf;
          if (in) buf << in.rdbuf();
          bytes = std::move(buf).str();
        }
        backends::ImageData image{std::move(bytes), chart.local_path.string()};
        for (auto& [q, a] : parse_qa_blocks(vision->vision_chat(req, image))) {
          accept(q, a, ModalityRef::chart(static_cast<int>(j) + 1), chart.tag);
        }
      }
    }
  }
  return out;
}

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
  std::vector<size_t> indices(n);
  for (size_t i = 0; i < n; ++i) indices[i] = i;
  std::mt19937_64 gen(seed);
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(gen() % i);
    std::swap(indices[i - 1], indices[j]);
  }
  return indices;
}

QualityCheckResult quality_check(const std::vector<QAPair>& pairs, const QaGenConfig& cfg,
                                 backends::ChatBackend& judge,
                                 const std::map<std::string, std::string>* doc_markdown) {
  if (pairs.empty()) {
    throw std::invalid_argument("quality_check requires a non-empty pair list");
  }
  std::vector<std::string> violations = validate_qagen_config(cfg);
  if (!violations.empty()) {
    std::string what = "invalid qagen config:";
    for (const std::string& v : violations) what += " " + v + ";";
    throw std::invalid_argument(what);
  }

  const size_t n = pairs.size();
  std::vector<size_t> order = shuffled_indices(n, cfg.seed);
  size_t manual_count =
      static_cast<size_t>(std::ceil(cfg.manual_ratio * static_cast<double>(n)));
  if (manual_count > n) manual_count = n;

  QualityCheckResult out;
  for (size_t k = 0; k < manual_count; ++k) out.manual_queue.push_back(pairs[order[k]]);

  for (size_t k = manual_count; k < n; ++k) {
    const QAPair& pair = pairs[order[k]];
    out.model_verified.push_back(pair);

    std::string prompt;
    if (doc_markdown != nullptr) {
      auto it = doc_markdown->find(pair.doc_id);
      if (it != doc_markdown->end()) {
        prompt += "Material:\n" + it->second + "\n";
      }
    }
    prompt += "Question: " + pair.question + "\nProposed answer: " + pair.gold_answer +
              "\nJudge this pair.";

    backends::ChatRequest req;
    req.profile = agents::qa_judge_profile();
    req.messages.push_back({"user", prompt});

    std::string reply;
    try {
      reply = judge.chat(req);
    } catch (const std::exception& e) {
      out.errors.push_back(pair.id + ": judge call failed: " + e.what());
      continue;
    }

    bool verdict_found = false;
    std::istringstream lines((reply));
    std::string raw;
    while (std::getline(lines, raw)) {
      std::string line = trimmed(raw);
      if (line.rfind("INVALID", 0) == 0) {
        std::string reason = line.size() > 7 ? trimmed(line.substr(8)) : "";
        out.flagged.push_back(pair);
        out.flag_reasons.push_back(reason);
        verdict_found = true;
        break;
      }
      if (line.rfind("VALID", 0) == 0) {
        verdict_found = true;
        break;
      }
    }
    if (!verdict_found) {
      out.errors.push_back(pair.id + ": judge reply lacks a VALID/INVALID line");
    }
  }
  return out;
}

}  // namespace aed::qagen
