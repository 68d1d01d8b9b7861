#include "aed/core.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aed/unicode.hpp"

namespace aed {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ModalityRef

std::string ModalityRef::tag() const {
  switch (kind) {
    case Modality::Text:
      return "text";
    case Modality::Table:
      return "table" + std::to_string(index);
    case Modality::Chart:
      return "img" + std::to_string(index);
    case Modality::Unanswerable:
      return "unanswerable";
  }
  return "unanswerable";
}

namespace {

std::optional<int> parse_positive_index(std::string_view digits) {
  if (digits.empty() || digits.size() > 9) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  if (value < 1) return std::nullopt;
  return value;
}

}  // namespace

std::optional<ModalityRef> ModalityRef::parse_tag(std::string_view tag) {
  if (tag == "text") return ModalityRef::text();
  if (tag == "unanswerable") return ModalityRef::unanswerable();
  if (tag.rfind("table", 0) == 0) {
    if (auto idx = parse_positive_index(tag.substr(5))) return ModalityRef::table(*idx);
    return std::nullopt;
  }
  if (tag.rfind("img", 0) == 0) {
    if (auto idx = parse_positive_index(tag.substr(3))) return ModalityRef::chart(*idx);
    return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

// A placeholder line is a line whose entire (right-trimmed) content is the
// tag. Placeholders are emitted on their own Markdown line by ingestion.
int count_placeholder_lines(const std::string& markdown, const std::string& tag) {
  int count = 0;
  size_t pos = 0;
  while (pos <= markdown.size()) {
    size_t eol = markdown.find('\n', pos);
    size_t len = (eol == std::string::npos ? markdown.size() : eol) - pos;
    std::string_view line(markdown.data() + pos, len);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.remove_suffix(1);
    }
    if (line == tag) ++count;
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return count;
}

// Lines shaped like placeholders ("table<digits>" / "img<digits>").
std::vector<std::pair<std::string, int>> placeholder_shaped_lines(const std::string& markdown) {
  std::vector<std::pair<std::string, int>> out;  // (kind, index)
  size_t pos = 0;
  while (pos <= markdown.size()) {
    size_t eol = markdown.find('\n', pos);
    size_t len = (eol == std::string::npos ? markdown.size() : eol) - pos;
    std::string_view line(markdown.data() + pos, len);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.remove_suffix(1);
    }
    for (std::string_view prefix : {std::string_view("table"), std::string_view("img")}) {
      if (line.size() > prefix.size() && line.rfind(prefix, 0) == 0) {
        if (auto idx = parse_positive_index(line.substr(prefix.size()))) {
          out.emplace_back(std::string(prefix), *idx);
        }
      }
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return out;
}

}  // namespace

std::vector<std::string> validate_document(const Document& doc) {
  std::vector<std::string> violations;
  const int n_tables = static_cast<int>(doc.tables.size());
  const int n_charts = static_cast<int>(doc.charts.size());

  for (int i = 1; i <= n_tables; ++i) {
    const std::string tag = "table" + std::to_string(i);
    const int count = count_placeholder_lines(doc.markdown, tag);
    if (count == 0) {
      violations.push_back("missing placeholder " + tag);
    } else if (count > 1) {
      violations.push_back("duplicate placeholder " + tag);
    }
    const std::string& actual = doc.tables[static_cast<size_t>(i - 1)].tag;
    if (actual != tag) {
      violations.push_back("table record " + std::to_string(i) + " has tag '" + actual +
                           "', expected '" + tag + "'");
    }
  }
  for (int j = 1; j <= n_charts; ++j) {
    const std::string tag = "img" + std::to_string(j);
    const int count = count_placeholder_lines(doc.markdown, tag);
    if (count == 0) {
      violations.push_back("missing placeholder " + tag);
    } else if (count > 1) {
      violations.push_back("duplicate placeholder " + tag);
    }
    const std::string& actual = doc.charts[static_cast<size_t>(j - 1)].tag;
    if (actual != tag) {
      violations.push_back("chart record " + std::to_string(j) + " has tag '" + actual +
                           "', expected '" + tag + "'");
    }
  }

  // Placeholder-shaped lines outside the declared ranges break contiguity.
  for (const auto& [kind, idx] : placeholder_shaped_lines(doc.markdown)) {
    if (kind == "table" && idx > n_tables) {
      violations.push_back("unexpected placeholder table" + std::to_string(idx));
    } else if (kind == "img" && idx > n_charts) {
      violations.push_back("unexpected placeholder img" + std::to_string(idx));
    }
  }
  return violations;
}

std::vector<std::string> validate_qa_pair(const QAPair& qa, const Document& doc) {
  std::vector<std::string> violations;
  if (qa.modalities.empty()) {
    violations.push_back("qa " + qa.id + ": empty modality set");
  }
  for (const ModalityRef& m : qa.modalities) {
    switch (m.kind) {
      case Modality::Unanswerable:
        violations.push_back("qa " + qa.id + ": unanswerable is not a valid question modality");
        break;
      case Modality::Table:
        if (m.index < 1 || m.index > static_cast<int>(doc.tables.size())) {
          violations.push_back("qa " + qa.id + ": " + m.tag() + " not present in document " + doc.id);
        }
        break;
      case Modality::Chart:
        if (m.index < 1 || m.index > static_cast<int>(doc.charts.size())) {
          violations.push_back("qa " + qa.id + ": " + m.tag() + " not present in document " + doc.id);
        }
        break;
      case Modality::Text:
        break;
    }
  }
  return violations;
}

std::vector<std::string> validate_engine_config(const EngineConfig& cfg) {
  std::vector<std::string> violations;
  if (!(cfg.activation_threshold >= 0.0 && cfg.activation_threshold < 1.0)) {
    violations.push_back("activation_threshold must be in [0,1)");
  }
  if (cfg.max_concurrency < 1) violations.push_back("max_concurrency must be >= 1");
  if (cfg.chart_top_k < 1) violations.push_back("chart_top_k must be >= 1");
  if (cfg.max_retries < 0) violations.push_back("max_retries must be >= 0");
  return violations;
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const Document& doc) {
  json tables = json::array();
  for (const auto& t : doc.tables) {
    json tuples = json::array();
    for (const auto& c : t.tuples) {
      tuples.push_back({{"row", c.row_label}, {"col", c.col_label}, {"value", c.value}});
    }
    tables.push_back({{"tag", t.tag},
                      {"caption", t.caption ? json(*t.caption) : json(nullptr)},
                      {"html_source", t.html_source},
                      {"tuples", std::move(tuples)}});
  }
  json charts = json::array();
  for (const auto& c : doc.charts) {
    charts.push_back({{"tag", c.tag},
                      {"image_path", c.local_path.string()},
                      {"image_url", c.remote_url}});
  }
  return json{{"id", doc.id},
              {"source_url", doc.source_url},
              {"markdown", doc.markdown},
              {"tables", std::move(tables)},
              {"charts", std::move(charts)}};
}

Document document_from_json(const json& j) {
  Document doc;
  doc.id = j.at("id").get<std::string>();
  doc.source_url = j.value("source_url", std::string{});
  doc.markdown = j.at("markdown").get<std::string>();
  for (const auto& t : j.value("tables", json::array())) {
    TableRecord rec;
    rec.tag = t.at("tag").get<std::string>();
    if (t.contains("caption") && !t.at("caption").is_null()) {
      rec.caption = t.at("caption").get<std::string>();
    }
    rec.html_source = t.value("html_source", std::string{});
    for (const auto& c : t.value("tuples", json::array())) {
      rec.tuples.push_back({c.at("row").get<std::string>(), c.at("col").get<std::string>(),
                            c.at("value").get<std::string>()});
    }
    doc.tables.push_back(std::move(rec));
  }
  for (const auto& c : j.value("charts", json::array())) {
    ChartRef ref;
    ref.tag = c.at("tag").get<std::string>();
    ref.local_path = c.at("image_path").get<std::string>();
    ref.remote_url = c.value("image_url", std::string{});
    doc.charts.push_back(std::move(ref));
  }
  normalize_text_fields(doc);
  return doc;
}

json to_json(const QAPair& qa) {
  json mods = json::array();
  for (const auto& m : qa.modalities) mods.push_back(m.tag());
  return json{{"id", qa.id},
              {"doc_id", qa.doc_id},
              {"question", qa.question},
              {"answer", qa.gold_answer},
              {"modalities", std::move(mods)}};
}

QAPair qa_pair_from_json(const json& j) {
  QAPair qa;
  try {
    qa.id = j.at("id").get<std::string>();
    qa.doc_id = j.at("doc_id").get<std::string>();
    qa.question = j.at("question").get<std::string>();
    qa.gold_answer = j.at("answer").get<std::string>();
    for (const auto& m : j.at("modalities")) {
      auto parsed = ModalityRef::parse_tag(m.get<std::string>());
      if (!parsed) throw ParseError("unknown modality tag: " + m.get<std::string>());
      qa.modalities.push_back(*parsed);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("qa pair entry: ") + e.what());
  }
  if (qa.modalities.empty()) throw ParseError("qa pair " + qa.id + " has no modalities");
  std::sort(qa.modalities.begin(), qa.modalities.end());
  qa.modalities.erase(std::unique(qa.modalities.begin(), qa.modalities.end()),
                      qa.modalities.end());
  normalize_text_fields(qa);
  return qa;
}

json to_json(const AllocationResult& a) {
  json tables = json::object();
  for (const auto& [idx, p] : a.p_table) tables[std::to_string(idx)] = p;
  json charts = json::object();
  for (const auto& [idx, p] : a.p_chart) charts[std::to_string(idx)] = p;
  return json{{"p_text", a.p_text}, {"p_table", std::move(tables)}, {"p_chart", std::move(charts)}};
}

json to_json(const ExpertAnswer& a) {
  return json{{"modality", a.modality.tag()},
              {"answer", a.answer},
              {"confidence", a.confidence},
              {"source_tag", a.source_tag},
              {"rationale", a.rationale}};
}

json to_json(const FinalAnswer& a) {
  return json{{"answer", a.answer}, {"modality", a.selected_modality.tag()}};
}

std::vector<QAPair> load_qa_file(const std::filesystem::path& path,
                                 std::vector<std::string>* errors) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open qa file: " + path.string());
  std::vector<QAPair> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      pairs.push_back(qa_pair_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      if (errors) {
        errors->push_back("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  return pairs;
}

void save_qa_file(const std::filesystem::path& path, const std::vector<QAPair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write qa file: " + path.string());
  for (const auto& qa : pairs) out << to_json(qa).dump() << "\n";
}

void normalize_text_fields(Document& doc) {
  doc.id = uni::nfc(doc.id);
  doc.source_url = uni::nfc(doc.source_url);
  doc.markdown = uni::nfc(doc.markdown);
  for (auto& t : doc.tables) {
    t.tag = uni::nfc(t.tag);
    if (t.caption) t.caption = uni::nfc(*t.caption);
    for (auto& c : t.tuples) {
      c.row_label = uni::nfc(c.row_label);
      c.col_label = uni::nfc(c.col_label);
      c.value = uni::nfc(c.value);
    }
  }
  for (auto& c : doc.charts) {
    c.tag = uni::nfc(c.tag);
    c.remote_url = uni::nfc(c.remote_url);
  }
}

void normalize_text_fields(QAPair& qa) {
  qa.id = uni::nfc(qa.id);
  qa.doc_id = uni::nfc(qa.doc_id);
  qa.question = uni::nfc(qa.question);
  qa.gold_answer = uni::nfc(qa.gold_answer);
}

}  // namespace aed
