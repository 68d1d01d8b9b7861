#pragma once
// Shared domain types for the multimodal document QA pipeline, plus
// validation and JSON (de)serialization.

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace aed {

// ---------------------------------------------------------------------------
// Documents

// One table cell as a flat (row label, column label, value) triple.
// Multi-level headers are flattened into a single label joined by "/".
struct CellTuple {
  std::string row_label;
  std::string col_label;
  std::string value;

  bool operator==(const CellTuple&) const = default;
};

struct TableRecord {
  std::string tag;  // "table{i}", 1-based
  std::optional<std::string> caption;
  std::string html_source;
  std::vector<CellTuple> tuples;

  bool operator==(const TableRecord&) const = default;
};

struct ChartRef {
  std::string tag;  // "img{j}", 1-based
  std::filesystem::path local_path;
  std::string remote_url;  // empty when the chart has no remote source

  bool operator==(const ChartRef&) const = default;
};

// Canonical webpage: Markdown body with `table{i}` / `img{j}` placeholder
// lines, plus the table and chart payloads in tag order.
struct Document {
  std::string id;
  std::string source_url;
  std::string markdown;
  std::vector<TableRecord> tables;
  std::vector<ChartRef> charts;

  bool operator==(const Document&) const = default;
};

// ---------------------------------------------------------------------------
// Modalities and QA pairs

enum class Modality { Text, Table, Chart, Unanswerable };

struct ModalityRef {
  Modality kind = Modality::Text;
  int index = 0;  // 1-based, meaningful for Table/Chart only

  static ModalityRef text() { return {Modality::Text, 0}; }
  static ModalityRef table(int i) { return {Modality::Table, i}; }
  static ModalityRef chart(int j) { return {Modality::Chart, j}; }
  static ModalityRef unanswerable() { return {Modality::Unanswerable, 0}; }

  // "text", "table3", "img2", "unanswerable"
  std::string tag() const;
  static std::optional<ModalityRef> parse_tag(std::string_view tag);

  auto operator<=>(const ModalityRef&) const = default;
};

struct QAPair {
  std::string id;
  std::string doc_id;
  std::string question;
  std::string gold_answer;
  std::vector<ModalityRef> modalities;  // sorted, unique, non-empty

  bool operator==(const QAPair&) const = default;
};

// ---------------------------------------------------------------------------
// Pipeline values

// Per-modality answer-location probabilities from the allocating stage.
struct AllocationResult {
  double p_text = 0.0;
  std::map<int, double> p_table;  // table index -> probability
  std::map<int, double> p_chart;  // chart index -> probability

  bool operator==(const AllocationResult&) const = default;
};

struct ExpertAnswer {
  ModalityRef modality;
  std::string answer;
  double confidence = 0.0;  // in [0,1]
  std::string source_tag;   // which text/table/chart produced the answer
  std::string rationale;    // optional

  bool operator==(const ExpertAnswer&) const = default;
};

struct FinalAnswer {
  std::string answer;
  ModalityRef selected_modality;

  bool operator==(const FinalAnswer&) const = default;
};

// ---------------------------------------------------------------------------
// Agent scaffolding

struct AgentProfile {
  std::string role_description;
  std::string output_format_instructions;
};

struct AgentMemory {
  std::string long_term;  // full webpage content or the modality slice
  // At most the most recent (question, answer) exchange.
  std::optional<std::pair<std::string, std::string>> short_term;
};

// Endpoint + model name for one backend role. The endpoint may be filled
// from environment variables at backend construction time.
struct BackendRole {
  std::string endpoint;
  std::string model;
};

struct EngineConfig {
  double activation_threshold = 0.1;  // strict lower bound for expert activation
  int max_concurrency = 4;
  int chart_top_k = 1;
  bool ocr_all_charts = false;  // OCR every chart instead of activated ones only
  int max_retries = 3;

  BackendRole allocator;
  BackendRole decision;
  BackendRole text_expert;
  BackendRole table_expert;
  BackendRole vision;
  BackendRole embedding;
  BackendRole ocr;
};

// Empty iff the config invariants hold.
std::vector<std::string> validate_engine_config(const EngineConfig& cfg);

// ---------------------------------------------------------------------------
// Validation

// Pure check of the Document invariants. Empty result means the document is
// valid; each violation names the offending tag and rule.
std::vector<std::string> validate_document(const Document& doc);

// Checks that every Table/Chart index referenced by the QA pair exists in
// the document, and that Unanswerable does not appear among its modalities.
std::vector<std::string> validate_qa_pair(const QAPair& qa, const Document& doc);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);

// QA JSON Lines entry: {"id","doc_id","question","answer","modalities":[...]}
nlohmann::json to_json(const QAPair& qa);
QAPair qa_pair_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AllocationResult& a);
nlohmann::json to_json(const ExpertAnswer& a);
nlohmann::json to_json(const FinalAnswer& a);

// Parses a QA JSON Lines file. Malformed lines are reported via `errors`
// (with 1-based line numbers) and skipped.
std::vector<QAPair> load_qa_file(const std::filesystem::path& path,
                                 std::vector<std::string>* errors = nullptr);

void save_qa_file(const std::filesystem::path& path, const std::vector<QAPair>& pairs);

// NFC-normalizes every text field in place. Builders call this so that all
// stored text is NFC from construction on.
void normalize_text_fields(Document& doc);
void normalize_text_fields(QAPair& qa);

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace aed
